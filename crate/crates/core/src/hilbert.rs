//! Concrete Hilbert-space elements: dense vectors, masked grid fields and
//! displacement/velocity pairs, together with their inner products.
//!
//! Grid fields live on a rectangular node array. Each node carries a
//! [`NodeKind`] tag and a quadrature weight. Exterior nodes store a literal
//! zero so that every field of a grid has the same length.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Classification of a grid node with respect to the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::Boundary => "boundary",
            NodeKind::Exterior => "exterior",
        }
    }

    #[inline]
    pub fn is_active(self) -> bool {
        self != NodeKind::Exterior
    }
}

/// Uniform node array over an axis-aligned bounding box, with a mask and
/// per-node quadrature weights.
///
/// Nodes are stored row-major: index `j * nx + i` is the node at
/// `(x0 + i*hx, y0 + j*hy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
    mask: Vec<NodeKind>,
    weights: Vec<f64>,
}

impl Grid {
    /// Full rectangle: nodes on the outer edge are boundary nodes, every
    /// other node is interior. Weights follow the composite trapezoid rule.
    pub fn rectangle(nx: usize, ny: usize, xr: (f64, f64), yr: (f64, f64)) -> Result<Self> {
        Self::from_predicate(nx, ny, xr, yr, |_, _| true)
    }

    /// Masked grid: a node is active iff `inside(x, y)`. Active nodes that sit
    /// on the array edge or have an exterior 4-neighbour become boundary
    /// nodes.
    pub fn from_predicate(
        nx: usize,
        ny: usize,
        xr: (f64, f64),
        yr: (f64, f64),
        inside: impl Fn(f64, f64) -> bool,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Structural(format!(
                "grid needs at least 2x2 nodes, got {nx}x{ny}"
            )));
        }
        if !(xr.1 > xr.0 && yr.1 > yr.0) {
            return Err(Error::Structural("empty bounding box".into()));
        }
        let hx = (xr.1 - xr.0) / (nx - 1) as f64;
        let hy = (yr.1 - yr.0) / (ny - 1) as f64;
        let mut active = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                active.push(inside(xr.0 + i as f64 * hx, yr.0 + j as f64 * hy));
            }
        }
        Ok(Self::from_membership(nx, ny, xr.0, yr.0, hx, hy, &active))
    }

    fn from_membership(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
        active: &[bool],
    ) -> Self {
        let at = |i: isize, j: isize| -> bool {
            i >= 0
                && j >= 0
                && (i as usize) < nx
                && (j as usize) < ny
                && active[j as usize * nx + i as usize]
        };
        let mut mask = vec![NodeKind::Exterior; nx * ny];
        let mut weights = vec![0.0; nx * ny];
        let cell = hx * hy;
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let k = j as usize * nx + i as usize;
                if !active[k] {
                    continue;
                }
                let open = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .all(|&(di, dj)| at(i + di, j + dj));
                if open {
                    mask[k] = NodeKind::Interior;
                    weights[k] = cell;
                } else {
                    // Count the adjacent cells whose four corners are active.
                    let full = [(-1, -1), (0, -1), (-1, 0), (0, 0)]
                        .iter()
                        .filter(|&&(ci, cj)| {
                            at(i + ci, j + cj)
                                && at(i + ci + 1, j + cj)
                                && at(i + ci, j + cj + 1)
                                && at(i + ci + 1, j + cj + 1)
                        })
                        .count();
                    mask[k] = NodeKind::Boundary;
                    weights[k] = cell * full as f64 / 4.0;
                }
            }
        }
        Grid {
            nx,
            ny,
            x0,
            y0,
            hx,
            hy,
            mask,
            weights,
        }
    }

    /// Same geometry and weights, with every node outside `keep` turned
    /// exterior. Used for control sub-regions so that restriction and
    /// extension by zero are adjoint under the parent quadrature.
    pub fn restricted(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.len() {
            return Err(Error::Structural("restriction mask has wrong length".into()));
        }
        let mut sub = self.clone();
        for (k, &kept) in keep.iter().enumerate() {
            if !kept || !self.mask[k].is_active() {
                sub.mask[k] = NodeKind::Exterior;
                sub.weights[k] = 0.0;
            }
        }
        Ok(sub)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn mask(&self) -> &[NodeKind] {
        &self.mask
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    /// Quadrature measure of the active region.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|k| k.is_active()).count()
    }

    /// Whether the active nodes form one 4-connected component.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.mask.iter().position(|k| k.is_active()) else {
            return false;
        };
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(k) = stack.pop() {
            count += 1;
            let (i, j) = (k % self.nx, k / self.nx);
            let mut visit = |n: usize| {
                if !seen[n] && self.mask[n].is_active() {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < self.nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - self.nx);
            }
            if j + 1 < self.ny {
                visit(k + self.nx);
            }
        }
        count == self.active_count()
    }
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Finite-dimensional Euclidean vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("dense vector has non-finite entries".into()));
        }
        Ok(DenseVector(entries))
    }

    pub fn zeros(n: usize) -> Self {
        DenseVector(vec![0.0; n])
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<[f64; 2]> for DenseVector {
    fn from(v: [f64; 2]) -> Self {
        DenseVector(v.to_vec())
    }
}

/// Scalar nodal field on a (shared) masked grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        GridField { grid, values }
    }

    /// Samples `f` at active nodes; exterior nodes are set to 0.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                if grid.mask[k].is_active() {
                    let (x, y) = grid.coords(i, j);
                    values[k] = f(x, y);
                }
            }
        }
        GridField { grid, values }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structural(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("field has non-finite values".into()));
        }
        if values
            .iter()
            .zip(&grid.mask)
            .any(|(v, k)| !k.is_active() && *v != 0.0)
        {
            return Err(Error::Structural("field is nonzero at an exterior node".into()));
        }
        Ok(GridField { grid, values })
    }

    /// Crate-internal constructor for values already known to respect the mask.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Serialises as CSV with header `i,j,x,y,value,mask`, row-major.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::from("i,j,x,y,value,mask\n");
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let (x, y) = g.coords(i, j);
                let _ = writeln!(
                    out,
                    "{i},{j},{x},{y},{},{}",
                    self.values[k],
                    g.mask[k].as_str()
                );
            }
        }
        out
    }

    fn check_compatible(&self, other: &GridField) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::Structural("grid fields live on different grids".into()))
        }
    }
}

/// Displacement/velocity pair of the wave equation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    displacement: GridField,
    velocity: GridField,
}

impl WaveState {
    pub fn new(displacement: GridField, velocity: GridField) -> Result<Self> {
        displacement.check_compatible(&velocity)?;
        let clamped = displacement
            .values
            .iter()
            .zip(displacement.grid.mask.iter())
            .any(|(v, k)| *k != NodeKind::Interior && *v != 0.0);
        if clamped {
            return Err(Error::Structural(
                "displacement must vanish on boundary and exterior nodes".into(),
            ));
        }
        Ok(WaveState {
            displacement,
            velocity,
        })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        WaveState {
            displacement: GridField::zeros(grid.clone()),
            velocity: GridField::zeros(grid),
        }
    }

    pub(crate) fn from_parts_unchecked(displacement: GridField, velocity: GridField) -> Self {
        WaveState {
            displacement,
            velocity,
        }
    }

    pub fn displacement(&self) -> &GridField {
        &self.displacement
    }

    pub fn velocity(&self) -> &GridField {
        &self.velocity
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.displacement.grid
    }
}

/// An element of one of the supported state or control spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum StateVector {
    Dense(DenseVector),
    Grid(GridField),
    Wave(WaveState),
}

impl From<DenseVector> for StateVector {
    fn from(v: DenseVector) -> Self {
        StateVector::Dense(v)
    }
}

impl From<GridField> for StateVector {
    fn from(v: GridField) -> Self {
        StateVector::Grid(v)
    }
}

impl From<WaveState> for StateVector {
    fn from(v: WaveState) -> Self {
        StateVector::Wave(v)
    }
}

impl StateVector {
    pub fn dense(entries: &[f64]) -> Result<Self> {
        Ok(StateVector::Dense(DenseVector::new(entries.to_vec())?))
    }

    pub fn as_dense(&self) -> Option<&DenseVector> {
        match self {
            StateVector::Dense(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridField> {
        match self {
            StateVector::Grid(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_wave(&self) -> Option<&WaveState> {
        match self {
            StateVector::Wave(v) => Some(v),
            _ => None,
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            StateVector::Dense(v) => StateVector::Dense(DenseVector::zeros(v.len())),
            StateVector::Grid(f) => StateVector::Grid(GridField::zeros(f.grid.clone())),
            StateVector::Wave(w) => StateVector::Wave(WaveState::zeros(w.grid().clone())),
        }
    }

    /// Every stored scalar, in a fixed order.
    pub fn components(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            StateVector::Dense(v) => Box::new(v.0.iter().copied()),
            StateVector::Grid(f) => Box::new(f.values.iter().copied()),
            StateVector::Wave(w) => Box::new(
                w.displacement
                    .values
                    .iter()
                    .chain(w.velocity.values.iter())
                    .copied(),
            ),
        }
    }

    /// Applies `f` to every stored scalar; exterior grid nodes stay 0.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        fn map_field(g: &GridField, f: &impl Fn(f64) -> f64) -> GridField {
            let values = g
                .values
                .iter()
                .zip(g.grid.mask.iter())
                .map(|(v, k)| if k.is_active() { f(*v) } else { 0.0 })
                .collect();
            GridField::from_raw(g.grid.clone(), values)
        }
        match self {
            StateVector::Dense(v) => StateVector::Dense(DenseVector(v.0.iter().map(|x| f(*x)).collect())),
            StateVector::Grid(g) => StateVector::Grid(map_field(g, &f)),
            StateVector::Wave(w) => StateVector::Wave(WaveState::from_parts_unchecked(
                map_field(&w.displacement, &f),
                map_field(&w.velocity, &f),
            )),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        axpy(-1.0, other, self)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        axpy(1.0, other, self)
    }

    pub fn max_abs(&self) -> f64 {
        self.components().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StateVector::Dense(_) => "dense",
            StateVector::Grid(_) => "grid",
            StateVector::Wave(_) => "wave",
        }
    }
}

/// Which bilinear form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProduct {
    /// Plain dot product of dense vectors.
    Euclidean,
    /// Trapezoid quadrature of `∫ a b` over the active nodes of a grid.
    L2Grid,
    /// `⟨∇a₁, ∇b₁⟩ + ⟨a₂, b₂⟩` for displacement/velocity pairs.
    Energy,
}

#[inline]
pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Discrete Dirichlet form: forward differences on edges joining two active
/// nodes, weighted by `hy/hx` (x-edges) and `hx/hy` (y-edges).
pub(crate) fn gradient_form(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let wx = grid.hy / grid.hx;
    let wy = grid.hx / grid.hy;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if !grid.mask[k].is_active() {
                continue;
            }
            if i + 1 < nx && grid.mask[k + 1].is_active() {
                sx += (a[k + 1] - a[k]) * (b[k + 1] - b[k]);
            }
            if j + 1 < ny && grid.mask[k + nx].is_active() {
                sy += (a[k + nx] - a[k]) * (b[k + nx] - b[k]);
            }
        }
    }
    wx * sx + wy * sy
}

/// Evaluates the bilinear form `ip` on `a` and `b`.
pub fn inner(a: &StateVector, b: &StateVector, ip: InnerProduct) -> Result<f64> {
    match (a, b, ip) {
        (StateVector::Dense(a), StateVector::Dense(b), InnerProduct::Euclidean) => {
            if a.len() != b.len() {
                return Err(Error::Structural(format!(
                    "dense lengths differ: {} vs {}",
                    a.len(),
                    b.len()
                )));
            }
            Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
        }
        (StateVector::Grid(a), StateVector::Grid(b), InnerProduct::L2Grid) => {
            a.check_compatible(b)?;
            Ok(weighted_dot(&a.grid.weights, &a.values, &b.values))
        }
        (StateVector::Wave(a), StateVector::Wave(b), InnerProduct::Energy) => {
            a.displacement.check_compatible(&b.displacement)?;
            let g = &a.displacement.grid;
            Ok(
                gradient_form(g, &a.displacement.values, &b.displacement.values)
                    + weighted_dot(&g.weights, &a.velocity.values, &b.velocity.values),
            )
        }
        _ => Err(Error::Structural(format!(
            "inner product {ip:?} does not apply to ({}, {})",
            a.kind_name(),
            b.kind_name()
        ))),
    }
}

pub fn norm(a: &StateVector, ip: InnerProduct) -> Result<f64> {
    Ok(inner(a, a, ip)?.max(0.0).sqrt())
}

/// Returns `alpha * a + b`.
pub fn axpy(alpha: f64, a: &StateVector, b: &StateVector) -> Result<StateVector> {
    fn field(alpha: f64, a: &GridField, b: &GridField) -> Result<GridField> {
        a.check_compatible(b)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .zip(a.grid.mask.iter())
            .map(|((x, y), k)| if k.is_active() { alpha * x + y } else { 0.0 })
            .collect();
        Ok(GridField::from_raw(a.grid.clone(), values))
    }
    match (a, b) {
        (StateVector::Dense(a), StateVector::Dense(b)) => {
            if a.len() != b.len() {
                return Err(Error::Structural("dense lengths differ".into()));
            }
            Ok(StateVector::Dense(DenseVector(
                a.0.iter().zip(&b.0).map(|(x, y)| alpha * x + y).collect(),
            )))
        }
        (StateVector::Grid(a), StateVector::Grid(b)) => Ok(StateVector::Grid(field(alpha, a, b)?)),
        (StateVector::Wave(a), StateVector::Wave(b)) => {
            Ok(StateVector::Wave(WaveState::from_parts_unchecked(
                field(alpha, &a.displacement, &b.displacement)?,
                field(alpha, &a.velocity, &b.velocity)?,
            )))
        }
        _ => Err(Error::Structural(format!(
            "axpy on mismatched realizations ({}, {})",
            a.kind_name(),
            b.kind_name()
        ))),
    }
}

/// Quadrature mean of `f` over the active nodes.
pub fn quadrature_mean(f: &GridField) -> Result<f64> {
    let measure = f.grid.measure();
    if f.grid.active_count() == 0 || measure <= 0.0 {
        return Err(Error::Structural("grid has no active nodes".into()));
    }
    Ok(weighted_dot(&f.grid.weights, &f.values, &vec![1.0; f.values.len()]) / measure)
}

/// Removes the quadrature mean from `f`.
pub fn mean_project(f: &GridField) -> Result<GridField> {
    let mean = quadrature_mean(f)?;
    let values = f
        .values
        .iter()
        .zip(f.grid.mask.iter())
        .map(|(v, k)| if k.is_active() { v - mean } else { 0.0 })
        .collect();
    Ok(GridField::from_raw(f.grid.clone(), values))
}
