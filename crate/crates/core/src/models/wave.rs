//! Dirichlet wave equation on a dogbone domain in displacement/velocity form,
//! with velocity feedback acting on collars in both lobes and two strips
//! along the neck edges.
//!
//! The curved boundary is approximated by a staircase: a node belongs to the
//! domain iff its position lies in the dogbone. Degrees of freedom are the
//! interior nodes; displacement and velocity vanish on boundary nodes.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::{norm, Grid, GridField, InnerProduct, NodeKind, StateVector, WaveState};
use crate::linalg::{conjugate_gradient, CgSettings};
use crate::projection::ConstraintSet;
use crate::system::{ClosedLoop, Equilibrium, MonotoneControlSystem};
use crate::SampleRng;

/// Two disks of radius `radius` centred at `(±center_offset, 0)` joined by a
/// neck of half-width `neck_half_width`. The control region consists of
/// collars of thickness `collar` along the outer arcs, which stop `gap_deg`
/// degrees short of the neck junctions, and strips of the same thickness
/// along both neck edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DogboneGeometry {
    pub radius: f64,
    pub neck_half_width: f64,
    pub center_offset: f64,
    pub collar: f64,
    pub gap_deg: f64,
}

impl Default for DogboneGeometry {
    fn default() -> Self {
        DogboneGeometry {
            radius: 1.4,
            neck_half_width: 0.6,
            center_offset: 2.0,
            collar: 0.4,
            gap_deg: 40.0,
        }
    }
}

impl DogboneGeometry {
    pub fn validate(&self) -> Result<()> {
        let all_pos = [self.radius, self.neck_half_width, self.center_offset, self.collar]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_pos || !(0.0..180.0).contains(&self.gap_deg) {
            return Err(Error::Config("dogbone lengths must be positive, gap in [0, 180)".into()));
        }
        if self.neck_half_width >= self.radius {
            return Err(Error::Config("dogbone neck must be narrower than the lobes".into()));
        }
        if self.collar >= self.neck_half_width {
            return Err(Error::Config("collar must be thinner than the neck half-width".into()));
        }
        if self.center_offset <= self.neck_length_offset() {
            return Err(Error::Config("lobes overlap; the neck must have positive length".into()));
        }
        Ok(())
    }

    /// `h' = √(R² − w²)`: horizontal distance from a lobe centre to where the
    /// neck edge meets the circle.
    pub fn neck_length_offset(&self) -> f64 {
        (self.radius * self.radius - self.neck_half_width * self.neck_half_width).sqrt()
    }

    /// Junction angle `θ = asin(w/R)` in degrees.
    pub fn junction_deg(&self) -> f64 {
        (self.neck_half_width / self.radius).asin().to_degrees()
    }

    fn neck_x(&self) -> (f64, f64) {
        let hp = self.neck_length_offset();
        (-self.center_offset + hp, self.center_offset - hp)
    }

    /// Closed point membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        const TOL: f64 = 1e-12;
        let r2 = self.radius * self.radius + TOL;
        let d = self.center_offset;
        let (nx0, nx1) = self.neck_x();
        (x + d).powi(2) + y * y <= r2
            || (x - d).powi(2) + y * y <= r2
            || (nx0 - TOL <= x && x <= nx1 + TOL && y.abs() <= self.neck_half_width + TOL)
    }

    /// Membership in the control region (before intersecting with the grid
    /// interior).
    pub fn in_control_region(&self, x: f64, y: f64) -> bool {
        const TOL: f64 = 1e-12;
        let (r, eps, d) = (self.radius, self.collar, self.center_offset);
        let theta = self.junction_deg();
        let gap = self.gap_deg;
        let in_annulus = |cx: f64| {
            let rho = ((x - cx).powi(2) + y * y).sqrt();
            r - eps - TOL <= rho && rho <= r + TOL
        };
        let angle = |cx: f64| (y.atan2(x - cx).to_degrees() + 360.0) % 360.0;

        let left = in_annulus(-d) && {
            let a = angle(-d);
            theta + gap <= a && a <= 360.0 - theta - gap
        };
        let right = in_annulus(d) && {
            let a = angle(d);
            a <= 180.0 - theta - gap || a >= 180.0 + theta + gap
        };
        let (nx0, nx1) = self.neck_x();
        let w = self.neck_half_width;
        let strip = nx0 - TOL <= x
            && x <= nx1 + TOL
            && w - eps - TOL <= y.abs()
            && y.abs() <= w + TOL;
        left || right || strip
    }
}

/// Node grid with spacing `1/n` covering the dogbone plus one cell of padding.
pub fn dogbone_mask(geom: &DogboneGeometry, n: usize) -> Result<Grid> {
    geom.validate()?;
    if n == 0 || geom.collar * n as f64 + 1e-9 < 4.0 {
        return Err(Error::Geometry(format!(
            "resolution n={n} gives fewer than 4 cells across the collar"
        )));
    }
    let h = 1.0 / n as f64;
    let half_x = geom.center_offset + geom.radius;
    let half_y = geom.radius;
    let cells_x = (2.0 * half_x / h - 1e-9).ceil() as usize + 2;
    let cells_y = (2.0 * half_y / h - 1e-9).ceil() as usize + 2;
    let lx = cells_x as f64 * h / 2.0;
    let ly = cells_y as f64 * h / 2.0;
    let grid = Grid::from_predicate(cells_x + 1, cells_y + 1, (-lx, lx), (-ly, ly), |x, y| {
        geom.contains(x, y)
    })?;
    if !grid.is_connected() {
        return Err(Error::Geometry("dogbone mask is not connected".into()));
    }
    Ok(grid)
}

/// Control nodes: region membership intersected with the interior nodes.
pub fn control_region_mask(geom: &DogboneGeometry, grid: &Grid) -> Result<Vec<bool>> {
    let mut keep = vec![false; grid.len()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let k = grid.index(i, j);
            let (x, y) = grid.coords(i, j);
            keep[k] = grid.mask()[k] == NodeKind::Interior && geom.in_control_region(x, y);
        }
    }
    if !keep.iter().any(|&b| b) {
        return Err(Error::Geometry("control region is empty".into()));
    }
    Ok(keep)
}

/// Geometry audit CSV: `i,j,x,y,in_domain,in_control`.
pub fn mask_csv(grid: &Grid, control: &[bool]) -> String {
    let mut out = String::from("i,j,x,y,in_domain,in_control\n");
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let k = grid.index(i, j);
            let (x, y) = grid.coords(i, j);
            let _ = writeln!(
                out,
                "{i},{j},{x},{y},{},{}",
                u8::from(grid.mask()[k].is_active()),
                u8::from(control[k])
            );
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct WaveSystem {
    geometry: DogboneGeometry,
    grid: Arc<Grid>,
    control_grid: Arc<Grid>,
    /// `hx·hy` on interior nodes, 0 elsewhere.
    dof_weights: Vec<f64>,
    cg: CgSettings,
}

impl WaveSystem {
    pub fn new(geometry: DogboneGeometry, n: usize) -> Result<Self> {
        let grid = dogbone_mask(&geometry, n)?;
        let keep = control_region_mask(&geometry, &grid)?;
        let control_grid = grid.restricted(&keep)?;
        let cell = grid.hx() * grid.hy();
        let dof_weights = grid
            .mask()
            .iter()
            .map(|k| if *k == NodeKind::Interior { cell } else { 0.0 })
            .collect();
        Ok(WaveSystem {
            geometry,
            grid: Arc::new(grid),
            control_grid: Arc::new(control_grid),
            dof_weights,
            cg: CgSettings::default(),
        })
    }

    pub fn geometry(&self) -> &DogboneGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn control_grid(&self) -> &Arc<Grid> {
        &self.control_grid
    }

    pub fn control_keep(&self) -> Vec<bool> {
        self.control_grid.mask().iter().map(|k| k.is_active()).collect()
    }

    /// `out = −Δ_h x` on interior nodes (five-point, Dirichlet), 0 elsewhere.
    pub fn apply_dirichlet(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let nx = g.nx();
        let ihx2 = 1.0 / (g.hx() * g.hx());
        let ihy2 = 1.0 / (g.hy() * g.hy());
        let mask = g.mask();
        let val = |k: usize| if mask[k] == NodeKind::Interior { x[k] } else { 0.0 };
        for (k, o) in out.iter_mut().enumerate() {
            if mask[k] != NodeKind::Interior {
                *o = 0.0;
                continue;
            }
            // Interior nodes never sit on the array edge.
            let c = x[k];
            *o = (2.0 * c - val(k - 1) - val(k + 1)) * ihx2 + (2.0 * c - val(k - nx) - val(k + nx)) * ihy2;
        }
    }

    fn state<'a>(&self, x: &'a StateVector) -> Result<&'a WaveState> {
        match x {
            StateVector::Wave(w) if Arc::ptr_eq(w.grid(), &self.grid) || **w.grid() == *self.grid => Ok(w),
            _ => Err(Error::Structural("wave state must be a displacement/velocity pair on the dogbone grid".into())),
        }
    }

    fn control<'a>(&self, u: &'a StateVector) -> Result<&'a GridField> {
        match u {
            StateVector::Grid(f)
                if Arc::ptr_eq(f.grid(), &self.control_grid) || **f.grid() == *self.control_grid =>
            {
                Ok(f)
            }
            _ => Err(Error::Structural("wave control must be a field on the control region".into())),
        }
    }

    fn on_dofs(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.grid.mask())
            .map(|(x, k)| if *k == NodeKind::Interior { *x } else { 0.0 })
            .collect()
    }

    fn pair(&self, d: Vec<f64>, v: Vec<f64>) -> StateVector {
        StateVector::Wave(WaveState::from_parts_unchecked(
            GridField::from_raw(self.grid.clone(), d),
            GridField::from_raw(self.grid.clone(), v),
        ))
    }

    /// Displacement `amplitude·exp(−‖p − c‖²/σ²)` on the interior nodes, at
    /// rest.
    pub fn gaussian_bump(&self, center: (f64, f64), sigma: f64, amplitude: f64) -> StateVector {
        let bump = GridField::from_fn(self.grid.clone(), |x, y| {
            amplitude * (-((x - center.0).powi(2) + (y - center.1).powi(2)) / (sigma * sigma)).exp()
        });
        let d = self.on_dofs(bump.values());
        self.pair(d, vec![0.0; self.grid.len()])
    }
}

impl MonotoneControlSystem for WaveSystem {
    fn name(&self) -> &str {
        "wave"
    }

    fn state_ip(&self) -> InnerProduct {
        InnerProduct::Energy
    }

    fn control_ip(&self) -> InnerProduct {
        InnerProduct::L2Grid
    }

    /// `M(x₁, x₂) = (−x₂, −Δx₁)`, the negated wave generator.
    fn eval_m(&self, x: &StateVector) -> Result<StateVector> {
        let w = self.state(x)?;
        let d: Vec<f64> = self.on_dofs(w.velocity().values()).iter().map(|v| -v).collect();
        let mut v = vec![0.0; self.grid.len()];
        self.apply_dirichlet(w.displacement().values(), &mut v);
        Ok(self.pair(d, v))
    }

    /// `x₁ − h x₂ = r₁`, `x₂ + h(−Δx₁) = r₂`: solve `(I − h²Δ) x₁ = r₁ + h r₂`
    /// by CG, then `x₂ = r₂ + hΔx₁`.
    fn resolvent_m(&self, h: f64, rhs: &StateVector, guess: Option<&StateVector>) -> Result<StateVector> {
        if !(h > 0.0) {
            return Err(Error::Usage(format!("resolvent step must be positive, got {h}")));
        }
        let r = self.state(rhs)?;
        let r1 = r.displacement().values();
        let r2 = self.on_dofs(r.velocity().values());
        let b: Vec<f64> = self
            .on_dofs(r1)
            .iter()
            .zip(&r2)
            .map(|(a, v)| a + h * v)
            .collect();
        let mut x1 = match guess.map(|g| self.state(g)) {
            Some(Ok(g)) => self.on_dofs(g.displacement().values()),
            _ => b.clone(),
        };
        let h2 = h * h;
        conjugate_gradient(
            |a, out| {
                self.apply_dirichlet(a, out);
                for ((o, v), w) in out.iter_mut().zip(a).zip(&self.dof_weights) {
                    *o = if *w > 0.0 { v + h2 * *o } else { 0.0 };
                }
            },
            &b,
            &mut x1,
            &self.dof_weights,
            self.cg,
            None,
        )?;
        let x1 = self.on_dofs(&x1);
        let mut lap = vec![0.0; x1.len()];
        self.apply_dirichlet(&x1, &mut lap);
        let x2 = r2.iter().zip(&lap).map(|(v, l)| v - h * l).collect();
        Ok(self.pair(x1, x2))
    }

    fn apply_b(&self, u: &StateVector) -> Result<StateVector> {
        let u = self.control(u)?;
        Ok(self.pair(vec![0.0; self.grid.len()], u.values().to_vec()))
    }

    fn apply_bstar(&self, x: &StateVector) -> Result<StateVector> {
        let w = self.state(x)?;
        let values = w
            .velocity()
            .values()
            .iter()
            .zip(self.control_grid.mask())
            .map(|(v, k)| if k.is_active() { *v } else { 0.0 })
            .collect();
        Ok(StateVector::Grid(GridField::from_raw(self.control_grid.clone(), values)))
    }

    fn is_admissible(&self, x: &StateVector) -> bool {
        let Ok(w) = self.state(x) else {
            return false;
        };
        let clamped = |f: &GridField| {
            f.values()
                .iter()
                .zip(self.grid.mask())
                .all(|(v, k)| *k == NodeKind::Interior || *v == 0.0)
        };
        clamped(w.displacement()) && clamped(w.velocity())
    }

    /// `½‖x‖²` in the energy inner product.
    fn energy(&self, x: &StateVector) -> Option<f64> {
        norm(x, InnerProduct::Energy).ok().map(|n| 0.5 * n * n)
    }

    /// A few random Gaussian bumps in each component plus nodal noise on
    /// the degrees of freedom.
    fn sample_state(&self, rng: &mut SampleRng) -> StateVector {
        let dofs: Vec<usize> = (0..self.grid.len())
            .filter(|&k| self.grid.mask()[k] == NodeKind::Interior)
            .collect();
        let nx = self.grid.nx();
        let mut field = |amplitude: f64, noise: f64| {
            let bumps: Vec<((f64, f64), f64, f64)> = (0..3)
                .map(|_| {
                    let k = dofs[rng.random_range(0..dofs.len())];
                    let c = self.grid.coords(k % nx, k / nx);
                    let sigma = rng.random_range(0.2..0.6);
                    (c, sigma, amplitude * rng.sample::<f64, _>(StandardNormal))
                })
                .collect();
            let mut v = vec![0.0; self.grid.len()];
            for &k in &dofs {
                let (x, y) = self.grid.coords(k % nx, k / nx);
                v[k] = noise * rng.sample::<f64, _>(StandardNormal);
                for ((cx, cy), s, a) in &bumps {
                    let r2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (s * s);
                    // exp(−16) is below the nodal noise level.
                    if r2 < 16.0 {
                        v[k] += a * (-r2).exp();
                    }
                }
            }
            v
        };
        let d = field(1.0, 0.01);
        let v = field(2.0, 0.1);
        self.pair(d, v)
    }

    fn sample_control(&self, rng: &mut SampleRng) -> StateVector {
        let values = self
            .control_grid
            .mask()
            .iter()
            .map(|k| if k.is_active() { rng.random_range(-5.0..5.0) } else { 0.0 })
            .collect();
        StateVector::Grid(GridField::from_raw(self.control_grid.clone(), values))
    }
}

/// Default spatial resolution (nodes per unit length).
pub const DEFAULT_RESOLUTION: usize = 20;

/// Closed loop around the origin with `F = [−1, 1]` on the control region.
pub fn build_wave(geom: &DogboneGeometry, n: usize) -> Result<ClosedLoop> {
    let sys = WaveSystem::new(*geom, n)?;
    let zero_state = StateVector::Wave(WaveState::zeros(sys.grid.clone()));
    let zero_control = StateVector::Grid(GridField::zeros(sys.control_grid.clone()));
    ClosedLoop::new(
        Arc::new(sys),
        ConstraintSet::interval(-1.0, 1.0)?,
        Equilibrium {
            x_star: zero_state,
            u_star: zero_control,
            residual_tol: 0.0,
        },
    )
}

/// Default initial state: a displacement bump in the left lobe, at rest.
pub fn default_initial_state(sys: &WaveSystem) -> StateVector {
    let g = sys.geometry();
    sys.gaussian_bump((-g.center_offset + 0.3, 0.2), 0.35, 1.0)
}
