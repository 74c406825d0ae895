//! Heat equation on the unit square with homogeneous Neumann data and a
//! distributed source on an axis-aligned control box.
//!
//! `M = A_N` is the five-point Neumann Laplacian with ghost-node reflection.
//! It is self-adjoint in the trapezoid-weighted inner product and its kernel
//! is exactly the constants. `B` extends a control on the box by zero and
//! `B*` restricts a state to the box; both use the parent quadrature weights.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::{mean_project, weighted_dot, Grid, GridField, InnerProduct, StateVector};
use crate::linalg::{conjugate_gradient, preconditioned_cg, CgSettings};
use crate::projection::ConstraintSet;
use crate::system::{ClosedLoop, Equilibrium, MonotoneControlSystem};
use crate::SampleRng;

/// Closed axis-aligned box `[x.0, x.1] × [y.0, y.1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl ControlBox {
    pub fn square(lo: f64, hi: f64) -> Self {
        ControlBox {
            x: (lo, hi),
            y: (lo, hi),
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        const TOL: f64 = 1e-12;
        self.x.0 - TOL <= x && x <= self.x.1 + TOL && self.y.0 - TOL <= y && y <= self.y.1 + TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    /// Grid points per side.
    pub n: usize,
    pub omega_c: ControlBox,
    pub t_min: f64,
    pub t_max: f64,
    /// Scale of the prescribed steady input `u★`.
    pub amplitude: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            n: 65,
            omega_c: ControlBox::square(0.2, 0.8),
            t_min: -5.0,
            t_max: 7.0,
            amplitude: 4.0,
        }
    }
}

impl HeatParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 17 {
            return Err(Error::Config(format!("heat grid needs n ≥ 17, got {}", self.n)));
        }
        let b = self.omega_c;
        let inside = |r: (f64, f64)| 0.0 < r.0 && r.0 < r.1 && r.1 < 1.0;
        if !(inside(b.x) && inside(b.y)) {
            return Err(Error::Config(
                "heat control box must lie strictly inside (0,1)² with positive area".into(),
            ));
        }
        if !(self.t_min < self.t_max) || !self.amplitude.is_finite() {
            return Err(Error::Config("heat bounds must satisfy t_min < t_max".into()));
        }
        Ok(())
    }
}

/// Eigenbasis of the 1D ghost-reflection Neumann stencil on `n` nodes:
/// `φ_k(i) = cos(kπi/N)`, `N = n − 1`, eigenvalue `(2 − 2cos(kπ/N))/h²`.
/// The modes are orthogonal in the trapezoid weights, so tensor products
/// diagonalise `A_N` on the square.
#[derive(Debug, Clone)]
struct CosineModes {
    n: usize,
    /// `basis[k·n + i] = φ_k(i)`.
    basis: Vec<f64>,
    lambda: Vec<f64>,
    /// Trapezoid weights, ½ at both ends.
    w: Vec<f64>,
    /// `Σᵢ wᵢ φ_k(i)²`.
    norm2: Vec<f64>,
}

impl CosineModes {
    fn new(n: usize, h: f64) -> Self {
        let big_n = (n - 1) as f64;
        let basis = (0..n * n)
            .map(|ki| (PI * ((ki / n) * (ki % n)) as f64 / big_n).cos())
            .collect();
        let lambda = (0..n)
            .map(|k| (2.0 - 2.0 * (PI * k as f64 / big_n).cos()) / (h * h))
            .collect();
        let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).collect();
        let norm2 = (0..n)
            .map(|k| if k == 0 || k == n - 1 { big_n } else { big_n / 2.0 })
            .collect();
        CosineModes {
            n,
            basis,
            lambda,
            w,
            norm2,
        }
    }

    /// `out = (I + h·A_N)⁻¹ r`.
    fn solve_shifted(&self, h: f64, r: &[f64], out: &mut [f64]) {
        let n = self.n;
        let b = &self.basis;
        let mut t = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                let row = &b[k * n..(k + 1) * n];
                t[j * n + k] = (0..n).map(|i| self.w[i] * r[j * n + i] * row[i]).sum();
            }
        }
        let mut hat = vec![0.0; n * n];
        for l in 0..n {
            for j in 0..n {
                let c = self.w[j] * b[l * n + j];
                for k in 0..n {
                    hat[l * n + k] += c * t[j * n + k];
                }
            }
            for k in 0..n {
                hat[l * n + k] /= self.norm2[k] * self.norm2[l] * (1.0 + h * (self.lambda[k] + self.lambda[l]));
            }
        }
        t.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            for l in 0..n {
                let c = b[l * n + j];
                for k in 0..n {
                    t[j * n + k] += c * hat[l * n + k];
                }
            }
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            for k in 0..n {
                let c = t[j * n + k];
                let row = &b[k * n..(k + 1) * n];
                for i in 0..n {
                    out[j * n + i] += c * row[i];
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeatSystem {
    grid: Arc<Grid>,
    control_grid: Arc<Grid>,
    control_box: ControlBox,
    modes: Arc<CosineModes>,
    cg: CgSettings,
}

impl HeatSystem {
    /// `n × n` grid on the unit square with control on the closed box.
    pub fn new(n: usize, control_box: ControlBox) -> Result<Self> {
        let grid = Grid::rectangle(n, n, (0.0, 1.0), (0.0, 1.0))?;
        let mut keep = vec![false; grid.len()];
        for j in 0..n {
            for i in 0..n {
                let (x, y) = grid.coords(i, j);
                keep[grid.index(i, j)] = control_box.contains(x, y);
            }
        }
        let control_grid = grid.restricted(&keep)?;
        if control_grid.measure() <= 0.0 {
            return Err(Error::Geometry("heat control region contains no grid cells".into()));
        }
        let modes = Arc::new(CosineModes::new(n, grid.hx()));
        Ok(HeatSystem {
            modes,
            grid: Arc::new(grid),
            control_grid: Arc::new(control_grid),
            control_box,
            cg: CgSettings::default(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn control_grid(&self) -> &Arc<Grid> {
        &self.control_grid
    }

    pub fn control_box(&self) -> ControlBox {
        self.control_box
    }

    /// Quadrature measure `|Ω_c|`.
    pub fn control_measure(&self) -> f64 {
        self.control_grid.measure()
    }

    pub fn cg_settings(&self) -> CgSettings {
        self.cg
    }

    /// `out = A_N x = −Δ_h x` with mirrored ghost nodes on every side.
    pub fn apply_neumann(&self, x: &[f64], out: &mut [f64]) {
        let n = self.grid.nx();
        let ihx2 = 1.0 / (self.grid.hx() * self.grid.hx());
        let ihy2 = 1.0 / (self.grid.hy() * self.grid.hy());
        for j in 0..n {
            let jd = if j == 0 { 1 } else { j - 1 };
            let ju = if j + 1 == n { n - 2 } else { j + 1 };
            for i in 0..n {
                let il = if i == 0 { 1 } else { i - 1 };
                let ir = if i + 1 == n { n - 2 } else { i + 1 };
                let c = x[j * n + i];
                out[j * n + i] = (2.0 * c - x[j * n + il] - x[j * n + ir]) * ihx2
                    + (2.0 * c - x[jd * n + i] - x[ju * n + i]) * ihy2;
            }
        }
    }

    fn field<'a>(&self, x: &'a StateVector) -> Result<&'a GridField> {
        match x {
            StateVector::Grid(f) if Arc::ptr_eq(f.grid(), &self.grid) || **f.grid() == *self.grid => {
                Ok(f)
            }
            _ => Err(Error::Structural("heat state must be a field on the heat grid".into())),
        }
    }

    fn control<'a>(&self, u: &'a StateVector) -> Result<&'a GridField> {
        match u {
            StateVector::Grid(f)
                if Arc::ptr_eq(f.grid(), &self.control_grid) || **f.grid() == *self.control_grid =>
            {
                Ok(f)
            }
            _ => Err(Error::Structural("heat control must be a field on the control grid".into())),
        }
    }

    /// Solves `A_N x = f` on the zero-mean subspace (`f` is mean-projected).
    pub fn solve_neumann(&self, f: &GridField, tol: f64) -> Result<GridField> {
        let rhs = mean_project(f)?;
        let w = self.grid.weights().to_vec();
        let total: f64 = w.iter().sum();
        let project = |v: &mut [f64]| {
            let mean = weighted_dot(&w, v, &vec![1.0; v.len()]) / total;
            v.iter_mut().for_each(|x| *x -= mean);
        };
        let mut x = vec![0.0; self.grid.len()];
        conjugate_gradient(
            |a, out| self.apply_neumann(a, out),
            rhs.values(),
            &mut x,
            self.grid.weights(),
            CgSettings {
                tol,
                max_iter: 20 * self.grid.len(),
            },
            Some(&project),
        )?;
        Ok(GridField::from_raw(self.grid.clone(), x))
    }
}

impl MonotoneControlSystem for HeatSystem {
    fn name(&self) -> &str {
        "heat"
    }

    fn state_ip(&self) -> InnerProduct {
        InnerProduct::L2Grid
    }

    fn control_ip(&self) -> InnerProduct {
        InnerProduct::L2Grid
    }

    fn eval_m(&self, x: &StateVector) -> Result<StateVector> {
        let f = self.field(x)?;
        let mut out = vec![0.0; self.grid.len()];
        self.apply_neumann(f.values(), &mut out);
        Ok(StateVector::Grid(GridField::from_raw(self.grid.clone(), out)))
    }

    fn resolvent_m(&self, h: f64, rhs: &StateVector, guess: Option<&StateVector>) -> Result<StateVector> {
        if !(h > 0.0) {
            return Err(Error::Usage(format!("resolvent step must be positive, got {h}")));
        }
        let r = self.field(rhs)?;
        let mut x = match guess.map(|g| self.field(g)) {
            Some(Ok(g)) => g.values().to_vec(),
            _ => r.values().to_vec(),
        };
        // The cosine modes invert the shifted operator exactly up to
        // rounding, so CG typically stops after one or two iterations.
        preconditioned_cg(
            |a, out| {
                self.apply_neumann(a, out);
                for (o, v) in out.iter_mut().zip(a) {
                    *o = v + h * *o;
                }
            },
            |a, out| self.modes.solve_shifted(h, a, out),
            r.values(),
            &mut x,
            self.grid.weights(),
            self.cg,
            None,
        )?;
        Ok(StateVector::Grid(GridField::from_raw(self.grid.clone(), x)))
    }

    fn apply_b(&self, u: &StateVector) -> Result<StateVector> {
        let u = self.control(u)?;
        Ok(StateVector::Grid(GridField::from_raw(self.grid.clone(), u.values().to_vec())))
    }

    fn apply_bstar(&self, x: &StateVector) -> Result<StateVector> {
        let f = self.field(x)?;
        let values = f
            .values()
            .iter()
            .zip(self.control_grid.mask())
            .map(|(v, k)| if k.is_active() { *v } else { 0.0 })
            .collect();
        Ok(StateVector::Grid(GridField::from_raw(self.control_grid.clone(), values)))
    }

    fn is_admissible(&self, x: &StateVector) -> bool {
        self.field(x).is_ok()
    }

    /// Random low cosine modes (the Neumann eigenfunctions) plus nodal
    /// noise, so samples mix smooth fields with grid-scale roughness.
    fn sample_state(&self, rng: &mut SampleRng) -> StateVector {
        const MODES: usize = 4;
        let mut coef = [[0.0; MODES]; MODES];
        for (p, row) in coef.iter_mut().enumerate() {
            for (q, c) in row.iter_mut().enumerate() {
                *c = 4.0 * rng.sample::<f64, _>(StandardNormal) / (1 + p + q) as f64;
            }
        }
        let g = &self.grid;
        let mut values = vec![0.0; g.len()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let (x, y) = g.coords(i, j);
                let mut v = 0.5 * rng.sample::<f64, _>(StandardNormal);
                for (p, row) in coef.iter().enumerate() {
                    let cx = (p as f64 * PI * x).cos();
                    for (q, c) in row.iter().enumerate() {
                        v += c * cx * (q as f64 * PI * y).cos();
                    }
                }
                values[g.index(i, j)] = v;
            }
        }
        StateVector::Grid(GridField::from_raw(g.clone(), values))
    }

    fn sample_control(&self, rng: &mut SampleRng) -> StateVector {
        let values = self
            .control_grid
            .mask()
            .iter()
            .map(|k| if k.is_active() { rng.random_range(-20.0..20.0) } else { 0.0 })
            .collect();
        StateVector::Grid(GridField::from_raw(self.control_grid.clone(), values))
    }
}

/// `u★ = amplitude·sin(2πξ)·sin(2πη)` on the control box, with
/// `ξ, η` the box-local coordinates in `[0, 1]`.
///
/// Its quadrature mean over the box is removed so that `B u★` is exactly
/// compatible with the Neumann problem; for boxes symmetric about the grid
/// this mean is at rounding level.
pub fn steady_input(sys: &HeatSystem, amplitude: f64) -> Result<GridField> {
    let b = sys.control_box;
    let cg = sys.control_grid.clone();
    let raw = GridField::from_fn(cg.clone(), |x, y| {
        let xi = (x - b.x.0) / (b.x.1 - b.x.0);
        let eta = (y - b.y.0) / (b.y.1 - b.y.0);
        amplitude * (2.0 * PI * xi).sin() * (2.0 * PI * eta).sin()
    });
    mean_project(&raw)
}

/// Zero-mean `x★` with `A_N x★ = B u★`.
pub fn solve_heat_equilibrium(sys: &HeatSystem, u_star: &GridField) -> Result<GridField> {
    let bu = sys.apply_b(&StateVector::Grid(u_star.clone()))?;
    sys.solve_neumann(bu.as_grid().expect("grid state"), 1e-13)
}

/// Closed loop around `(x★, u★)` with `F = [t_min, t_max]` on the box.
pub fn build_heat(p: &HeatParams) -> Result<ClosedLoop> {
    p.validate()?;
    let sys = HeatSystem::new(p.n, p.omega_c)?;
    let u_star = steady_input(&sys, p.amplitude)?;
    let x_star = solve_heat_equilibrium(&sys, &u_star)?;
    ClosedLoop::new(
        Arc::new(sys),
        ConstraintSet::interval(p.t_min, p.t_max)?,
        Equilibrium {
            x_star: StateVector::Grid(x_star),
            u_star: StateVector::Grid(u_star),
            residual_tol: 1e-6,
        },
    )
}

/// Default initial temperature: `2 + 6·cos(πx)·cos(πy)`, far enough from
/// `x★` that the feedback saturates at both bounds early on.
pub fn default_initial_state(sys: &HeatSystem) -> StateVector {
    StateVector::Grid(GridField::from_fn(sys.grid.clone(), |x, y| {
        2.0 + 6.0 * (PI * x).cos() * (PI * y).cos()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityEstimate {
    /// Smallest eigenvalue of `A_N + BB*`.
    pub alpha: f64,
    pub iterations: usize,
}

/// Inverse power iteration for the smallest eigenvalue of `A_N + BB*`,
/// stopped when the Rayleigh quotient changes by less than `rel_tol`.
///
/// A positive value witnesses coercivity of `A_N + BB*` and hence
/// exponential detectability of `(A_N, B)`.
pub fn coercivity_estimate(sys: &HeatSystem, rel_tol: f64, max_iter: usize) -> Result<CoercivityEstimate> {
    let w = sys.grid.weights();
    let indicator: Vec<f64> = sys
        .control_grid
        .mask()
        .iter()
        .map(|k| if k.is_active() { 1.0 } else { 0.0 })
        .collect();
    let apply = |a: &[f64], out: &mut [f64]| {
        sys.apply_neumann(a, out);
        for ((o, v), c) in out.iter_mut().zip(a).zip(&indicator) {
            *o += c * v;
        }
    };
    let normalize = |v: &mut [f64]| {
        let n = weighted_dot(w, v, v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };

    let mut v = vec![1.0; sys.grid.len()];
    normalize(&mut v);
    let mut av = vec![0.0; v.len()];
    let mut lambda = f64::INFINITY;
    let cg = CgSettings {
        tol: 1e-12,
        max_iter: 20 * v.len(),
    };
    for it in 1..=max_iter {
        let mut y = v.clone();
        conjugate_gradient(apply, &v, &mut y, w, cg, None)?;
        normalize(&mut y);
        v = y;
        apply(&v, &mut av);
        let next = weighted_dot(w, &v, &av);
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return Ok(CoercivityEstimate {
                alpha: next,
                iterations: it,
            });
        }
        lambda = next;
    }
    Err(Error::Convergence {
        solver: "inverse power iteration",
        iterations: max_iter,
        residual: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{inner, norm, quadrature_mean};
    use crate::system::equilibrium_residual;
    use rand::SeedableRng;

    fn small() -> HeatSystem {
        HeatSystem::new(17, ControlBox::square(0.2, 0.8)).unwrap()
    }

    #[test]
    fn constants_span_the_kernel() {
        let s = small();
        let one = GridField::from_fn(s.grid.clone(), |_, _| 1.0);
        let a = s.eval_m(&StateVector::Grid(one)).unwrap();
        assert!(a.as_grid().unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn neumann_laplacian_is_symmetric_and_positive() {
        let s = small();
        let mut rng = SampleRng::seed_from_u64(2);
        for _ in 0..200 {
            let a = s.sample_state(&mut rng);
            let b = s.sample_state(&mut rng);
            let ip = InnerProduct::L2Grid;
            let lhs = inner(&s.eval_m(&a).unwrap(), &b, ip).unwrap();
            let rhs = inner(&a, &s.eval_m(&b).unwrap(), ip).unwrap();
            let scale = 1f64.max(norm(&a, ip).unwrap() * norm(&b, ip).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * scale * 1e3, "{lhs} vs {rhs}");
            assert!(inner(&s.eval_m(&a).unwrap(), &a, ip).unwrap() > 0.0);
        }
    }

    #[test]
    fn dirichlet_form_matches_operator() {
        // ⟨A_N x, x⟩ equals the cell-averaged squared gradient, with edges on
        // the outer boundary carrying half weight.
        let s = small();
        let mut rng = SampleRng::seed_from_u64(9);
        let x = s.sample_state(&mut rng);
        let v = x.as_grid().unwrap().values();
        let n = 17;
        let mut grad = 0.0;
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if i + 1 < n {
                    let wgt = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    grad += wgt * (v[k + 1] - v[k]).powi(2);
                }
                if j + 1 < n {
                    let wgt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    grad += wgt * (v[k + n] - v[k]).powi(2);
                }
            }
        }
        let pairing = inner(&s.eval_m(&x).unwrap(), &x, InnerProduct::L2Grid).unwrap();
        assert!((pairing - grad).abs() <= 1e-10 * grad);
    }

    #[test]
    fn adjoint_consistency_of_input() {
        let s = small();
        let mut rng = SampleRng::seed_from_u64(4);
        for _ in 0..100 {
            let u = s.sample_control(&mut rng);
            let x = s.sample_state(&mut rng);
            let l = inner(&s.apply_b(&u).unwrap(), &x, InnerProduct::L2Grid).unwrap();
            let r = inner(&u, &s.apply_bstar(&x).unwrap(), InnerProduct::L2Grid).unwrap();
            assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0));
            // B*B = I on controls.
            assert_eq!(s.apply_bstar(&s.apply_b(&u).unwrap()).unwrap(), u);
        }
    }

    #[test]
    fn steady_input_is_compatible_and_interior() {
        let p = HeatParams::default();
        let s = HeatSystem::new(p.n, p.omega_c).unwrap();
        let u = steady_input(&s, p.amplitude).unwrap();
        assert!(quadrature_mean(&u).unwrap().abs() < 1e-15);
        let max = u.values().iter().fold(0f64, |m, v| m.max(v.abs()));
        assert!(max <= 4.0 && max > 3.9);
        let f = ConstraintSet::interval(p.t_min, p.t_max).unwrap();
        assert!(f.is_interior(&StateVector::Grid(u), 1e-9));
    }

    #[test]
    fn zero_input_gives_zero_equilibrium() {
        let s = small();
        let z = GridField::zeros(s.control_grid.clone());
        let x = solve_heat_equilibrium(&s, &z).unwrap();
        assert!(x.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eigenmode_oracle() {
        // cos(πx)cos(πy) is an eigenvector of the ghost-reflected five-point
        // operator with λ = 2·(2 − 2cos(πh))/h².
        let n = 33;
        let s = HeatSystem::new(n, ControlBox::square(0.2, 0.8)).unwrap();
        let h = 1.0 / (n - 1) as f64;
        let lambda = 2.0 * (2.0 - 2.0 * (PI * h).cos()) / (h * h);
        let mode = GridField::from_fn(s.grid.clone(), |x, y| (PI * x).cos() * (PI * y).cos());
        let x = s.solve_neumann(&mode, 1e-14).unwrap();
        for (a, b) in x.values().iter().zip(mode.values()) {
            assert!((a - b / lambda).abs() < 1e-12, "{a} vs {}", b / lambda);
        }
    }

    #[test]
    fn built_equilibrium_has_small_residual() {
        let cl = build_heat(&HeatParams {
            n: 33,
            ..HeatParams::default()
        })
        .unwrap();
        let r = equilibrium_residual(cl.system(), cl.x_star(), &cl.equilibrium().u_star).unwrap();
        assert!(r <= 1e-6);
    }

    #[test]
    fn resolvent_solves_shifted_system() {
        let s = small();
        let mut rng = SampleRng::seed_from_u64(8);
        let r = s.sample_state(&mut rng);
        let x = s.resolvent_m(0.1, &r, None).unwrap();
        let res = x.add(&s.eval_m(&x).unwrap().scaled(0.1)).unwrap().sub(&r).unwrap();
        let rn = norm(&r, InnerProduct::L2Grid).unwrap();
        assert!(norm(&res, InnerProduct::L2Grid).unwrap() <= 1e-12 * rn);
    }

    #[test]
    fn params_validation() {
        assert!(HeatParams { n: 9, ..HeatParams::default() }.validate().is_err());
        let full = HeatParams {
            omega_c: ControlBox::square(0.0, 1.0),
            ..HeatParams::default()
        };
        assert!(full.validate().is_err());
        assert!(HeatParams::default().validate().is_ok());
    }

    #[test]
    fn full_control_coercivity_is_one() {
        let s = HeatSystem::new(17, ControlBox::square(0.0, 1.0)).unwrap();
        let est = coercivity_estimate(&s, 1e-10, 200).unwrap();
        assert!((est.alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cosine_modes_invert_the_shifted_operator() {
        let s = HeatSystem::new(21, ControlBox::square(0.2, 0.8)).unwrap();
        let mut rng = SampleRng::seed_from_u64(9);
        let r = s.sample_state(&mut rng);
        let r = r.as_grid().unwrap().values();
        for h in [1e-3, 0.1, 10.0] {
            let mut x = vec![0.0; r.len()];
            s.modes.solve_shifted(h, r, &mut x);
            let mut ax = vec![0.0; r.len()];
            s.apply_neumann(&x, &mut ax);
            let err = x
                .iter()
                .zip(&ax)
                .zip(r)
                .map(|((x, a), r)| (x + h * a - r).abs())
                .fold(0.0, f64::max);
            let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-11 * scale, "h={h}: {err}");
        }
    }
}
