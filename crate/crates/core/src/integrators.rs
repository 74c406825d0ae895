//! Time discretisation of the closed loop `ẋ = −M_cl(x)`.
//!
//! Every scheme is built from the resolvent `(I + h·M_cl)⁻¹`, so each step
//! inherits its nonexpansiveness and keeps `x★` as a fixed point:
//!
//! * proximal: one backward-Euler resolvent step,
//! * imex: the feedback is frozen at the old state and only `M` is implicit,
//! * crank-nicolson: implicit midpoint, i.e. the reflected resolvent
//!   `2·(I + dt/2·M_cl)⁻¹ − I`, which is exactly energy-preserving for skew `M`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hilbert::{axpy, norm, StateVector};
use crate::system::{eval_m_cl, ClosedLoop, MonotoneControlSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Proximal,
    Imex,
    CrankNicolson,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Proximal => "proximal",
            SchemeKind::Imex => "imex",
            SchemeKind::CrankNicolson => "crank-nicolson",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proximal" => Ok(SchemeKind::Proximal),
            "imex" => Ok(SchemeKind::Imex),
            "crank-nicolson" => Ok(SchemeKind::CrankNicolson),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Settings of the projected-resolvent fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Relative residual target: `‖x + h·M_cl(x) − rhs‖ ≤ tol·max(1, ‖rhs‖)`.
    pub tol: f64,
    /// Fixed damping factor; `None` picks 1.0 when `h‖B‖‖B*‖ ≤ 0.5`, else 0.5.
    pub damping: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iter: 200,
            tol: 1e-10,
            damping: None,
        }
    }
}

impl SolverSettings {
    pub fn damping_for(&self, h: f64, input_norm: f64) -> f64 {
        self.damping
            .unwrap_or(if h * input_norm * input_norm <= 0.5 { 1.0 } else { 0.5 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScheme {
    pub kind: SchemeKind,
    pub dt: f64,
    pub solver: SolverSettings,
}

impl StepScheme {
    pub fn new(kind: SchemeKind, dt: f64) -> Result<Self> {
        Self::with_solver(kind, dt, SolverSettings::default())
    }

    pub fn with_solver(kind: SchemeKind, dt: f64, solver: SolverSettings) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if !(solver.tol > 0.0) || solver.max_iter == 0 {
            return Err(Error::Config("solver tolerance and max_iter must be positive".into()));
        }
        Ok(StepScheme { kind, dt, solver })
    }
}

/// Solves `x + h·M_cl(x) = rhs` by the damped fixed point
/// `x ← (I + hM)⁻¹(rhs + h·B·P_F(u★ − B*(x − x★)))`.
///
/// The feedback map is 1-Lipschitz and the resolvent of `M` nonexpansive, so
/// the undamped iteration contracts with factor `h‖B‖‖B*‖`.
pub fn resolvent_solve(
    cl: &ClosedLoop,
    h: f64,
    rhs: &StateVector,
    settings: &SolverSettings,
) -> Result<StateVector> {
    if !(h > 0.0) {
        return Err(Error::Usage(format!("resolvent step must be positive, got {h}")));
    }
    let sys = cl.system();
    let ip = sys.state_ip();
    let theta = settings.damping_for(h, sys.input_norm());
    let target = settings.tol * 1f64.max(norm(rhs, ip)?);

    let mut x = rhs.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let forced = axpy(h, &sys.apply_b(&cl.control_at(&x)?)?, rhs)?;
        let solved = sys.resolvent_m(h, &forced, Some(&x))?;
        x = if theta == 1.0 {
            solved
        } else {
            axpy(theta, &solved.sub(&x)?, &x)?
        };
        let r = axpy(h, &eval_m_cl(cl, &x)?, &x)?.sub(rhs)?;
        residual = norm(&r, ip)?;
        if residual <= target {
            return Ok(x);
        }
    }
    Err(Error::Convergence {
        solver: "projected resolvent fixed point",
        iterations: settings.max_iter,
        residual,
    })
}

/// Advances `x` by one step of `scheme`.
pub fn step(scheme: &StepScheme, cl: &ClosedLoop, x: &StateVector) -> Result<StateVector> {
    let dt = scheme.dt;
    match scheme.kind {
        SchemeKind::Proximal => resolvent_solve(cl, dt, x, &scheme.solver),
        SchemeKind::Imex => {
            let sys = cl.system();
            let forced = axpy(dt, &sys.apply_b(&cl.control_at(x)?)?, x)?;
            sys.resolvent_m(dt, &forced, Some(x))
        }
        SchemeKind::CrankNicolson => {
            let mid = resolvent_solve(cl, 0.5 * dt, x, &scheme.solver)?;
            axpy(2.0, &mid, &x.scaled(-1.0))
        }
    }
}

/// One step of `scheme` for the open loop `ẋ = −M(x)` (input held at zero).
pub fn step_unforced(
    scheme: &StepScheme,
    sys: &dyn MonotoneControlSystem,
    x: &StateVector,
) -> Result<StateVector> {
    match scheme.kind {
        SchemeKind::Proximal | SchemeKind::Imex => sys.resolvent_m(scheme.dt, x, Some(x)),
        SchemeKind::CrankNicolson => {
            let mid = sys.resolvent_m(0.5 * scheme.dt, x, Some(x))?;
            axpy(2.0, &mid, &x.scaled(-1.0))
        }
    }
}

/// `(I + t/n·M_cl)⁻ⁿ x₀`.
pub fn exponential_formula(
    cl: &ClosedLoop,
    t: f64,
    n: usize,
    x0: &StateVector,
    settings: &SolverSettings,
) -> Result<StateVector> {
    if t < 0.0 || n == 0 {
        return Err(Error::Usage(format!("exponential formula needs t ≥ 0 and n ≥ 1 (t={t}, n={n})")));
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let h = t / n as f64;
    let mut x = x0.clone();
    for _ in 0..n {
        x = resolvent_solve(cl, h, &x, settings)?;
    }
    Ok(x)
}

/// Sampled closed-loop quantities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `‖x(t) − x★‖` in the state norm.
    pub dist_to_eq: Vec<f64>,
    /// `‖y(t) − y★‖` in the control norm.
    pub output_norm: Vec<f64>,
    pub control_l2: Vec<f64>,
    pub control_linf: Vec<f64>,
    /// Only for systems with a physical energy.
    pub energy: Vec<Option<f64>>,
    /// Distance of the applied control to the nearer bound of `F`.
    pub feasibility_margin: Vec<f64>,
    /// Set when the run stopped early on a solver failure.
    pub error: Option<Error>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn record(&mut self, cl: &ClosedLoop, t: f64, x: &StateVector) -> Result<()> {
        let sys = cl.system();
        let uip = sys.control_ip();
        let y = sys.apply_bstar(x)?;
        let u = cl.feedback(&y)?;
        self.times.push(t);
        self.dist_to_eq.push(cl.distance_to_equilibrium(x)?);
        self.output_norm.push(norm(&y.sub(cl.y_star())?, uip)?);
        self.control_l2.push(norm(&u, uip)?);
        self.control_linf.push(u.max_abs());
        self.energy.push(sys.energy(x));
        self.feasibility_margin.push(cl.constraint().feasibility_margin(&u));
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,dist_to_eq,output_norm,control_l2,control_linf,feasibility_margin,energy\n");
        for k in 0..self.len() {
            let energy = self.energy[k].map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.times[k],
                self.dist_to_eq[k],
                self.output_norm[k],
                self.control_l2[k],
                self.control_linf[k],
                self.feasibility_margin[k],
                energy
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub final_state: StateVector,
    pub steps_taken: usize,
}

/// Number of steps needed to reach `horizon` with step `dt`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) - 1e-9).ceil().max(1.0) as usize
}

pub fn simulate(
    scheme: &StepScheme,
    cl: &ClosedLoop,
    x0: &StateVector,
    horizon: f64,
    sample_every: usize,
) -> Result<Simulation> {
    simulate_observed(scheme, cl, x0, horizon, sample_every, |_, _, _| {})
}

/// Like [`simulate`], calling `observer(k, t_k, x_k)` after every step
/// (and once for the initial state).
///
/// A solver failure mid-run truncates the trajectory and sets its `error`.
pub fn simulate_observed(
    scheme: &StepScheme,
    cl: &ClosedLoop,
    x0: &StateVector,
    horizon: f64,
    sample_every: usize,
    mut observer: impl FnMut(usize, f64, &StateVector),
) -> Result<Simulation> {
    if !(horizon > 0.0) {
        return Err(Error::Usage(format!("horizon must be positive, got {horizon}")));
    }
    if sample_every == 0 {
        return Err(Error::Usage("sample_every must be at least 1".into()));
    }
    if !cl.system().is_admissible(x0) {
        return Err(Error::Domain("initial state is outside the domain".into()));
    }
    let steps = step_count(horizon, scheme.dt);
    let mut traj = Trajectory::default();
    let mut x = x0.clone();
    traj.record(cl, 0.0, &x)?;
    observer(0, 0.0, &x);
    let mut taken = 0;
    for k in 1..=steps {
        let t = k as f64 * scheme.dt;
        match step(scheme, cl, &x) {
            Ok(next) => x = next,
            Err(e @ Error::Convergence { .. }) => {
                traj.error = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
        taken = k;
        observer(k, t, &x);
        if k % sample_every == 0 || k == steps {
            traj.record(cl, t, &x)?;
        }
    }
    Ok(Simulation {
        trajectory: traj,
        final_state: x,
        steps_taken: taken,
    })
}
