//! Maximal monotone control systems `ẋ = −M(x) + Bu, y = B*x`, the saturated
//! output feedback `u = P_F(u★ − (y − y★))` and the closed-loop operator
//! `M_cl(x) = M(x) − B P_F(u★ − B*(x − x★))`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{inner, norm, InnerProduct, StateVector};
use crate::projection::{ConstraintSet, DEFAULT_INTERIOR_MARGIN};
use crate::SampleRng;

/// A monotone operator `M` with its resolvent, a bounded input operator `B`
/// and the colocated output `B*`.
///
/// Implementations are immutable after construction and safe to share
/// across threads.
pub trait MonotoneControlSystem: Debug + Send + Sync {
    fn name(&self) -> &str;

    /// Inner product of the state space `X`.
    fn state_ip(&self) -> InnerProduct;

    /// Inner product of the control space `U`.
    fn control_ip(&self) -> InnerProduct;

    fn eval_m(&self, x: &StateVector) -> Result<StateVector>;

    /// Solves `x + h·M(x) = rhs`. `guess` may warm-start an iterative solve.
    fn resolvent_m(
        &self,
        h: f64,
        rhs: &StateVector,
        guess: Option<&StateVector>,
    ) -> Result<StateVector>;

    fn apply_b(&self, u: &StateVector) -> Result<StateVector>;

    fn apply_bstar(&self, x: &StateVector) -> Result<StateVector>;

    /// `‖B‖ = ‖B*‖`.
    fn input_norm(&self) -> f64 {
        1.0
    }

    /// Domain descriptor: whether `x` belongs to the discrete domain of `M`.
    fn is_admissible(&self, x: &StateVector) -> bool;

    /// Physical energy, for systems that have one distinct from `½‖x‖²`.
    fn energy(&self, _x: &StateVector) -> Option<f64> {
        None
    }

    /// Random admissible state, used by the property checks.
    fn sample_state(&self, rng: &mut SampleRng) -> StateVector;

    /// Random control-space element (not necessarily feasible).
    fn sample_control(&self, rng: &mut SampleRng) -> StateVector;
}

/// Controlled equilibrium `(x★, u★)` with `−M(x★) + Bu★ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x_star: StateVector,
    pub u_star: StateVector,
    pub residual_tol: f64,
}

/// `‖−M(x★) + Bu★‖` in the state norm.
pub fn equilibrium_residual(
    sys: &dyn MonotoneControlSystem,
    x_star: &StateVector,
    u_star: &StateVector,
) -> Result<f64> {
    if !sys.is_admissible(x_star) {
        return Err(Error::Domain(format!("x★ is outside the domain of {}", sys.name())));
    }
    let r = sys.apply_b(u_star)?.sub(&sys.eval_m(x_star)?)?;
    norm(&r, sys.state_ip())
}

/// `P_F(u★ − (y − y★))`.
pub fn saturated_feedback(
    y: &StateVector,
    eq: &Equilibrium,
    set: &ConstraintSet,
    y_star: &StateVector,
) -> Result<StateVector> {
    let arg = eq.u_star.sub(&y.sub(y_star)?)?;
    Ok(set.project(&arg))
}

/// The closed loop of a system with the saturated feedback around an
/// equilibrium.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    system: Arc<dyn MonotoneControlSystem>,
    constraint: ConstraintSet,
    equilibrium: Equilibrium,
    y_star: StateVector,
}

impl ClosedLoop {
    /// Validates the equilibrium residual and that `u★` is strictly interior
    /// to the constraint set.
    pub fn new(
        system: Arc<dyn MonotoneControlSystem>,
        constraint: ConstraintSet,
        equilibrium: Equilibrium,
    ) -> Result<Self> {
        let residual = equilibrium_residual(system.as_ref(), &equilibrium.x_star, &equilibrium.u_star)?;
        if residual > equilibrium.residual_tol {
            return Err(Error::Config(format!(
                "equilibrium residual {residual:e} exceeds tolerance {:e}",
                equilibrium.residual_tol
            )));
        }
        if !constraint.is_interior(&equilibrium.u_star, DEFAULT_INTERIOR_MARGIN) {
            return Err(Error::Config("u★ is not strictly interior to F".into()));
        }
        let y_star = system.apply_bstar(&equilibrium.x_star)?;
        Ok(ClosedLoop {
            system,
            constraint,
            equilibrium,
            y_star,
        })
    }

    pub fn system(&self) -> &dyn MonotoneControlSystem {
        self.system.as_ref()
    }

    pub fn system_arc(&self) -> &Arc<dyn MonotoneControlSystem> {
        &self.system
    }

    pub fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.equilibrium
    }

    pub fn x_star(&self) -> &StateVector {
        &self.equilibrium.x_star
    }

    pub fn y_star(&self) -> &StateVector {
        &self.y_star
    }

    pub fn state_ip(&self) -> InnerProduct {
        self.system.state_ip()
    }

    /// Feedback value for output `y`.
    pub fn feedback(&self, y: &StateVector) -> Result<StateVector> {
        saturated_feedback(y, &self.equilibrium, &self.constraint, &self.y_star)
    }

    /// Control applied at state `x`.
    pub fn control_at(&self, x: &StateVector) -> Result<StateVector> {
        self.feedback(&self.system.apply_bstar(x)?)
    }

    /// `‖x − x★‖` in the state norm.
    pub fn distance_to_equilibrium(&self, x: &StateVector) -> Result<f64> {
        norm(&x.sub(&self.equilibrium.x_star)?, self.state_ip())
    }
}

/// `M_cl(x) = M(x) − B·P_F(u★ − B*(x − x★))`.
pub fn eval_m_cl(cl: &ClosedLoop, x: &StateVector) -> Result<StateVector> {
    let sys = cl.system();
    if cfg!(debug_assertions) && !sys.is_admissible(x) {
        return Err(Error::Domain(format!("state is outside the domain of {}", sys.name())));
    }
    let u = cl.control_at(x)?;
    sys.eval_m(x)?.sub(&sys.apply_b(&u)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneReport {
    pub pairs: usize,
    /// Sampled states rejected by the domain predicate.
    pub skipped: usize,
    /// `min ⟨op(x) − op(z), x − z⟩`.
    pub min_pairing: f64,
    /// Pairs with pairing below `−1e−10·max(1, ‖x‖‖z‖)`.
    pub violations: usize,
}

impl MonotoneReport {
    pub fn passes(&self) -> bool {
        self.violations == 0 && self.pairs > 0
    }
}

/// Samples `n` admissible pairs and records the smallest monotonicity
/// pairing of `op`.
pub fn check_monotone(
    op: impl Fn(&StateVector) -> Result<StateVector>,
    ip: InnerProduct,
    mut sampler: impl FnMut() -> StateVector,
    admissible: impl Fn(&StateVector) -> bool,
    n: usize,
) -> Result<MonotoneReport> {
    if n < 2 {
        return Err(Error::Usage("monotonicity check needs n ≥ 2".into()));
    }
    let mut report = MonotoneReport {
        pairs: 0,
        skipped: 0,
        min_pairing: f64::INFINITY,
        violations: 0,
    };
    // Bounded retries so a sampler that never yields admissible states ends.
    let mut attempts = 0;
    while report.pairs < n && attempts < 4 * n {
        attempts += 1;
        let x = sampler();
        let z = sampler();
        if !admissible(&x) || !admissible(&z) {
            report.skipped += 1;
            continue;
        }
        let pairing = inner(&op(&x)?.sub(&op(&z)?)?, &x.sub(&z)?, ip)?;
        let scale = 1f64.max(norm(&x, ip)? * norm(&z, ip)?);
        if pairing < -1e-10 * scale {
            report.violations += 1;
        }
        report.min_pairing = report.min_pairing.min(pairing);
        report.pairs += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub direction: usize,
    pub magnitude: f64,
    /// `‖M_cl(x★ + m·v)‖`.
    pub residual: f64,
}

/// Evaluates `‖M_cl‖` along `x★ + m·v` for directions `v ∈ ker B*`.
///
/// Zeros of `M_cl` can only lie in `x★ + ker B*`; this walks that affine set
/// and reports how far from zero the operator is.
pub fn zer_inclusion_probe(
    cl: &ClosedLoop,
    directions: &[StateVector],
    magnitudes: &[f64],
) -> Result<Vec<ProbeRow>> {
    let sys = cl.system();
    let mut rows = Vec::with_capacity(directions.len() * magnitudes.len());
    for (d, v) in directions.iter().enumerate() {
        let bv = norm(&sys.apply_bstar(v)?, sys.control_ip())?;
        if bv > 1e-12 {
            return Err(Error::Usage(format!(
                "probe direction {d} is not in ker B* (‖B*v‖ = {bv:e})"
            )));
        }
        for &m in magnitudes {
            let x = crate::hilbert::axpy(m, v, cl.x_star())?;
            let r = norm(&eval_m_cl(cl, &x)?, sys.state_ip())?;
            rows.push(ProbeRow {
                direction: d,
                magnitude: m,
                residual: r,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar `M(x) = x`, `B = 1`, used to exercise the generic machinery.
    #[derive(Debug)]
    struct Scalar;

    impl MonotoneControlSystem for Scalar {
        fn name(&self) -> &str {
            "scalar"
        }
        fn state_ip(&self) -> InnerProduct {
            InnerProduct::Euclidean
        }
        fn control_ip(&self) -> InnerProduct {
            InnerProduct::Euclidean
        }
        fn eval_m(&self, x: &StateVector) -> Result<StateVector> {
            Ok(x.clone())
        }
        fn resolvent_m(&self, h: f64, rhs: &StateVector, _: Option<&StateVector>) -> Result<StateVector> {
            Ok(rhs.scaled(1.0 / (1.0 + h)))
        }
        fn apply_b(&self, u: &StateVector) -> Result<StateVector> {
            Ok(u.clone())
        }
        fn apply_bstar(&self, x: &StateVector) -> Result<StateVector> {
            Ok(x.clone())
        }
        fn is_admissible(&self, x: &StateVector) -> bool {
            x.as_dense().is_some_and(|v| v.len() == 1)
        }
        fn sample_state(&self, rng: &mut SampleRng) -> StateVector {
            use rand::Rng;
            StateVector::dense(&[rng.random_range(-3.0..3.0)]).unwrap()
        }
        fn sample_control(&self, rng: &mut SampleRng) -> StateVector {
            self.sample_state(rng)
        }
    }

    fn s(v: f64) -> StateVector {
        StateVector::dense(&[v]).unwrap()
    }

    fn scalar_loop(x_star: f64) -> ClosedLoop {
        ClosedLoop::new(
            Arc::new(Scalar),
            ConstraintSet::interval(-1.0, 2.0).unwrap(),
            Equilibrium {
                x_star: s(x_star),
                u_star: s(x_star),
                residual_tol: 1e-14,
            },
        )
        .unwrap()
    }

    #[test]
    fn feedback_at_equilibrium_output_is_u_star() {
        let cl = scalar_loop(0.5);
        assert_eq!(cl.feedback(cl.y_star()).unwrap(), s(0.5));
        assert!(norm(&eval_m_cl(&cl, &s(0.5)).unwrap(), InnerProduct::Euclidean).unwrap() <= 1e-14);
    }

    #[test]
    fn rejects_bad_equilibria() {
        let bad_residual = ClosedLoop::new(
            Arc::new(Scalar),
            ConstraintSet::interval(-1.0, 2.0).unwrap(),
            Equilibrium {
                x_star: s(0.5),
                u_star: s(0.0),
                residual_tol: 1e-12,
            },
        );
        assert!(matches!(bad_residual, Err(Error::Config(_))));
        let on_boundary = ClosedLoop::new(
            Arc::new(Scalar),
            ConstraintSet::interval(-1.0, 2.0).unwrap(),
            Equilibrium {
                x_star: s(2.0),
                u_star: s(2.0),
                residual_tol: 1e-12,
            },
        );
        assert!(matches!(on_boundary, Err(Error::Config(_))));
    }

    #[test]
    fn closed_loop_composes_bitwise() {
        let cl = scalar_loop(0.5);
        for x in [-4.0, -0.3, 0.5, 1.7, 9.0] {
            let x = s(x);
            let direct = eval_m_cl(&cl, &x).unwrap();
            let y = cl.system().apply_bstar(&x).unwrap();
            let u = saturated_feedback(&y, cl.equilibrium(), cl.constraint(), cl.y_star()).unwrap();
            let composed = cl
                .system()
                .eval_m(&x)
                .unwrap()
                .sub(&cl.system().apply_b(&u).unwrap())
                .unwrap();
            assert_eq!(direct, composed);
        }
    }

    #[test]
    fn monotone_check_on_identity() {
        let mut vals = [1.0, 4.0, -2.0, -2.5].into_iter().cycle();
        let r = check_monotone(
            |x| Ok(x.clone()),
            InnerProduct::Euclidean,
            || s(vals.next().unwrap()),
            |_| true,
            2,
        )
        .unwrap();
        assert_eq!(r.pairs, 2);
        assert_eq!(r.min_pairing, 0.25);
        assert!(r.passes());
        assert!(check_monotone(|x| Ok(x.clone()), InnerProduct::Euclidean, || s(0.0), |_| true, 1).is_err());
    }

    #[test]
    fn monotone_check_flags_decreasing_op_and_skips_inadmissible() {
        let mut k = 0.0;
        let r = check_monotone(
            |x| Ok(x.scaled(-1.0)),
            InnerProduct::Euclidean,
            || {
                k += 1.0;
                s(k)
            },
            |x| x.as_dense().unwrap().entries()[0] as i64 % 3 != 0,
            10,
        )
        .unwrap();
        assert!(r.violations > 0);
        assert!(r.skipped > 0);
        assert!(!r.passes());
    }

    #[test]
    fn probe_rejects_directions_outside_kernel() {
        let cl = scalar_loop(0.5);
        assert!(matches!(
            zer_inclusion_probe(&cl, &[s(1.0)], &[0.0]),
            Err(Error::Usage(_))
        ));
        let rows = zer_inclusion_probe(&cl, &[s(0.0)], &[0.0, 1.0]).unwrap();
        assert!(rows.iter().all(|r| r.residual <= 1e-14));
    }
}
