//! Planar nonlinear system `ẋ = −∇Ψ(x) − J(x − x★) + (1, 0)ᵀu`, `y = x₁`,
//! with `Ψ(x) = ε·√(1 + ‖x − x★‖²)` and `J = [[0, 1], [−1, 0]]`.
//!
//! The operator is `M(x) = ∇Ψ(x) + J(x − x★)`; it collects the negated drift,
//! which is why `J` carries the opposite sign of the rotation in the state
//! equation.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::{InnerProduct, StateVector};
use crate::projection::ConstraintSet;
use crate::system::{ClosedLoop, Equilibrium, MonotoneControlSystem};
use crate::SampleRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fd2Params {
    pub x_star: [f64; 2],
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub x0: [f64; 2],
}

impl Default for Fd2Params {
    fn default() -> Self {
        Fd2Params {
            x_star: [-1.0, 1.5],
            epsilon: 0.01,
            a: -0.7,
            b: 0.9,
            x0: [2.0, -3.0],
        }
    }
}

impl Fd2Params {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .x_star
            .iter()
            .chain(self.x0.iter())
            .chain([self.epsilon, self.a, self.b].iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("fd2 parameters must be finite".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("fd2.epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.a < 0.0 && 0.0 < self.b) {
            return Err(Error::Config(format!(
                "fd2 bounds must satisfy a < 0 < b, got [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::dense(&self.x0).expect("validated parameters are finite")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fd2System {
    x_star: [f64; 2],
    epsilon: f64,
}

fn pair(x: &StateVector) -> Result<[f64; 2]> {
    match x.as_dense().map(|v| v.entries()) {
        Some(&[a, b]) => Ok([a, b]),
        _ => Err(Error::Structural(format!(
            "fd2 expects a 2-vector, got {}",
            x.kind_name()
        ))),
    }
}

fn scalar(x: &StateVector) -> Result<f64> {
    match x.as_dense().map(|v| v.entries()) {
        Some(&[a]) => Ok(a),
        _ => Err(Error::Structural("fd2 control must be a 1-vector".into())),
    }
}

impl Fd2System {
    pub fn new(x_star: [f64; 2], epsilon: f64) -> Self {
        Fd2System { x_star, epsilon }
    }

    pub fn grad_psi(&self, x: [f64; 2]) -> [f64; 2] {
        let z = [x[0] - self.x_star[0], x[1] - self.x_star[1]];
        let s = self.epsilon / (1.0 + z[0] * z[0] + z[1] * z[1]).sqrt();
        [s * z[0], s * z[1]]
    }

    fn m(&self, x: [f64; 2]) -> [f64; 2] {
        let z = [x[0] - self.x_star[0], x[1] - self.x_star[1]];
        let g = self.grad_psi(x);
        [g[0] + z[1], g[1] - z[0]]
    }

    /// Exact resolvent `(I + hM)⁻¹`.
    ///
    /// With `z = x − x★` and `s = rhs − x★` the equation reads
    /// `(c(‖z‖)·I + hJ) z = s`, `c(ρ) = 1 + hε/√(1 + ρ²)`. `cI + hJ` is a
    /// scaled rotation, so `ρ = ‖z‖` solves the scalar equation
    /// `ρ·√(c(ρ)² + h²) = ‖s‖`, whose left side is strictly increasing.
    fn resolvent(&self, h: f64, rhs: [f64; 2]) -> [f64; 2] {
        let s = [rhs[0] - self.x_star[0], rhs[1] - self.x_star[1]];
        let target = s[0].hypot(s[1]);
        let he = h * self.epsilon;
        let c_of = |rho: f64| 1.0 + he / (1.0 + rho * rho).sqrt();
        let g = |rho: f64| {
            let q = rho * c_of(rho);
            ((q * q + h * h * rho * rho).sqrt() - target, q)
        };

        let mut lo = 0.0;
        let mut hi = target;
        let mut rho = target / (1.0 + h * h).sqrt();
        for _ in 0..100 {
            let (val, q) = g(rho);
            if val > 0.0 {
                hi = rho;
            } else {
                lo = rho;
            }
            let dq = 1.0 + he / (1.0 + rho * rho).powf(1.5);
            let norm = val + target;
            let deriv = if norm > 0.0 {
                (q * dq + h * h * rho) / norm
            } else {
                (1.0 + he) * (1.0 + h * h).sqrt()
            };
            let mut next = rho - val / deriv;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - rho).abs() <= 1e-16 * rho.max(1.0) {
                rho = next;
                break;
            }
            rho = next;
        }
        let c = c_of(rho);
        let det = c * c + h * h;
        [
            self.x_star[0] + (c * s[0] - h * s[1]) / det,
            self.x_star[1] + (h * s[0] + c * s[1]) / det,
        ]
    }
}

impl MonotoneControlSystem for Fd2System {
    fn name(&self) -> &str {
        "fd2"
    }

    fn state_ip(&self) -> InnerProduct {
        InnerProduct::Euclidean
    }

    fn control_ip(&self) -> InnerProduct {
        InnerProduct::Euclidean
    }

    fn eval_m(&self, x: &StateVector) -> Result<StateVector> {
        StateVector::dense(&self.m(pair(x)?))
    }

    fn resolvent_m(&self, h: f64, rhs: &StateVector, _: Option<&StateVector>) -> Result<StateVector> {
        if !(h > 0.0) {
            return Err(Error::Usage(format!("resolvent step must be positive, got {h}")));
        }
        StateVector::dense(&self.resolvent(h, pair(rhs)?))
    }

    fn apply_b(&self, u: &StateVector) -> Result<StateVector> {
        StateVector::dense(&[scalar(u)?, 0.0])
    }

    fn apply_bstar(&self, x: &StateVector) -> Result<StateVector> {
        StateVector::dense(&[pair(x)?[0]])
    }

    fn is_admissible(&self, x: &StateVector) -> bool {
        pair(x).is_ok()
    }

    fn sample_state(&self, rng: &mut SampleRng) -> StateVector {
        let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        StateVector::dense(&[self.x_star[0] + 3.0 * z[0], self.x_star[1] + 3.0 * z[1]])
            .expect("finite sample")
    }

    fn sample_control(&self, rng: &mut SampleRng) -> StateVector {
        StateVector::dense(&[rng.random_range(-10.0..10.0)]).expect("finite sample")
    }
}

/// Builds the closed loop around `(x★, 0)` with `F = [a, b]`.
pub fn build_fd2(p: &Fd2Params) -> Result<ClosedLoop> {
    p.validate()?;
    let sys = Fd2System::new(p.x_star, p.epsilon);
    ClosedLoop::new(
        Arc::new(sys),
        ConstraintSet::interval(p.a, p.b)?,
        Equilibrium {
            x_star: StateVector::dense(&p.x_star)?,
            u_star: StateVector::dense(&[0.0])?,
            residual_tol: 1e-14,
        },
    )
}
