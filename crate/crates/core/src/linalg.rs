//! Conjugate gradients in a weighted inner product.
//!
//! The grid operators here (Neumann and Dirichlet Laplacians, their shifts)
//! are self-adjoint in the quadrature-weighted inner product, not in the
//! plain Euclidean one, so CG runs with `⟨a, b⟩ = Σ wᵢ aᵢ bᵢ`. Nodes with zero
//! weight are not degrees of freedom; `apply` must leave them at zero.

use crate::error::{Error, Result};
use crate::hilbert::weighted_dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Stop once `‖r‖ ≤ tol·‖b‖` in the weighted norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        CgSettings {
            tol: 1e-13,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// `project`, when given, is applied to the right-hand side, the initial
/// guess and every residual. It keeps the iteration on an invariant subspace
/// (the zero-mean fields for a singular Neumann system).
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    weights: &[f64],
    settings: CgSettings,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<CgOutcome> {
    preconditioned_cg(apply, |r, z| z.copy_from_slice(r), b, x, weights, settings, project)
}

/// Conjugate gradients with preconditioner `z = P r`; `P` must be
/// self-adjoint and positive definite in the weighted inner product.
pub fn preconditioned_cg(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    weights: &[f64],
    settings: CgSettings,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<CgOutcome> {
    let n = b.len();
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(weights.len(), n);

    let mut rhs = b.to_vec();
    if let Some(p) = project {
        p(&mut rhs);
        p(x);
    }
    let b_norm = weighted_dot(weights, &rhs, &rhs).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    let mut r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
    if let Some(p) = project {
        p(&mut r);
    }
    let target = settings.tol * b_norm;
    let mut r_norm = weighted_dot(weights, &r, &r).sqrt();
    if r_norm <= target {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: r_norm / b_norm,
        });
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    if let Some(p) = project {
        p(&mut z);
    }
    let mut rz = weighted_dot(weights, &r, &z);
    let mut p = z.clone();

    for it in 1..=settings.max_iter {
        apply(&p, &mut ap);
        let pap = weighted_dot(weights, &p, &ap);
        if pap <= 0.0 || rz <= 0.0 {
            return Err(Error::Convergence {
                solver: "conjugate gradients (loss of positivity)",
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(proj) = project {
            proj(&mut r);
        }
        r_norm = weighted_dot(weights, &r, &r).sqrt();
        if r_norm <= target {
            if let Some(proj) = project {
                proj(x);
            }
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: r_norm / b_norm,
            });
        }
        precondition(&r, &mut z);
        if let Some(proj) = project {
            proj(&mut z);
        }
        let rz_new = weighted_dot(weights, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence {
        solver: "conjugate gradients",
        iterations: settings.max_iter,
        residual: r_norm / b_norm,
    })
}
