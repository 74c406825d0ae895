//! Closed convex control sets with exact orthogonal projection.

use crate::error::{Error, Result};
use crate::hilbert::{inner, norm, InnerProduct, StateVector};

/// Default strict margin used when certifying that a control is interior.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `lower ≤ u(ω) ≤ upper` at every point of the control space.
    IntervalBox,
}

/// A pointwise interval box `{u : lower ≤ u ≤ upper}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    kind: ConstraintKind,
    lower: f64,
    upper: f64,
}

impl ConstraintSet {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::Config(format!(
                "interval bounds must be finite with lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(ConstraintSet {
            kind: ConstraintKind::IntervalBox,
            lower,
            upper,
        })
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    /// Orthogonal projection: pointwise clamp. Exterior grid nodes are not
    /// part of the control space and stay at zero.
    pub fn project(&self, u: &StateVector) -> StateVector {
        u.map(|v| self.clamp(v))
    }

    fn active_values<'a>(u: &'a StateVector) -> Box<dyn Iterator<Item = f64> + 'a> {
        match u {
            StateVector::Grid(g) => Box::new(
                g.values()
                    .iter()
                    .zip(g.grid().mask())
                    .filter(|(_, k)| k.is_active())
                    .map(|(v, _)| *v),
            ),
            other => other.components(),
        }
    }

    pub fn contains(&self, u: &StateVector) -> bool {
        Self::active_values(u).all(|v| self.lower <= v && v <= self.upper)
    }

    /// `lower + δ ≤ u ≤ upper − δ` everywhere.
    pub fn is_interior(&self, u: &StateVector, delta: f64) -> bool {
        Self::active_values(u).all(|v| self.lower + delta <= v && v <= self.upper - delta)
    }

    /// Smallest distance of any control value to the nearer bound. Negative
    /// when `u` leaves the set. `+∞` for an empty control space.
    pub fn feasibility_margin(&self, u: &StateVector) -> f64 {
        Self::active_values(u).fold(f64::INFINITY, |m, v| {
            m.min(v - self.lower).min(self.upper - v)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmNonexpansiveReport {
    pub pairs: usize,
    /// `min ⟨Pu − Pv, u − v⟩ − ‖Pu − Pv‖²` over all pairs.
    pub min_slack: f64,
    pub violations: usize,
}

/// Checks `⟨Pu − Pv, u − v⟩ ≥ ‖Pu − Pv‖²` on every pair.
pub fn check_firm_nonexpansive<I>(
    set: &ConstraintSet,
    pairs: I,
    ip: InnerProduct,
) -> Result<FirmNonexpansiveReport>
where
    I: IntoIterator<Item = (StateVector, StateVector)>,
{
    let mut report = FirmNonexpansiveReport {
        pairs: 0,
        min_slack: f64::INFINITY,
        violations: 0,
    };
    for (u, v) in pairs {
        let pu = set.project(&u);
        let pv = set.project(&v);
        let dp = pu.sub(&pv)?;
        let d = u.sub(&v)?;
        let slack = inner(&dp, &d, ip)? - inner(&dp, &dp, ip)?;
        let scale = 1f64.max(norm(&u, ip)? * norm(&v, ip)?);
        if slack < -1e-12 * scale {
            report.violations += 1;
        }
        report.min_slack = report.min_slack.min(slack);
        report.pairs += 1;
    }
    if report.pairs == 0 {
        return Err(Error::Usage("firm nonexpansiveness check needs at least one pair".into()));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// Pairs with `u = v`, which carry no ratio.
    pub skipped: usize,
    pub max_ratio: f64,
}

impl LipschitzReport {
    pub fn passes(&self) -> bool {
        self.max_ratio <= 1.0 + 1e-12
    }
}

/// Largest observed `‖Pu − Pv‖ / ‖u − v‖`.
pub fn check_lipschitz<I>(set: &ConstraintSet, pairs: I, ip: InnerProduct) -> Result<LipschitzReport>
where
    I: IntoIterator<Item = (StateVector, StateVector)>,
{
    let mut report = LipschitzReport {
        pairs: 0,
        skipped: 0,
        max_ratio: 0.0,
    };
    for (u, v) in pairs {
        let d = norm(&u.sub(&v)?, ip)?;
        if d == 0.0 {
            report.skipped += 1;
            continue;
        }
        let dp = norm(&set.project(&u).sub(&set.project(&v))?, ip)?;
        report.max_ratio = report.max_ratio.max(dp / d);
        report.pairs += 1;
    }
    if report.pairs + report.skipped == 0 {
        return Err(Error::Usage("Lipschitz check needs at least one pair".into()));
    }
    Ok(report)
}
