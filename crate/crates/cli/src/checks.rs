//! `monostab check`: sampled property suites over the three example systems.

use std::str::FromStr;

use rand::SeedableRng;
use rayon::prelude::*;

use monostab_core::integrators::{resolvent_solve, step, SchemeKind, SolverSettings, StepScheme};
use monostab_core::models::heat::{self, ControlBox, HeatParams, HeatSystem};
use monostab_core::models::{fd2, wave};
use monostab_core::projection::{check_firm_nonexpansive, check_lipschitz};
use monostab_core::report::CheckRecord;
use monostab_core::system::{check_monotone, eval_m_cl};
use monostab_core::{inner, norm, ClosedLoop, Error, Result, SampleRng};

/// Committed audit copies of the default masks.
pub const GOLDEN_DOGBONE_MASK: &str = include_str!("../golden/dogbone_n20_mask.csv");
pub const GOLDEN_HEAT_MASK: &str = include_str!("../golden/heat_n65_mask.csv");

pub const PAIRS: usize = 10_000;
pub const RESOLVENT_PAIRS: usize = 1_000;
pub const RESOLVENT_STEPS: [f64; 3] = [1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Projection,
    Monotone,
    Resolvent,
    Lyapunov,
    Geometry,
    Coercivity,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Projection,
        Suite::Monotone,
        Suite::Resolvent,
        Suite::Lyapunov,
        Suite::Geometry,
        Suite::Coercivity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Projection => "projection",
            Suite::Monotone => "monotone",
            Suite::Resolvent => "resolvent",
            Suite::Lyapunov => "lyapunov",
            Suite::Geometry => "geometry",
            Suite::Coercivity => "coercivity",
        }
    }

    /// Per-suite stream so a suite draws the same samples alone or inside
    /// `check all`, whatever the thread count.
    pub fn seed(self, seed: u64) -> u64 {
        let idx = Suite::ALL.iter().position(|s| *s == self).unwrap() as u64;
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx + 1)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

/// The three default closed loops.
pub fn default_systems() -> Result<Vec<ClosedLoop>> {
    Ok(vec![
        fd2::build_fd2(&fd2::Fd2Params::default())?,
        heat::build_heat(&HeatParams::default())?,
        wave::build_wave(&wave::DogboneGeometry::default(), wave::DEFAULT_RESOLUTION)?,
    ])
}

pub fn run_suite(suite: Suite, seed: u64, systems: &[ClosedLoop]) -> Result<Vec<CheckRecord>> {
    let mut rng = SampleRng::seed_from_u64(suite.seed(seed));
    match suite {
        Suite::Projection => projection(&mut rng, systems),
        Suite::Monotone => monotone(&mut rng, systems),
        Suite::Resolvent => resolvent(&mut rng, systems),
        Suite::Lyapunov => lyapunov(&mut rng, systems),
        Suite::Geometry => geometry(),
        Suite::Coercivity => coercivity(),
    }
}

/// Runs `suites` on a pool of `threads` workers; records come back in suite
/// order.
pub fn run_suites(suites: &[Suite], seed: u64, threads: usize) -> Result<Vec<CheckRecord>> {
    let systems = default_systems()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let results: Vec<Result<Vec<CheckRecord>>> =
        pool.install(|| suites.par_iter().map(|s| run_suite(*s, seed, &systems)).collect());
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn rec(check: &str, system: &str, statistic: &str, value: f64, pass: bool) -> CheckRecord {
    CheckRecord::new(check, system, statistic, value, pass)
}

fn projection(rng: &mut SampleRng, systems: &[ClosedLoop]) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for cl in systems {
        let sys = cl.system();
        let name = sys.name();
        let ip = sys.control_ip();
        let set = cl.constraint();
        // Both checks see the same pairs, drawn lazily from a cloned stream.
        let mut r1 = rng.clone();
        let pairs1 = (0..PAIRS).map(|_| (sys.sample_control(&mut r1), sys.sample_control(&mut r1)));
        let firm = check_firm_nonexpansive(set, pairs1, ip)?;
        let pairs2 = (0..PAIRS).map(|_| (sys.sample_control(rng), sys.sample_control(rng)));
        let lip = check_lipschitz(set, pairs2, ip)?;
        out.push(rec("projection", name, "firm_min_slack", firm.min_slack, firm.violations == 0));
        out.push(rec("projection", name, "firm_violations", firm.violations as f64, firm.violations == 0));
        out.push(rec("projection", name, "lipschitz_max_ratio", lip.max_ratio, lip.passes()));
    }
    Ok(out)
}

fn monotone(rng: &mut SampleRng, systems: &[ClosedLoop]) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for cl in systems {
        let sys = cl.system();
        let name = sys.name();
        let ip = sys.state_ip();
        let open = check_monotone(
            |x| sys.eval_m(x),
            ip,
            || sys.sample_state(rng),
            |x| sys.is_admissible(x),
            PAIRS,
        )?;
        out.push(rec("monotone", name, "m_min_pairing", open.min_pairing, open.passes()));
        out.push(rec("monotone", name, "m_violations", open.violations as f64, open.passes()));
        let closed = check_monotone(
            |x| eval_m_cl(cl, x),
            ip,
            || sys.sample_state(rng),
            |x| sys.is_admissible(x),
            PAIRS,
        )?;
        out.push(rec("monotone", name, "m_cl_min_pairing", closed.min_pairing, closed.passes()));
        out.push(rec("monotone", name, "m_cl_violations", closed.violations as f64, closed.passes()));
    }
    Ok(out)
}

fn resolvent(rng: &mut SampleRng, systems: &[ClosedLoop]) -> Result<Vec<CheckRecord>> {
    let settings = SolverSettings::default();
    let mut out = Vec::new();
    for cl in systems {
        let sys = cl.system();
        let name = sys.name();
        let ip = sys.state_ip();
        for h in RESOLVENT_STEPS {
            let mut worst = f64::NEG_INFINITY;
            let mut violations = 0usize;
            // Consecutive samples form the pairs, so each solve is used twice.
            let mut a = sys.sample_state(rng);
            let mut ra = resolvent_solve(cl, h, &a, &settings)?;
            for _ in 0..RESOLVENT_PAIRS {
                let b = sys.sample_state(rng);
                let rb = resolvent_solve(cl, h, &b, &settings)?;
                let scale = 1f64.max(norm(&a, ip)?).max(norm(&b, ip)?);
                let excess = (norm(&ra.sub(&rb)?, ip)? - norm(&a.sub(&b)?, ip)?) / scale;
                if excess > 1e-10 {
                    violations += 1;
                }
                worst = worst.max(excess);
                (a, ra) = (b, rb);
            }
            let stat = format!("nonexpansive_max_excess_h{h:e}");
            out.push(rec("resolvent", name, &stat, worst, violations == 0));
            let fixed = norm(&resolvent_solve(cl, h, cl.x_star(), &settings)?.sub(cl.x_star())?, ip)?;
            out.push(rec("resolvent", name, &format!("fixed_point_h{h:e}"), fixed, fixed <= 1e-8));
        }
    }
    Ok(out)
}

/// Default time step and a short run length for the discrete decrease check.
fn lyapunov_steps(name: &str) -> (f64, usize) {
    match name {
        "fd2" => (1e-2, 200),
        _ => (1e-3, 50),
    }
}

fn lyapunov(rng: &mut SampleRng, systems: &[ClosedLoop]) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for cl in systems {
        let sys = cl.system();
        let name = sys.name();
        let ip = sys.state_ip();
        let mut max_pairing = f64::NEG_INFINITY;
        let (mut violations, mut not_strict) = (0usize, 0usize);
        for _ in 0..PAIRS {
            let x = sys.sample_state(rng);
            let z = x.sub(cl.x_star())?;
            let p = -inner(&z, &eval_m_cl(cl, &x)?, ip)?;
            let d = norm(&z, ip)?;
            let scale = 1f64.max(d * d);
            if p > 1e-12 * scale {
                violations += 1;
            }
            if d > 1e-6 && p >= -1e-12 {
                not_strict += 1;
            }
            max_pairing = max_pairing.max(p / scale);
        }
        out.push(rec("lyapunov", name, "max_scaled_derivative", max_pairing, violations == 0));
        out.push(rec("lyapunov", name, "non_strict_samples", not_strict as f64, not_strict == 0));

        let (dt, steps) = lyapunov_steps(name);
        let scheme = StepScheme::new(SchemeKind::Proximal, dt)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..3 {
            let mut x = sys.sample_state(rng);
            let mut d = cl.distance_to_equilibrium(&x)?;
            for _ in 0..steps {
                x = step(&scheme, cl, &x)?;
                let next = cl.distance_to_equilibrium(&x)?;
                worst = worst.max((next - d) / 1f64.max(d));
                d = next;
            }
        }
        out.push(rec("lyapunov", name, "proximal_max_scaled_increase", worst, worst <= 1e-10));
    }
    Ok(out)
}

pub fn default_dogbone_mask_csv() -> Result<String> {
    let sys = wave::WaveSystem::new(wave::DogboneGeometry::default(), wave::DEFAULT_RESOLUTION)?;
    Ok(wave::mask_csv(sys.grid(), &sys.control_keep()))
}

pub fn default_heat_mask_csv() -> Result<String> {
    let p = HeatParams::default();
    let sys = HeatSystem::new(p.n, p.omega_c)?;
    let keep: Vec<bool> = sys.control_grid().mask().iter().map(|k| k.is_active()).collect();
    Ok(wave::mask_csv(sys.grid(), &keep))
}

fn geometry() -> Result<Vec<CheckRecord>> {
    let g = wave::DogboneGeometry::default();
    let sys = wave::WaveSystem::new(g, wave::DEFAULT_RESOLUTION)?;
    let heat_p = HeatParams::default();
    let heat_sys = HeatSystem::new(heat_p.n, heat_p.omega_c)?;
    let (w, eps, d, r) = (g.neck_half_width, g.collar, g.center_offset, g.radius);
    let points_ok = g.contains(0.0, 0.0)
        && g.contains(-d, 0.0)
        && !g.contains(0.0, w + eps)
        && g.in_control_region(0.0, w - eps / 2.0)
        && g.in_control_region(-d - r + eps / 2.0, 0.0)
        && !g.in_control_region(0.0, 0.0);
    let wave_measure = sys.control_grid().measure();
    let heat_measure = heat_sys.control_measure();
    let dogbone_golden = default_dogbone_mask_csv()? == GOLDEN_DOGBONE_MASK;
    let heat_golden = default_heat_mask_csv()? == GOLDEN_HEAT_MASK;
    Ok(vec![
        rec("geometry", "wave", "mask_connected", f64::from(u8::from(sys.grid().is_connected())), sys.grid().is_connected()),
        rec("geometry", "wave", "control_measure", wave_measure, wave_measure > 0.0),
        rec("geometry", "wave", "reference_points", f64::from(u8::from(points_ok)), points_ok),
        rec("geometry", "wave", "golden_mask_match", f64::from(u8::from(dogbone_golden)), dogbone_golden),
        rec("geometry", "heat", "control_measure", heat_measure, heat_measure > 0.0),
        rec("geometry", "heat", "golden_mask_match", f64::from(u8::from(heat_golden)), heat_golden),
    ])
}

/// Box side lengths of the nested-control monotonicity check, centred in
/// the unit square.
pub const NESTED_SIDES: [f64; 3] = [0.3, 0.6, 1.0];

fn centred_box(side: f64) -> ControlBox {
    ControlBox::square(0.5 - side / 2.0, 0.5 + side / 2.0)
}

fn coercivity() -> Result<Vec<CheckRecord>> {
    let p = HeatParams::default();
    let sys = HeatSystem::new(p.n, p.omega_c)?;
    let est = heat::coercivity_estimate(&sys, 1e-10, 500)?;
    let mut out = vec![rec("coercivity", "heat", "alpha_hat", est.alpha, est.alpha > 0.0)];
    let mut alphas = Vec::new();
    for side in NESTED_SIDES {
        let s = HeatSystem::new(33, centred_box(side))?;
        alphas.push(heat::coercivity_estimate(&s, 1e-10, 500)?.alpha);
    }
    let increasing = alphas.windows(2).all(|w| w[0] < w[1]);
    for (side, a) in NESTED_SIDES.iter().zip(&alphas) {
        out.push(rec("coercivity", "heat", &format!("alpha_hat_n33_side{side}"), *a, increasing && *a > 0.0));
    }
    let full = alphas[2];
    out.push(rec("coercivity", "heat", "full_control_error", (full - 1.0).abs(), (full - 1.0).abs() <= 1e-6));
    Ok(out)
}

