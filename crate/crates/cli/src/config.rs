//! `key = value` experiment configuration with dotted section prefixes.
//!
//! ```text
//! # heat defaults, shorter horizon
//! experiment = heat
//! horizon = 2.0
//! heat.t_max = 7.0
//! ```

use std::path::{Path, PathBuf};

use monostab_core::integrators::{SchemeKind, SolverSettings};
use monostab_core::models::fd2::Fd2Params;
use monostab_core::models::heat::{ControlBox, HeatParams};
use monostab_core::models::wave::{DogboneGeometry, DEFAULT_RESOLUTION};
use monostab_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fd2,
    Heat,
    Wave,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Fd2 => "fd2",
            Experiment::Heat => "heat",
            Experiment::Wave => "wave",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "fd2" => Ok(Experiment::Fd2),
            "heat" => Ok(Experiment::Heat),
            "wave" => Ok(Experiment::Wave),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }

    pub fn default_scheme(self) -> SchemeKind {
        match self {
            Experiment::Wave => SchemeKind::CrankNicolson,
            _ => SchemeKind::Proximal,
        }
    }

    pub fn default_dt(self) -> f64 {
        match self {
            Experiment::Fd2 => 1e-2,
            Experiment::Heat | Experiment::Wave => 1e-3,
        }
    }

    /// fd2: first time `dist_to_eq < 1e−3` is about 22.1 at dt = 1e−2.
    /// wave: energy falls below 10% of its initial value near t = 12.5.
    pub fn default_horizon(self) -> f64 {
        match self {
            Experiment::Fd2 => FD2_HORIZON,
            Experiment::Heat => 5.0,
            Experiment::Wave => WAVE_HORIZON,
        }
    }

    pub fn default_sample_every(self) -> usize {
        match self {
            Experiment::Fd2 => 1,
            Experiment::Heat | Experiment::Wave => 10,
        }
    }
}

/// Regression horizon for fd2 convergence below `1e−3`.
pub const FD2_HORIZON: f64 = 25.0;
/// Regression horizon for wave energy decay below 10%.
pub const WAVE_HORIZON: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scheme: SchemeKind,
    pub dt: f64,
    pub horizon: f64,
    pub sample_every: usize,
    /// Heat: nodes per side. Wave: nodes per unit length.
    pub n: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub solver: SolverSettings,
    pub fd2: Fd2Params,
    pub heat: HeatParams,
    pub wave: DogboneGeometry,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let heat = HeatParams::default();
        ExperimentConfig {
            experiment,
            scheme: experiment.default_scheme(),
            dt: experiment.default_dt(),
            horizon: experiment.default_horizon(),
            sample_every: experiment.default_sample_every(),
            n: match experiment {
                Experiment::Wave => DEFAULT_RESOLUTION,
                _ => heat.n,
            },
            output_dir: PathBuf::from("out"),
            seed: 1,
            snapshot_times: match experiment {
                Experiment::Heat => vec![5.0],
                _ => Vec::new(),
            },
            solver: SolverSettings::default(),
            fd2: Fd2Params::default(),
            heat,
            wave: DogboneGeometry::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = entries(text)?;
        let experiment = entries
            .iter()
            .find(|(k, _, _)| k == "experiment")
            .map(|(_, v, _)| Experiment::parse(v))
            .transpose()?
            .ok_or_else(|| Error::Config("missing key 'experiment'".into()))?;
        let mut c = Self::defaults(experiment);
        for (key, value, line) in &entries {
            c.set(key, value)
                .map_err(|e| Error::Config(format!("line {line}: {}", message(e))))?;
        }
        c.heat.n = c.n;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "experiment" => {}
            "scheme" => self.scheme = v.parse()?,
            "dt" => self.dt = real(v)?,
            "horizon" => self.horizon = real(v)?,
            "sample_every" => self.sample_every = count(v)?,
            "n" => self.n = count(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = v.parse().map_err(|_| bad(v, "unsigned integer"))?,
            "snapshot_times" => self.snapshot_times = list(v)?,
            "solver.max_iter" => self.solver.max_iter = count(v)?,
            "solver.tol" => self.solver.tol = real(v)?,
            "solver.damping" => self.solver.damping = Some(real(v)?),
            "fd2.x_star" => self.fd2.x_star = pair(v)?,
            "fd2.x0" => self.fd2.x0 = pair(v)?,
            "fd2.epsilon" => self.fd2.epsilon = real(v)?,
            "fd2.a" => self.fd2.a = real(v)?,
            "fd2.b" => self.fd2.b = real(v)?,
            "heat.omega_c" => {
                let b = list(v)?;
                self.heat.omega_c = match b[..] {
                    [lo, hi] => ControlBox::square(lo, hi),
                    [x0, x1, y0, y1] => ControlBox {
                        x: (x0, x1),
                        y: (y0, y1),
                    },
                    _ => return Err(bad(v, "2 or 4 comma-separated reals")),
                }
            }
            "heat.t_min" => self.heat.t_min = real(v)?,
            "heat.t_max" => self.heat.t_max = real(v)?,
            "heat.amplitude" => self.heat.amplitude = real(v)?,
            _ if key.starts_with("wave.") => set_geometry(&mut self.wave, key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be at least 1".into()));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.horizon)) {
            return Err(Error::Config(format!("snapshot time {t} is outside [0, horizon]")));
        }
        match self.experiment {
            Experiment::Fd2 => self.fd2.validate(),
            Experiment::Heat => self.heat.validate(),
            Experiment::Wave => self.wave.validate(),
        }
    }
}

/// Geometry file for `monostab mask`: `n` and `wave.*` keys only.
pub fn parse_geometry(text: &str) -> Result<(DogboneGeometry, usize)> {
    let mut g = DogboneGeometry::default();
    let mut n = DEFAULT_RESOLUTION;
    for (key, value, line) in entries(text)? {
        let r = if key == "n" {
            count(&value).map(|c| n = c)
        } else if key.starts_with("wave.") {
            set_geometry(&mut g, &key, &value)
        } else {
            Err(Error::Config(format!("unknown key '{key}'")))
        };
        r.map_err(|e| Error::Config(format!("line {line}: {}", message(e))))?;
    }
    g.validate()?;
    Ok((g, n))
}

fn set_geometry(g: &mut DogboneGeometry, key: &str, v: &str) -> Result<()> {
    let slot = match key {
        "wave.radius" => &mut g.radius,
        "wave.neck_half_width" => &mut g.neck_half_width,
        "wave.center_offset" => &mut g.center_offset,
        "wave.collar" => &mut g.collar,
        "wave.gap_deg" => &mut g.gap_deg,
        _ => return Err(Error::Config(format!("unknown key '{key}'"))),
    };
    *slot = real(v)?;
    Ok(())
}

/// `(key, value, line number)` triples; rejects duplicates and malformed lines.
fn entries(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value'", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", i + 1)));
        }
        if out.iter().any(|(seen, _, _)| seen == k) {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
        out.push((k.to_string(), v.to_string(), i + 1));
    }
    Ok(out)
}

fn message(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn bad(v: &str, what: &str) -> Error {
    Error::Config(format!("'{v}' is not a valid {what}"))
}

fn real(v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(v, "finite real"))
}

fn count(v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(v, "count"))
}

fn list(v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| real(s.trim())).collect()
}

fn pair(v: &str) -> Result<[f64; 2]> {
    match list(v)?[..] {
        [a, b] => Ok([a, b]),
        _ => Err(bad(v, "pair 'a, b'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_experiments() {
        let c = ExperimentConfig::parse("experiment = fd2\n").unwrap();
        assert_eq!(c.fd2, Fd2Params::default());
        assert_eq!(c.dt, 1e-2);
        assert_eq!(c.scheme, SchemeKind::Proximal);
        let c = ExperimentConfig::parse("experiment = wave").unwrap();
        assert_eq!(c.scheme, SchemeKind::CrankNicolson);
        assert_eq!(c.wave, DogboneGeometry::default());
        let c = ExperimentConfig::parse("experiment = heat").unwrap();
        assert_eq!((c.heat.t_min, c.heat.t_max, c.n), (-5.0, 7.0, 65));
        assert_eq!(c.snapshot_times, vec![5.0]);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let c = ExperimentConfig::parse(
            "# comment\nexperiment = heat\nn = 33   # coarser\nheat.omega_c = 0.1, 0.9\n\
             heat.t_max = 6.5\nscheme = imex\nsnapshot_times = 0.5, 1.0\nhorizon = 1\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(c.heat.n, 33);
        assert_eq!(c.heat.omega_c, ControlBox::square(0.1, 0.9));
        assert_eq!(c.heat.t_max, 6.5);
        assert_eq!(c.scheme, SchemeKind::Imex);
        assert_eq!(c.snapshot_times, vec![0.5, 1.0]);
        assert_eq!(c.seed, 7);
        let c = ExperimentConfig::parse("experiment = fd2\nfd2.x0 = 1, -1\nwave.collar = 0.3").unwrap();
        assert_eq!(c.fd2.x0, [1.0, -1.0]);
        assert_eq!(c.wave.collar, 0.3);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "",
            "experiment = plasma",
            "experiment = fd2\ncolour = red",
            "experiment = fd2\ndt = -1",
            "experiment = fd2\ndt = 1\ndt = 2",
            "experiment = fd2\nfd2.a = 0.5",
            "experiment = fd2\nfd2.x0 = 1",
            "experiment = fd2\nno equals sign",
            "experiment = heat\nheat.omega_c = 0.0, 1.0",
            "experiment = heat\nsnapshot_times = 6.0",
            "experiment = wave\nwave.neck_half_width = 2.0",
            "experiment = wave\nwave.thickness = 1",
            "experiment = fd2\nscheme = rk4",
            "experiment = fd2\nsample_every = 0",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text:?}");
        }
    }

    #[test]
    fn geometry_files() {
        let (g, n) = parse_geometry("n = 30\nwave.gap_deg = 30").unwrap();
        assert_eq!((g.gap_deg, n), (30.0, 30));
        assert_eq!(parse_geometry("").unwrap(), (DogboneGeometry::default(), DEFAULT_RESOLUTION));
        assert!(parse_geometry("heat.t_max = 1").is_err());
    }
}
