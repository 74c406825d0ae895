//! `monostab run`: one closed-loop simulation and its CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use monostab_core::integrators::{simulate_observed, Simulation, StepScheme};
use monostab_core::models::{fd2, heat, wave};
use monostab_core::{ClosedLoop, Error, Result, StateVector};

use crate::config::{Experiment, ExperimentConfig};

/// Closed loop, initial state and the static fields written next to the
/// trajectory.
pub struct Setup {
    pub closed_loop: ClosedLoop,
    pub x0: StateVector,
    pub static_files: Vec<(String, String)>,
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    match cfg.experiment {
        Experiment::Fd2 => Ok(Setup {
            closed_loop: fd2::build_fd2(&cfg.fd2)?,
            x0: cfg.fd2.initial_state(),
            static_files: Vec::new(),
        }),
        Experiment::Heat => {
            let cl = heat::build_heat(&cfg.heat)?;
            let sys = heat::HeatSystem::new(cfg.heat.n, cfg.heat.omega_c)?;
            let eq = cl.equilibrium();
            let files = vec![
                ("equilibrium.csv".into(), eq.x_star.as_grid().expect("heat state").to_csv()),
                ("u_star.csv".into(), eq.u_star.as_grid().expect("heat control").to_csv()),
            ];
            // Equal grids are accepted either way; sharing the closed loop's
            // allocation keeps structural checks to a pointer comparison.
            let x0 = heat::default_initial_state(&sys);
            let x0 = rebase(&x0, cl.x_star())?;
            Ok(Setup {
                closed_loop: cl,
                x0,
                static_files: files,
            })
        }
        Experiment::Wave => {
            let cl = wave::build_wave(&cfg.wave, cfg.n)?;
            let sys = wave::WaveSystem::new(cfg.wave, cfg.n)?;
            let mask = wave::mask_csv(sys.grid(), &sys.control_keep());
            let x0 = rebase(&wave::default_initial_state(&sys), cl.x_star())?;
            Ok(Setup {
                closed_loop: cl,
                x0,
                static_files: vec![("mask.csv".into(), mask)],
            })
        }
    }
}

/// Re-expresses `x` on the grid of `like` (both grids must be equal).
fn rebase(x: &StateVector, like: &StateVector) -> Result<StateVector> {
    like.add(&x.sub(like)?)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub simulation: Simulation,
    pub files: Vec<PathBuf>,
    /// Solver failure that truncated the run.
    pub failure: Option<Error>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let started = Instant::now();
    let s = setup(cfg)?;
    let scheme = StepScheme::with_solver(cfg.scheme, cfg.dt, cfg.solver)?;
    let cl = &s.closed_loop;

    let snapshot_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize, *t))
        .collect();
    let mut snapshots: Vec<(String, String)> = Vec::new();
    let mut states = String::from("t,x1,x2,u\n");
    let mut observer_error: Option<Error> = None;

    let sim = simulate_observed(&scheme, cl, &s.x0, cfg.horizon, cfg.sample_every, |k, t, x| {
        for &(_, ts) in snapshot_steps.iter().filter(|(ks, _)| *ks == k) {
            match snapshot_files(cl, ts, x) {
                Ok(files) => snapshots.extend(files),
                Err(e) => observer_error = observer_error.take().or(Some(e)),
            }
        }
        if cfg.experiment == Experiment::Fd2 && k % cfg.sample_every == 0 {
            if let (Some(v), Ok(u)) = (x.as_dense(), cl.control_at(x)) {
                let e = v.entries();
                let u = u.as_dense().map_or(f64::NAN, |u| u.entries()[0]);
                let _ = writeln!(states, "{t},{},{},{u}", e[0], e[1]);
            }
        }
    })?;
    if let Some(e) = observer_error {
        return Err(e);
    }

    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: &str| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| io_error(&p, e))?;
        files.push(p);
        Ok(())
    };
    write("trajectory.csv", &sim.trajectory.to_csv())?;
    if cfg.experiment == Experiment::Fd2 {
        write("states.csv", &states)?;
    }
    for (name, body) in s.static_files.iter().chain(&snapshots) {
        write(name, body)?;
    }
    let failure = sim.trajectory.error.clone();
    write("summary.csv", &summary_csv(cfg, &sim, failure.as_ref()))?;
    write(
        "timing.csv",
        &format!("wall_time_s\n{}\n", started.elapsed().as_secs_f64()),
    )?;
    Ok(RunOutcome {
        output_dir: dir,
        simulation: sim,
        files,
        failure,
    })
}

/// Name used for snapshot files at time `t`, e.g. `snapshot_t5.0.csv`.
pub fn snapshot_name(prefix: &str, t: f64) -> String {
    format!("{prefix}_t{t:?}.csv")
}

fn snapshot_files(cl: &ClosedLoop, t: f64, x: &StateVector) -> Result<Vec<(String, String)>> {
    let u = cl.control_at(x)?;
    let mut out = Vec::new();
    match x {
        StateVector::Grid(f) => out.push((snapshot_name("snapshot", t), f.to_csv())),
        StateVector::Wave(w) => {
            out.push((snapshot_name("snapshot", t), w.displacement().to_csv()));
            out.push((snapshot_name("velocity", t), w.velocity().to_csv()));
        }
        StateVector::Dense(v) => {
            let mut s = String::from("component,value\n");
            for (i, e) in v.entries().iter().enumerate() {
                let _ = writeln!(s, "{i},{e}");
            }
            out.push((snapshot_name("snapshot", t), s));
        }
    }
    if let Some(f) = u.as_grid() {
        out.push((snapshot_name("control", t), f.to_csv()));
    }
    Ok(out)
}

fn summary_csv(cfg: &ExperimentConfig, sim: &Simulation, failure: Option<&Error>) -> String {
    let tr = &sim.trajectory;
    let min_margin = tr.feasibility_margin.iter().copied().fold(f64::INFINITY, f64::min);
    let energy = |e: Option<&Option<f64>>| e.copied().flatten().map_or(String::new(), |v| format!("{v:e}"));
    let status = match failure {
        None => "ok".to_string(),
        Some(e) => format!("\"solver failure: {}\"", e.to_string().replace('"', "'")),
    };
    format!(
        "experiment,scheme,dt,horizon,steps,final_time,final_dist_to_eq,min_feasibility_margin,initial_energy,final_energy,status\n\
         {},{},{},{},{},{},{:e},{:e},{},{},{}\n",
        cfg.experiment.as_str(),
        cfg.scheme.as_str(),
        cfg.dt,
        cfg.horizon,
        sim.steps_taken,
        tr.times.last().copied().unwrap_or(0.0),
        tr.dist_to_eq.last().copied().unwrap_or(f64::NAN),
        min_margin,
        energy(tr.energy.first()),
        energy(tr.energy.last()),
        status,
    )
}

fn io_error(p: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", p.display()))
}
