//! Executes a configured run and writes its artifacts.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{InitConfig, ProblemChoice, RunConfig};
use crate::deflation::{deflate_with, Minimizer, RoundOutcome, RoundRecord, TopologyDeflation};
use crate::error::{Error, Result};
use crate::levelset::{HistoryRow, TopOptFailure};
use crate::physics::{Problem, ProblemKind};
use crate::toy::{deflate_scalar, write_toy_csv};
use crate::vtk::VtkWriter;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `deflation.rounds`.
    pub max_rounds: Option<usize>,
    /// VTK file whose `psi` field replaces the configured initial guess.
    pub seed_init: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub index: usize,
    pub objective: f64,
    /// Bipolar plate only.
    pub constraint_gap_pct: Option<f64>,
    pub volume: f64,
    pub found_at: usize,
    pub via_restart: bool,
    pub vtk_file: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Empty for the toy problem.
    pub manifest: Vec<ManifestRow>,
    pub rounds: Vec<RoundRecord>,
    pub minimizers: usize,
}

/// Runs `config`, writing everything under `config.output.dir`. Progress
/// lines go to `log`.
pub fn run(config: &RunConfig, opts: &RunOptions, log: &mut dyn Write) -> Result<RunSummary> {
    let mut config = config.clone();
    if let Some(n) = opts.max_rounds {
        config.deflation.rounds = n;
    }
    if let Some(seed) = &opts.seed_init {
        config.init = InitConfig::Vtk { path: seed.clone() };
    }
    config.validate()?;
    let config = config.resolved();
    let out = config.output.dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    fs::write(out.join("effective_config.txt"), config.to_toml_string()?)
        .map_err(|e| Error::Config(format!("cannot write to {}: {e}", out.display())))?;

    match config.problem.kind {
        ProblemChoice::Rastrigin => run_toy(&config, &out, log),
        ProblemChoice::DoublePipe | ProblemChoice::Bipolar => run_topology(&config, &out, log),
    }
}

fn run_toy(config: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<RunSummary> {
    let run = deflate_scalar(&config.scalar_problem(), config.toy.x0, &config.penalty_params()?, config.deflation.rounds)?;
    write_toy_csv(&run, File::create(out.join("toy_minimizers.csv"))?)?;
    for m in &run.minimizers {
        writeln!(log, "round {}: x = {:.6}, f = {:.6}{}", m.found_at, m.x, m.f, if m.via_restart { " (restart)" } else { "" })?;
    }
    Ok(RunSummary { out_dir: out.to_path_buf(), manifest: Vec::new(), rounds: Vec::new(), minimizers: run.minimizers.len() })
}

fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "J", "penalty", "J_total", "theta_rad", "volume", "kappa"])?;
    for r in rows {
        w.write_record([
            r.iter.to_string(),
            format!("{:.12e}", r.objective),
            format!("{:.12e}", r.penalty),
            format!("{:.12e}", r.total),
            format!("{:.8}", r.theta),
            r.volume.to_string(),
            r.kappa.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn history_file(round: usize, restart: bool) -> String {
    if restart {
        format!("round_{round}_restart.csv")
    } else {
        format!("round_{round}.csv")
    }
}

fn run_topology(config: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<RunSummary> {
    let mesh = config.build_mesh()?;
    let problem = Problem::new(config.problem_spec(mesh.clone())?)?;
    let init = config.initial_level_set(&mesh, None)?;
    writeln!(
        log,
        "mesh: {} vertices, {} triangles; {} rounds, gamma = {}, delta = {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        config.deflation.rounds,
        config.deflation.gamma,
        config.deflation.delta
    )?;

    let mut observer_error: Option<Error> = None;
    let state = {
        let log = &mut *log;
        let err = &mut observer_error;
        let observer = move |round: usize, restart: bool, res: std::result::Result<&Minimizer, &TopOptFailure>| {
            let (rows, line) = match res {
                Ok(m) => (
                    &m.history,
                    format!(
                        "J = {:.6}, penalty = {:.3e}, {:?} after {} iterations",
                        m.snapshot.objective,
                        m.penalty,
                        m.status,
                        m.history.len().saturating_sub(1)
                    ),
                ),
                Err(f) => (&f.history, format!("failed: {}", f.error)),
            };
            let tag = if restart { " restart" } else { "" };
            let written = write_history(&out.join(history_file(round, restart)), rows)
                .and_then(|_| writeln!(log, "round {round}{tag}: {line}").map_err(Error::from));
            if let Err(e) = written {
                err.get_or_insert(e);
            }
        };
        let mut td = TopologyDeflation {
            problem: &problem,
            init,
            solver: config.solver_params(),
            observer: Some(Box::new(observer)),
        };
        deflate_with(&mut td, &config.penalty_params()?, config.deflation.rounds, config.tau_same())?
    };
    if let Some(e) = observer_error {
        return Err(e);
    }

    let mut manifest = Vec::with_capacity(state.solutions.len());
    for (i, found) in state.solutions.iter().enumerate() {
        let index = i + 1;
        let m = &found.solution;
        let vtk_file = format!("minimizer_{index}.vtk");
        write_minimizer_vtk(&problem, m, &out.join(&vtk_file))?;
        let gap = match (problem.spec().kind, &m.evaluation.smoothed) {
            (ProblemKind::BipolarPlate, Some(s)) => Some(problem.constraint_gap(s)),
            _ => None,
        };
        manifest.push(ManifestRow {
            index,
            objective: m.snapshot.objective,
            constraint_gap_pct: gap,
            volume: m.snapshot.level_set.volume(),
            found_at: found.found_at,
            via_restart: found.via_restart,
            vtk_file,
        });
    }
    write_manifest(&out.join("manifest.csv"), &manifest)?;
    let failed = state
        .rounds
        .iter()
        .filter(|r| matches!(r.outcome, RoundOutcome::Failed(_) | RoundOutcome::RestartFailed(_)))
        .count();
    writeln!(
        log,
        "{} minimizers in {} rounds ({} restarts, {} failed solves)",
        manifest.len(),
        state.rounds.len(),
        state.restarts,
        failed
    )?;
    Ok(RunSummary { out_dir: out.to_path_buf(), manifest, rounds: state.rounds, minimizers: state.solutions.len() })
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "J", "constraint_gap_pct", "volume", "found_at_iteration", "via_restart", "vtk_file"])?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            format!("{:.10e}", r.objective),
            r.constraint_gap_pct.map_or(String::new(), |g| format!("{g:.4}")),
            format!("{:.8}", r.volume),
            r.found_at.to_string(),
            r.via_restart.to_string(),
            r.vtk_file.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_minimizer_vtk(problem: &Problem, m: &Minimizer, path: &Path) -> Result<()> {
    let mesh = problem.mesh();
    let ls = &m.snapshot.level_set;
    let ev = &m.evaluation;
    let nv = mesh.n_vertices();
    let u: Vec<[f64; 2]> = (0..nv).map(|v| ev.flow.u.at_vertex(v)).collect();
    let mut w = VtkWriter::new(mesh)
        .point_scalar("psi", ls.psi().values().to_vec())?
        .point_scalar("chi", ls.nodal_indicator())?
        .point_vector("u", u)?
        .point_scalar("p", ev.flow.p.values().to_vec())?
        .point_scalar("dJ", ev.derivative.values().to_vec())?
        .cell_scalar("fraction", ls.fractions().to_vec())?
        .cell_scalar("alpha", ev.flow.alpha().to_vec())?;
    if let Some(s) = &ev.smoothed {
        let speed = (0..nv)
            .map(|v| {
                let a = s.u_s.at_vertex(v);
                a[0].hypot(a[1])
            })
            .collect();
        w = w.point_scalar("speed_s", speed)?;
    }
    w.write_file(path)
}
