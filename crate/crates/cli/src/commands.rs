use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use pcdnse::analysis::{fit_soliton, FitResult};
use pcdnse::collective::{ansatz_energy, collective_system, stable_soliton, stable_system, DEFAULT_WIDTH_FLOOR};
use pcdnse::integrate::{linspace, solve, OdeProblem, SolverStats};
use pcdnse::io::{csv_table, field_csv, lattice_csv, parse_field_csv};
use pcdnse::model_continuum::{field_energy, make_soliton_field, particle_number, pcdnse_system, superpose};
use pcdnse::model_effective::{chain_energy, chain_system};
use pcdnse::model_full::{full_system, rotating_frame_to_effective, FullState};
use pcdnse::params::{effective_params, invert_for_chi_alpha, weak_coupling_ratios};
use pcdnse::scenarios::{detuning_sweep, run_figure, sweep_csv, ExperimentOptions, Figure};
use pcdnse::{Boundary, FieldState, Grid, SolitonCoords, C64};

use crate::config::{
    load_json, ExperimentConfig, Format, InitialConfig, Model, Overrides, ParamsCommandConfig, ParamsConfig,
    ResolvedConfig, DEFAULT_OUTPUT_DIR,
};
use crate::output::{RunDir, Status};
use crate::CliError;

/// Relative drift below which a quantity is reported as conserved.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

fn output_root(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

// ---------------------------------------------------------------- params

#[derive(Serialize)]
struct PointReport {
    effective: pcdnse::EffectiveParams,
    weak_coupling: pcdnse::WeakCoupling,
    weak: bool,
}

#[derive(Serialize)]
struct TargetReport {
    chi: f64,
    alpha: f64,
}

pub fn params(config: Option<&Path>, out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let cfg: ParamsCommandConfig = match config {
        Some(p) => load_json(p)?,
        None => ParamsCommandConfig::default(),
    };
    let s = &cfg.sweep;
    if s.points < 2 || !(s.delta_max > s.delta_min) {
        return Err(CliError::Config("sweep needs points >= 2 and delta_max > delta_min".into()));
    }
    let rows = detuning_sweep(s.chi, s.eta, s.kappa, &linspace(s.delta_min, s.delta_max, s.points))?;

    let point = match &cfg.point {
        Some(p) => {
            p.chain.validate()?;
            let effective = effective_params(&p.reservoir, &p.chain)?;
            let weak_coupling = weak_coupling_ratios(&p.reservoir, &p.chain, p.b_max)?;
            Some(PointReport { effective, weak_coupling, weak: weak_coupling.is_weak() })
        }
        None => None,
    };
    let target = match &cfg.target {
        Some(t) => {
            let (chi, alpha) = invert_for_chi_alpha(t.g, t.gamma, t.eta, t.kappa, t.delta, t.hopping)?;
            Some(TargetReport { chi, alpha })
        }
        None => None,
    };

    let mut run = RunDir::create(&output_root(out))?;
    run.write_json("config.json", &cfg)?;
    run.write("sweep.csv", &sweep_csv(&rows))?;
    run.write_json("report.json", &serde_json::json!({ "point": point, "target": target }))?;
    run.finish("params", Status::Ok, &[], &serde_json::json!({ "rows": rows.len() }))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct Conservation {
    pub n_drift: f64,
    pub e_drift: f64,
    /// Largest `E(t_{k+1}) − E(t_k)` relative to `|E(0)|`.
    pub max_energy_increment: f64,
    pub n_conserved: bool,
    pub e_conserved: bool,
}

impl Conservation {
    fn from_rows(rows: &[[f64; 4]]) -> Self {
        let (n0, e0) = (rows[0][1], rows[0][2]);
        let drift = |k: usize, x0: f64| {
            rows.iter().map(|r| ((r[k] - x0) / x0.abs().max(f64::MIN_POSITIVE)).abs()).fold(0.0, f64::max)
        };
        let n_drift = drift(1, n0);
        let e_drift = drift(2, e0);
        let inc = rows.windows(2).map(|w| w[1][2] - w[0][2]).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE);
        Self {
            n_drift,
            e_drift,
            max_energy_increment: inc,
            n_conserved: n_drift < CONSERVATION_TOLERANCE,
            e_conserved: e_drift < CONSERVATION_TOLERANCE,
        }
    }
}

/// Everything a simulation produced, before it is written out.
pub struct SimulationOutput {
    /// `t, N, E, b_max`.
    pub diagnostics: Vec<[f64; 4]>,
    /// One CSV per snapshot for field models.
    pub snapshots: Vec<String>,
    /// Single trajectory CSV for coordinate models.
    pub trajectory: Option<String>,
    pub final_state: serde_json::Value,
    pub stats: SolverStats,
}

fn parse_state_file(path: &Path, grid: Grid) -> Result<Vec<C64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let rows = text.lines().filter(|l| !l.trim().is_empty()).count().saturating_sub(1);
    if rows != grid.points {
        return Err(CliError::Config(format!(
            "{}: {rows} rows, but the domain has {} points",
            path.display(),
            grid.points
        )));
    }
    Ok(parse_field_csv(&text, grid).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.psi)
}

fn solitons(initial: &InitialConfig) -> &[SolitonCoords] {
    match initial {
        InitialConfig::Soliton(c) => std::slice::from_ref(c),
        InitialConfig::Solitons(v) => v,
        InitialConfig::File(_) => &[],
    }
}

fn lattice_initial(cfg: &ResolvedConfig, sites: usize) -> Result<Vec<C64>, CliError> {
    let boundary = cfg.domain.boundary;
    if let InitialConfig::File(p) = &cfg.initial {
        // Sites as a unit-spacing grid with one point per site.
        let grid = Grid { length: sites as f64, points: sites, boundary: Boundary::Periodic };
        return parse_state_file(p, grid);
    }
    let l = sites as f64;
    let mut b = vec![C64::default(); sites];
    for c in solitons(&cfg.initial) {
        c.validate()?;
        for (n, z) in b.iter_mut().enumerate() {
            let mut xi = n as f64 - c.x0;
            if boundary == Boundary::Periodic {
                xi -= l * (xi / l).round();
            }
            *z += c.profile(xi);
        }
    }
    Ok(b)
}

fn solver_for(cfg: &ResolvedConfig) -> pcdnse::SolverConfig {
    cfg.run.solver.clone().with_snapshots(linspace(0.0, cfg.run.t1, cfg.run.snapshots))
}

pub fn run_simulation(cfg: &ResolvedConfig) -> Result<SimulationOutput, CliError> {
    let eff = cfg.effective;
    let t1 = cfg.run.t1;
    let solver = solver_for(cfg);
    match cfg.model {
        Model::Pcdnse => {
            let grid = Grid::new(cfg.domain.length.unwrap_or_default(), cfg.domain.points.unwrap_or_default(), cfg.domain.boundary)?;
            let field = match &cfg.initial {
                InitialConfig::File(p) => FieldState::new(grid, parse_state_file(p, grid)?)?,
                init => {
                    let parts = solitons(init)
                        .iter()
                        .map(|c| make_soliton_field(c, &grid).map(|(f, _)| f))
                        .collect::<Result<Vec<_>, _>>()?;
                    superpose(&parts)?
                }
            };
            let sol = solve(OdeProblem::new(pcdnse_system(grid, eff), 0.0, t1, field.psi.clone()), &solver)?;
            let mut diagnostics = Vec::new();
            let mut snapshots = Vec::new();
            for (t, psi) in sol.series.iter() {
                let f = field.with_psi(psi.clone())?;
                diagnostics.push([t, particle_number(&f), field_energy(&f, &eff), f.max_amplitude()]);
                snapshots.push(field_csv(&f));
            }
            let final_state = serde_json::to_value(field.with_psi(sol.final_state().to_vec())?)?;
            Ok(SimulationOutput { diagnostics, snapshots, trajectory: None, final_state, stats: sol.stats })
        }
        Model::Lattice => {
            let sites = cfg.domain.sites.unwrap_or_default();
            let boundary = cfg.domain.boundary;
            let b0 = lattice_initial(cfg, sites)?;
            let sol = solve(OdeProblem::new(chain_system(eff, boundary), 0.0, t1, b0), &solver)?;
            let (diagnostics, snapshots) = lattice_records(sol.series.iter().map(|(t, b)| (t, b.as_slice())), cfg);
            let final_state = serde_json::to_value(sol.final_state())?;
            Ok(SimulationOutput { diagnostics, snapshots, trajectory: None, final_state, stats: sol.stats })
        }
        Model::Langevin => {
            let ParamsConfig::Microscopic { reservoir, chain } = &cfg.params else {
                return Err(CliError::Config("model `langevin` needs `params.microscopic`".into()));
            };
            let reservoir = *reservoir;
            let chain = pcdnse::ChainParams { boundary: cfg.domain.boundary, ..*chain };
            let b0 = lattice_initial(cfg, chain.sites)?;
            let start = FullState::with_steady_cavities(&reservoir, b0)?;
            let sol = solve(OdeProblem::new(full_system(reservoir, chain), 0.0, t1, start.pack()), &solver)?;
            let full = sol.series.map(|_, y| FullState::unpack(y).expect("even length"));
            let effective = rotating_frame_to_effective(&full, &reservoir, &chain)?;
            let (diagnostics, snapshots) = lattice_records(effective.iter().map(|(t, b)| (t, b.as_slice())), cfg);
            let final_state = serde_json::to_value(FullState::unpack(sol.final_state())?)?;
            Ok(SimulationOutput { diagnostics, snapshots, trajectory: None, final_state, stats: sol.stats })
        }
        Model::Collective => {
            let c = solitons(&cfg.initial)[0];
            c.validate()?;
            let sol = solve(OdeProblem::new(collective_system(eff, DEFAULT_WIDTH_FLOOR), 0.0, t1, c.to_array().to_vec()), &solver)?;
            let mut diagnostics = Vec::new();
            let mut rows = Vec::new();
            for (t, y) in sol.series.iter() {
                let s = SolitonCoords::from_slice(y)?;
                diagnostics.push([t, s.particle_number(), ansatz_energy(&s, &eff), s.psi]);
                rows.push([t, y[0], y[1], y[2], y[3], y[4], y[5]]);
            }
            let trajectory = csv_table(&["t", "psi", "x0", "v", "w", "d", "phi"], rows.iter().map(|r| r.as_slice()));
            let final_state = serde_json::to_value(SolitonCoords::from_slice(sol.final_state())?)?;
            Ok(SimulationOutput { diagnostics, snapshots: vec![], trajectory: Some(trajectory), final_state, stats: sol.stats })
        }
        Model::Stable => {
            let c = solitons(&cfg.initial)[0];
            c.validate()?;
            let ss = stable_soliton(c.particle_number(), &eff)?;
            let sol = solve(OdeProblem::new(stable_system(ss), 0.0, t1, vec![c.x0, c.v, c.phi]), &solver)?;
            let mut diagnostics = Vec::new();
            let mut rows = Vec::new();
            for (t, y) in sol.series.iter() {
                diagnostics.push([t, ss.n, ss.energy(y[1]), ss.psi_ss]);
                rows.push([t, y[0], y[1], y[2]]);
            }
            let trajectory = csv_table(&["t", "x0", "v", "phi"], rows.iter().map(|r| r.as_slice()));
            let y = sol.final_state();
            let final_state = serde_json::to_value(ss.coords(y[0], y[1], y[2]))?;
            Ok(SimulationOutput { diagnostics, snapshots: vec![], trajectory: Some(trajectory), final_state, stats: sol.stats })
        }
    }
}

fn lattice_records<'a>(series: impl Iterator<Item = (f64, &'a [C64])>, cfg: &ResolvedConfig) -> (Vec<[f64; 4]>, Vec<String>) {
    let mut diagnostics = Vec::new();
    let mut snapshots = Vec::new();
    for (t, b) in series {
        let n: f64 = b.iter().map(|z| z.norm_sqr()).sum();
        let bmax = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        diagnostics.push([t, n, chain_energy(b, &cfg.effective, cfg.domain.boundary), bmax]);
        snapshots.push(lattice_csv(b));
    }
    (diagnostics, snapshots)
}

#[derive(Serialize)]
struct SimulateDetails<'a> {
    model: Model,
    solver_stats: &'a SolverStats,
    conservation: &'a Conservation,
}

pub fn simulate(config: &Path, over: &Overrides) -> Result<PathBuf, CliError> {
    let raw: ExperimentConfig = load_json(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let cfg = raw.resolve(base, over)?;
    let mut run = RunDir::create(&cfg.outputs.directory)?;
    run.write_json("config.json", &cfg)?;
    info!("simulating {:?} to t = {}", cfg.model, cfg.run.t1);
    let out = match run_simulation(&cfg) {
        Ok(out) => out,
        Err(e @ CliError::Numerical(_)) => {
            let msg = e.to_string();
            run.finish("simulate", Status::NumericalFailure, &[msg], &serde_json::json!({ "model": cfg.model }))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let csv = cfg.outputs.formats.contains(&Format::Csv);
    if csv {
        run.write(
            "diagnostics.csv",
            &csv_table(&["t", "N", "E", "b_max"], out.diagnostics.iter().map(|r| r.as_slice())),
        )?;
        for (k, snap) in out.snapshots.iter().enumerate() {
            run.write(&format!("snapshots/snapshot_{k:04}.csv"), snap)?;
        }
        if let Some(traj) = &out.trajectory {
            run.write("trajectory.csv", traj)?;
        }
    }
    if cfg.outputs.formats.contains(&Format::Json) {
        run.write_json("final_state.json", &out.final_state)?;
    }
    let conservation = Conservation::from_rows(&out.diagnostics);
    let details = SimulateDetails { model: cfg.model, solver_stats: &out.stats, conservation: &conservation };
    run.finish("simulate", Status::Ok, &[], &details)
}

// ---------------------------------------------------------------- fit

#[derive(Serialize)]
struct FitRow {
    source: String,
    #[serde(flatten)]
    fit: FitResult,
}

/// Infers the grid from the coordinate column of a field CSV.
fn grid_from_csv(text: &str, boundary: Boundary) -> Result<Grid, CliError> {
    let xs: Vec<f64> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').next().and_then(|s| s.trim().parse().ok()))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Config("malformed coordinate column".into()))?;
    if xs.len() < 2 {
        return Err(CliError::Config("field file needs at least two rows".into()));
    }
    let dx = xs[1] - xs[0];
    let points = xs.len();
    let length = match boundary {
        Boundary::Periodic => dx * points as f64,
        Boundary::Open => dx * (points - 1) as f64,
    };
    Ok(Grid::new(length, points, boundary)?)
}

pub fn fit(input: &Path, boundary: Boundary, out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let files: Vec<PathBuf> = if input.is_dir() {
        let dir = if input.join("snapshots").is_dir() { input.join("snapshots") } else { input.to_path_buf() };
        let mut v: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        v
    } else if input.is_file() {
        vec![input.to_path_buf()]
    } else {
        return Err(CliError::Config(format!("{} does not exist", input.display())));
    };
    if files.is_empty() {
        return Err(CliError::Config(format!("no CSV files in {}", input.display())));
    }
    let mut rows = Vec::new();
    for path in &files {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let grid = grid_from_csv(&text, boundary)?;
        let field = parse_field_csv(&text, grid).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let fit = fit_soliton(&field)?;
        rows.push(FitRow { source: path.display().to_string(), fit });
    }
    let table: Vec<[f64; 9]> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let c = r.fit.coords;
            [k as f64, c.psi, c.x0, c.v, c.w, c.d, c.phi, r.fit.residual, if r.fit.converged { 1.0 } else { 0.0 }]
        })
        .collect();
    let mut run = RunDir::create(&output_root(out))?;
    run.write(
        "fits.csv",
        &csv_table(
            &["index", "psi", "x0", "v", "w", "d", "phi", "residual", "converged"],
            table.iter().map(|r| r.as_slice()),
        ),
    )?;
    run.write_json("fits.json", &rows)?;
    run.finish("fit", Status::Ok, &[], &serde_json::json!({ "boundary": boundary, "files": files.len() }))
}

// ---------------------------------------------------------------- experiment

pub fn experiment(figures: &[Figure], opts: &ExperimentOptions, out: &Option<PathBuf>) -> Result<bool, CliError> {
    let root = output_root(out);
    let mut complete = true;
    for &figure in figures {
        info!("running {}", figure.name());
        let data = run_figure(figure, opts);
        let mut run = RunDir::create(&root.join(figure.name()))?;
        for a in &data.artifacts {
            run.write(&a.name, &a.contents)?;
        }
        let report = data.report();
        run.write("report.txt", &report)?;
        run.write_json("checks.json", &data.checks)?;
        let status = if data.failures.is_empty() { Status::Ok } else { Status::Partial };
        let details = serde_json::json!({ "figure": figure, "options": opts, "passed": data.passed() });
        run.finish(&format!("experiment {}", figure.name()), status, &data.failures, &details)?;
        print!("== {}\n{report}", figure.name());
        complete &= data.failures.is_empty();
    }
    Ok(complete)
}
