//! End-to-end experiments: validation batteries for each module, the
//! convergence sweep in `eps`, and a suite runner. Reports are JSON,
//! fields and trajectories CSV; the layout is described in
//! `schema/outputs.json` at the repository root.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, LayerGridConfig, PdeGridConfig, PotentialConfig, StressConfig, SCHEMA_VERSION};
use output::{columns, write_csv, write_json};

use crate::corrector::{solve_corrector, CorrectorOptions, CorrectorProfile};
use crate::error::{Error, Result};
use crate::layer::{check_asymptotics, exact_pn_layer, solve_layer, LayerProfile, RelaxOptions};
use crate::particles::{
    check_repulsion_bound, integrate, repulsion_bound_curve, IntegrateOptions, ParticleState, Trajectory,
};
use crate::pde::{
    ansatz_residual, build_initial, default_dt, track_layers, EvolveOptions, Evolver, FieldState, RANGE_MARGIN,
};
use crate::potential::{validate_assumption_a, PotentialSpec, StressField};

/// Tolerances applied by the batteries; embedded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub layer_residual: f64,
    pub gamma_relative: f64,
    pub solvability: f64,
    pub corrector_residual: f64,
    pub corrector_boundary: f64,
    pub orthogonality: f64,
    pub mobility_identity: f64,
    pub repulsion_slack: f64,
    pub range_margin: f64,
    pub dt_factor: f64,
}

impl Tolerances {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            layer_residual: cfg.layer.tol,
            gamma_relative: 1e-2,
            solvability: 1e-6,
            corrector_residual: 1e-4,
            corrector_boundary: 1e-2,
            orthogonality: 1e-10,
            mobility_identity: 1e-12,
            repulsion_slack: 1e-6,
            range_margin: RANGE_MARGIN,
            dt_factor: cfg.pde.dt_factor,
        }
    }
}

/// One named pass/fail check with the measured value and its limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `at_most`, `at_least`, `below` (strict) or `flag`.
    pub kind: &'static str,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            kind: "at_most",
            pass: value <= limit,
            value,
            limit,
        }
    }

    /// Passes when `value >= limit`.
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            kind: "at_least",
            pass: value >= limit,
            value,
            limit,
        }
    }

    /// Passes when `value < limit`.
    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            kind: "below",
            pass: value < limit,
            value,
            limit,
        }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            kind: "flag",
            pass,
            value: if pass { 1.0 } else { 0.0 },
            limit: 1.0,
        }
    }
}

/// Which battery a suite entry runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Battery {
    Layer,
    Corrector,
    Particles,
    Evolve,
    Converge,
}

impl Battery {
    pub fn name(self) -> &'static str {
        match self {
            Self::Layer => "layer",
            Self::Corrector => "corrector",
            Self::Particles => "particles",
            Self::Evolve => "evolve",
            Self::Converge => "converge",
        }
    }
}

/// Outcome of one battery.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub schema_version: u32,
    pub battery: String,
    pub scenario: String,
    pub config_hash: String,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub all_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BatteryReport {
    fn new(battery: Battery, cfg: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            battery: battery.name().into(),
            scenario: cfg.scenario.clone(),
            config_hash: cfg.hash(),
            tolerances: Tolerances::for_config(cfg),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            all_pass: false,
            error: None,
        }
    }

    fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    fn finish(mut self) -> Self {
        self.all_pass = self.error.is_none() && self.checks.iter().all(|c| c.pass);
        self
    }

    fn failed(battery: Battery, cfg: &ExperimentConfig, err: &Error) -> Self {
        let mut r = Self::new(battery, cfg);
        r.error = Some(err.to_string());
        r.finish()
    }
}

fn artifact(out: Option<&Path>, name: &str) -> Option<PathBuf> {
    out.map(|d| d.join(name))
}

/// Layer for an experiment: closed form when requested, otherwise relaxed.
pub fn layer_for(cfg: &ExperimentConfig, p: &PotentialSpec<f64>) -> Result<LayerProfile<f64>> {
    let grid = cfg.layer_grid()?;
    match (&cfg.potential, cfg.layer.exact) {
        (PotentialConfig::Pn { a }, true) => exact_pn_layer(*a, grid),
        _ => solve_layer(p, grid, &RelaxOptions::default().with_tol(cfg.layer.tol)),
    }
}

fn tail_window(lp: &LayerProfile<f64>) -> (f64, f64) {
    let reach = lp.grid.x_max().min(-lp.grid.x_min());
    let hi = 20.0f64.min(reach / 2.0);
    ((hi / 4.0).max(1.0), hi)
}

/// Layer battery: admissibility, residual, shape, mobility and tail.
pub fn run_layer(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BatteryReport> {
    let p = cfg.potential.build()?;
    let mut r = BatteryReport::new(Battery::Layer, cfg);
    let probe: Vec<f64> = (0..=4000).map(|k| -2.0 + k as f64 * 1e-3).collect();
    let assumption = validate_assumption_a(&p, &probe);
    r.push(Check::flag("assumption_a", assumption.all_pass()));
    let mut lp = layer_for(cfg, &p)?;
    let residual = discrete_layer_residual(&lp, &p);
    r.metric("iterations", lp.iterations as f64);
    r.metric("gamma", lp.gamma);
    r.metric("alpha", lp.alpha);
    r.metric("discrete_residual", residual);
    if !cfg.layer.exact {
        r.push(Check::at_most("residual", lp.residual, cfg.layer.tol));
    }
    r.push(Check::flag("monotone", lp.is_strictly_increasing()));
    let center = lp.center().map(f64::abs).unwrap_or(f64::INFINITY);
    r.push(Check::at_most("center_offset", center, lp.grid.spacing()));
    if let Some(g) = cfg.potential.exact_gamma() {
        r.push(Check::at_most("gamma_relative_error", (lp.gamma - g).abs() / g, 1e-2));
    }
    lp.tail_window = tail_window(&lp);
    let outer = lp.tail_window.1;
    r.metric("tail_constant", outer * outer * lp.eval_derivative(outer));
    r.metric("tail_constant_expected", 1.0 / (lp.alpha * std::f64::consts::PI));
    let tail = check_asymptotics(&lp)?;
    r.metric("tail_sup_quadratic", tail.sup_quadratic);
    r.metric("tail_cubic_at_outer", tail.cubic_at_outer);
    r.push(Check::flag("tail_bounded", tail.bounded));
    if let Some(path) = artifact(out, "layer.csv") {
        let x = lp.grid.nodes();
        write_csv(
            &path,
            &columns(&["x", "phi", "dphi", "lphi"]),
            (0..x.len()).map(|j| [x[j], lp.phi[j], lp.dphi[j], lp.lphi[j]]),
        )?;
    }
    let r = r.finish();
    if let Some(path) = artifact(out, "layer.json") {
        write_json(&path, &r)?;
    }
    Ok(r)
}

fn discrete_layer_residual(lp: &LayerProfile<f64>, p: &PotentialSpec<f64>) -> f64 {
    lp.lphi
        .iter()
        .zip(&lp.phi)
        .skip(lp.grid.interior().start)
        .take(lp.grid.interior().len())
        .map(|(l, v)| (l - p.w1(*v)).abs())
        .fold(0.0, f64::max)
}

fn corrector_for(
    cfg: &ExperimentConfig,
    p: &PotentialSpec<f64>,
    lp: &LayerProfile<f64>,
) -> Result<CorrectorProfile<f64>> {
    let _ = cfg;
    solve_corrector(lp, p, lp.grid, &CorrectorOptions::default())
}

/// Corrector battery: solvability, residual, orthogonality, decay, `gamma eta alpha = 1`.
pub fn run_corrector(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BatteryReport> {
    let p = cfg.potential.build()?;
    let lp = layer_for(cfg, &p)?;
    let cp = corrector_for(cfg, &p, &lp)?;
    let mut r = BatteryReport::new(Battery::Corrector, cfg);
    let tol = r.tolerances;
    r.metric("eta", cp.eta);
    r.metric("multiplier", cp.multiplier);
    r.push(Check::at_most(
        "solvability_defect",
        cp.solvability_defect.abs(),
        tol.solvability,
    ));
    r.push(Check::at_most("residual_sup", cp.residual_sup, tol.corrector_residual));
    r.push(Check::at_most(
        "orthogonality",
        cp.orthogonality.abs(),
        tol.orthogonality,
    ));
    r.push(Check::at_most(
        "boundary_psi",
        cp.boundary_magnitude(),
        tol.corrector_boundary,
    ));
    r.push(Check::at_most(
        "mobility_identity",
        (lp.gamma * cp.eta * p.alpha() - 1.0).abs(),
        tol.mobility_identity,
    ));
    let sup_dpsi = cp.dpsi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    r.metric("sup_dpsi", sup_dpsi);
    r.push(Check::flag("dpsi_finite", sup_dpsi.is_finite()));
    if let Some(path) = artifact(out, "corrector.csv") {
        let x = cp.grid.nodes();
        write_csv(
            &path,
            &columns(&["x", "psi", "dpsi", "g"]),
            (0..x.len()).map(|j| [x[j], cp.psi[j], cp.dpsi[j], cp.rhs[j]]),
        )?;
    }
    let r = r.finish();
    if let Some(path) = artifact(out, "corrector.json") {
        #[derive(Serialize)]
        struct CorrectorJson<'a> {
            #[serde(flatten)]
            report: &'a BatteryReport,
            eta: f64,
            residual_sup: f64,
            orthogonality_defect: f64,
            solvability_defect: f64,
        }
        write_json(
            &path,
            &CorrectorJson {
                report: &r,
                eta: cp.eta,
                residual_sup: cp.residual_sup,
                orthogonality_defect: cp.orthogonality,
                solvability_defect: cp.solvability_defect,
            },
        )?;
    }
    Ok(r)
}

fn mobility(cfg: &ExperimentConfig, p: &PotentialSpec<f64>) -> Result<(f64, Option<LayerProfile<f64>>)> {
    match cfg.gamma {
        Some(g) => Ok((g, None)),
        None => {
            let lp = layer_for(cfg, p)?;
            Ok((lp.gamma, Some(lp)))
        }
    }
}

fn ode_trajectory(cfg: &ExperimentConfig, gamma: f64, stress: &StressField<f64>) -> Result<Trajectory<f64>> {
    let state = ParticleState::new(0.0, cfg.positions.clone(), gamma)?;
    let opts = IntegrateOptions {
        output_times: cfg.sample_times(),
        ..Default::default()
    };
    integrate(&state, stress, cfg.t_end, &opts)
}

/// Particle battery: integration, ordering and the minimal-distance bound.
pub fn run_particles(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BatteryReport> {
    let p = cfg.potential.build()?;
    let stress = cfg.stress.build()?;
    let (gamma, _) = mobility(cfg, &p)?;
    let traj = ode_trajectory(cfg, gamma, &stress)?;
    let k = stress.lipschitz_k();
    let rep = check_repulsion_bound(&traj, k, gamma);
    let mut r = BatteryReport::new(Battery::Particles, cfg);
    r.metric("gamma", gamma);
    r.metric("lipschitz_k", k);
    r.metric("steps", traj.steps as f64);
    r.metric("final_min_dist", *traj.min_dist.last().unwrap_or(&f64::INFINITY));
    let ordered = traj.positions.iter().all(|x| x.windows(2).all(|w| w[1] > w[0]));
    r.push(Check::flag("ordered", ordered));
    r.push(Check::flag("repulsion_bound", rep.holds));
    if !rep.vacuous {
        r.metric("repulsion_worst_ratio", rep.worst_ratio);
    }
    if let Some(path) = artifact(out, "particles.csv") {
        let n = cfg.positions.len();
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x_{i}")));
        head.push("min_dist".into());
        head.push("bound".into());
        let bound = repulsion_bound_curve(&traj, k, gamma);
        let rows = (0..traj.len()).map(|s| {
            let mut row = vec![traj.times[s]];
            row.extend(&traj.positions[s]);
            row.push(traj.min_dist[s]);
            row.push(bound[s]);
            row
        });
        write_csv(&path, &head, rows)?;
    }
    let r = r.finish();
    if let Some(path) = artifact(out, "particles.json") {
        write_json(&path, &r)?;
    }
    Ok(r)
}

/// Tracked layer positions at the sample times of one field evolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackSeries {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

/// Evolves the prepared data for one `eps`, tracking at every sample time.
/// `snapshot` sees the state at each sample time (including `t = 0`).
pub fn evolve_and_track(
    cfg: &ExperimentConfig,
    p: &PotentialSpec<f64>,
    stress: &StressField<f64>,
    lp: &LayerProfile<f64>,
    eps: f64,
    mut snapshot: impl FnMut(&FieldState<f64>),
) -> Result<TrackSeries> {
    let grid = cfg.pde_grid()?;
    let n = cfg.positions.len();
    let times = cfg.sample_times();
    let interval = cfg.t_end / cfg.samples as f64;
    let opts = EvolveOptions {
        dt: Some(cfg.pde.dt_factor * default_dt(p, eps)),
        ..Default::default()
    };
    let ev = Evolver::with_interval(grid, p, eps, interval, &opts)?;
    let mut state = build_initial(lp, p, stress, &cfg.positions, eps, grid)?;
    snapshot(&state);
    let mut positions = vec![track_layers(&state, p, stress, n)?];
    let mut steps = 0usize;
    for t in times.iter().skip(1) {
        state = ev.run(&state, p, stress, *t, |_| {
            steps += 1;
            Ok(())
        })?;
        snapshot(&state);
        positions.push(track_layers(&state, p, stress, n)?);
    }
    Ok(TrackSeries {
        eps,
        dt: ev.dt(),
        steps,
        times,
        positions,
    })
}

/// Evolve battery for the first `eps` of the list.
pub fn run_evolve(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BatteryReport> {
    let p = cfg.potential.build()?;
    let stress = cfg.stress.build()?;
    let lp = layer_for(cfg, &p)?;
    let eps = cfg.eps[0];
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let grid = cfg.pde_grid()?;
    let nodes = grid.nodes();
    let series = evolve_and_track(cfg, &p, &stress, &lp, eps, |s| {
        if out.is_some() {
            rows.extend(nodes.iter().zip(&s.v).map(|(x, v)| [s.t, *x, *v]));
        }
    })?;
    let mut r = BatteryReport::new(Battery::Evolve, cfg);
    r.metric("eps", eps);
    r.metric("dt", series.dt);
    r.metric("steps", series.steps as f64);
    r.push(Check::flag("range_and_tracking", true));
    let first = &series.positions[0];
    let last = &series.positions[series.positions.len() - 1];
    let n = first.len();
    if stress.is_uniform() && stress.value(0.0, 0.0) == 0.0 && n >= 2 {
        r.push(Check::flag(
            "outer_layers_spread",
            last[0] < first[0] && last[n - 1] > first[n - 1],
        ));
    }
    if let Some(path) = artifact(out, "field.csv") {
        write_csv(&path, &columns(&["t", "x", "v"]), rows)?;
    }
    let r = r.finish();
    if let Some(path) = artifact(out, "tracks.json") {
        #[derive(Serialize)]
        struct TracksJson<'a> {
            #[serde(flatten)]
            report: &'a BatteryReport,
            track: &'a TrackSeries,
        }
        write_json(
            &path,
            &TracksJson {
                report: &r,
                track: &series,
            },
        )?;
    }
    Ok(r)
}

/// Tracking error of one `eps` against the particle system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsRun {
    pub eps: f64,
    /// `max_t max_i |x_i^eps(t) - x_i(t)|`.
    pub error: f64,
    pub track: TrackSeries,
}

/// Outcome of [`run_convergence`]. Contains no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub scenario: String,
    pub config_hash: String,
    pub tolerances: Tolerances,
    pub gamma: f64,
    pub times: Vec<f64>,
    pub ode: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Errors strictly decrease along the `eps` list (vacuous for one entry).
    pub monotone: bool,
    pub threshold: Option<f64>,
    pub threshold_pass: bool,
    pub runs: Vec<EpsRun>,
    pub ansatz: AnsatzSummary,
}

/// Ansatz residual diagnostics over the sample times, one entry per `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzSummary {
    pub delta: f64,
    /// `sup |I|` of the unshifted ansatz.
    pub sup_unshifted: Vec<f64>,
    /// `min I` of the `delta`-shifted ansatz.
    pub min_shifted: Vec<f64>,
}

impl AnsatzSummary {
    /// The shifted residual is at least `delta/4` at the smallest `eps`.
    pub fn shifted_pass(&self) -> bool {
        self.min_shifted.last().is_some_and(|m| *m >= self.delta / 4.0)
    }
}

/// Evaluates the unshifted and the `delta`-shifted ansatz residual on the PDE grid.
pub fn ansatz_summary(
    cfg: &ExperimentConfig,
    p: &PotentialSpec<f64>,
    stress: &StressField<f64>,
    lp: &LayerProfile<f64>,
    gamma: f64,
) -> Result<AnsatzSummary> {
    let cp = solve_corrector(lp, p, lp.grid, &CorrectorOptions::default())?;
    let grid = cfg.pde_grid()?;
    let times = cfg.sample_times();
    let extremes = |delta: f64| -> Result<Vec<(f64, f64)>> {
        let start: Vec<f64> = cfg.positions.iter().map(|x| x - delta).collect();
        let opts = IntegrateOptions {
            output_times: times.clone(),
            ..Default::default()
        };
        let traj = integrate(
            &ParticleState::new(0.0, start, gamma)?,
            &stress.with_offset(delta),
            cfg.t_end,
            &opts,
        )?;
        cfg.eps
            .iter()
            .map(|&eps| {
                times.iter().try_fold((0.0f64, f64::INFINITY), |(sup, min), &t| {
                    let r = ansatz_residual(lp, Some(&cp), p, stress, delta, &traj, eps, t, &grid)?;
                    Ok((sup.max(r.sup), min.min(r.min)))
                })
            })
            .collect()
    };
    Ok(AnsatzSummary {
        delta: cfg.delta,
        sup_unshifted: extremes(0.0)?.iter().map(|r| r.0).collect(),
        min_shifted: extremes(cfg.delta)?.iter().map(|r| r.1).collect(),
    })
}

impl ConvergenceReport {
    pub fn all_pass(&self) -> bool {
        self.monotone && self.threshold_pass
    }
}

/// Per-`eps` wall-clock runtimes, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTiming {
    pub eps: Vec<f64>,
    pub seconds: Vec<f64>,
}

/// For each `eps`: prepared data, evolution, tracking at the sample times,
/// and the error against the particle system with the same layer's `gamma`.
/// The `eps` runs are independent and execute on separate threads.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<(ConvergenceReport, ConvergenceTiming)> {
    cfg.validate()?;
    let p = cfg.potential.build()?;
    let stress = cfg.stress.build()?;
    let lp = layer_for(cfg, &p)?;
    let gamma = cfg.gamma.unwrap_or(lp.gamma);
    let traj = ode_trajectory(cfg, gamma, &stress)?;
    let results: Vec<Result<(EpsRun, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .eps
            .iter()
            .map(|&eps| {
                let (p, stress, lp, traj) = (&p, &stress, &lp, &traj);
                scope.spawn(move || {
                    let start = Instant::now();
                    let track = evolve_and_track(cfg, p, stress, lp, eps, |_| {})
                        .map_err(|e| Error::Config(format!("eps = {eps}: {e}")))?;
                    let error = track
                        .positions
                        .iter()
                        .zip(&traj.positions)
                        .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
                        .fold(0.0, f64::max);
                    Ok((EpsRun { eps, error, track }, start.elapsed().as_secs_f64()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Config("eps run panicked".into())))
            })
            .collect()
    });
    let mut runs = Vec::new();
    let mut seconds = Vec::new();
    for r in results {
        let (run, s) = r?;
        runs.push(run);
        seconds.push(s);
    }
    let errors: Vec<f64> = runs.iter().map(|r| r.error).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]) && errors.iter().all(|e| e.is_finite());
    let ansatz = ansatz_summary(cfg, &p, &stress, &lp, gamma)?;
    let threshold_pass = match (cfg.threshold, errors.last()) {
        (Some(t), Some(e)) => *e < t,
        _ => true,
    };
    let report = ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        config_hash: cfg.hash(),
        tolerances: Tolerances::for_config(cfg),
        gamma,
        times: traj.times.clone(),
        ode: traj.positions.clone(),
        eps: cfg.eps.clone(),
        errors,
        monotone,
        threshold: cfg.threshold,
        threshold_pass,
        runs,
        ansatz,
    };
    Ok((
        report,
        ConvergenceTiming {
            eps: cfg.eps.clone(),
            seconds,
        },
    ))
}

/// Convergence battery: writes `convergence.json`, `convergence.csv` and `timing.json`.
pub fn run_converge(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<BatteryReport> {
    let (report, timing) = run_convergence(cfg)?;
    let mut r = BatteryReport::new(Battery::Converge, cfg);
    for (e, err) in report.eps.iter().zip(&report.errors) {
        r.metric(&format!("error_eps_{e}"), *err);
    }
    r.push(Check::flag("monotone_decrease", report.monotone));
    if let (Some(t), Some(e)) = (report.threshold, report.errors.last()) {
        r.push(Check::below("final_error", *e, t));
    }
    let a = &report.ansatz;
    for (e, v) in report.eps.iter().zip(&a.sup_unshifted) {
        r.metric(&format!("ansatz_sup_eps_{e}"), *v);
    }
    if a.delta > 0.0 {
        let min = *a.min_shifted.last().unwrap_or(&f64::NEG_INFINITY);
        r.push(Check::at_least("shifted_ansatz_min", min, a.delta / 4.0));
    }
    if let Some(dir) = out {
        write_json(&dir.join("convergence.json"), &report)?;
        write_json(&dir.join("timing.json"), &timing)?;
        write_csv(
            &dir.join("convergence.csv"),
            &columns(&["eps", "error"]),
            report.eps.iter().zip(&report.errors).map(|(e, err)| [*e, *err]),
        )?;
    }
    Ok(r.finish())
}

/// Runs one battery, recording failures in the report instead of returning them.
pub fn run_battery(battery: Battery, cfg: &ExperimentConfig, out: Option<&Path>) -> BatteryReport {
    let result = match battery {
        Battery::Layer => run_layer(cfg, out),
        Battery::Corrector => run_corrector(cfg, out),
        Battery::Particles => run_particles(cfg, out),
        Battery::Evolve => run_evolve(cfg, out),
        Battery::Converge => run_converge(cfg, out),
    };
    result.unwrap_or_else(|e| BatteryReport::failed(battery, cfg, &e))
}

/// One scenario of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub battery: Battery,
    #[serde(flatten)]
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub scenario: Vec<SuiteEntry>,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for entry in &cfg.scenario {
            entry.config.validate()?;
        }
        let mut ids: Vec<&str> = cfg.scenario.iter().map(|e| e.config.scenario.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("scenario ids must be unique".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Every battery on the PN potential with `a = 1`.
    pub fn default_suite() -> Self {
        let base = ExperimentConfig::default();
        let with = |id: &str, battery: Battery, f: &dyn Fn(&mut ExperimentConfig)| {
            let mut config = ExperimentConfig {
                scenario: id.into(),
                ..base.clone()
            };
            f(&mut config);
            SuiteEntry { battery, config }
        };
        Self {
            scenario: vec![
                with("pn-layer", Battery::Layer, &|_| {}),
                with("pn-corrector", Battery::Corrector, &|_| {}),
                with("fourier-corrector", Battery::Corrector, &|c| {
                    c.potential = PotentialConfig::Fourier {
                        coefficients: vec![0.8, 0.2],
                    };
                }),
                with("pn-particles-affine", Battery::Particles, &|c| {
                    c.stress = StressConfig::Affine {
                        base: 0.0,
                        slope: 0.1,
                        half_width: 10.0,
                    };
                    c.t_end = 2.0;
                    c.samples = 40;
                }),
                with("pn-evolve", Battery::Evolve, &|c| {
                    c.eps = vec![0.1];
                    c.pde.dt_factor = 1.0;
                }),
                with("pn-converge", Battery::Converge, &|_| {}),
            ],
        }
    }
}

/// Aggregated suite outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub schema_version: u32,
    pub results: Vec<BatteryReport>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

/// Runs every scenario, each writing into `out/<scenario>/`; failures are
/// recorded and the suite continues.
pub fn run_suite(suite: &SuiteConfig, out: Option<&Path>) -> Result<SuiteSummary> {
    let mut results = Vec::with_capacity(suite.scenario.len());
    for entry in &suite.scenario {
        let dir = out.map(|d| d.join(&entry.config.scenario));
        results.push(run_battery(entry.battery, &entry.config, dir.as_deref()));
    }
    let passed = results.iter().filter(|r| r.all_pass).count();
    let summary = SuiteSummary {
        schema_version: SCHEMA_VERSION,
        failed: results.len() - passed,
        passed,
        all_pass: passed == results.len(),
        results,
    };
    if let Some(dir) = out {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}
