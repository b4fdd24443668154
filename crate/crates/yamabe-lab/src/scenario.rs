//! Scenario configs and the pipeline that turns one into artifacts.
//!
//! A scenario writes everything under `<out>/<name>/`. Each stage reads its
//! inputs back from disk, so the stages can also be run one at a time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::{
    ensure_dir, read_csv, read_json, read_solution, read_trajectory, read_trajectory_meta, solution_paths, write_csv,
    write_json, write_solution, write_trajectory, ArtifactError, Stamp, Table,
};
use crate::background::{make_background, Background, CatalogEntry};
use crate::elliptic::{
    compact_target, prescribe_scalar_curvature, solve_compactified_u0, solve_harmonic_decay, solve_steady_negative,
    EllipticSolution, EquationTag, NewtonOptions,
};
use crate::flow::{run, FlowControls, Trajectory};
use crate::grid::GridSpec;
use crate::verify::{
    check_comparison, check_curvature_lower, check_curvature_sandwich, check_harnack, check_lower_envelope,
    check_rescaled_monotone, check_scalar_evolution, check_theorem_a, check_theorem_b, check_theorem_c,
    EvolutionMetric, Verdict, VerifyError,
};
use crate::yamabe::{estimate_yamabe, YamabeEstimate, YamabeOptions, YamabeSign};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    ConfigParse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{stage} failed: {message}")]
    Solver { stage: String, message: String },
    #[error("check {check} is not applicable: {message}")]
    NotApplicable { check: String, message: String },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigParse { .. } | Self::Invalid(_) | Self::NotApplicable { .. } => EXIT_CONFIG,
            Self::Solver { .. } | Self::Artifact(_) => EXIT_SOLVER,
        }
    }

    fn solver(stage: &str, err: impl std::fmt::Display) -> Self {
        Self::Solver { stage: stage.to_string(), message: err.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticConfig {
    pub newton: NewtonOptions,
    /// Solves to run in addition to those the checks need.
    pub requests: Vec<EquationTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YamabeConfig {
    pub enabled: bool,
    pub tol: f64,
    pub ball_radii: Vec<f64>,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for YamabeConfig {
    fn default() -> Self {
        let d = YamabeOptions::default();
        Self { enabled: true, tol: 1e-6, ball_radii: d.ball_radii, max_iter: d.max_iter, rel_tol: d.rel_tol }
    }
}

/// Which stored flow a check reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowSelect {
    #[default]
    U,
    URho,
    V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    CurvatureLower { tol: f64 },
    RescaledMonotone { tol: f64 },
    /// Compares u with a second run started from, and pinned at, 1 + offset.
    Comparison { tol: f64, offset: f64 },
    LowerEnvelope { tol: f64 },
    TheoremA { tol: f64 },
    TheoremB { tol: f64 },
    TheoremC { tol: f64 },
    Harnack {
        ball: (f64, f64),
        c_cap: f64,
        #[serde(default)]
        flow: FlowSelect,
    },
    CurvatureSandwich { tol: f64 },
    ScalarEvolution {
        probe_time: f64,
        dt_probe: f64,
        tol: f64,
        #[serde(default = "evolving")]
        metric: EvolutionMetric,
    },
}

fn evolving() -> EvolutionMetric {
    EvolutionMetric::Evolving
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CurvatureLower { .. } => "curvature_lower",
            Self::RescaledMonotone { .. } => "rescaled_monotone",
            Self::Comparison { .. } => "comparison",
            Self::LowerEnvelope { .. } => "lower_envelope",
            Self::TheoremA { .. } => "theorem_a",
            Self::TheoremB { .. } => "theorem_b",
            Self::TheoremC { .. } => "theorem_c",
            Self::Harnack { .. } => "harnack",
            Self::CurvatureSandwich { .. } => "curvature_sandwich",
            Self::ScalarEvolution { .. } => "scalar_evolution",
        }
    }

    fn thresholds(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Self::CurvatureLower { tol }
            | Self::RescaledMonotone { tol }
            | Self::LowerEnvelope { tol }
            | Self::TheoremA { tol }
            | Self::TheoremB { tol }
            | Self::TheoremC { tol }
            | Self::CurvatureSandwich { tol } => vec![("tol", tol)],
            Self::Comparison { tol, offset } => vec![("tol", tol), ("offset", offset)],
            Self::Harnack { ball, c_cap, .. } => vec![("ball width", ball.1 - ball.0), ("c_cap", c_cap)],
            Self::ScalarEvolution { probe_time, dt_probe, tol, .. } => {
                vec![("tol", tol), ("dt_probe", dt_probe), ("probe_time", probe_time + f64::MIN_POSITIVE)]
            }
        }
    }

    fn needs_rho(&self) -> bool {
        matches!(self, Self::CurvatureSandwich { .. } | Self::Harnack { flow: FlowSelect::URho | FlowSelect::V, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub background: CatalogEntry,
    pub k_radius: f64,
    pub t_end: f64,
    #[serde(default)]
    pub flow: FlowControls,
    #[serde(default)]
    pub elliptic: EllipticConfig,
    #[serde(default)]
    pub yamabe: YamabeConfig,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    /// Used when no output directory is given on the command line.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let sc: Self = serde_json::from_str(text)
            .map_err(|e| ScenarioError::ConfigParse { path: path.to_path_buf(), message: e.to_string() })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::ConfigParse { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.name.starts_with('.')
        {
            return bad(format!("name {:?} must be non-empty and use only [A-Za-z0-9._-]", self.name));
        }
        if !(self.t_end >= 1.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and >= 1, got {}", self.t_end));
        }
        self.flow.validate().map_err(|e| ScenarioError::Invalid(format!("flow: {e}")))?;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.elliptic.newton.tol) {
            return bad("elliptic.newton.tol must be positive".into());
        }
        if !positive(self.yamabe.tol) || !positive(self.yamabe.rel_tol) {
            return bad("yamabe.tol and yamabe.rel_tol must be positive".into());
        }
        for (i, check) in self.checks.iter().enumerate() {
            for (what, value) in check.thresholds() {
                if !positive(value) {
                    return bad(format!("checks[{i}] ({}): {what} must be positive, got {value}", check.name()));
                }
            }
            match *check {
                CheckSpec::Harnack { ball, .. } if ball.0 < 0.0 => {
                    return bad(format!("checks[{i}] (harnack): ball must start at r >= 0"));
                }
                CheckSpec::ScalarEvolution { probe_time, .. } if probe_time > self.t_end => {
                    return bad(format!("checks[{i}] (scalar_evolution): probe_time exceeds t_end"));
                }
                _ => {}
            }
        }
        self.background().map(|_| ())
    }

    pub fn stamp(&self) -> Stamp {
        Stamp { scenario: self.name.clone(), rng_seed: self.rng_seed }
    }

    pub fn background(&self) -> Result<Background, ScenarioError> {
        let grid = self.grid.build().map_err(|e| ScenarioError::Invalid(format!("grid: {e}")))?;
        make_background(&grid, &self.background, self.k_radius)
            .map_err(|e| ScenarioError::Invalid(format!("background: {e}")))
    }

    /// `<out>/<name>`, with `out` falling back to the configured directory.
    pub fn artifact_dir(&self, out: Option<&Path>) -> Result<PathBuf, ScenarioError> {
        let root = out
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .ok_or_else(|| ScenarioError::Invalid("no output directory given".into()))?;
        Ok(root.join(&self.name))
    }

    /// Elliptic solves needed by the checks plus explicit requests, in a fixed order.
    pub fn required_solves(&self) -> Vec<EquationTag> {
        let mut tags = self.elliptic.requests.clone();
        for c in &self.checks {
            match c {
                CheckSpec::LowerEnvelope { .. } | CheckSpec::TheoremA { .. } => tags.push(EquationTag::SteadyNeg),
                CheckSpec::TheoremC { .. } => tags.push(EquationTag::HarmonicDecay),
                _ if c.needs_rho() => tags.push(EquationTag::PrescribeRho),
                _ => {}
            }
        }
        let order = [
            EquationTag::SteadyNeg,
            EquationTag::HarmonicDecay,
            EquationTag::CompactifiedU0,
            EquationTag::PrescribeRho,
        ];
        order.into_iter().filter(|t| tags.contains(t)).collect()
    }

    fn needs_rho(&self) -> bool {
        self.checks.iter().any(CheckSpec::needs_rho)
    }

    fn yamabe_options(&self) -> YamabeOptions {
        YamabeOptions {
            ball_radii: self.yamabe.ball_radii.clone(),
            max_iter: self.yamabe.max_iter,
            rel_tol: self.yamabe.rel_tol,
            rng_seed: self.rng_seed,
        }
    }
}

/// Names must be unique when several scenarios share an output root.
pub fn validate_batch(scenarios: &[Scenario]) -> Result<(), ScenarioError> {
    for (i, a) in scenarios.iter().enumerate() {
        if scenarios[..i].iter().any(|b| b.name == a.name) {
            return Err(ScenarioError::Invalid(format!("duplicate scenario name {:?}", a.name)));
        }
    }
    Ok(())
}

/// Contents of `yamabe.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YamabeRecord {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub sign: YamabeSign,
    pub lower: f64,
    pub upper: f64,
    pub ball_radii: Vec<f64>,
    pub ball_upper: Vec<f64>,
    pub ball_eigenvalue: Vec<f64>,
}

pub fn stage_yamabe(sc: &Scenario, bg: &Background, dir: &Path) -> Result<YamabeRecord, ScenarioError> {
    let est: YamabeEstimate =
        estimate_yamabe(bg, sc.yamabe.tol, &sc.yamabe_options()).map_err(|e| ScenarioError::solver("yamabe", e))?;
    let record = YamabeRecord {
        stamp: sc.stamp(),
        sign: est.sign,
        lower: est.lower,
        upper: est.upper,
        ball_radii: est.ball_radii,
        ball_upper: est.ball_upper,
        ball_eigenvalue: est.ball_eigenvalue,
    };
    ensure_dir(dir)?;
    write_json(&dir.join("yamabe.json"), &record)?;
    Ok(record)
}

fn read_yamabe(dir: &Path) -> Result<Option<YamabeRecord>, ScenarioError> {
    let path = dir.join("yamabe.json");
    if path.exists() {
        Ok(Some(read_json(&path)?))
    } else {
        Ok(None)
    }
}

pub fn stage_elliptic(sc: &Scenario, bg: &Background, dir: &Path) -> Result<Vec<EllipticSolution>, ScenarioError> {
    ensure_dir(dir)?;
    let opts = &sc.elliptic.newton;
    let mut out = Vec::new();
    for tag in sc.required_solves() {
        let stage = format!("elliptic {}", crate::artifacts::tag_name(tag));
        let sol = match tag {
            EquationTag::SteadyNeg => solve_steady_negative(bg, opts),
            EquationTag::HarmonicDecay => solve_harmonic_decay(bg, opts),
            EquationTag::PrescribeRho => prescribe_scalar_curvature(bg, &compact_target(bg), opts),
            EquationTag::CompactifiedU0 => {
                let record = match read_yamabe(dir)? {
                    Some(r) => r,
                    None => stage_yamabe(sc, bg, dir)?,
                };
                let y = (record.sign == YamabeSign::Negative).then_some(record.upper);
                solve_compactified_u0(bg, record.sign, y, opts)
            }
        }
        .map_err(|e| ScenarioError::solver(&stage, e))?;
        write_solution(dir, &bg.grid.nodes, &sol, &sc.stamp())?;
        out.push(sol);
    }
    Ok(out)
}

pub fn flow_dir(dir: &Path, which: FlowSelect) -> PathBuf {
    match which {
        FlowSelect::U => dir.join("flow"),
        FlowSelect::URho => dir.join("rho").join("u_rho"),
        FlowSelect::V => dir.join("rho").join("v"),
    }
}

fn paired_dir(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("paired_{index}"))
}

fn finish_flow(stage: &str, traj: Result<Trajectory, crate::flow::FlowError>) -> Result<Trajectory, ScenarioError> {
    let traj = traj.map_err(|e| ScenarioError::solver(stage, e))?;
    Ok(traj)
}

/// Label, output directory, background, controls and optional initial data.
type FlowJob = (String, PathBuf, Background, FlowControls, Option<Vec<f64>>);

/// Runs u, the paired comparison runs and, when needed, the ρ-flows. The
/// flows are independent and run on separate threads.
pub fn stage_simulate(sc: &Scenario, bg: &Background, dir: &Path) -> Result<(), ScenarioError> {
    ensure_dir(dir)?;
    let stamp = sc.stamp();
    let mut jobs: Vec<FlowJob> =
        vec![("flow".into(), flow_dir(dir, FlowSelect::U), bg.clone(), sc.flow.clone(), None)];
    for (i, c) in sc.checks.iter().enumerate() {
        if let CheckSpec::Comparison { offset, .. } = *c {
            let mut controls = sc.flow.clone();
            controls.boundary_value += offset;
            let init = vec![controls.boundary_value; bg.grid.len()];
            jobs.push((format!("flow paired_{i}"), paired_dir(dir, i), bg.clone(), controls, Some(init)));
        }
    }
    if sc.needs_rho() {
        let (_, rho) = read_solution(dir, EquationTag::PrescribeRho)?;
        let bg_rho = bg.conformal_change(&rho.values).map_err(|e| ScenarioError::solver("flow rho", e))?;
        let inv: Vec<f64> = rho.values.iter().map(|r| 1.0 / r).collect();
        jobs.push(("flow u_rho".into(), flow_dir(dir, FlowSelect::URho), bg_rho.clone(), sc.flow.clone(), Some(inv)));
        jobs.push(("flow v".into(), flow_dir(dir, FlowSelect::V), bg_rho, sc.flow.clone(), None));
    }
    let results: Vec<Result<Trajectory, ScenarioError>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(stage, _, bg, controls, init)| {
                s.spawn(move || finish_flow(stage, run(bg, sc.t_end, controls, init.as_deref())))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("flow worker panicked")).collect()
    });
    let mut first_abort = None;
    for ((stage, path, ..), traj) in jobs.iter().zip(results) {
        let traj = traj?;
        write_trajectory(path, &traj, &stamp)?;
        if traj.meta.aborted && first_abort.is_none() {
            first_abort = Some(ScenarioError::Solver {
                stage: stage.clone(),
                message: traj.meta.abort_reason.clone().unwrap_or_default(),
            });
        }
    }
    first_abort.map_or(Ok(()), Err)
}

/// Contents of `verdicts.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub verdicts: Vec<Verdict>,
}

fn map_check(check: &CheckSpec, r: Result<Verdict, VerifyError>) -> Result<Verdict, ScenarioError> {
    r.map_err(|e| match e {
        VerifyError::Flow(_) | VerifyError::Background(_) => ScenarioError::solver(check.name(), e),
        other => ScenarioError::NotApplicable { check: check.name().into(), message: other.to_string() },
    })
}

/// Evaluates the configured checks against the artifacts in `dir`.
pub fn stage_verify(sc: &Scenario, bg: &Background, dir: &Path) -> Result<Vec<Verdict>, ScenarioError> {
    let mut cache: Vec<(PathBuf, Trajectory)> = Vec::new();
    let mut load = |path: PathBuf| -> Result<Trajectory, ScenarioError> {
        if let Some((_, t)) = cache.iter().find(|(p, _)| *p == path) {
            return Ok(t.clone());
        }
        let t = read_trajectory(&path)?;
        cache.push((path, t.clone()));
        Ok(t)
    };
    let k = sc.k_radius;
    let mut verdicts = Vec::with_capacity(sc.checks.len());
    for (i, check) in sc.checks.iter().enumerate() {
        let u = load(flow_dir(dir, FlowSelect::U))?;
        let verdict = match *check {
            CheckSpec::CurvatureLower { tol } => check_curvature_lower(&u, tol),
            CheckSpec::RescaledMonotone { tol } => check_rescaled_monotone(&u, tol),
            CheckSpec::Comparison { tol, .. } => check_comparison(&u, &load(paired_dir(dir, i))?, tol),
            CheckSpec::LowerEnvelope { tol } => {
                let (_, steady) = read_solution(dir, EquationTag::SteadyNeg)?;
                let bracket = read_yamabe(dir)?.map(|y| (y.lower.min(y.upper), y.upper));
                check_lower_envelope(&u, &steady, bracket, tol)
            }
            CheckSpec::TheoremA { tol } => {
                let (_, steady) = read_solution(dir, EquationTag::SteadyNeg)?;
                check_theorem_a(&u, &steady, k, tol)
            }
            CheckSpec::TheoremB { tol } => check_theorem_b(&u, tol),
            CheckSpec::TheoremC { tol } => {
                let (_, w) = read_solution(dir, EquationTag::HarmonicDecay)?;
                check_theorem_c(&u, &w, k, tol)
            }
            CheckSpec::Harnack { ball, c_cap, flow } => check_harnack(&load(flow_dir(dir, flow))?, ball, c_cap),
            CheckSpec::CurvatureSandwich { tol } => check_curvature_sandwich(&load(flow_dir(dir, FlowSelect::V))?, tol),
            CheckSpec::ScalarEvolution { probe_time, dt_probe, tol, metric } => {
                check_scalar_evolution(bg, &u, probe_time, dt_probe, tol, metric)
            }
        };
        verdicts.push(map_check(check, verdict)?);
    }
    write_json(&dir.join("verdicts.json"), &VerdictFile { stamp: sc.stamp(), verdicts: verdicts.clone() })?;
    std::fs::write(dir.join("verdicts.txt"), verdict_table(&verdicts))
        .map_err(|e| ArtifactError::Io { path: dir.join("verdicts.txt"), source: e })?;
    Ok(verdicts)
}

/// Fixed-width text rendering of a verdict list.
pub fn verdict_table(verdicts: &[Verdict]) -> String {
    let mut s = format!("{:<20} {:<6} {:>24}  details\n", "check", "result", "margin");
    for v in verdicts {
        let details: Vec<String> = v.details.iter().map(|d| format!("{}={:.6e}", d.name, d.value)).collect();
        let _ = writeln!(
            s,
            "{:<20} {:<6} {:>24}  {}",
            v.check_name,
            if v.passed { "PASS" } else { "FAIL" },
            format!("{:.16e}", v.margin),
            details.join(" ")
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Artifact file the values were read from, relative to the scenario directory.
    pub source: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub rng_seed: u64,
    pub all_passed: bool,
    pub verdicts: Vec<Verdict>,
    pub curves: Vec<Curve>,
}

fn curve_from(dir: &Path, rel: &str, x: &str, y: &str, keep: impl Fn(f64) -> bool) -> Result<Curve, ScenarioError> {
    let path = dir.join(rel);
    let table = read_csv(&path)?;
    let missing = |c: &str| ArtifactError::Parse { path: path.clone(), message: format!("missing column {c}") };
    let xs = table.column(x).ok_or_else(|| missing(x))?;
    let ys = table.column(y).ok_or_else(|| missing(y))?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = xs.into_iter().zip(ys).filter(|(a, _)| keep(*a)).unzip();
    Ok(Curve { source: rel.to_string(), x_label: x.into(), y_label: y.into(), x: xs, y: ys })
}

/// Collects verdicts and key curves from the artifacts in `dir` into
/// `report.json` plus one CSV per curve. Nothing is recomputed.
pub fn emit_report(dir: &Path) -> Result<Report, ScenarioError> {
    let vf: VerdictFile = read_json(&dir.join("verdicts.json"))?;
    let mut curves = Vec::new();
    let flow = flow_dir(dir, FlowSelect::U);
    if flow.join("meta.json").exists() {
        curves.push(curve_from(dir, "flow/summary.csv", "t", "max_u_tilde", |t| t >= 1.0)?);
        let meta = read_trajectory_meta(&flow)?;
        if let Some(last) = meta.checkpoints.last() {
            curves.push(curve_from(dir, &format!("flow/{}", last.file), "r", "u_tilde", |_| true)?);
        }
    }
    let (w_csv, _) = solution_paths(dir, EquationTag::HarmonicDecay);
    if w_csv.exists() {
        curves.push(curve_from(dir, "elliptic_harmonic_decay.csv", "r", "value", |_| true)?);
    }
    let report = Report {
        scenario: vf.stamp.scenario.clone(),
        rng_seed: vf.stamp.rng_seed,
        all_passed: vf.verdicts.iter().all(|v| v.passed),
        verdicts: vf.verdicts,
        curves,
    };
    for (curve, name) in report.curves.iter().zip(["curve_max_u_tilde", "curve_u_tilde_final", "curve_w"]) {
        let name = if curve.source.starts_with("elliptic") { "curve_w" } else { name };
        let mut table = Table::new(&[&curve.x_label, &curve.y_label]);
        table.rows = curve.x.iter().zip(&curve.y).map(|(&a, &b)| vec![a, b]).collect();
        write_csv(&dir.join(format!("{name}.csv")), &vf.stamp, &table)?;
    }
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

/// Result of a full pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub dir: PathBuf,
    pub verdicts: Vec<Verdict>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.verdicts.iter().all(|v| v.passed) {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Yamabe classification, elliptic solves, flows, checks and report.
/// The config is validated before anything is written.
pub fn run_scenario(sc: &Scenario, out: Option<&Path>) -> Result<Outcome, ScenarioError> {
    sc.validate()?;
    let bg = sc.background()?;
    let dir = sc.artifact_dir(out)?;
    ensure_dir(&dir)?;
    write_json(&dir.join("scenario.json"), sc)?;
    if sc.yamabe.enabled {
        stage_yamabe(sc, &bg, &dir)?;
    }
    stage_elliptic(sc, &bg, &dir)?;
    stage_simulate(sc, &bg, &dir)?;
    let verdicts = stage_verify(sc, &bg, &dir)?;
    emit_report(&dir)?;
    Ok(Outcome { dir, verdicts })
}
