//! Executable checks for the long-time behaviour of the flow.
//!
//! Every check returns a [`Verdict`] whose margin is the signed distance to
//! its threshold, so `passed` and `margin >= 0` always agree. Multi-clause
//! checks report the smallest clause margin.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::finite_or_null;
use crate::background::{conformal_scalar_curvature, least_squares_slope, Background, BackgroundError};
use crate::elliptic::EllipticSolution;
use crate::grid::CORE_RADIUS;
use crate::flow::{rescaled, step_with, FlowControls, FlowError, FlowState, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("trajectory summary holds no rows with t >= {0}")]
    EmptyLog(f64),
    #[error("need at least {need} checkpoints, found {found}")]
    TooFewCheckpoints { need: usize, found: usize },
    #[error("check not applicable: {0}")]
    Precondition(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Background(#[from] BackgroundError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub name: String,
    #[serde(with = "finite_or_null")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check_name: String,
    pub passed: bool,
    #[serde(with = "finite_or_null")]
    pub margin: f64,
    pub details: Vec<Detail>,
}

impl Verdict {
    pub fn from_margin(name: &str, margin: f64, details: Vec<(&str, f64)>) -> Self {
        Self {
            check_name: name.to_string(),
            passed: margin >= 0.0,
            margin,
            details: details.into_iter().map(|(n, v)| Detail { name: n.to_string(), value: v }).collect(),
        }
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details.iter().find(|d| d.name == name).map(|d| d.value)
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

/// Slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    least_squares_slope(&pts)
}

/// R·t ≥ −(1 + tol) for every logged t ≥ 1.
pub fn check_curvature_lower(traj: &Trajectory, tol: f64) -> Result<Verdict, VerifyError> {
    let rows: Vec<_> = traj.summary.iter().filter(|r| r.t >= 1.0).collect();
    if rows.is_empty() {
        return Err(VerifyError::EmptyLog(1.0));
    }
    let worst = rows.iter().min_by(|a, b| a.min_rt.total_cmp(&b.min_rt)).unwrap();
    Ok(Verdict::from_margin(
        "curvature_lower",
        worst.min_rt + 1.0 + tol,
        vec![("min_rt", worst.min_rt), ("t_worst", worst.t)],
    ))
}

fn checkpoints_from(traj: &Trajectory, t0: f64) -> Vec<&FlowState> {
    traj.checkpoints.iter().filter(|c| c.t >= t0).collect()
}

/// ũ(·, t_{k+1}) ≤ ũ(·, t_k) + tol across consecutive checkpoints with t ≥ 1.
pub fn check_rescaled_monotone(traj: &Trajectory, tol: f64) -> Result<Verdict, VerifyError> {
    let cps = checkpoints_from(traj, 1.0);
    if cps.len() < 2 {
        return Err(VerifyError::TooFewCheckpoints { need: 2, found: cps.len() });
    }
    let mut worst = f64::NEG_INFINITY;
    let mut t_worst = f64::NAN;
    for pair in cps.windows(2) {
        let a = rescaled(pair[0], traj.n_dim)?;
        let b = rescaled(pair[1], traj.n_dim)?;
        let rise = max_of(a.iter().zip(&b).map(|(x, y)| y - x));
        if rise > worst {
            worst = rise;
            t_worst = pair[1].t;
        }
    }
    Ok(Verdict::from_margin("rescaled_monotone", tol - worst, vec![("max_increase", worst), ("t_worst", t_worst)]))
}

/// u₁ ≤ u₂ + tol nodewise at every checkpoint time present in both runs.
pub fn check_comparison(lower: &Trajectory, upper: &Trajectory, tol: f64) -> Result<Verdict, VerifyError> {
    if lower.radii != upper.radii {
        return Err(VerifyError::Precondition("trajectories live on different grids".into()));
    }
    let mut worst = f64::INFINITY;
    let mut t_worst = f64::NAN;
    let mut matched = 0usize;
    for a in &lower.checkpoints {
        if let Some(b) = upper.checkpoint_at(a.t) {
            matched += 1;
            let gap = min_of(a.u.iter().zip(&b.u).map(|(x, y)| y - x));
            if gap < worst {
                worst = gap;
                t_worst = a.t;
            }
        }
    }
    if matched == 0 {
        return Err(VerifyError::TooFewCheckpoints { need: 1, found: 0 });
    }
    Ok(Verdict::from_margin(
        "comparison",
        worst + tol,
        vec![("min_gap", worst), ("t_worst", t_worst), ("matched_times", matched as f64)],
    ))
}

/// The −1-curvature steady solution stays below ũ(·, t) + tol for t ≥ 1.
/// `y_bracket`, when given, must certify Y < 0.
pub fn check_lower_envelope(
    traj: &Trajectory,
    steady: &EllipticSolution,
    y_bracket: Option<(f64, f64)>,
    tol: f64,
) -> Result<Verdict, VerifyError> {
    if let Some((lo, hi)) = y_bracket {
        if !(lo <= hi && hi < 0.0) {
            return Err(VerifyError::Precondition(format!("Y bracket [{lo}, {hi}] is not negative")));
        }
    }
    let cps = checkpoints_from(traj, 1.0);
    if cps.is_empty() {
        return Err(VerifyError::TooFewCheckpoints { need: 1, found: 0 });
    }
    let mut worst = f64::INFINITY;
    let mut t_worst = f64::NAN;
    for cp in &cps {
        let ut = rescaled(cp, traj.n_dim)?;
        let gap = min_of(ut.iter().zip(&steady.values).map(|(a, b)| a - b));
        if gap < worst {
            worst = gap;
            t_worst = cp.t;
        }
    }
    let last = rescaled(cps.last().unwrap(), traj.n_dim)?;
    let core = traj.radii.partition_point(|&r| r <= 10.0);
    let final_gap = max_of((0..core).map(|i| (last[i] - steady.values[i]).abs()));
    Ok(Verdict::from_margin(
        "lower_envelope",
        worst + tol,
        vec![("min_gap", worst), ("t_worst", t_worst), ("final_gap_r_le_10", final_gap)],
    ))
}

/// max over K of u at each checkpoint with t in [t_lo, t_hi].
fn max_k_series(traj: &Trajectory, t_lo: f64, t_hi: f64) -> (Vec<f64>, Vec<f64>) {
    let k = traj.k_nodes();
    traj.checkpoints
        .iter()
        .filter(|c| c.t >= t_lo && c.t <= t_hi && c.t > 0.0)
        .map(|c| (c.t, max_of(c.u[k.clone()].iter().cloned())))
        .unzip()
}

/// Rate exponent of max_K u over the last decade of checkpoints.
pub fn blowup_rate(traj: &Trajectory) -> f64 {
    let t_end = traj.last().t;
    let (ts, ms) = max_k_series(traj, t_end / 10.0, t_end);
    if ts.len() < 2 {
        return f64::NAN;
    }
    loglog_slope(&ts, &ms)
}

/// Theorem A: convergence of ũ to the steady solution on r ≤ K, blow-up
/// rate (n−2)/4 ± 10%, and spatial decay of the limit (steady decay exponent
/// within 15% of n−2). The value ũ(R_max/2, t_end) is reported as a detail.
pub fn check_theorem_a(
    traj: &Trajectory,
    steady: &EllipticSolution,
    k_radius: f64,
    tol: f64,
) -> Result<Verdict, VerifyError> {
    let n = traj.n_dim as f64;
    let last = traj.last();
    let k_end = traj.radii.partition_point(|&r| r <= k_radius);
    let growth = max_of(last.u[..k_end].iter().cloned());
    if !(growth > 1.0 + 1e-9) {
        return Err(VerifyError::Precondition("no blow-up on K: max_K u(t_end) ≤ 1".into()));
    }
    let ut = rescaled(last, traj.n_dim)?;
    let sup_err = max_of((0..k_end).map(|i| (ut[i] - steady.values[i]).abs()));
    let rate = blowup_rate(traj);
    let target = (n - 2.0) / 4.0;
    let decay = steady.decay_exponent;
    let mid = traj.radii.partition_point(|&r| r < traj.radii[traj.radii.len() - 1] / 2.0);
    let margins = [tol - sup_err, 0.1 * target - (rate - target).abs(), 0.15 * (n - 2.0) - (decay - (n - 2.0)).abs()];
    Ok(Verdict::from_margin(
        "theorem_a",
        min_of(margins.iter().cloned()),
        vec![
            ("sup_error_core", sup_err),
            ("rate", rate),
            ("rate_target", target),
            ("steady_decay_exponent", decay),
            ("u_tilde_at_half_rmax", ut[mid]),
        ],
    ))
}

/// Theorem B: max ũ(t_end) ≤ tol and the dyadic max ũ sequence halves over
/// the last decade.
pub fn check_theorem_b(traj: &Trajectory, tol: f64) -> Result<Verdict, VerifyError> {
    let cps = checkpoints_from(traj, 1.0);
    if cps.len() < 2 {
        return Err(VerifyError::TooFewCheckpoints { need: 2, found: cps.len() });
    }
    let top = |c: &FlowState| -> Result<f64, VerifyError> { Ok(max_of(rescaled(c, traj.n_dim)?.into_iter())) };
    let last = cps.last().unwrap();
    let final_max = top(last)?;
    let earlier = cps.iter().rev().find(|c| c.t <= last.t / 10.0).copied().unwrap_or(cps[0]);
    let earlier_max = top(earlier)?;
    let margins = [tol - final_max, 0.5 * earlier_max - final_max];
    Ok(Verdict::from_margin(
        "theorem_b",
        min_of(margins.iter().cloned()),
        vec![
            ("max_u_tilde_final", final_max),
            ("max_u_tilde_decade_earlier", earlier_max),
            ("t_decade_earlier", earlier.t),
            ("max_u_final", max_of(last.u.iter().cloned())),
        ],
    ))
}

/// Theorem C: u(t_end)/max_K u(t_end) matches w on r ≤ 2·K_radius.
pub fn check_theorem_c(
    traj: &Trajectory,
    w: &EllipticSolution,
    k_radius: f64,
    tol: f64,
) -> Result<Verdict, VerifyError> {
    let last = traj.last();
    let k_end = traj.radii.partition_point(|&r| r <= k_radius);
    let two_k = traj.radii.partition_point(|&r| r <= 2.0 * k_radius);
    let kmax = max_of(last.u[..k_end].iter().cloned());
    let profile: Vec<f64> = last.u.iter().map(|u| u / kmax).collect();
    let sup_err = max_of((0..two_k).map(|i| (profile[i] - w.values[i]).abs()));
    let norm = max_of(profile[..k_end].iter().cloned());
    Ok(Verdict::from_margin(
        "theorem_c",
        tol - sup_err,
        vec![("sup_error", sup_err), ("profile_max_on_k", norm), ("w_max_on_k", max_of(w.values[..k_end].iter().cloned()))],
    ))
}

/// Harnack ratio max/min on the radius band `ball` at every checkpoint.
pub fn check_harnack(traj: &Trajectory, ball: (f64, f64), c_cap: f64) -> Result<Verdict, VerifyError> {
    let idx: Vec<usize> = (0..traj.radii.len()).filter(|&i| traj.radii[i] >= ball.0 && traj.radii[i] <= ball.1).collect();
    if idx.is_empty() {
        return Err(VerifyError::Precondition("ball contains no nodes".into()));
    }
    let ratios: Vec<(f64, f64)> = traj
        .checkpoints
        .iter()
        .map(|c| {
            let hi = max_of(idx.iter().map(|&i| c.u[i]));
            let lo = min_of(idx.iter().map(|&i| c.u[i]));
            (c.t, hi / lo)
        })
        .collect();
    let worst = max_of(ratios.iter().map(|r| r.1));
    let t_end = traj.last().t;
    let (ts, rs): (Vec<f64>, Vec<f64>) =
        ratios.iter().filter(|r| r.0 >= t_end / 10.0 && r.0 > 0.0).cloned().unzip();
    let slope = if ts.len() >= 2 { loglog_slope(&ts, &rs) } else { f64::NAN };
    Ok(Verdict::from_margin(
        "harnack",
        c_cap - worst,
        vec![("worst_ratio", worst), ("c_cap", c_cap), ("last_decade_log_slope", slope)],
    ))
}

/// −1/t ≤ R ≤ 0 along the v-flow, within tol, at every logged time.
pub fn check_curvature_sandwich(traj_v: &Trajectory, tol: f64) -> Result<Verdict, VerifyError> {
    if traj_v.summary.is_empty() {
        return Err(VerifyError::EmptyLog(0.0));
    }
    let min_rt = min_of(traj_v.summary.iter().map(|r| r.min_rt));
    let max_r = max_of(traj_v.summary.iter().map(|r| r.max_r));
    let margins = [min_rt + 1.0 + tol, tol - max_r];
    Ok(Verdict::from_margin(
        "curvature_sandwich",
        min_of(margins.iter().cloned()),
        vec![("min_rt", min_rt), ("max_r", max_r)],
    ))
}

/// Which metric supplies the Laplacian in the curvature evolution identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMetric {
    /// g(t) = u^{4/(n−2)}g₀, the correct choice.
    Evolving,
    /// g₀, a deliberate error used as a negative control.
    Background,
}

/// Nodes with CORE_RADIUS ≤ r ≤ R_max/2. Inside the core the spacing is so
/// fine that roundoff in R, differentiated once more by Δ, swamps the O(dt)
/// term; the outer half is left to the boundary layer of the Dirichlet pin.
pub fn evolution_band(bg: &Background) -> std::ops::Range<usize> {
    bg.grid.indices_in(CORE_RADIUS, 0.5 * bg.grid.r_max())
}

/// Sup over [`evolution_band`] of |(R(t+dt) − R(t))/dt − ((n−1)Δ_{g(t)}R + R²)| for one dt.
pub fn evolution_defect(
    bg: &Background,
    state: &FlowState,
    dt: f64,
    controls: &FlowControls,
    metric: EvolutionMetric,
) -> Result<f64, VerifyError> {
    let n = bg.n_dim() as f64;
    let (next, _) = step_with(bg, state, dt, controls)?;
    let r0 = conformal_scalar_curvature(bg, &state.u)?;
    let r1 = conformal_scalar_curvature(bg, &next.u)?;
    let lap_bg = match metric {
        EvolutionMetric::Evolving => bg.conformal_change(&state.u)?,
        EvolutionMetric::Background => bg.clone(),
    };
    // diffusion() is −a_nΔ.
    let minus_an_lap = lap_bg.operator().diffusion(&r0);
    Ok(max_of(evolution_band(bg).map(|i| {
        let dtr = (r1[i] - r0[i]) / dt;
        let rhs = -(n - 1.0) / bg.a_n * minus_an_lap[i] + r0[i] * r0[i];
        (dtr - rhs).abs()
    })))
}

/// Richardson study of the curvature evolution identity at `probe_time`
/// with steps dt_probe, dt_probe/2, dt_probe/4. Passes if the measured order
/// is ≥ 0.9, or if every defect is already below `tol` (stationary data).
pub fn check_scalar_evolution(
    bg: &Background,
    traj: &Trajectory,
    probe_time: f64,
    dt_probe: f64,
    tol: f64,
    metric: EvolutionMetric,
) -> Result<Verdict, VerifyError> {
    let state = traj
        .checkpoint_at(probe_time)
        .ok_or_else(|| VerifyError::Precondition(format!("no checkpoint at t = {probe_time}")))?;
    let controls = &traj.meta.controls;
    let dts = [dt_probe, dt_probe / 2.0, dt_probe / 4.0];
    let mut errs = Vec::with_capacity(3);
    for &dt in &dts {
        errs.push(evolution_defect(bg, state, dt, controls, metric)?);
    }
    let worst = max_of(errs.iter().cloned());
    let (order, margin) = if worst <= tol {
        (f64::NAN, tol - worst)
    } else {
        let order = loglog_slope(&dts, &errs);
        (order, order - 0.9)
    };
    Ok(Verdict::from_margin(
        "scalar_evolution",
        margin,
        vec![("order", order), ("defect_dt", errs[0]), ("defect_dt_2", errs[1]), ("defect_dt_4", errs[2])],
    ))
}
