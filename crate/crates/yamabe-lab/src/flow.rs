//! Backward-Euler integration of the Yamabe flow for the conformal factor,
//!
//! ∂t(u^N) = (n+2)/4·(a_nΔ_{g₀}u − R₀u),  u(R_max, t) = boundary value,
//!
//! on a time grid that is uniform during a short warmup and geometric
//! (uniform in log t) afterwards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::background::{conformal_scalar_curvature, Background, BackgroundError, Outer};
use crate::elliptic::{EllipticError, EllipticSolution, NewtonOptions, SemilinearSystem};

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("step from t = {t} with dt = {dt:e} rejected: {reason}")]
    StepRejected { t: f64, dt: f64, reason: String },
    #[error("invalid time parameter: {0}")]
    Time(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("time {t} lies outside the trajectory horizon [{lo}, {hi}]")]
    Extrapolation { t: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Background(#[from] BackgroundError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub u: Vec<f64>,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: f64,
    pub max_u: f64,
    pub max_u_tilde: f64,
    pub min_rt: f64,
    pub harnack_k: f64,
    /// Largest interior curvature, for the upper half of curvature sandwiches.
    pub max_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowControls {
    pub warmup_dt: f64,
    pub warmup_until: f64,
    /// Upper bound for dt/t after the warmup.
    pub eta_max: f64,
    pub newton: NewtonOptions,
    /// Substeps below this size abort the run.
    pub dt_min: f64,
    pub boundary_value: f64,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            warmup_dt: 1e-3,
            warmup_until: 1.0,
            eta_max: 0.05,
            newton: NewtonOptions { tol: 1e-13, max_iter: 50, max_halvings: 50 },
            dt_min: 1e-12,
            boundary_value: 1.0,
        }
    }
}

impl FlowControls {
    pub fn validate(&self) -> Result<(), FlowError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.warmup_dt) || !ok(self.warmup_until) || self.warmup_dt > self.warmup_until {
            return Err(FlowError::Time("warmup_dt must lie in (0, warmup_until]".into()));
        }
        if !ok(self.eta_max) || !ok(self.dt_min) || !ok(self.newton.tol) {
            return Err(FlowError::Precondition("eta_max, dt_min and newton.tol must be positive".into()));
        }
        if !ok(self.boundary_value) {
            return Err(FlowError::Precondition("boundary value must be positive".into()));
        }
        Ok(())
    }

    /// Number of geometric steps per doubling of t: the smallest m with
    /// 2^{1/m} − 1 ≤ eta_max, so that dyadic times are hit exactly.
    pub fn steps_per_doubling(&self) -> usize {
        (std::f64::consts::LN_2 / self.eta_max.ln_1p()).ceil().max(1.0) as usize
    }

    pub fn eta(&self) -> f64 {
        (1.0 / self.steps_per_doubling() as f64).exp2() - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
    pub eta: f64,
    pub controls: FlowControls,
    pub aborted: bool,
    pub abort_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n_dim: usize,
    pub radii: Vec<f64>,
    pub k_radius: f64,
    pub summary: Vec<SummaryRow>,
    pub checkpoints: Vec<FlowState>,
    pub meta: RunMeta,
}

impl Trajectory {
    /// Checkpoint exactly at time `t`, if any.
    pub fn checkpoint_at(&self, t: f64) -> Option<&FlowState> {
        self.checkpoints.iter().find(|s| s.t == t)
    }

    pub fn last(&self) -> &FlowState {
        self.checkpoints.last().expect("trajectory always holds the initial state")
    }

    pub fn k_nodes(&self) -> std::ops::Range<usize> {
        0..self.radii.partition_point(|&r| r <= self.k_radius)
    }
}

fn flow_system(bg: &Background, u_old: &[f64], dt: f64, boundary: f64) -> SemilinearSystem {
    let kappa = (bg.n_dim() as f64 + 2.0) / 4.0;
    let m = bg.grid.last();
    let mut a = bg.operator().matrix(Outer::Natural);
    for v in a.diag.iter_mut().chain(a.lower.iter_mut()).chain(a.upper.iter_mut()) {
        *v *= dt * kappa;
    }
    a.pin_row(m);
    let mut c = vec![1.0; m + 1];
    c[m] = 0.0;
    let mut b: Vec<f64> = u_old.iter().map(|u| u.powf(bg.big_n)).collect();
    b[m] = boundary;
    SemilinearSystem { a, c, b, big_n: bg.big_n }
}

/// One backward-Euler step; returns the new state and the Newton iteration count.
pub fn step_with(
    bg: &Background,
    state: &FlowState,
    dt: f64,
    controls: &FlowControls,
) -> Result<(FlowState, usize), FlowError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlowError::Time(format!("dt = {dt}")));
    }
    bg.grid.check_samples(&state.u).map_err(BackgroundError::from)?;
    let sys = flow_system(bg, &state.u, dt, controls.boundary_value);
    let reject = |reason: String| FlowError::StepRejected { t: state.t, dt, reason };
    let out = match sys.solve(state.u.clone(), &controls.newton) {
        Ok(o) => o,
        Err(EllipticError::Divergence { iters, residual }) => {
            return Err(reject(format!("Newton stalled after {iters} iterations at residual {residual:e}")))
        }
        Err(e) => return Err(reject(e.to_string())),
    };
    if let Some(i) = out.u.iter().position(|&v| !(v > 0.0)) {
        return Err(reject(format!("non-positive value at node {i}")));
    }
    Ok((FlowState { t: state.t + dt, u: out.u, step_index: state.step_index + 1 }, out.iters))
}

pub fn step(bg: &Background, state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
    step_with(bg, state, dt, &FlowControls::default()).map(|(s, _)| s)
}

/// t^{−(n−2)/4}·u.
pub fn rescaled(state: &FlowState, n: usize) -> Result<Vec<f64>, FlowError> {
    if !(state.t > 0.0) {
        return Err(FlowError::Time(format!("rescaling needs t > 0, got {}", state.t)));
    }
    let f = state.t.powf(-(n as f64 - 2.0) / 4.0);
    Ok(state.u.iter().map(|u| u * f).collect())
}

/// Step target times from 0 to t_end.
pub fn schedule(controls: &FlowControls, t_end: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let warm_steps = (controls.warmup_until / controls.warmup_dt).round() as usize;
    for k in 1..=warm_steps {
        let t = if k == warm_steps { controls.warmup_until } else { k as f64 * controls.warmup_dt };
        if t >= t_end {
            break;
        }
        times.push(t);
    }
    let m = controls.steps_per_doubling() as f64;
    let mut j = 1usize;
    loop {
        let t = controls.warmup_until * (j as f64 / m).exp2();
        if t >= t_end || times.last().is_some_and(|&l| l >= t_end) {
            break;
        }
        if t > controls.warmup_until {
            times.push(t);
        }
        j += 1;
    }
    times.retain(|&t| t < t_end);
    times.push(t_end);
    times
}

fn is_checkpoint_time(t: f64) -> bool {
    t >= 1.0 && t.log2().fract() == 0.0
}

fn summarise(bg: &Background, state: &FlowState) -> Result<SummaryRow, FlowError> {
    let n = bg.n_dim();
    let m = bg.grid.last();
    let max_u = state.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r = conformal_scalar_curvature(bg, &state.u)?;
    let min_r = r[..m].iter().cloned().fold(f64::INFINITY, f64::min);
    let max_r = r[..m].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = bg.k_nodes();
    let kmax = state.u[k.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kmin = state.u[k].iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SummaryRow {
        t: state.t,
        max_u,
        max_u_tilde: max_u * state.t.powf(-(n as f64 - 2.0) / 4.0),
        min_rt: min_r * state.t,
        harnack_k: kmax / kmin,
        max_r,
    })
}

/// Integrate from `initial` (or u ≡ 1) to `t_end`. A run that cannot proceed
/// returns the partial trajectory with `meta.aborted` set.
pub fn run(
    bg: &Background,
    t_end: f64,
    controls: &FlowControls,
    initial: Option<&[f64]>,
) -> Result<Trajectory, FlowError> {
    controls.validate()?;
    if !(t_end >= 1.0 && t_end.is_finite()) {
        return Err(FlowError::Time(format!("t_end must be ≥ 1, got {t_end}")));
    }
    let mut u = match initial {
        Some(u) => u.to_vec(),
        None => vec![1.0; bg.grid.len()],
    };
    bg.grid.check_samples(&u).map_err(BackgroundError::from)?;
    if let Some(i) = u.iter().position(|&v| !(v > 0.0)) {
        return Err(FlowError::Precondition(format!("initial value not positive at node {i}")));
    }
    let m = bg.grid.last();
    u[m] = controls.boundary_value;
    let mut state = FlowState { t: 0.0, u, step_index: 0 };
    let mut traj = Trajectory {
        n_dim: bg.n_dim(),
        radii: bg.grid.nodes.clone(),
        k_radius: bg.k_radius,
        summary: Vec::new(),
        checkpoints: vec![state.clone()],
        meta: RunMeta {
            accepted_steps: 0,
            rejected_steps: 0,
            newton_iterations: 0,
            eta: controls.eta(),
            controls: controls.clone(),
            aborted: false,
            abort_reason: None,
        },
    };
    for target in schedule(controls, t_end) {
        // Substeps are only used after a rejection; they halve until accepted.
        let mut pending = vec![target];
        while let Some(&goal) = pending.last() {
            let dt = goal - state.t;
            match step_with(bg, &state, dt, controls) {
                Ok((mut next, iters)) => {
                    next.t = goal;
                    state = next;
                    pending.pop();
                    traj.meta.accepted_steps += 1;
                    traj.meta.newton_iterations += iters;
                    traj.summary.push(summarise(bg, &state)?);
                }
                Err(FlowError::StepRejected { reason, .. }) => {
                    traj.meta.rejected_steps += 1;
                    if dt / 2.0 < controls.dt_min {
                        traj.meta.aborted = true;
                        traj.meta.abort_reason = Some(format!("dt below dt_min at t = {}: {reason}", state.t));
                        if traj.last().t != state.t {
                            traj.checkpoints.push(state);
                        }
                        return Ok(traj);
                    }
                    pending.push(state.t + dt / 2.0);
                }
                Err(e) => return Err(e),
            }
        }
        if is_checkpoint_time(target) || target == t_end {
            traj.checkpoints.push(state.clone());
        }
    }
    Ok(traj)
}

/// Flows attached to a conformal change ρ of the background.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoRun {
    /// The background g_{ρ,0} = ρ^{4/(n−2)}g₀.
    pub background: Background,
    /// u_ρ = u/ρ, started from ρ^{−1}.
    pub u_rho: Trajectory,
    /// The v-flow, started from 1.
    pub v: Trajectory,
}

pub fn run_rho(
    bg: &Background,
    rho: &EllipticSolution,
    t_end: f64,
    controls: &FlowControls,
) -> Result<RhoRun, FlowError> {
    let m = bg.grid.last();
    if (rho.values[m] - 1.0).abs() > 1e-12 {
        return Err(FlowError::Precondition("ρ must equal 1 at R_max".into()));
    }
    let bg_rho = bg.conformal_change(&rho.values)?;
    let inv: Vec<f64> = rho.values.iter().map(|r| 1.0 / r).collect();
    let u_rho = run(&bg_rho, t_end, controls, Some(&inv))?;
    let v = run(&bg_rho, t_end, controls, None)?;
    Ok(RhoRun { background: bg_rho, u_rho, v })
}

/// The family v_c(x, t) = c·v(x, c^{−4/(n−2)}t) over a stored trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ScaledView<'a> {
    pub traj: &'a Trajectory,
    pub c: f64,
}

pub fn scale_solution(traj: &Trajectory, c: f64) -> Result<ScaledView<'_>, FlowError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(FlowError::Precondition(format!("scale c = {c} must be positive")));
    }
    Ok(ScaledView { traj, c })
}

impl ScaledView<'_> {
    /// Inner time c^{−4/(n−2)}·t.
    pub fn inner_time(&self, t: f64) -> f64 {
        t * self.c.powf(-4.0 / (self.traj.n_dim as f64 - 2.0))
    }

    /// Samples at time `t`, interpolating linearly in log t between
    /// neighbouring checkpoints (each node stays between its two values).
    pub fn at(&self, t: f64) -> Result<Vec<f64>, FlowError> {
        let s = self.inner_time(t);
        let cps = &self.traj.checkpoints;
        let hi = self.traj.last().t;
        let scale = |u: &[f64]| u.iter().map(|v| self.c * v).collect::<Vec<f64>>();
        if let Some(exact) = cps.iter().find(|cp| cp.t == s) {
            return Ok(scale(&exact.u));
        }
        let first_pos = cps.iter().find(|cp| cp.t > 0.0).map_or(hi, |cp| cp.t);
        if !(s >= first_pos && s <= hi) {
            return Err(FlowError::Extrapolation { t: s, lo: first_pos, hi });
        }
        let j = cps.partition_point(|cp| cp.t <= s);
        let (a, b) = (&cps[j - 1], &cps[j]);
        let w = (s.ln() - a.t.ln()) / (b.t.ln() - a.t.ln());
        Ok(a.u.iter().zip(&b.u).map(|(x, y)| self.c * (x + w * (y - x))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{make_background, CatalogEntry};
    use crate::grid::build_grid;

    fn well(n: usize, nodes: usize) -> Background {
        let g = build_grid(n, nodes, 100.0, 1.05).unwrap();
        make_background(&g, &CatalogEntry::CurvatureWell { amplitude: 2.0, width: 5.0 }, 10.0).unwrap()
    }

    #[test]
    fn flat_state_is_stationary() {
        let g = build_grid(3, 256, 50.0, 1.05).unwrap();
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        let s = FlowState { t: 0.0, u: vec![1.0; g.len()], step_index: 0 };
        for dt in [1e-6, 1e-2, 10.0, 1e4] {
            let next = step(&bg, &s, dt).unwrap();
            assert!(next.u.iter().all(|&v| v == 1.0));
            assert_eq!(next.step_index, 1);
        }
    }

    #[test]
    fn negative_well_lifts_u_like_explicit_euler() {
        let bg = well(3, 512);
        let s = FlowState { t: 0.0, u: vec![1.0; bg.grid.len()], step_index: 0 };
        let dt = 1e-7;
        let next = step(&bg, &s, dt).unwrap();
        // Explicit oracle: N·δu = −dt·(n+2)/4·L(1) = −dt·(5/4)·R₀.
        let depth = bg.r0.iter().fold(0.0_f64, |m, r| m.max(-r));
        for i in 0..bg.grid.last() {
            let oracle = -dt * 1.25 * bg.r0[i] / 5.0;
            assert!(next.u[i] >= 1.0 - 1e-14);
            if -bg.r0[i] > 1e-3 * depth {
                assert!(next.u[i] > 1.0);
                assert!(((next.u[i] - 1.0) - oracle).abs() < 1e-3 * oracle, "node {i}: {} vs {oracle}", next.u[i] - 1.0);
            }
        }
        let big = step(&bg, &s, 0.5).unwrap();
        assert!(big.u.iter().all(|&v| v >= 1.0 - 1e-14));
    }

    #[test]
    fn step_consistency_order() {
        let bg = well(3, 512);
        let s = FlowState { t: 0.0, u: vec![1.0; bg.grid.len()], step_index: 0 };
        let diff = |dt: f64| {
            let one = step(&bg, &s, dt).unwrap();
            let half = step(&bg, &step(&bg, &s, dt / 2.0).unwrap(), dt / 2.0).unwrap();
            one.u.iter().zip(&half.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (d1, d2, d3) = (diff(0.04), diff(0.02), diff(0.01));
        // Local discrepancy behaves like dt^{p+1}.
        let p1 = (d1 / d2).log2() - 1.0;
        let p2 = (d2 / d3).log2() - 1.0;
        assert!(p1 >= 0.9 && p2 >= 0.9, "{p1} {p2}");
    }

    #[test]
    fn step_rejects_bad_dt() {
        let bg = well(3, 256);
        let s = FlowState { t: 0.0, u: vec![1.0; bg.grid.len()], step_index: 0 };
        assert!(matches!(step(&bg, &s, 0.0), Err(FlowError::Time(_))));
        assert!(matches!(step(&bg, &s, f64::NAN), Err(FlowError::Time(_))));
        let tight = FlowControls { newton: NewtonOptions { tol: 1e-30, max_iter: 3, max_halvings: 2 }, ..Default::default() };
        assert!(matches!(step_with(&bg, &s, 1.0, &tight), Err(FlowError::StepRejected { .. })));
    }

    #[test]
    fn schedule_properties() {
        let c = FlowControls::default();
        assert_eq!(c.steps_per_doubling(), 15);
        assert!(c.eta() <= 0.05);
        let times = schedule(&c, 1e4);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*times.last().unwrap(), 1e4);
        assert_eq!(times[999], 1.0);
        for k in 0..=13 {
            assert!(times.contains(&(k as f64).exp2()), "2^{k}");
        }
        for w in times.windows(2).filter(|w| w[0] >= 1.0) {
            assert!(w[1] / w[0] - 1.0 <= 0.05 + 1e-12);
        }
        let short = schedule(&c, 1.0);
        assert_eq!(short.len(), 1000);
        let tiny = schedule(&FlowControls { warmup_dt: 0.25, ..c.clone() }, 3.0);
        assert_eq!(&tiny[..4], &[0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn flat_run_is_trivial() {
        let g = build_grid(3, 256, 50.0, 1.05).unwrap();
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        let tr = run(&bg, 100.0, &FlowControls::default(), None).unwrap();
        assert!(tr.summary.iter().all(|r| r.max_u == 1.0 && r.min_rt == 0.0 && r.harnack_k == 1.0));
        let times: Vec<f64> = tr.checkpoints.iter().map(|c| c.t).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 100.0]);
        assert!(!tr.meta.aborted);
    }

    #[test]
    fn run_validates_inputs() {
        let bg = well(3, 256);
        assert!(matches!(run(&bg, 0.5, &FlowControls::default(), None), Err(FlowError::Time(_))));
        let mut bad = vec![1.0; bg.grid.len()];
        bad[4] = -1.0;
        assert!(matches!(run(&bg, 2.0, &FlowControls::default(), Some(&bad)), Err(FlowError::Precondition(_))));
        let c = FlowControls { boundary_value: 0.0, ..Default::default() };
        assert!(run(&bg, 2.0, &c, None).is_err());
    }

    #[test]
    fn persistent_rejection_aborts_with_partial_log() {
        let bg = well(3, 256);
        let c = FlowControls {
            newton: NewtonOptions { tol: 1e-30, max_iter: 2, max_halvings: 1 },
            dt_min: 1e-4,
            ..Default::default()
        };
        let tr = run(&bg, 2.0, &c, None).unwrap();
        assert!(tr.meta.aborted);
        assert!(tr.meta.abort_reason.is_some());
        assert!(tr.meta.rejected_steps > 0);
    }

    #[test]
    fn rescaled_examples() {
        let s = FlowState { t: 1.0, u: vec![1.5, 2.0], step_index: 3 };
        assert_eq!(rescaled(&s, 3).unwrap(), vec![1.5, 2.0]);
        let s = FlowState { t: 16.0, u: vec![2.0; 4], step_index: 3 };
        assert_eq!(rescaled(&s, 3).unwrap(), vec![1.0; 4]);
        let s = FlowState { t: 0.0, u: vec![2.0; 4], step_index: 0 };
        assert!(matches!(rescaled(&s, 3), Err(FlowError::Time(_))));
    }

    #[test]
    fn rescaled_nonincreasing_across_doubling() {
        let bg = well(3, 512);
        let tr = run(&bg, 64.0, &FlowControls::default(), None).unwrap();
        for t in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let a = rescaled(tr.checkpoint_at(t).unwrap(), 3).unwrap();
            let b = rescaled(tr.checkpoint_at(2.0 * t).unwrap(), 3).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| *y <= x + 1e-10), "t = {t}");
        }
    }

    #[test]
    fn trivial_conformal_change_reproduces_run() {
        let bg = well(3, 256);
        let rho = EllipticSolution {
            values: vec![1.0; bg.grid.len()],
            residual_sup: 0.0,
            decay_exponent: 0.0,
            newton_iters: 0,
            equation_tag: crate::elliptic::EquationTag::PrescribeRho,
        };
        let c = FlowControls::default();
        let direct = run(&bg, 4.0, &c, None).unwrap();
        let rr = run_rho(&bg, &rho, 4.0, &c).unwrap();
        assert_eq!(rr.u_rho.checkpoints, direct.checkpoints);
        assert_eq!(rr.v.summary, direct.summary);
    }

    #[test]
    fn scaled_view_arithmetic() {
        let bg = well(3, 256);
        let tr = run(&bg, 64.0, &FlowControls::default(), None).unwrap();
        let id = scale_solution(&tr, 1.0).unwrap();
        for cp in &tr.checkpoints {
            assert_eq!(id.at(cp.t).unwrap(), cp.u);
        }
        let two = scale_solution(&tr, 2.0).unwrap();
        let v = two.at(32.0).unwrap();
        let base = &tr.checkpoint_at(2.0).unwrap().u;
        assert!(v.iter().zip(base).all(|(a, b)| *a == 2.0 * b));
        assert!(matches!(two.at(2000.0), Err(FlowError::Extrapolation { .. })));
        assert!(matches!(two.at(8.0), Err(FlowError::Extrapolation { .. })));
        assert!(scale_solution(&tr, 0.0).is_err());
        // Between checkpoints each node stays between its neighbours.
        let mid = id.at(3.0).unwrap();
        let (a, b) = (&tr.checkpoint_at(2.0).unwrap().u, &tr.checkpoint_at(4.0).unwrap().u);
        for i in 0..mid.len() {
            assert!(mid[i] >= a[i].min(b[i]) && mid[i] <= a[i].max(b[i]));
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::background::{make_background, CatalogEntry};
    use crate::grid::build_grid;
    use proptest::prelude::*;

    fn well(n: usize) -> Background {
        let g = build_grid(n, 256, 40.0, 1.05).unwrap();
        make_background(&g, &CatalogEntry::CurvatureWell { amplitude: 2.0, width: 4.0 }, 5.0).unwrap()
    }

    /// Positive data equal to 1 at the outer node.
    fn data(bg: &Background, a: f64, s: f64) -> Vec<f64> {
        let r_max = bg.grid.r_max();
        bg.grid.nodes.iter().map(|r| 1.0 + a * ((-(r * r) / (s * s)).exp() - (-(r_max * r_max) / (s * s)).exp())).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn steps_stay_positive_and_pinned(
            n in 3usize..=6,
            a in -0.5f64..3.0,
            s in 0.5f64..8.0,
            dt in 1e-4f64..0.5,
        ) {
            let bg = well(n);
            let state = FlowState { t: 1.0, u: data(&bg, a, s), step_index: 0 };
            let next = step(&bg, &state, dt).unwrap();
            prop_assert!(next.u.iter().all(|&v| v > 0.0));
            prop_assert_eq!(*next.u.last().unwrap(), 1.0);
            prop_assert_eq!(next.step_index, 1);
            prop_assert!((next.t - 1.0 - dt).abs() <= 1e-15);
        }

        #[test]
        fn steps_preserve_ordering(
            n in 3usize..=6,
            a in -0.5f64..2.0,
            gap in 0.0f64..1.0,
            s in 0.5f64..8.0,
            dt in 1e-4f64..0.5,
        ) {
            let bg = well(n);
            let low = FlowState { t: 1.0, u: data(&bg, a, s), step_index: 0 };
            let high = FlowState { t: 1.0, u: data(&bg, a + gap, s), step_index: 0 };
            let lo = step(&bg, &low, dt).unwrap();
            let hi = step(&bg, &high, dt).unwrap();
            for (i, (x, y)) in lo.u.iter().zip(&hi.u).enumerate() {
                prop_assert!(x <= &(y + 1e-12 * y.abs()), "order lost at node {i}: {x} > {y}");
            }
        }
    }
}
