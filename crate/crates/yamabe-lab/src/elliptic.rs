//! Steady-state and conformal-change problems with far-field decay.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::background::{least_squares_slope, Background, BackgroundError, Outer};
use crate::grid::RadialGrid;
use crate::linalg::{LinalgError, Tridiagonal};
use crate::yamabe::YamabeSign;

#[derive(Debug, Error, PartialEq)]
pub enum EllipticError {
    #[error("Newton iteration did not converge after {iters} iterations (scaled residual {residual:e})")]
    Divergence { iters: usize, residual: f64 },
    #[error("solver converged to the trivial solution (sup {0:e}); the background admits no positive solution")]
    Trivial(f64),
    #[error("solution is not positive at node {0}")]
    NotPositive(usize),
    #[error("no decaying L-harmonic function: kernel residual {0:e} exceeds tolerance")]
    NoKernel(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("decay-fit window [{lo}, {hi}] holds {count} nodes; need at least 4")]
    Window { lo: f64, hi: f64, count: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Background(#[from] BackgroundError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationTag {
    SteadyNeg,
    HarmonicDecay,
    CompactifiedU0,
    PrescribeRho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolution {
    pub values: Vec<f64>,
    pub residual_sup: f64,
    pub decay_exponent: f64,
    pub newton_iters: usize,
    pub equation_tag: EquationTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    /// Bound on the scaled (backward-error) residual.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, max_halvings: 50 }
    }
}

/// F(u) = A·u + c∘u^N − b, solved by damped Newton.
///
/// Residuals are measured row-wise relative to |A||u| + |c|·u^N + |b|, which
/// stays meaningful on graded grids where the rows of A span many decades.
#[derive(Debug, Clone)]
pub(crate) struct SemilinearSystem {
    pub a: Tridiagonal,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub big_n: f64,
}

pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
}

impl SemilinearSystem {
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let au = self.a.apply(u);
        (0..u.len()).map(|i| au[i] + self.c[i] * u[i].powf(self.big_n) - self.b[i]).collect()
    }

    pub fn scaled_residual(&self, u: &[f64]) -> Vec<f64> {
        let f = self.residual(u);
        let s = self.a.abs_apply(u);
        (0..u.len())
            .map(|i| {
                let scale = s[i] + (self.c[i] * u[i].powf(self.big_n)).abs() + self.b[i].abs();
                if scale > 0.0 { f[i].abs() / scale } else { f[i].abs() }
            })
            .collect()
    }

    fn merit(&self, u: &[f64]) -> (f64, f64) {
        let r = self.scaled_residual(u);
        let two = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        (two, sup(&r))
    }

    pub fn solve(&self, guess: Vec<f64>, opts: &NewtonOptions) -> Result<NewtonOutcome, EllipticError> {
        let mut u = guess;
        let (mut merit, mut worst) = self.merit(&u);
        for iter in 0..=opts.max_iter {
            if worst <= opts.tol {
                return Ok(NewtonOutcome { u, iters: iter, residual: worst });
            }
            if iter == opts.max_iter {
                break;
            }
            let f = self.residual(&u);
            let mut jac = self.a.clone();
            for ((d, c), v) in jac.diag.iter_mut().zip(&self.c).zip(&u) {
                *d += self.big_n * c * v.powf(self.big_n - 1.0);
            }
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = jac.solve(&rhs)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                if trial.iter().all(|&v| v > 0.0 && v.is_finite()) {
                    let (m, w) = self.merit(&trial);
                    if m < merit || w <= opts.tol {
                        u = trial;
                        merit = m;
                        worst = w;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(EllipticError::Divergence { iters: iter, residual: worst });
            }
        }
        Err(EllipticError::Divergence { iters: opts.max_iter, residual: worst })
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_positive(u: &[f64]) -> Result<(), EllipticError> {
    match u.iter().position(|&v| !(v > 0.0)) {
        Some(i) => Err(EllipticError::NotPositive(i)),
        None => Ok(()),
    }
}

fn steady_system(bg: &Background) -> SemilinearSystem {
    let len = bg.grid.len();
    SemilinearSystem {
        a: bg.operator().matrix(Outer::Robin),
        c: vec![1.0; len],
        b: vec![0.0; len],
        big_n: bg.big_n,
    }
}

fn prescribe_system(bg: &Background, r_target: &[f64]) -> SemilinearSystem {
    let m = bg.grid.last();
    let mut a = bg.operator().matrix(Outer::Natural);
    a.pin_row(m);
    let mut c: Vec<f64> = r_target.iter().map(|r| -r).collect();
    c[m] = 0.0;
    let mut b = vec![0.0; m + 1];
    b[m] = 1.0;
    SemilinearSystem { a, c, b, big_n: bg.big_n }
}

/// Row-scaled residual of −a_nΔu + R₀u + u^N = 0 with the Robin closure.
pub fn steady_residual(bg: &Background, u: &[f64]) -> Vec<f64> {
    steady_system(bg).scaled_residual(u)
}

/// Row-scaled residual of L w = 0 with the Robin closure.
pub fn harmonic_residual(bg: &Background, w: &[f64]) -> Vec<f64> {
    let a = bg.operator().matrix(Outer::Robin);
    let lw = a.apply(w);
    let s = a.abs_apply(w);
    lw.iter().zip(&s).map(|(l, s)| if *s > 0.0 { l.abs() / s } else { l.abs() }).collect()
}

/// Row-scaled residual of Lρ = R_target·ρ^N with ρ(R_max) = 1.
pub fn prescribe_residual(bg: &Background, r_target: &[f64], rho: &[f64]) -> Vec<f64> {
    prescribe_system(bg, r_target).scaled_residual(rho)
}

/// Nodewise balance R₀u = −u^N suggests u = (−R₀)_+^{(n−2)/4}; smoothed by a
/// few three-point passes and floored at 10⁻⁶.
fn steady_guess(bg: &Background) -> Vec<f64> {
    let expo = (bg.n_dim() as f64 - 2.0) / 4.0;
    let mut u: Vec<f64> = bg.r0.iter().map(|r| (-r).max(0.0).powf(expo)).collect();
    for _ in 0..4 {
        let prev = u.clone();
        let m = u.len() - 1;
        for i in 0..=m {
            let l = prev[i.saturating_sub(1)];
            let r = prev[(i + 1).min(m)];
            u[i] = 0.25 * l + 0.5 * prev[i] + 0.25 * r;
        }
    }
    u.iter().map(|v| v.max(1e-6)).collect()
}

/// Positive decaying solution of −a_nΔũ + R₀ũ = −ũ^N.
pub fn solve_steady_negative(bg: &Background, opts: &NewtonOptions) -> Result<EllipticSolution, EllipticError> {
    let sys = steady_system(bg);
    let out = sys.solve(steady_guess(bg), opts)?;
    let top = sup(&out.u);
    if top < 1e-8 {
        return Err(EllipticError::Trivial(top));
    }
    check_positive(&out.u)?;
    let decay = default_decay(&bg.grid, &out.u)?;
    Ok(EllipticSolution {
        values: out.u,
        residual_sup: out.residual,
        decay_exponent: decay,
        newton_iters: out.iters,
        equation_tag: EquationTag::SteadyNeg,
    })
}

/// Positive decaying solution of L w = 0, normalised to max_K w = 1.
///
/// The Robin system is singular exactly when such a w exists. The kernel is
/// extracted by inverse iteration on the symmetric form K v = λ W v started
/// from `seed`, and accepted only if the row-scaled residual of L w is below
/// the tolerance. Different seeds give independent solves.
pub fn solve_harmonic_decay_seeded(
    bg: &Background,
    seed: &[f64],
    opts: &NewtonOptions,
) -> Result<EllipticSolution, EllipticError> {
    bg.grid.check_samples(seed).map_err(BackgroundError::from)?;
    let op = bg.operator();
    let mut k = op.symmetric_form(Outer::Robin);
    // A shift along W leaves the generalised eigenvectors unchanged and keeps
    // the factorisation away from an exactly zero pivot.
    let spread = k.diag.iter().zip(&op.weight).fold(0.0_f64, |m, (d, w)| m.max((d / w).abs()));
    for (d, w) in k.diag.iter_mut().zip(&op.weight) {
        *d += 1e-10 * spread * w;
    }
    let k_nodes = bg.k_nodes();
    let normalise = |v: &mut [f64]| -> Result<(), EllipticError> {
        let top = k_nodes.clone().map(|i| v[i]).fold(f64::NEG_INFINITY, f64::max);
        let bottom = k_nodes.clone().map(|i| v[i]).fold(f64::INFINITY, f64::min);
        let pick = if top.abs() >= bottom.abs() { top } else { bottom };
        if !(pick.abs() > 0.0 && pick.is_finite()) {
            return Err(EllipticError::NoKernel(f64::INFINITY));
        }
        v.iter_mut().for_each(|x| *x /= pick);
        Ok(())
    };
    let mut w = seed.to_vec();
    normalise(&mut w)?;
    let mut iters = 0;
    for _ in 0..opts.max_iter.max(1) {
        iters += 1;
        let rhs: Vec<f64> = w.iter().zip(&op.weight).map(|(a, b)| a * b).collect();
        let mut next = k.solve(&rhs)?;
        normalise(&mut next)?;
        let change = next.iter().zip(&w).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        w = next;
        if change <= 1e-14 {
            break;
        }
    }
    // Fix the normalisation exactly: max over K is 1.
    let top = k_nodes.clone().map(|i| w[i]).fold(f64::NEG_INFINITY, f64::max);
    w.iter_mut().for_each(|x| *x /= top);
    let res = sup(&harmonic_residual(bg, &w));
    if !(res <= opts.tol) {
        return Err(EllipticError::NoKernel(res));
    }
    check_positive(&w)?;
    let decay = default_decay(&bg.grid, &w)?;
    Ok(EllipticSolution {
        values: w,
        residual_sup: res,
        decay_exponent: decay,
        newton_iters: iters,
        equation_tag: EquationTag::HarmonicDecay,
    })
}

pub fn solve_harmonic_decay(bg: &Background, opts: &NewtonOptions) -> Result<EllipticSolution, EllipticError> {
    solve_harmonic_decay_seeded(bg, &vec![1.0; bg.grid.len()], opts)
}

/// u₀ with −a_nΔu₀ + R₀u₀ = Y·u₀^N. In the negative case the −1-curvature
/// solution is rescaled by |Y|^{−(n−2)/4} when a Y value is supplied.
pub fn solve_compactified_u0(
    bg: &Background,
    sign: YamabeSign,
    y_value: Option<f64>,
    opts: &NewtonOptions,
) -> Result<EllipticSolution, EllipticError> {
    let mut sol = match sign {
        YamabeSign::Negative => {
            let mut s = solve_steady_negative(bg, opts)?;
            if let Some(y) = y_value {
                if !(y < 0.0) {
                    return Err(EllipticError::Precondition(format!("Y = {y} is not negative")));
                }
                let scale = (-y).powf(-(bg.n_dim() as f64 - 2.0) / 4.0);
                for v in &mut s.values {
                    *v *= scale;
                }
            }
            s
        }
        YamabeSign::ZeroBand => solve_harmonic_decay(bg, opts)?,
        YamabeSign::Positive => {
            return Err(EllipticError::Precondition("positive Yamabe class".into()));
        }
    };
    sol.equation_tag = EquationTag::CompactifiedU0;
    Ok(sol)
}

/// ρ > 0 with R(ρ^{4/(n−2)}g₀) = R_target and ρ(R_max) = 1.
pub fn prescribe_scalar_curvature(
    bg: &Background,
    r_target: &[f64],
    opts: &NewtonOptions,
) -> Result<EllipticSolution, EllipticError> {
    bg.grid.check_samples(r_target).map_err(BackgroundError::from)?;
    if let Some(i) = r_target.iter().position(|&r| r > 0.0) {
        return Err(EllipticError::Precondition(format!("R_target positive at node {i}")));
    }
    let k_end = bg.k_nodes().end;
    if let Some(i) = r_target[k_end..].iter().position(|&r| r != 0.0) {
        return Err(EllipticError::Precondition(format!(
            "R_target not supported in K (node {})",
            i + k_end
        )));
    }
    let sys = prescribe_system(bg, r_target);
    let out = sys.solve(vec![1.0; bg.grid.len()], opts)?;
    check_positive(&out.u)?;
    let dev: Vec<f64> = out.u.iter().map(|v| (v - 1.0).abs()).collect();
    let decay = dirichlet_tail_exponent(&bg.grid, &dev);
    Ok(EllipticSolution {
        values: out.u,
        residual_sup: out.residual,
        decay_exponent: decay,
        newton_iters: out.iters,
        equation_tag: EquationTag::PrescribeRho,
    })
}

/// The compactly supported target min(R₀, 0)·χ(r ≤ K_radius).
pub fn compact_target(bg: &Background) -> Vec<f64> {
    let k_end = bg.k_nodes().end;
    bg.r0.iter().enumerate().map(|(i, &r)| if i < k_end { r.min(0.0) } else { 0.0 }).collect()
}

/// Least-squares slope of log f against log r over `window`, negated.
pub fn fit_decay_exponent(grid: &RadialGrid, f: &[f64], window: (f64, f64)) -> Result<f64, EllipticError> {
    let (lo, hi) = window;
    let r_max = grid.r_max();
    if !(lo >= r_max / 10.0 * (1.0 - 1e-12) && hi <= r_max && lo < hi) {
        return Err(EllipticError::Precondition(format!(
            "window [{lo}, {hi}] not inside [R_max/10, R_max]"
        )));
    }
    let idx = grid.indices_in(lo, hi);
    if idx.len() <= 3 {
        return Err(EllipticError::Window { lo, hi, count: idx.len() });
    }
    let mut pts = Vec::with_capacity(idx.len());
    for i in idx {
        if !(f[i] > 0.0) {
            return Err(EllipticError::NotPositive(i));
        }
        pts.push((grid.nodes[i].ln(), f[i].ln()));
    }
    Ok(-least_squares_slope(&pts))
}

fn default_decay(grid: &RadialGrid, f: &[f64]) -> Result<f64, EllipticError> {
    let r = grid.r_max();
    fit_decay_exponent(grid, f, (r / 4.0, r))
}

/// Decay exponent of a tail that is pinned to zero at R_max: the exterior
/// harmonic c·(r^{2−n} − R^{2−n}) is divided by its image factor
/// 1 − (r/R)^{n−2} before fitting over [R_max/10, R_max/2].
fn dirichlet_tail_exponent(grid: &RadialGrid, dev: &[f64]) -> f64 {
    let r_max = grid.r_max();
    let k = grid.n_dim as i32 - 2;
    let corrected: Vec<f64> = grid
        .nodes
        .iter()
        .zip(dev)
        .map(|(r, d)| d / (1.0 - (r / r_max).powi(k)).max(f64::MIN_POSITIVE))
        .collect();
    fit_decay_exponent(grid, &corrected, (r_max / 10.0, r_max / 2.0)).unwrap_or(f64::NAN)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::background::{conformal_scalar_curvature, make_background, CatalogEntry};
    use crate::grid::build_grid;
    use proptest::prelude::*;

    fn flat(n: usize) -> Background {
        let g = build_grid(n, 384, 60.0, 1.05).unwrap();
        make_background(&g, &CatalogEntry::Flat, 5.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prescribed_curvature_is_recovered(
            n in 3usize..=6,
            depth in 0.01f64..1.0,
            width in 0.5f64..3.0,
        ) {
            let bg = flat(n);
            let k_end = bg.k_nodes().end;
            let target: Vec<f64> = bg.grid.nodes.iter().enumerate()
                .map(|(i, r)| if i < k_end { -depth * (-(r * r) / (width * width)).exp() } else { 0.0 })
                .collect();
            let sol = prescribe_scalar_curvature(&bg, &target, &NewtonOptions::default()).unwrap();
            prop_assert!(sol.residual_sup <= 1e-10);
            // On a flat base ρ is subharmonic with boundary value 1.
            prop_assert!(sol.values.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12));
            let r = conformal_scalar_curvature(&bg, &sol.values).unwrap();
            let last = bg.grid.len() - 1;
            // The Newton tolerance bounds the backward error row by row.
            let abs_l = bg.operator().matrix(Outer::Natural).abs_apply(&sol.values);
            for i in 0..last {
                let scale = abs_l[i] * sol.values[i].powf(-bg.big_n) + target[i].abs();
                prop_assert!((r[i] - target[i]).abs() <= 4e-10 * scale, "node {i}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn harmonic_kernel_does_not_depend_on_the_seed(
            width in 3.0f64..8.0,
            weights in proptest::collection::vec(0.1f64..2.0, 4),
        ) {
            let g = build_grid(6, 384, 60.0, 1.05).unwrap();
            let bg = make_background(&g, &CatalogEntry::ZeroYamabe { width }, 6.0).unwrap();
            let seed: Vec<f64> = g.nodes.iter()
                .map(|r| weights.iter().enumerate().map(|(k, w)| w / (1.0 + r).powi(k as i32)).sum())
                .collect();
            let opts = NewtonOptions::default();
            let a = solve_harmonic_decay(&bg, &opts).unwrap();
            let b = solve_harmonic_decay_seeded(&bg, &seed, &opts).unwrap();
            let gap = a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            prop_assert!(gap <= 1e-8, "seed-dependent kernel, gap {gap:e}");
        }
    }
}
