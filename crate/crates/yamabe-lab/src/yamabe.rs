//! Sign and bracket of the Yamabe constant from the discrete Rayleigh quotient
//!
//! Q(v) = ∫(a_n|∇v|² + R₀v²) / (∫|v|^{2n/(n−2)})^{(n−2)/n}
//!
//! minimised over radial v vanishing outside a ball.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::background::{critical_exponent, sphere_area, Background, Outer};
use crate::linalg::{LinalgError, SymTridiagonal, Tridiagonal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YamabeSign {
    Negative,
    ZeroBand,
    Positive,
}

#[derive(Debug, Error, PartialEq)]
pub enum YamabeError {
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("no admissible ball radius (need radii in (0, R_max) covering at least 8 nodes)")]
    NoBalls,
    #[error("quotient minimisation on the ball of radius {radius} did not converge in {iters} iterations")]
    NonConvergence { radius: f64, iters: usize },
    #[error("test function vanishes identically")]
    ZeroFunction,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YamabeEstimate {
    pub sign: YamabeSign,
    pub lower: f64,
    pub upper: f64,
    pub witness: Vec<f64>,
    pub ball_radii: Vec<f64>,
    /// Best quotient found on each ball.
    pub ball_upper: Vec<f64>,
    /// Smallest Dirichlet eigenvalue of L on each ball.
    pub ball_eigenvalue: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YamabeOptions {
    /// Increasing ball radii; empty means K/2, K, 2K, 4K clipped to R_max/2.
    pub ball_radii: Vec<f64>,
    pub max_iter: usize,
    /// Stop once the predicted decrease falls below this fraction of max(|Q|, 1).
    pub rel_tol: f64,
    /// Seeds the multi-start ordering.
    pub rng_seed: u64,
}

impl Default for YamabeOptions {
    fn default() -> Self {
        Self { ball_radii: Vec::new(), max_iter: 5000, rel_tol: 1e-10, rng_seed: 0 }
    }
}

/// Quotient pieces restricted to the leading `len` nodes.
struct Quotient<'a> {
    k: &'a Tridiagonal,
    w: &'a [f64],
    p: f64,
    scale: f64,
    len: usize,
}

impl Quotient<'_> {
    fn energy(&self, v: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.len {
            let mut kv = self.k.diag[i] * v[i];
            if i > 0 {
                kv += self.k.lower[i - 1] * v[i - 1];
            }
            if i + 1 < self.len {
                kv += self.k.upper[i] * v[i + 1];
            }
            e += v[i] * kv;
        }
        e
    }

    fn mass(&self, v: &[f64]) -> f64 {
        (0..self.len).map(|i| self.w[i] * v[i].abs().powf(self.p)).sum()
    }

    fn value(&self, v: &[f64]) -> f64 {
        self.scale * self.energy(v) / self.mass(v).powf(2.0 / self.p)
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let e = self.energy(v);
        let mass = self.mass(v);
        let d = mass.powf(2.0 / self.p);
        let dd = mass.powf(2.0 / self.p - 1.0);
        (0..self.len)
            .map(|i| {
                let mut kv = self.k.diag[i] * v[i];
                if i > 0 {
                    kv += self.k.lower[i - 1] * v[i - 1];
                }
                if i + 1 < self.len {
                    kv += self.k.upper[i] * v[i + 1];
                }
                let dm = self.w[i] * v[i].abs().powf(self.p - 2.0) * v[i];
                self.scale * 2.0 * (kv * d - e * dd * dm) / (d * d)
            })
            .collect()
    }

    fn normalise(&self, v: &mut [f64]) {
        let norm = self.mass(v).powf(1.0 / self.p);
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn leading_block(t: &Tridiagonal, len: usize) -> Tridiagonal {
    Tridiagonal {
        lower: t.lower[..len - 1].to_vec(),
        diag: t.diag[..len].to_vec(),
        upper: t.upper[..len - 1].to_vec(),
    }
}

/// Q(v) over the whole grid, with the sphere area included.
pub fn rayleigh_quotient(bg: &Background, v: &[f64]) -> Result<f64, YamabeError> {
    if v.iter().all(|&x| x == 0.0) {
        return Err(YamabeError::ZeroFunction);
    }
    let op = bg.operator();
    let k = op.symmetric_form(Outer::Natural);
    let n = bg.n_dim();
    let q = Quotient {
        k: &k,
        w: &op.weight,
        p: critical_exponent(n),
        scale: sphere_area(n).powf(2.0 / n as f64),
        len: v.len(),
    };
    Ok(q.value(v))
}

fn default_radii(bg: &Background) -> Vec<f64> {
    let cap = bg.grid.r_max() / 2.0;
    [0.5, 1.0, 2.0, 4.0].iter().map(|f| f * bg.k_radius).filter(|&r| r <= cap).collect()
}

/// Preconditioned normalised gradient descent with Armijo backtracking.
fn minimise(
    q: &Quotient,
    precond: &Tridiagonal,
    mut v: Vec<f64>,
    opts: &YamabeOptions,
    radius: f64,
) -> Result<(f64, Vec<f64>), YamabeError> {
    q.normalise(&mut v);
    let mut value = q.value(&v);
    for _ in 0..opts.max_iter {
        let g = q.gradient(&v);
        let d: Vec<f64> = precond.solve(&g)?.iter().map(|x| -x).collect();
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if -slope <= opts.rel_tol * value.abs().max(1.0) {
            return Ok((value, v));
        }
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let mut trial: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if trial.iter().any(|x| *x != 0.0) {
                q.normalise(&mut trial);
                let tv = q.value(&trial);
                if tv < value && tv <= value + 1e-4 * alpha * slope {
                    v = trial;
                    value = tv;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            // Backtracking exhausted: the remaining decrease is below roundoff.
            return Ok((value, v));
        }
    }
    Err(YamabeError::NonConvergence { radius, iters: opts.max_iter })
}

pub fn estimate_yamabe(bg: &Background, tol: f64, opts: &YamabeOptions) -> Result<YamabeEstimate, YamabeError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(YamabeError::Tolerance(tol));
    }
    let mut radii = if opts.ball_radii.is_empty() { default_radii(bg) } else { opts.ball_radii.clone() };
    radii.retain(|&r| r > 0.0 && r < bg.grid.r_max() && bg.grid.nodes.partition_point(|&x| x < r) >= 8);
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    if radii.is_empty() {
        return Err(YamabeError::NoBalls);
    }
    let n = bg.n_dim();
    let op = bg.operator();
    let k = op.symmetric_form(Outer::Natural);
    let grid_len = bg.grid.len();
    let mut rng = rand::rngs::StdRng::seed_from_u64(opts.rng_seed);

    let mut witness = vec![0.0; grid_len];
    let mut best = f64::INFINITY;
    let mut ball_upper = Vec::new();
    let mut ball_eigenvalue = Vec::new();
    for &radius in &radii {
        let len = bg.grid.nodes.partition_point(|&x| x < radius);
        let block = leading_block(&k, len);
        let sym = SymTridiagonal {
            diag: (0..len).map(|i| block.diag[i] / op.weight[i]).collect(),
            off: (0..len - 1).map(|i| block.upper[i] / (op.weight[i] * op.weight[i + 1]).sqrt()).collect(),
        };
        let (lambda, y) = sym.smallest_eigenpair();
        ball_eigenvalue.push(lambda);
        let ground: Vec<f64> = y.iter().zip(&op.weight).map(|(a, w)| a / w.sqrt()).collect();

        let q = Quotient {
            k: &block,
            w: &op.weight[..len],
            p: critical_exponent(n),
            scale: sphere_area(n).powf(2.0 / n as f64),
            len,
        };
        // Sobolev preconditioner K + μW, positive definite for μ > −λ.
        let mu = 2.0 * (-lambda).max(0.0) + bg.a_n / (radius * radius);
        let mut precond = block.clone();
        for i in 0..len {
            precond.diag[i] += mu * op.weight[i];
        }

        let mut seeds: Vec<Vec<f64>> = [8.0, 4.0, 2.0]
            .iter()
            .map(|f| {
                let width = radius / f;
                bg.grid.nodes[..len]
                    .iter()
                    .map(|r| (-(r / width).powi(2)).exp() * (1.0 - (r / radius).powi(2)))
                    .collect()
            })
            .collect();
        seeds.push(ground);
        if best.is_finite() {
            seeds.push(witness[..len].to_vec());
        }
        seeds.shuffle(&mut rng);

        for seed in seeds {
            let (value, v) = minimise(&q, &precond, seed, opts, radius)?;
            if value < best {
                best = value;
                witness = v.clone();
                witness.resize(grid_len, 0.0);
            }
        }
        ball_upper.push(best);
    }

    let upper = best;
    let certified_nonneg = *ball_eigenvalue.last().unwrap() >= 0.0;
    let lower = if certified_nonneg { 0.0 } else { upper };
    let certified_neg = ball_eigenvalue.iter().any(|&l| l < 0.0) && upper < 0.0;
    let sign = if upper < -tol || certified_neg {
        YamabeSign::Negative
    } else if certified_nonneg && upper > tol {
        YamabeSign::Positive
    } else {
        YamabeSign::ZeroBand
    };
    Ok(YamabeEstimate { sign, lower: lower.min(upper), upper, witness, ball_radii: radii, ball_upper, ball_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{make_background, CatalogEntry};
    use crate::grid::build_grid;

    fn bg(entry: CatalogEntry, n: usize) -> Background {
        let g = build_grid(n, 1024, 100.0, 1.05).unwrap();
        make_background(&g, &entry, 10.0).unwrap()
    }

    #[test]
    fn flat_is_positive() {
        let b = bg(CatalogEntry::Flat, 3);
        let est = estimate_yamabe(&b, 1e-3, &YamabeOptions::default()).unwrap();
        assert_eq!(est.sign, YamabeSign::Positive);
        assert_eq!(est.lower, 0.0);
        assert!(est.upper > 0.0 && est.lower <= est.upper);
        assert!(est.ball_eigenvalue.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn curvature_well_is_negative_and_certified() {
        let b = bg(CatalogEntry::CurvatureWell { amplitude: 2.0, width: 5.0 }, 3);
        let est = estimate_yamabe(&b, 1e-3, &YamabeOptions::default()).unwrap();
        assert_eq!(est.sign, YamabeSign::Negative);
        assert!(est.ball_eigenvalue.iter().any(|&l| l < 0.0));
        assert_eq!(est.lower, est.upper);
        // Domain monotonicity across balls.
        assert!(est.ball_upper.windows(2).all(|w| w[1] <= w[0]));
        // Witness re-evaluates to the reported value.
        let q = rayleigh_quotient(&b, &est.witness).unwrap();
        assert!((q - est.upper).abs() <= 1e-12 * q.abs());
    }

    #[test]
    fn witness_cannot_beat_upper() {
        let b = bg(CatalogEntry::GaussianWell { amplitude: 0.5, width: 2.0 }, 4);
        let est = estimate_yamabe(&b, 1e-3, &YamabeOptions::default()).unwrap();
        let q = rayleigh_quotient(&b, &est.witness).unwrap();
        assert!(q >= est.upper - 1e-3);
        // Metric backgrounds are conformally flat, hence positive.
        assert_eq!(est.sign, YamabeSign::Positive);
    }

    #[test]
    fn errors() {
        let b = bg(CatalogEntry::Flat, 3);
        assert_eq!(estimate_yamabe(&b, 0.0, &YamabeOptions::default()), Err(YamabeError::Tolerance(0.0)));
        let opts = YamabeOptions { ball_radii: vec![1e-6, 500.0], ..Default::default() };
        assert_eq!(estimate_yamabe(&b, 1e-3, &opts), Err(YamabeError::NoBalls));
        assert_eq!(rayleigh_quotient(&b, &vec![0.0; b.grid.len()]), Err(YamabeError::ZeroFunction));
        let opts = YamabeOptions { max_iter: 1, ..Default::default() };
        let w = bg(CatalogEntry::CurvatureWell { amplitude: 2.0, width: 5.0 }, 3);
        assert!(matches!(estimate_yamabe(&w, 1e-3, &opts), Err(YamabeError::NonConvergence { .. })));
    }

    #[test]
    fn seed_order_does_not_change_the_verdict() {
        let b = bg(CatalogEntry::CurvatureWell { amplitude: 1.0, width: 4.0 }, 3);
        let a = estimate_yamabe(&b, 1e-3, &YamabeOptions { rng_seed: 1, ..Default::default() }).unwrap();
        let c = estimate_yamabe(&b, 1e-3, &YamabeOptions { rng_seed: 99, ..Default::default() }).unwrap();
        assert_eq!(a.sign, c.sign);
        assert!((a.upper - c.upper).abs() <= 1e-6 * a.upper.abs());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::background::{make_background, CatalogEntry};
    use crate::grid::build_grid;
    use proptest::prelude::*;

    fn well(n: usize, amplitude: f64, width: f64) -> Background {
        let g = build_grid(n, 256, 60.0, 1.05).unwrap();
        make_background(&g, &CatalogEntry::CurvatureWell { amplitude, width }, 5.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quotient_is_scale_invariant(
            n in 3usize..=6,
            amplitude in 0.0f64..3.0,
            width in 0.5f64..5.0,
            bump in 0.5f64..20.0,
            c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            let bg = well(n, amplitude, width);
            let v: Vec<f64> = bg.grid.nodes.iter().map(|r| (-(r * r) / (bump * bump)).exp()).collect();
            let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
            let q1 = rayleigh_quotient(&bg, &v).unwrap();
            let q2 = rayleigh_quotient(&bg, &cv).unwrap();
            prop_assert!((q1 - q2).abs() <= 1e-12 * q1.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn larger_balls_never_raise_the_bound_and_eigenvalues_certify(
            amplitude in 0.0f64..4.0,
            width in 0.5f64..6.0,
            seed in 0u64..1000,
        ) {
            let bg = well(3, amplitude, width);
            let opts = YamabeOptions { ball_radii: vec![2.5, 5.0, 10.0, 20.0], rng_seed: seed, ..Default::default() };
            let est = estimate_yamabe(&bg, 1e-6, &opts).unwrap();
            prop_assert!(est.lower <= est.upper);
            prop_assert!(est.ball_upper.windows(2).all(|w| w[1] <= w[0]), "{:?}", est.ball_upper);
            if est.ball_eigenvalue.iter().any(|&l| l < 0.0) {
                prop_assert_eq!(est.sign, YamabeSign::Negative);
            }
        }
    }
}
