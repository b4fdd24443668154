//! The discrete base metric g₀ = U₀^{4/(n−2)}·δ and its conformal Laplacian.
//!
//! The Laplace–Beltrami operator is discretised in flux form on the cells
//! [r_{i−1/2}, r_{i+1/2}]:
//!
//! Δ_{g₀}f_i = (1/W_i)·Σ_faces A_f·(f_j − f_i),  A_f = r_f^{n−1}/h_f·U₀_i·U₀_j,
//!
//! with W_i = V_i·U₀_i^{2n/(n−2)}. The geometric mean of U₀ on faces makes the
//! discrete operator exactly covariant under conformal changes, so
//! L_{ρ-background}φ = ρ^{−N}·L(ρφ) holds to roundoff. The innermost cell
//! starts at r = 0, which imposes f′(0) = 0. The outer cell is closed with
//! zero flux; solvers that need the decaying far-field mode add the Robin
//! flux −(n−2)R^{n−2}U₀²u explicitly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, RadialGrid};
use crate::linalg::Tridiagonal;

#[derive(Debug, Error, PartialEq)]
pub enum BackgroundError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("conformal factor is not positive at node {node} (value {value})")]
    NonPositive { node: usize, value: f64 },
    #[error("invalid catalog parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("U0 at R_max differs from 1 by {0:e}; enlarge R_max or shrink the profile")]
    NotAsymptoticallyFlat(f64),
    #[error("K_radius = {0} must lie in (0, R_max)")]
    KRadius(f64),
}

/// 4(n−1)/(n−2).
pub fn conformal_a(n: usize) -> f64 {
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

/// (n+2)/(n−2).
pub fn flow_exponent(n: usize) -> f64 {
    (n as f64 + 2.0) / (n as f64 - 2.0)
}

/// 2n/(n−2).
pub fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// Area of the unit sphere S^{n−1} ⊂ ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    let (mut area, start) = if n.is_multiple_of(2) { (2.0 * PI, 2) } else { (2.0, 1) };
    // |S^{k+1}| = 2π/k · |S^{k−1}|
    let mut k = start;
    while k + 1 < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

/// Named backgrounds available to scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum CatalogEntry {
    /// Euclidean space.
    Flat,
    /// U₀ = 1 + c·(s(r) − s(R_max)) with s the discrete radial harmonic
    /// function ~ r^{2−n}, smoothed by a quadratic cap inside `smoothing_radius`.
    HarmonicTail {
        c: f64,
        #[serde(default = "default_smoothing")]
        smoothing_radius: f64,
    },
    /// U₀ = 1 + A·exp(−r²/σ²).
    GaussianWell { amplitude: f64, width: f64 },
    /// Prescribed potential: U₀ ≡ 1, R₀ = −A·exp(−r²/σ²).
    CurvatureWell { amplitude: f64, width: f64 },
    /// Prescribed potential with an exact decaying kernel element:
    /// U₀ ≡ 1, R₀ = a_n·Δφ/φ for φ = (1 + r²/σ²)^{(2−n)/2}.
    ZeroYamabe { width: f64 },
}

fn default_smoothing() -> f64 {
    1.0
}

/// How R₀ relates to U₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// R₀ is the curvature of U₀ over the flat base.
    Metric,
    /// R₀ is prescribed independently of U₀.
    Potential,
}

/// Outer-row closure of the assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outer {
    /// Zero flux through r = R_max.
    Natural,
    /// Flux of the decaying mode, u′ + (n−2)u/R = 0.
    Robin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub grid: RadialGrid,
    pub u0: Vec<f64>,
    pub r0: Vec<f64>,
    pub tau: f64,
    pub a_n: f64,
    pub big_n: f64,
    pub k_radius: f64,
    pub provenance: Provenance,
}

/// Flux-form conformal Laplacian L = −a_nΔ_{g₀} + R₀.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalLaplacian {
    /// a_n·A_f for the M faces.
    pub stiffness: Vec<f64>,
    /// Cell measure W_i = V_i·U₀_i^{2n/(n−2)} (unit-sphere area omitted).
    pub weight: Vec<f64>,
    pub potential: Vec<f64>,
    /// a_n·(n−2)·R^{n−2}·U₀_M², the Robin flux coefficient.
    pub robin: f64,
}

impl ConformalLaplacian {
    fn build(grid: &RadialGrid, u0: &[f64], r0: &[f64]) -> Self {
        let n = grid.n_dim;
        let a_n = conformal_a(n);
        let p = critical_exponent(n);
        let faces = grid.faces();
        let stiffness = (0..grid.last())
            .map(|i| {
                let h = grid.nodes[i + 1] - grid.nodes[i];
                a_n * faces[i].powi(n as i32 - 1) / h * u0[i] * u0[i + 1]
            })
            .collect();
        let weight = grid
            .cell_volumes()
            .iter()
            .zip(u0)
            .map(|(v, u)| v * u.powf(p))
            .collect();
        let m = grid.last();
        let robin = a_n * (n as f64 - 2.0) * grid.r_max().powi(n as i32 - 2) * u0[m] * u0[m];
        Self { stiffness, weight, potential: r0.to_vec(), robin }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// −a_n·Δ_{g₀}u with the natural outer closure.
    pub fn diffusion(&self, u: &[f64]) -> Vec<f64> {
        let m = self.len() - 1;
        let mut out = vec![0.0; m + 1];
        for (f, k) in self.stiffness.iter().enumerate() {
            let flux = k * (u[f] - u[f + 1]);
            out[f] += flux;
            out[f + 1] -= flux;
        }
        for (o, w) in out.iter_mut().zip(&self.weight) {
            *o /= w;
        }
        out
    }

    /// L u with the natural outer closure.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.diffusion(u);
        for ((o, r), v) in out.iter_mut().zip(&self.potential).zip(u) {
            *o += r * v;
        }
        out
    }

    pub fn matrix(&self, outer: Outer) -> Tridiagonal {
        let m = self.len() - 1;
        let mut t = Tridiagonal::zeros(m + 1);
        for (f, k) in self.stiffness.iter().enumerate() {
            t.diag[f] += k / self.weight[f];
            t.diag[f + 1] += k / self.weight[f + 1];
            t.upper[f] = -k / self.weight[f];
            t.lower[f] = -k / self.weight[f + 1];
        }
        for i in 0..=m {
            t.diag[i] += self.potential[i];
        }
        if outer == Outer::Robin {
            t.diag[m] += self.robin / self.weight[m];
        }
        t
    }

    /// The symmetric form W·L: off-diagonal −a_nA_f, diagonal Σa_nA_f + W_iR₀_i.
    pub fn symmetric_form(&self, outer: Outer) -> Tridiagonal {
        let mut t = self.matrix(outer);
        for i in 0..self.len() {
            let w = self.weight[i];
            t.diag[i] *= w;
            if i > 0 {
                t.lower[i - 1] *= w;
            }
            if i + 1 < self.len() {
                t.upper[i] *= w;
            }
        }
        t
    }
}

impl Background {
    pub fn n_dim(&self) -> usize {
        self.grid.n_dim
    }

    pub fn operator(&self) -> ConformalLaplacian {
        ConformalLaplacian::build(&self.grid, &self.u0, &self.r0)
    }

    /// Background with prescribed samples, bypassing the catalog. R₀ is taken
    /// as an independent potential.
    pub fn from_parts(
        grid: RadialGrid,
        u0: Vec<f64>,
        r0: Vec<f64>,
        k_radius: f64,
    ) -> Result<Self, BackgroundError> {
        grid.check_samples(&u0)?;
        grid.check_samples(&r0)?;
        check_positive(&u0)?;
        check_k_radius(&grid, k_radius)?;
        let n = grid.n_dim;
        let tau = fit_tau(&grid, &u0, &r0);
        Ok(Self {
            a_n: conformal_a(n),
            big_n: flow_exponent(n),
            grid,
            u0,
            r0,
            tau,
            k_radius,
            provenance: Provenance::Potential,
        })
    }

    /// Background of the conformal metric ρ^{4/(n−2)}g₀: U₀ ↦ ρ·U₀ and
    /// R₀ ↦ ρ^{−N}Lρ.
    pub fn conformal_change(&self, rho: &[f64]) -> Result<Self, BackgroundError> {
        let r0 = conformal_scalar_curvature(self, rho)?;
        let u0 = self.u0.iter().zip(rho).map(|(a, b)| a * b).collect();
        Ok(Self { u0, r0, ..self.clone() })
    }

    /// Node indices with r ≤ K_radius.
    pub fn k_nodes(&self) -> std::ops::Range<usize> {
        0..self.grid.count_within(self.k_radius)
    }
}

fn check_positive(u: &[f64]) -> Result<(), BackgroundError> {
    match u.iter().position(|&v| !(v > 0.0)) {
        Some(node) => Err(BackgroundError::NonPositive { node, value: u[node] }),
        None => Ok(()),
    }
}

fn check_k_radius(grid: &RadialGrid, k: f64) -> Result<(), BackgroundError> {
    if k.is_finite() && k > 0.0 && k < grid.r_max() {
        Ok(())
    } else {
        Err(BackgroundError::KRadius(k))
    }
}

/// L_{g₀} for `bg`.
pub fn assemble_conformal_laplacian(bg: &Background) -> ConformalLaplacian {
    bg.operator()
}

/// Scalar curvature of u^{4/(n−2)}g₀, i.e. u^{−N}·L_{g₀}u.
pub fn conformal_scalar_curvature(bg: &Background, u: &[f64]) -> Result<Vec<f64>, BackgroundError> {
    bg.grid.check_samples(u)?;
    check_positive(u)?;
    let lu = bg.operator().apply(u);
    Ok(lu.iter().zip(u).map(|(l, v)| l * v.powf(-bg.big_n)).collect())
}

/// Discrete radial harmonic function of the flat base, zero at R_max and with
/// unit outward flux coefficient: s_i − s_{i+1} = (n−2)·h/r_f^{n−1}. It equals
/// r^{2−n} − R_max^{2−n} up to O(h²).
pub fn discrete_harmonic_tail(grid: &RadialGrid) -> Vec<f64> {
    let n = grid.n_dim as i32;
    let faces = grid.faces();
    let m = grid.last();
    let mut s = vec![0.0; m + 1];
    for i in (0..m).rev() {
        let h = grid.nodes[i + 1] - grid.nodes[i];
        s[i] = s[i + 1] + (n - 2) as f64 * h / faces[i].powi(n - 1);
    }
    s
}

pub fn make_background(
    grid: &RadialGrid,
    entry: &CatalogEntry,
    k_radius: f64,
) -> Result<Background, BackgroundError> {
    check_k_radius(grid, k_radius)?;
    let n = grid.n_dim;
    let len = grid.len();
    let m = grid.last();
    let (u0, r0, provenance) = match *entry {
        CatalogEntry::Flat => (vec![1.0; len], vec![0.0; len], Provenance::Metric),
        CatalogEntry::HarmonicTail { c, smoothing_radius } => {
            finite("c", c)?;
            positive("smoothing_radius", smoothing_radius)?;
            if smoothing_radius >= grid.r_max() / 2.0 {
                return Err(BackgroundError::Parameter { name: "smoothing_radius", value: smoothing_radius });
            }
            let s = discrete_harmonic_tail(grid);
            // Quadratic cap s_j + d·(1 − r²/r_j²)/2 inside r_j, with d = (n−2)·r_j^{2−n}
            // matching value and slope of r^{2−n} at the first node r_j ≥ r_s.
            let j = grid.nodes.partition_point(|&r| r < smoothing_radius);
            let rj = grid.nodes[j];
            let d = (n as f64 - 2.0) * rj.powi(2 - n as i32);
            let tail: Vec<f64> = (0..len)
                .map(|i| {
                    if i >= j {
                        s[i]
                    } else {
                        let x = grid.nodes[i] / rj;
                        s[j] + 0.5 * d * (1.0 - x * x)
                    }
                })
                .collect();
            let u0: Vec<f64> = tail.iter().map(|t| 1.0 + c * t).collect();
            check_positive(&u0)?;
            let r0 = metric_curvature(grid, &u0);
            (u0, r0, Provenance::Metric)
        }
        CatalogEntry::GaussianWell { amplitude, width } => {
            finite("amplitude", amplitude)?;
            positive("width", width)?;
            let u0: Vec<f64> =
                grid.nodes.iter().map(|r| 1.0 + amplitude * (-(r / width).powi(2)).exp()).collect();
            check_positive(&u0)?;
            let r0 = metric_curvature(grid, &u0);
            (u0, r0, Provenance::Metric)
        }
        CatalogEntry::CurvatureWell { amplitude, width } => {
            finite("amplitude", amplitude)?;
            positive("width", width)?;
            let r0 = grid.nodes.iter().map(|r| -amplitude * (-(r / width).powi(2)).exp()).collect();
            (vec![1.0; len], r0, Provenance::Potential)
        }
        CatalogEntry::ZeroYamabe { width } => {
            positive("width", width)?;
            let phi: Vec<f64> = grid
                .nodes
                .iter()
                .map(|r| (1.0 + (r / width).powi(2)).powf((2.0 - n as f64) / 2.0))
                .collect();
            let flat = ConformalLaplacian::build(grid, &vec![1.0; len], &vec![0.0; len]);
            let mut lphi = flat.diffusion(&phi);
            lphi[m] += flat.robin * phi[m] / flat.weight[m];
            // −a_nΔφ + R₀φ = 0 row by row, including the Robin row.
            let r0 = lphi.iter().zip(&phi).map(|(l, p)| -l / p).collect();
            (vec![1.0; len], r0, Provenance::Potential)
        }
    };
    let off = (u0[m] - 1.0).abs();
    if off > 1e-6 {
        return Err(BackgroundError::NotAsymptoticallyFlat(off));
    }
    let tau = fit_tau(grid, &u0, &r0);
    Ok(Background {
        grid: grid.clone(),
        u0,
        r0,
        tau,
        a_n: conformal_a(n),
        big_n: flow_exponent(n),
        k_radius,
        provenance,
    })
}

fn finite(name: &'static str, value: f64) -> Result<(), BackgroundError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(BackgroundError::Parameter { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), BackgroundError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(BackgroundError::Parameter { name, value })
    }
}

fn metric_curvature(grid: &RadialGrid, u0: &[f64]) -> Vec<f64> {
    let len = grid.len();
    let flat = ConformalLaplacian::build(grid, &vec![1.0; len], &vec![0.0; len]);
    let big_n = flow_exponent(grid.n_dim);
    flat.diffusion(u0).iter().zip(u0).map(|(l, u)| l * u.powf(-big_n)).collect()
}

/// Decay order of the background. Taken from the U₀ − 1 tail, or from the
/// R₀ tail (minus 2) when U₀ is trivial, over r ∈ [R_max/10, R_max/2], and
/// capped at n − 2: anything faster is dominated by the harmonic mode.
fn fit_tau(grid: &RadialGrid, u0: &[f64], r0: &[f64]) -> f64 {
    let cap = grid.n_dim as f64 - 2.0;
    let r_max = grid.r_max();
    let window = grid.indices_in(r_max / 10.0, r_max / 2.0);
    let dev: Vec<f64> = u0.iter().map(|u| (u - 1.0).abs()).collect();
    let (samples, shift) = if dev[window.clone()].iter().any(|&d| d > 1e-12) {
        (dev, 0.0)
    } else {
        (r0.iter().map(|r| r.abs()).collect(), 2.0)
    };
    let pts: Vec<(f64, f64)> = window
        .filter(|&i| samples[i] > 1e-14)
        .map(|i| (grid.nodes[i].ln(), samples[i].ln()))
        .collect();
    if pts.len() < 4 {
        return cap;
    }
    let slope = least_squares_slope(&pts);
    (-slope - shift).clamp(f64::MIN_POSITIVE, cap)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn grid(n: usize, nodes: usize, r: f64) -> RadialGrid {
        build_grid(n, nodes, r, 1.05).unwrap()
    }

    #[test]
    fn constants() {
        assert_eq!(conformal_a(3), 8.0);
        assert_eq!(flow_exponent(3), 5.0);
        assert_eq!(conformal_a(6), 5.0);
        assert_eq!(flow_exponent(6), 2.0);
        assert_eq!(critical_exponent(4), 4.0);
        let pi = std::f64::consts::PI;
        assert!((sphere_area(3) - 4.0 * pi).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * pi).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * pi * pi / 3.0).abs() < 1e-13);
    }

    #[test]
    fn flat_constants_are_harmonic() {
        let g = grid(3, 512, 50.0);
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        assert!(bg.u0.iter().all(|&u| u == 1.0) && bg.r0.iter().all(|&r| r == 0.0));
        let l = bg.operator().apply(&vec![1.0; g.len()]);
        assert!(l.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_operator_matches_analytic_laplacian() {
        // f = 1/(1+r): f'' + 2f'/r = 2/(1+r)³ − 2/(r(1+r)²).
        let check = |nodes: usize| {
            let g = grid(3, nodes, 20.0);
            let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
            let f: Vec<f64> = g.nodes.iter().map(|r| 1.0 / (1.0 + r)).collect();
            let lf = bg.operator().apply(&f);
            g.indices_in(0.5, 10.0)
                .map(|i| {
                    let r = g.nodes[i];
                    let lap = 2.0 / (1.0 + r).powi(3) - 2.0 / (r * (1.0 + r).powi(2));
                    (lf[i] + 8.0 * lap).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (check(400), check(800));
        assert!(e1 < 1e-3, "{e1}");
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn measure_symmetry() {
        let g = grid(4, 300, 30.0);
        let bg = make_background(&g, &CatalogEntry::GaussianWell { amplitude: 0.7, width: 3.0 }, 5.0).unwrap();
        let op = bg.operator();
        for outer in [Outer::Natural, Outer::Robin] {
            let l = op.matrix(outer);
            for i in 0..g.last() {
                let a = op.weight[i] * l.upper[i];
                let b = op.weight[i + 1] * l.lower[i];
                assert!((a - b).abs() <= 1e-14 * a.abs());
            }
        }
    }

    #[test]
    fn round_sphere_factor_has_curvature_six() {
        let g = grid(3, 1024, 40.0);
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        let u: Vec<f64> = g.nodes.iter().map(|r| (2.0 / (1.0 + r * r)).sqrt()).collect();
        let big_r = conformal_scalar_curvature(&bg, &u).unwrap();
        for i in g.indices_in(0.0, 5.0) {
            assert!((big_r[i] - 6.0).abs() < 1e-3, "node {i}: {}", big_r[i]);
        }
    }

    #[test]
    fn harmonic_factor_is_scalar_flat() {
        let g = grid(3, 2048, 100.0);
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        let u: Vec<f64> = g.nodes.iter().map(|&r| 1.0 + r.max(0.5).powi(-1)).collect();
        let big_r = conformal_scalar_curvature(&bg, &u).unwrap();
        let worst = g.indices_in(1.0, 50.0).map(|i| big_r[i].abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn curvature_of_constant_over_flat_vanishes() {
        let g = grid(5, 256, 20.0);
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        let r = conformal_scalar_curvature(&bg, &vec![3.5; g.len()]).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn curvature_rejects_nonpositive() {
        let g = grid(3, 256, 10.0);
        let bg = make_background(&g, &CatalogEntry::Flat, 5.0).unwrap();
        let mut u = vec![1.0; g.len()];
        u[7] = 0.0;
        assert_eq!(
            conformal_scalar_curvature(&bg, &u),
            Err(BackgroundError::NonPositive { node: 7, value: 0.0 })
        );
    }

    #[test]
    fn gaussian_well_negative_annulus() {
        let g = grid(3, 1024, 50.0);
        let bg = make_background(&g, &CatalogEntry::GaussianWell { amplitude: 0.5, width: 2.0 }, 5.0).unwrap();
        // Oracle: R = −8ΔU/U⁵ with ΔU = A e^{−r²/σ²}(4r²/σ⁴ − 6/σ²), negative for r > σ√(3/2).
        let lo = 2.0 * 1.5f64.sqrt();
        for i in g.indices_in(lo + 0.2, 5.0) {
            let r = g.nodes[i];
            let u = 1.0 + 0.5 * (-(r * r) / 4.0).exp();
            let lap = 0.5 * (-(r * r) / 4.0).exp() * (r * r / 4.0 - 1.5);
            let exact = -8.0 * lap / u.powi(5);
            assert!(exact < 0.0 && bg.r0[i] < 0.0);
            assert!((bg.r0[i] - exact).abs() < 1e-3 * exact.abs().max(1e-3));
        }
    }

    #[test]
    fn harmonic_tail_is_scalar_flat_outside_cap() {
        let g = grid(3, 1024, 100.0);
        let bg = make_background(&g, &CatalogEntry::HarmonicTail { c: 1.0, smoothing_radius: 1.0 }, 5.0).unwrap();
        let j = g.nodes.partition_point(|&r| r < 1.0);
        for i in j + 1..g.last() {
            assert!(bg.r0[i].abs() < 1e-11, "node {i}: {}", bg.r0[i]);
        }
        assert!(bg.r0[..j].iter().any(|&r| r.abs() > 1e-3));
        assert!((bg.tau - 1.0).abs() < 1e-12);
        assert_eq!(bg.u0[g.last()], 1.0);
    }

    #[test]
    fn catalog_errors() {
        let g = grid(3, 256, 20.0);
        let e = make_background(&g, &CatalogEntry::GaussianWell { amplitude: -1.5, width: 2.0 }, 5.0);
        assert!(matches!(e, Err(BackgroundError::NonPositive { .. })));
        let e = make_background(&g, &CatalogEntry::GaussianWell { amplitude: 1.0, width: 0.0 }, 5.0);
        assert!(matches!(e, Err(BackgroundError::Parameter { name: "width", .. })));
        let e = make_background(&g, &CatalogEntry::GaussianWell { amplitude: 1.0, width: 15.0 }, 5.0);
        assert!(matches!(e, Err(BackgroundError::NotAsymptoticallyFlat(_))));
        let e = make_background(&g, &CatalogEntry::HarmonicTail { c: -10.0, smoothing_radius: 1.0 }, 5.0);
        assert!(matches!(e, Err(BackgroundError::NonPositive { .. })));
        let e = make_background(&g, &CatalogEntry::Flat, 30.0);
        assert_eq!(e, Err(BackgroundError::KRadius(30.0)));
    }

    #[test]
    fn zero_yamabe_profile_is_robin_kernel() {
        let g = grid(6, 1024, 100.0);
        let bg = make_background(&g, &CatalogEntry::ZeroYamabe { width: 4.0 }, 8.0).unwrap();
        let phi: Vec<f64> = g.nodes.iter().map(|r| (1.0 + (r / 4.0).powi(2)).powi(-2)).collect();
        let res = bg.operator().matrix(Outer::Robin).apply(&phi);
        let scale = bg.operator().matrix(Outer::Robin).abs_apply(&phi);
        for (r, s) in res.iter().zip(&scale) {
            assert!(r.abs() <= 1e-12 * s);
        }
        assert!(bg.r0[..g.last()].iter().all(|&r| r < 0.0));
        assert!((bg.tau - 2.0).abs() < 0.2, "tau {}", bg.tau);
    }

    #[test]
    fn catalog_json_shape() {
        let e: CatalogEntry = serde_json::from_str(r#"{"kind":"gaussian_well","params":{"amplitude":0.5,"width":2}}"#).unwrap();
        assert_eq!(e, CatalogEntry::GaussianWell { amplitude: 0.5, width: 2.0 });
        let e: CatalogEntry = serde_json::from_str(r#"{"kind":"flat"}"#).unwrap();
        assert_eq!(e, CatalogEntry::Flat);
        let e: CatalogEntry = serde_json::from_str(r#"{"kind":"harmonic_tail","params":{"c":1}}"#).unwrap();
        assert_eq!(e, CatalogEntry::HarmonicTail { c: 1.0, smoothing_radius: 1.0 });
    }
}
