//! Graded radial meshes on [0, R_max] and discrete weighted norms.
//!
//! Nodes follow r_i = a·sinh(β·i/M) with β = asinh(R_max/a). Spacing grows
//! smoothly from a·β/M at the origin to about R_max·β/M at the far end, and
//! the ratio of consecutive spacings is bounded by e^{β/M}. The scale `a`
//! starts at 1 and is enlarged when needed to respect the requested grading.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum spacing allowed on the core [0, 2].
pub const CORE_SPACING: f64 = 0.05;
/// Radius of the core region that must stay densely resolved.
pub const CORE_RADIUS: f64 = 2.0;
/// Smallest admissible number of nodes.
pub const MIN_NODES: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension must be at least 3, got {0}")]
    Dimension(usize),
    #[error("need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("R_max must be finite and > 1, got {0}")]
    Radius(f64),
    #[error("grading must be finite and >= 1, got {0}")]
    Grading(f64),
    #[error("core spacing {spacing} exceeds {CORE_SPACING} on [0, {CORE_RADIUS}]")]
    CoreTooCoarse { spacing: f64 },
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
}

/// Grid parameters as they appear in scenario configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dimension: usize,
    pub nodes: usize,
    pub r_max: f64,
    pub grading: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<RadialGrid, GridError> {
        build_grid(self.dimension, self.nodes, self.r_max, self.grading)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub n_dim: usize,
    pub nodes: Vec<f64>,
    pub grading: f64,
}

pub fn build_grid(
    n_dim: usize,
    num_nodes: usize,
    r_max: f64,
    grading: f64,
) -> Result<RadialGrid, GridError> {
    if n_dim < 3 {
        return Err(GridError::Dimension(n_dim));
    }
    if num_nodes < MIN_NODES {
        return Err(GridError::TooFewNodes { min: MIN_NODES, got: num_nodes });
    }
    if !r_max.is_finite() || r_max <= 1.0 {
        return Err(GridError::Radius(r_max));
    }
    if !grading.is_finite() || grading < 1.0 {
        return Err(GridError::Grading(grading));
    }
    let m = num_nodes - 1;
    let mf = m as f64;
    let mut nodes = Vec::with_capacity(num_nodes);
    if grading == 1.0 {
        nodes.extend((0..m).map(|i| r_max * i as f64 / mf));
    } else {
        // e^{β/M} ≤ q  ⇔  a ≥ R_max / sinh(M ln q).
        let a_min = r_max / (mf * grading.ln()).sinh();
        let a = if a_min.is_finite() { a_min.max(1.0) } else { 1.0 };
        let beta = (r_max / a).asinh();
        nodes.extend((0..m).map(|i| a * (beta * i as f64 / mf).sinh()));
    }
    nodes.push(r_max);
    let grid = RadialGrid { n_dim, nodes, grading };
    let core = grid.core_spacing();
    if core > CORE_SPACING {
        return Err(GridError::CoreTooCoarse { spacing: core });
    }
    Ok(grid)
}

impl RadialGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the outer node, M.
    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.last()]
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Largest spacing among intervals that start inside [0, 2].
    pub fn core_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .filter(|w| w[0] < CORE_RADIUS)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Cell faces r_{i+1/2}: midpoints between neighbouring nodes.
    pub fn faces(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Radial cell volumes (r_{i+1/2}^n − r_{i−1/2}^n)/n with r_{−1/2} = 0 and
    /// the outer cell closed at r_M. The sphere area is not included.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let n = self.n_dim as i32;
        let faces = self.faces();
        let m = self.last();
        (0..=m)
            .map(|i| {
                let inner = if i == 0 { 0.0 } else { faces[i - 1] };
                let outer = if i == m { self.nodes[m] } else { faces[i] };
                (outer.powi(n) - inner.powi(n)) / n as f64
            })
            .collect()
    }

    /// Number of nodes with r_i ≤ radius.
    pub fn count_within(&self, radius: f64) -> usize {
        self.nodes.partition_point(|&r| r <= radius)
    }

    /// Node indices with r in the closed interval [lo, hi].
    pub fn indices_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.nodes.partition_point(|&r| r < lo);
        let end = self.nodes.partition_point(|&r| r <= hi);
        start..end.max(start)
    }

    /// Piecewise-linear interpolation of nodal samples, clamped to [0, R_max].
    pub fn interpolate(&self, f: &[f64], r: f64) -> f64 {
        let r = r.clamp(0.0, self.r_max());
        let j = self.nodes.partition_point(|&x| x <= r);
        if j == 0 {
            return f[0];
        }
        if j >= self.len() {
            return f[self.last()];
        }
        let (r0, r1) = (self.nodes[j - 1], self.nodes[j]);
        let s = (r - r0) / (r1 - r0);
        f[j - 1] + s * (f[j] - f[j - 1])
    }

    pub fn check_samples(&self, f: &[f64]) -> Result<(), GridError> {
        if f.len() != self.len() {
            return Err(GridError::SampleCount { expected: self.len(), got: f.len() });
        }
        match f.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(GridError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

/// max_i max(r_i, 1)^{−β}·|f_i|.
pub fn weighted_sup_norm(grid: &RadialGrid, f: &[f64], beta: f64) -> Result<f64, GridError> {
    grid.check_samples(f)?;
    Ok(grid
        .nodes
        .iter()
        .zip(f)
        .map(|(r, v)| r.max(1.0).powf(-beta) * v.abs())
        .fold(0.0, f64::max))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn any_grid() -> impl Strategy<Value = RadialGrid> {
        (3usize..=8, 64usize..=1024, 5.0f64..300.0, 1.0f64..1.1).prop_filter_map("core too coarse", |(n, m, r, q)| {
            build_grid(n, m, r, q).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn nodes_are_well_formed(g in any_grid()) {
            prop_assert_eq!(g.nodes[0], 0.0);
            prop_assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(g.nodes.len() >= MIN_NODES);
            let h = g.spacings();
            for w in h.windows(2) {
                let ratio = w[1] / w[0];
                prop_assert!(ratio >= 1.0 - 1e-9 && ratio <= g.grading + 1e-9, "ratio {}", ratio);
            }
        }

        #[test]
        fn build_is_bitwise_deterministic(g in any_grid()) {
            let again = build_grid(g.n_dim, g.nodes.len(), g.r_max(), g.grading).unwrap();
            let a: Vec<u64> = g.nodes.iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = again.nodes.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn weighted_norm_decreases_in_beta(
            g in any_grid(),
            seed in proptest::collection::vec(-10.0f64..10.0, 8),
            beta in 0.0f64..4.0,
            extra in 0.0f64..4.0,
        ) {
            let f: Vec<f64> = g
                .nodes
                .iter()
                .enumerate()
                .map(|(i, &r)| if r >= 1.0 { seed[i % seed.len()] } else { 0.0 })
                .collect();
            let strong = weighted_sup_norm(&g, &f, beta + extra).unwrap();
            let weak = weighted_sup_norm(&g, &f, beta).unwrap();
            prop_assert!(strong <= weak);
        }
    }
}
