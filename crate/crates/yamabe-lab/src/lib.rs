//! Yamabe flow on rotationally symmetric asymptotically flat backgrounds.
//!
//! Every field lives on a graded radial mesh ([`grid`]). A [`background`]
//! fixes the base metric and its conformal Laplacian, [`yamabe`] brackets the
//! sign of the Yamabe constant, [`elliptic`] solves the steady and
//! conformal-change problems, [`flow`] integrates the flow and [`verify`]
//! turns the long-time statements into executable checks. [`scenario`] wires
//! everything to JSON configs and CSV/JSON artifacts.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod background;
pub mod elliptic;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod scenario;
pub mod verify;
pub mod yamabe;

pub use background::{Background, CatalogEntry};
pub use elliptic::{EllipticSolution, EquationTag};
pub use flow::{FlowControls, FlowState, Trajectory};
pub use grid::RadialGrid;
pub use scenario::Scenario;
pub use verify::Verdict;
pub use yamabe::{YamabeEstimate, YamabeSign};
