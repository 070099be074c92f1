//! Topology extraction for filamentary networks (retinal vessels, roads).
//!
//! The pipeline grows a network graph out of seed points by repeatedly asking a
//! patch-level connectivity predictor "which border points of this patch are
//! reachable from its center?", linking the center to the accepted peaks, and
//! scheduling the peaks as new centers. Alongside the tracer this crate ships:
//!
//! - [`netgraph`]: the polyline network data model, JSON I/O, rasterization,
//!   and patch-window clipping with connectivity queries;
//! - [`patchgt`]: patch-level ground-truth heatmap construction for the
//!   non-connectivity / connectivity / connectivity-av configurations;
//! - [`predictor`]: the predictor contract, a ground-truth oracle, a
//!   file-backed store adapter for externally computed heatmaps, and a
//!   corruption harness;
//! - [`tracer`]: the iterative delineation engine;
//! - [`eval`]: boundary precision-recall, the connectivity measure `C`, the
//!   combined `F1C`, morphological thinning, and the skeleton baseline;
//! - [`synth`]: deterministic synthetic network generators for closed-loop
//!   verification.
//!
//! All operations are deterministic for fixed inputs and seeds.

pub mod cli;
pub mod error;
pub mod eval;
pub mod geom;
pub mod netgraph;
pub mod patchgt;
pub mod pgm;
pub mod predictor;
pub mod synth;
pub mod tracer;

pub use error::{Error, Result};
pub use netgraph::{ClassLabel, NetworkGraph, PatchWindow, SkeletonRaster};
pub use patchgt::{GtMode, Heatmap};
pub use tracer::ConfidenceMap;
