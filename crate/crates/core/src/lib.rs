//! Saliency integration with an arbitrator model.
//!
//! Several candidate saliency maps of one image are fused at the superpixel
//! level. A reference map is generated from external knowledge (a boundary
//! prior or a supplied map) and the majority vote of the candidates, each
//! candidate's expertise is estimated without ground truth, and a cellular
//! automaton updates every candidate in the logit domain until the maps agree.
//!
//! The crate is organised bottom-up:
//!
//! - [`preprocess`]: CIELab conversion, SLIC superpixels, pooling, Otsu.
//! - [`knowledge`]: external knowledge, consensus, geodesic propagation.
//! - [`expertise`]: statistics-based and latent-variable (EM) expertise.
//! - [`fusion`]: the cellular automaton and the averaging baseline.
//! - [`eval`]: F-measure, MAE, convergence traces and CSV reports.
//! - [`pipeline`]: per-image orchestration used by the command-line tool.

pub mod config;
pub mod error;
pub mod eval;
pub mod expertise;
pub mod fusion;
pub mod io;
pub mod knowledge;
pub mod pipeline;
pub mod preprocess;
mod raster;

pub use config::{ExpertiseMode, FusionConfig, KnowledgeSource};
pub use error::{Error, Result};
pub use raster::{min_max_normalize, Raster};
