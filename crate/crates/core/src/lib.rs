//! Graph-spectral embeddings for joint out-of-distribution generalization
//! and detection on small, fully enumerable populations.
//!
//! The pipeline runs population → augmentation graph → spectral embedding →
//! linear probe / KNN detector. The [`theory`] module holds closed-form
//! predictions for the five-example toy populations and a harness that
//! compares them against the numeric pipeline.

pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod loss;
pub mod population;
pub mod report;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{GraphBundle, GraphWeights};
pub use population::{AugmentationModel, AugmentationParams, Membership, Population, ToyVariant};
pub use spectral::{FactorizationState, SpectralEmbedding};
