//! Horizontal-visibility-graph features with PCA and a linear SVM.
//!
//! A session becomes a numeric series via an ordinal code-book (optionally
//! over overlapping k-grams). Its horizontal visibility graph links `i < j`
//! iff every value strictly between them is strictly lower than both
//! endpoints. Features are the frequencies of the edge patterns seen in each
//! window of four consecutive nodes plus degree statistics; they are
//! standardized, reduced with PCA and classified by a linear SVM.

mod encode;
mod hvg;
mod motifs;
mod pca;
mod pipeline;
mod svm;

pub use encode::{encode_series, CodeBook, NumericSeries};
pub use hvg::{hvg, hvg_bruteforce, HvgGraph};
pub use motifs::{enumerate_admissible_motifs, motif_profile, FeatureVector, MotifCatalog};
pub use pca::{pca_fit, pca_fit_with, PcaProjection};
pub use pipeline::{fit_vg, write_feature_csv, VgConfig, VgPipeline};
pub use svm::{svm_fit, LinearSvm, SvmConfig};
