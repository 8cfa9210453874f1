//! Session-level purchase-intent classification on symbolized clickstreams.
//!
//! Four model families share one data model ([`session`]) and one decision
//! interface ([`classify::Classifier`]):
//!
//! - [`markov`]: per-class order-k Markov chains with add-alpha smoothing.
//! - [`lm`]: per-class LSTM next-token language models.
//! - [`seq2label`]: a discriminative LSTM with last-step or mean pooling.
//! - [`visibility`]: horizontal visibility graph motifs, PCA and a linear SVM.
//!
//! [`synthetic`] generates labeled sessions from known processes and
//! [`harness`] runs the split / grid-search / repeated-run evaluation protocol.

pub mod classify;
pub mod error;
pub mod harness;
pub mod lm;
pub mod markov;
pub mod neural;
pub mod seq2label;
pub mod session;
pub mod synthetic;
pub mod visibility;

mod textio;

pub use classify::{accuracy, Classifier, Mixture, PriorMode, Priors, SequenceScorer};
pub use error::{Error, Result};
pub use session::{Dataset, EventCategory, Label, LabeledSession, Provenance};
