//! Path analysis for recursive causal models.
//!
//! The pipeline runs from observed correlations (raw data or a published
//! matrix) through per-equation standardized least squares, trek-based
//! decomposition of each correlation, a reproduced-versus-observed fit check,
//! and direct/indirect/total effect summaries. A greedy revision loop drops
//! non-significant arrows and adds the arrow behind the largest misfit.
//!
//! ```
//! use pathwright::correlation::CorrelationMatrix;
//! use pathwright::estimation::fit_with_inference;
//! use pathwright::pathspec::parse_model;
//!
//! let corr = CorrelationMatrix::from_entries(
//!     vec!["a".into(), "b".into(), "c".into()],
//!     vec![vec![1.0, 0.5, 0.4], vec![0.5, 1.0, 0.6], vec![0.4, 0.6, 1.0]],
//!     200,
//! )
//! .unwrap();
//! let model = parse_model("path a -> b\neq c <- a b").unwrap().model;
//! let fit = fit_with_inference(&corr, &model, 0.05).unwrap();
//! assert_eq!(fit.beta(0, 1), Some(0.5));
//! ```

pub mod correlation;
pub mod data;
pub mod effects;
pub mod error;
pub mod estimation;
pub mod numeric;
pub mod pathspec;
pub mod screening;
pub mod simulate;
pub mod tracing;

pub use error::{Error, Result};
