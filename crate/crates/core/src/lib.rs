//! Requirements prioritization that survives requirement churn.
//!
//! Elicited ratings are weighted by stakeholder influence to rank
//! requirements. When new requirements arrive with ratings from only some
//! stakeholders, item-item similarity picks the stakeholders most likely to
//! care, a latent-factor model predicts their ratings, and the project is
//! re-ranked.

pub mod domain;
pub mod error;
pub mod evaluation;
pub mod latent;
pub mod pipeline;
pub mod selector;
pub mod similarity;
pub mod stakerare;

pub use error::{Error, Result};
