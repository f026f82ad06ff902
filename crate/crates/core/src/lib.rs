//! Occupational transition pathway analysis.
//!
//! The crate covers the full chain from an origin occupation's task catalogue
//! to a tiered list of destination occupations:
//!
//! * [`exposure`] classifies tasks by automation status and groups work activities.
//! * [`capability`] scores capability distance and similarity between occupations.
//! * [`market`] builds income, employment, geography and qualification predictors.
//! * [`regression`] fits count models of historical transitions.
//! * [`synthesis`] combines the signals into priority tiers.
//! * [`pipeline`] runs every stage from a config file and writes reports.

pub mod capability;
pub mod error;
pub mod exposure;
pub mod market;
pub mod pipeline;
pub mod regression;
pub mod synthesis;
mod table;

pub use error::{Error, Result};
