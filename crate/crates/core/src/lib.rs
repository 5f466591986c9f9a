//! Finite-sample forecasting of ARMA processes with parameter-estimation
//! error, and forecasting of their temporal aggregates.

pub mod aggmodel;
pub mod asymcov;
pub mod error;
pub mod forecast;
pub mod model;
pub mod poly;
pub mod predictors;
pub mod scheme;
pub mod totalerror;

pub use error::{Error, Result};
pub use model::{ArmaModel, LinearRep, ValidationConfig};
pub use scheme::{AggregationScheme, SchemeKind};
