//! HTTP service and operator tooling around the business model validation
//! loop in `hidss-core`.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod seed;

pub use app::Hidss;
pub use config::ServiceConfig;
pub use error::{ApiError, Problem};
