//! Exact-arithmetic tools for contextuality in measurement scenarios:
//! empirical models, the contextual fraction, possibilistic supports,
//! parity-check constructions and no-signaling families with a fixed
//! support.

pub mod corpus;
pub mod csp;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod parity;
pub mod possibilistic;
pub mod rational;
pub mod scenario;
pub mod support;
pub mod verify;

pub use error::{Error, Result};
pub use model::EmpiricalModel;
pub use possibilistic::SupportModel;
pub use rational::Rational;
pub use scenario::MeasurementScenario;
