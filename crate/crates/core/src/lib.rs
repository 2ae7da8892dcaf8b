//! Picard iteration for path-dependent SDEs driven by a random message,
//! Girsanov path densities, and Monte Carlo estimates of relative entropy
//! and mutual information along the iteration, next to explicit
//! convergence bounds.
//!
//! ```
//! use std::sync::Arc;
//! use picard_entropy::estimators::{kl_joint_vs_product, Channel, RunContext};
//! use picard_entropy::model::{ConstantGaussian, MessageDrift, TimeGrid};
//! use picard_entropy::picard::Order;
//!
//! let channel = Channel::new(
//!     Arc::new(MessageDrift),
//!     Arc::new(ConstantGaussian { sigma: 1.0 }),
//!     TimeGrid::new(1.0, 16).unwrap(),
//! );
//! let r = kl_joint_vs_product(&channel, Order::Limit, 2000, &RunContext::sequential(7)).unwrap();
//! assert!((r.estimate - 0.5).abs() < 4.0 * r.stderr);
//! ```

pub mod bounds;
pub mod density;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod experiment;
pub mod model;
pub mod path;
pub mod picard;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
