//! Lipschitz-regularised adversarial objectives: closed-form discriminators,
//! optimal transport, a small MLP with double-backprop, and particle dynamics.

pub mod closed_form;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod lipschitz;
pub mod net;
pub mod objectives;
pub mod scenario;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Point, PointCloud, Rng};
