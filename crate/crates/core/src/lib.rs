//! Speed tracking of a clutch-coupled drive train with PPO-trained and PI controllers.

pub mod drivetrain;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod pi;
pub mod policy;
pub mod ppo;
pub mod references;
pub mod tracking;

pub use error::{Error, Result};
