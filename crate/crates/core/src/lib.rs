//! Fuzzy vault for wallet seeds keyed by binary image templates.
//!
//! A 512-bit template is enrolled as a modular subset product over a safe prime
//! plus a point-function lock. A fresh template within Hamming distance `r − 1`
//! decodes back to the enrolled one, opens the lock and unwraps the seed; any
//! other template yields nothing.

pub mod error;
pub mod eval;
pub mod numtheory;
pub mod obfuscator;
pub mod params;
pub mod pipeline;
pub mod template;

pub use error::{Error, Result};
pub use obfuscator::{enroll, enroll_multi, AnyVault, Encoding, MultiVault, PointLock, VaultRecord};
pub use params::SystemParams;
pub use template::{hamming, Template};
