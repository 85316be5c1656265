//! Minimax-MDPs with adversarially refining predictions.
//!
//! The kernel ([`ext`], [`pwl`], [`mdp`]) is generic over [`Scalar`]; the
//! application modules work over the exact rational alias [`Q`].

pub mod bisect;
pub mod error;
pub mod ext;
pub mod io;
pub mod mdp;
pub mod multiphase;
pub mod oracle;
pub mod polygon;
pub mod pwl;
pub mod rmowp;
pub mod rrawp;
pub mod scalar;

pub use error::{Error, Result};
pub use ext::Ext;
pub use pwl::Pwl;
pub use scalar::{Scalar, Q};
