//! Secrecy-rate optimization for a two-user full-duplex MISO wiretap
//! channel with an external eavesdropper.

pub mod channel;
pub mod config;
pub mod error;
pub mod kkt;
pub mod linalg;
pub mod oracle;
pub mod perfect;
pub mod power;
pub mod region;
pub mod report;
pub mod robust;
pub mod sdp;

pub use error::{Error, Result};
