pub mod error;
pub mod moments;
pub mod poly;
pub mod sdp;
pub mod sos;
pub mod hierarchy;
pub mod oracle;
pub mod cli;

pub use error::{Error, Result};
