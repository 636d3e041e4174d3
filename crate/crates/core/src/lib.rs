pub mod emul;
pub mod error;
pub mod exactlp;
pub mod funcspec;
pub mod interval;
pub mod program;
pub mod rational;
pub mod softfp;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
