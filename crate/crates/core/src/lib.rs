//! Evaluation of regular document spanners over documents compressed as
//! straight-line programs, without decompressing them.

mod bits;
pub mod compute;
pub mod enumerate;
pub mod error;
pub mod generate;
pub mod matrices;
pub mod membership;
pub mod oracle;
pub mod slp;
pub mod spanner;
mod text;

pub use error::{EvalError, SlpError, SpannerError};
pub use slp::{build_test_slp, normalize, parse_slp, Slp, SlpBuilder};
