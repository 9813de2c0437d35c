pub mod error;
pub mod expansion;
pub mod laplace;
pub mod linalg;
pub mod mellin;
pub mod oracle;
pub mod quad;
pub mod reversion;
pub mod series;
pub mod smallball;
pub mod special;
pub mod spectrum;
pub mod validate;

pub use error::{Error, Result};
