pub mod bench;
pub mod elliptic;
pub mod error;
pub mod io;
pub mod linalg;
pub mod parallel;
pub mod polar;
pub mod svd;

pub use error::{Error, Result};
