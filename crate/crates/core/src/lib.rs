pub mod array;
pub mod autodiff;
pub mod encoding;
pub mod error;
pub mod evalkit;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod losses;
pub mod scene;
pub mod trainer;

pub use array::Array;
pub use error::{Error, Result};
