pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod info;
pub mod matrix;
pub mod nn;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod proxy;
pub mod store;

pub use error::{Error, Result};
pub use matrix::Matrix;
