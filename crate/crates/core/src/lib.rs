//! Spatial-temporal graph convolution over dynamic graphs built on the
//! tensor M-product, with DFT, DCT and Haar temporal transforms and their
//! ensemble, trained for link-weight estimation.

pub mod cli;
pub mod data;
pub mod error;
pub mod gtcn;
pub mod head;
pub mod tensor;
pub mod training;
pub mod transforms;

pub use error::{Error, Result};
