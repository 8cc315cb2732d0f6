pub mod autodiff;
pub mod data;
pub mod error;
pub mod graph;
pub mod network;
pub mod gsg;
pub mod rng;
pub mod tensor;
pub mod training;
pub mod updaters;

pub use error::{Error, Result};
pub use tensor::Tensor;
