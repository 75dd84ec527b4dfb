//! Core captioning toolkit: tensors, autodiff, the caption decoder and its
//! training loop, prompt construction, retrieval, and evaluation metrics.
//!
//! Everything here is `no_std` + `alloc`; file formats, caching, and the
//! command-line interface live in the companion `entcap` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod config;
pub mod corpus;
pub mod decode;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod layers;
pub mod lm;
pub mod math;
pub mod metrics;
pub mod model;
pub mod nouns;
pub mod optim;
pub mod params;
pub mod pos;
pub mod projector;
pub mod prompt;
pub mod retrieval;
pub mod rng;
pub mod tensor;
pub mod tokenizer;
pub mod train;
pub mod vocab;

pub use error::CoreError;
pub use tensor::Matrix;
