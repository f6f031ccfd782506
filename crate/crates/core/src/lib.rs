//! Key-value memory network question answering at desk scale.
//!
//! The crate is split along the data path: [`featurize`] turns text, KB
//! triples, and documents into sparse bag-of-words memory slots,
//! [`memory_store`] pre-selects candidate slots per question through an
//! inverted index, [`model`] runs the multi-hop addressing/reading network
//! (forward, hand-derived backward, SGD training, prediction, baselines),
//! [`numerics`] carries the dense/sparse linear algebra underneath it, and
//! [`evaluation`] scores ranked predictions. [`datagen`] generates the
//! synthetic movie benchmark (KB, documents with controllable conjunction
//! and coreference corruption, and questions in 13 classes plus a two-hop
//! family) that the rest of the crate is exercised on.
//!
//! Everything here is pure in-memory computation; file formats, the
//! checkpoint layout, and the command-line driver live in the companion
//! `kvmem-cli` crate. The crate builds without `std` (alloc required).

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod datagen;
pub mod evaluation;
pub mod featurize;
mod math;
pub mod memory_store;
pub mod model;
pub mod numerics;
pub(crate) mod rng;
