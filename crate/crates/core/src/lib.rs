//! Core library for the dcir toolkit: a structured-control frontend dialect,
//! a stateful-dataflow program representation, conversion between the two,
//! optimization passes, reference interpreters with data-movement accounting,
//! and a C backend.

pub mod convert;
pub mod frontend;
pub mod passes;
pub mod rng;
pub mod sdfg;
pub mod stats;
pub mod symbolic;
pub(crate) mod text;
pub mod value;
