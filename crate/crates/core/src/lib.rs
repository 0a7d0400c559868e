//! Bit-accurate simulator of a fused weight/membrane-potential compute-in-memory
//! SRAM macro running spiking neural network inference.

pub mod energy;
pub mod formats;
pub mod isa;
pub mod macro_core;
pub mod mapper;
pub mod oracle;
pub mod runtime;
pub mod selftest;
