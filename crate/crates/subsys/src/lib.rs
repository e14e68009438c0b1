//! Subsystem toric, planar, hyperbolic and semi-hyperbolic codes built from
//! tessellation symmetry data, with circuit-level noise simulation and a
//! gauge-fixing matching decoder.

#![allow(clippy::needless_range_loop)]

pub mod circuits;
pub mod code;
pub mod decoder;
pub mod gf2;
pub mod harness;
pub mod matching;
pub mod noise_sim;
pub mod symmetry;
pub mod tessellation;
