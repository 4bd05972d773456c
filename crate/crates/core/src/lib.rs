//! Coupled human/lower-limb-exoskeleton simulation with lockable harness
//! chains, impedance interfaces and derivative-free impedance optimization.

pub mod dynamics;
pub mod exec;
pub mod harness;
pub mod human;
pub mod model;
pub mod optimizer;
pub mod seed;
pub mod simulation;
pub mod spatial;
