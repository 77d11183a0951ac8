pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod projection;
pub mod dynamics;
pub mod variational;
pub mod bridge;
pub mod cli;
