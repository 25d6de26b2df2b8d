pub mod error;
pub mod cone;
pub mod geometry;
pub mod stochastic;
pub mod special;
pub mod engine;
pub mod experiments;
pub mod cli;
