pub mod baselines;
pub mod bounds;
mod budget_dp;
pub mod datagen;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod global;
pub mod graph;
pub mod io;
pub mod local;
pub mod tree_solver;
