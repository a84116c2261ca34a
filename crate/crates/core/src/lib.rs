pub mod error;
pub mod framework;
pub mod linalg;
pub mod models;
pub mod structure;
pub mod choi;
pub mod axioms;
pub mod reconstruct;
pub mod cli;
