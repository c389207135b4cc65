pub mod advisor;
pub mod backend;
pub mod corpus;
pub mod eval;
pub mod extractor;
pub mod model;
pub mod policy;
pub mod sim;
pub mod tracker;
pub mod triage;

pub use model::*;
