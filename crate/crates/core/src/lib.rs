pub mod asymptotics;
pub mod error;
pub mod linalg;
pub mod location;
pub mod models;
pub mod scatter;
pub mod simharness;
