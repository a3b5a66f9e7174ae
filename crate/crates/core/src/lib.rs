pub mod cli;
pub mod distancing;
pub mod fleet;
pub mod metrics;
pub mod oracles;
pub mod reproduce;
pub mod sim;
pub mod transfer;
pub mod verify;
pub mod zone_grid;
pub mod zone_ops;
