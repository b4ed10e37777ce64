pub mod acceptance;
pub mod config;
pub mod oracles;
pub mod runner;
