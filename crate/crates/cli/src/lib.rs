//! Configuration, run-directory and manifest handling behind the `u2flow`
//! command-line tool.

pub mod config;
pub mod manifest;
pub mod trajectory;
