//! Config files, scenario library, CSV output and the command line.

pub mod cli;
pub mod config;
pub mod csv;
pub mod scenarios;
pub mod studies;
pub mod verify;
