//! File formats, command-line interface and benchmark harness around
//! [`fbis_core`].

pub mod bench;
pub mod cli;
pub mod io;
pub mod report;
