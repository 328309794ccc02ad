//! File formats, corpus importers, the annotation service and the command
//! line around `metaphor-forge-core`.

pub mod annotation;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod import;
pub mod ratings_io;
pub mod resources;
