//! Files, batch runs, synthetic fixtures and the local review service built
//! on [`lumisphere_core`].

pub mod crop;
mod error;
pub mod fixture;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod schema;
pub mod server;
pub mod workspace;

pub use error::{Error, Result};
pub use lumisphere_core as core;
