//! File formats: scenario JSON in, CSV tables and SVG plots out.

pub mod manifest;
pub mod scenario;
pub mod svg;
pub mod tables;

pub use manifest::RunManifest;
pub use scenario::parse_scenario;
pub use svg::{render_svg, PlotKind, PlotSpec, Series};
pub use tables::{read_events, read_stream, Table};

use std::path::Path;

use crate::error::{Error, Result};

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
