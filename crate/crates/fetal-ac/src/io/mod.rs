//! File formats: PGM/PPM rasters, sidecar metadata, dataset manifests, and
//! the binary weight format.

pub mod pgm;
