//! Mining structured, geocoded records from scanned printed registries.
//!
//! A scanned registry page goes through the following stages:
//!
//! 1. [`raster`] — threshold + invert the grayscale scan, then morphological
//!    close/open passes merge characters and lines into per-record blobs.
//! 2. [`contours`] — trace blob outlines, and split column-sized blobs at
//!    first-line indentations.
//! 3. [`layout`] — cluster block bounds into page columns with k-means,
//!    reject stray blocks, pull out page-centered headings.
//! 4. [`ocr`] — recognize each block (external engine or the built-in
//!    template matcher).
//! 5. [`records`] — parse block text into records and city headings, then
//!    propagate headings down the reading order (carrying across pages).
//! 6. [`geocode`] — fuzzy-match cities, look up street coordinates, score
//!    confidence.
//! 7. [`pipeline`] — the composed per-page/per-registry drivers plus record
//!    count estimation, accuracy tables, and density grids.
//!
//! [`synth`] renders seeded synthetic registry pages with ground truth for
//! end-to-end testing, and [`io`] handles the on-disk image formats.

pub mod contours;
pub mod error;
pub mod font;
pub mod geocode;
pub mod io;
pub mod layout;
pub mod ocr;
pub mod pipeline;
pub mod profile;
pub mod raster;
pub mod records;
pub mod synth;

pub use error::{Error, Result};
