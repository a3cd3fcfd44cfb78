//! Python bindings over the registry mining pipeline: page rasters, the
//! blob/contour layout primitives, fuzzy city matching, the record parser,
//! the corpus synthesizer, and the end-to-end registry runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use regmine_core::contours;
use regmine_core::error::Error;
use regmine_core::geocode::{self, Gazetteer};
use regmine_core::io;
use regmine_core::pipeline::{process_registry_dir, PipelineContext};
use regmine_core::profile::{Profile, GAZETTEER_ENV};
use regmine_core::raster::{self, BitRaster, GrayRaster, MergeConfig, StructuringKernel};
use regmine_core::records::{self, BlockParse, RecordGrammar};
use regmine_core::synth::{self, RecordSeparator, SynthSpec};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e @ (Error::OcrUnavailable(_) | Error::Geocode(_)) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn check_bounds(x: u32, y: u32, width: u32, height: u32) -> PyResult<()> {
    if x >= width || y >= height {
        return Err(PyValueError::new_err(format!(
            "pixel ({x},{y}) outside {width}x{height} image"
        )));
    }
    Ok(())
}

/// Grayscale page image; 0 is ink, 255 is paper.
#[pyclass(name = "GrayRaster", skip_from_py_object)]
#[derive(Clone)]
struct PyGray(GrayRaster);

#[pymethods]
impl PyGray {
    #[new]
    #[pyo3(signature = (width, height, value = 255))]
    fn new(width: u32, height: u32, value: u8) -> Self {
        PyGray(GrayRaster::filled(width, height, value))
    }

    /// Read a .pgm, .pbm, or .png page image.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load_gray(&path).map(PyGray).map_err(to_py)
    }

    fn save_pgm(&self, path: PathBuf) -> PyResult<()> {
        io::write_gray_pgm(&self.0, &path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn get(&self, x: u32, y: u32) -> PyResult<u8> {
        check_bounds(x, y, self.0.width(), self.0.height())?;
        Ok(self.0.get(x, y))
    }

    fn set(&mut self, x: u32, y: u32, value: u8) -> PyResult<()> {
        check_bounds(x, y, self.0.width(), self.0.height())?;
        self.0.set(x, y, value);
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!("GrayRaster({}x{})", self.0.width(), self.0.height())
    }
}

/// Binary foreground mask produced by text-blob merging.
#[pyclass(name = "BitRaster", skip_from_py_object)]
#[derive(Clone)]
struct PyBits(BitRaster);

#[pymethods]
impl PyBits {
    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn get(&self, x: u32, y: u32) -> PyResult<u8> {
        check_bounds(x, y, self.0.width(), self.0.height())?;
        Ok(self.0.get(x, y))
    }

    fn count_ones(&self) -> usize {
        self.0.count_ones()
    }

    fn __repr__(&self) -> String {
        format!(
            "BitRaster({}x{}, {} set)",
            self.0.width(),
            self.0.height(),
            self.0.count_ones()
        )
    }
}

/// City/street rows with coordinates, for matching and geocoding.
#[pyclass(name = "Gazetteer", skip_from_py_object)]
#[derive(Clone)]
struct PyGazetteer(Gazetteer);

#[pymethods]
impl PyGazetteer {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Gazetteer::load(&path, None).map(PyGazetteer).map_err(to_py)
    }

    /// Parse `CITY;STREET;LAT;LON` lines (empty street marks a centroid row).
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Gazetteer::from_reader(text.as_bytes(), None)
            .map(PyGazetteer)
            .map_err(to_py)
    }

    #[getter]
    fn cities(&self) -> Vec<String> {
        self.0.cities().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Gazetteer({} cities)", self.0.cities().len())
    }
}

/// Edit distance between two strings, counted in characters.
#[pyfunction]
fn levenshtein(a: &str, b: &str) -> usize {
    geocode::levenshtein(a, b)
}

/// Snap an OCR'd city name to the closest gazetteer city, or None when the
/// best match's similarity ratio falls below `min_ratio`.
#[pyfunction]
#[pyo3(signature = (raw, gazetteer, min_ratio = 0.8))]
fn match_city(raw: &str, gazetteer: &PyGazetteer, min_ratio: f64) -> Option<String> {
    geocode::match_city(raw, &gazetteer.0, min_ratio)
}

/// Threshold a page and close/open it so each printed block becomes one blob.
#[pyfunction(name = "merge_text_blobs")]
#[pyo3(signature = (img, threshold = 128, kernel = (3, 9), close_iterations = 3, open_iterations = 1, despeckle_area = 0))]
fn merge_text_blobs_py(
    img: &PyGray,
    threshold: u8,
    kernel: (u32, u32),
    close_iterations: u32,
    open_iterations: u32,
    despeckle_area: usize,
) -> PyResult<PyBits> {
    let cfg = MergeConfig {
        threshold,
        kernel: StructuringKernel::new(kernel.0, kernel.1).map_err(to_py)?,
        close_iterations,
        open_iterations,
        despeckle_area,
    };
    raster::merge_text_blobs(&img.0, &cfg).map(PyBits).map_err(to_py)
}

/// Connected foreground components as (left, top, right, bottom, area)
/// tuples in reading order; right and bottom are exclusive.
#[pyfunction(name = "extract_contours")]
fn extract_contours_py(bits: &PyBits) -> Vec<(u32, u32, u32, u32, usize)> {
    contours::extract_contours(&bits.0)
        .into_iter()
        .map(|c| (c.bbox.left, c.bbox.top, c.bbox.right, c.bbox.bottom, c.area))
        .collect()
}

/// Parse one block of OCR text. Returns a dict whose "kind" is "record",
/// "heading", or "noise", with the matching fields alongside.
#[pyfunction(name = "parse_block")]
#[pyo3(signature = (text, record_pattern = None, heading_pattern = None))]
fn parse_block_py(
    py: Python<'_>,
    text: &str,
    record_pattern: Option<&str>,
    heading_pattern: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let grammar = match (record_pattern, heading_pattern) {
        (None, None) => RecordGrammar::default(),
        (r, h) => {
            let default = RecordGrammar::default();
            RecordGrammar::new(
                r.unwrap_or(&default.record_pattern),
                h.unwrap_or(&default.heading_pattern),
            )
            .map_err(to_py)?
        }
    };
    let d = PyDict::new(py);
    match records::parse_block(text, &grammar) {
        BlockParse::Record(f) => {
            d.set_item("kind", "record")?;
            d.set_item("name", f.name)?;
            d.set_item("address", f.address)?;
            d.set_item("sector", f.sector)?;
            d.set_item("employees", f.employees)?;
        }
        BlockParse::Heading(city) => {
            d.set_item("kind", "heading")?;
            d.set_item("city", city)?;
        }
        BlockParse::Noise(text) => {
            d.set_item("kind", "noise")?;
            d.set_item("text", text)?;
        }
    }
    Ok(d.into_any().unbind())
}

/// Render a synthetic registry corpus (page images, ground-truth sidecar,
/// gazetteer, matched profile) into `out_dir`; returns the record count.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 7, year = 1950, pages = 3, columns = 2,
    records_per_column = (6, 10), heading_frequency = 0.2,
    centered_headings = false, indent = false, jitter_px = 2,
    salt_pepper = 0.0, glyph_corruption = 0.0))]
#[allow(clippy::too_many_arguments)]
fn generate_corpus(
    out_dir: PathBuf,
    seed: u64,
    year: u16,
    pages: usize,
    columns: usize,
    records_per_column: (usize, usize),
    heading_frequency: f64,
    centered_headings: bool,
    indent: bool,
    jitter_px: u32,
    salt_pepper: f64,
    glyph_corruption: f64,
) -> PyResult<usize> {
    let spec = SynthSpec {
        seed,
        year,
        pages,
        columns,
        records_per_column,
        heading_frequency,
        centered_headings,
        separator: if indent {
            RecordSeparator::Indent
        } else {
            RecordSeparator::BlankLine
        },
        jitter_px,
        salt_pepper,
        glyph_corruption,
        ..SynthSpec::default()
    };
    synth::write_corpus(&spec, &out_dir)
        .map(|corpus| corpus.truth.len())
        .map_err(to_py)
}

/// Run the full pipeline over a directory of page images. Returns a dict
/// with year, page/identified/geocoded tallies, and one dict per record.
#[pyfunction]
#[pyo3(signature = (input_dir, profile, gazetteer = None))]
fn process_registry(
    py: Python<'_>,
    input_dir: PathBuf,
    profile: PathBuf,
    gazetteer: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let profile = Profile::load(&profile).map_err(to_py)?;
    let gaz_env = std::env::var(GAZETTEER_ENV).ok();
    let gaz_path = profile
        .resolve_gazetteer(gazetteer.as_deref(), gaz_env.as_deref())
        .ok_or_else(|| {
            PyValueError::new_err("no gazetteer: pass gazetteer= or name one in the profile")
        })?;
    let ctx = PipelineContext::new(profile, &gaz_path).map_err(to_py)?;
    let result = process_registry_dir(&ctx, &input_dir).map_err(to_py)?;

    let records = PyList::empty(py);
    for r in &result.records {
        let rd = PyDict::new(py);
        rd.set_item("page", r.record.page)?;
        rd.set_item("name", &r.record.name)?;
        rd.set_item("address", &r.record.address)?;
        rd.set_item("sector", &r.record.sector)?;
        rd.set_item("employees", r.record.employees)?;
        rd.set_item("city_raw", &r.record.city_raw)?;
        rd.set_item("city", &r.city_matched)?;
        rd.set_item("latitude", r.geo.map(|g| g.latitude))?;
        rd.set_item("longitude", r.geo.map(|g| g.longitude))?;
        rd.set_item("confidence", r.geo.map(|g| g.confidence))?;
        records.append(rd)?;
    }
    let d = PyDict::new(py);
    d.set_item("year", result.year)?;
    d.set_item("pages", result.pages.len())?;
    d.set_item("identified", result.identified)?;
    d.set_item("geocoded_confident", result.geocoded_confident)?;
    d.set_item("records", records)?;
    Ok(d.into_any().unbind())
}

#[pymodule]
fn regmine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGray>()?;
    m.add_class::<PyBits>()?;
    m.add_class::<PyGazetteer>()?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(match_city, m)?)?;
    m.add_function(wrap_pyfunction!(merge_text_blobs_py, m)?)?;
    m.add_function(wrap_pyfunction!(extract_contours_py, m)?)?;
    m.add_function(wrap_pyfunction!(parse_block_py, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(process_registry, m)?)?;
    Ok(())
}
