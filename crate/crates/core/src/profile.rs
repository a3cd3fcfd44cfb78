//! Per-year processing profiles.
//!
//! Registry formats drifted over the decades, so everything tunable lives in
//! a TOML profile: merge kernel, column count, classifier thresholds, the
//! record grammar, and backend selection for OCR and geocoding. A minimal
//! profile is just `year` and `columns`; everything else has defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geocode::{
    CachingGeocoder, FileGazetteerGeocoder, Gazetteer, GeoBounds, Geocoder, HttpGeocoder,
};
use crate::ocr::{MockOcr, OcrBackend, SubprocessOcr};
use crate::raster::{MergeConfig, StructuringKernel};
use crate::records::RecordGrammar;

pub const PROFILE_ENV: &str = "REGMINE_PROFILE";
pub const GAZETTEER_ENV: &str = "REGMINE_GAZETTEER";

fn d_sigma() -> f64 {
    2.0
}
fn d_center_tol() -> f64 {
    0.05
}
fn d_min_rows() -> u32 {
    2
}
fn d_min_ratio() -> f64 {
    0.8
}
fn d_min_conf() -> f64 {
    0.75
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profile {
    pub year: u16,
    /// Expected column count for the layout clusterer.
    pub columns: usize,
    #[serde(default = "d_sigma")]
    pub sigma_threshold: f64,
    #[serde(default = "d_center_tol")]
    pub center_tol: f64,
    /// Indentation depth for record splitting; when absent, 5% of each
    /// block's width is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indent_px: Option<u32>,
    #[serde(default = "d_min_rows")]
    pub min_rows: u32,
    /// Drop merged blobs smaller than this many pixels before layout; keeps
    /// scanner speckle out of the column model. 0 disables the filter.
    #[serde(default)]
    pub min_blob_area: u32,
    #[serde(default = "d_min_ratio")]
    pub min_ratio: f64,
    #[serde(default = "d_min_conf")]
    pub min_conf: f64,
    #[serde(default)]
    pub merge: MergeSettings,
    #[serde(default)]
    pub grammar: GrammarRef,
    #[serde(default)]
    pub ocr: OcrSettings,
    #[serde(default)]
    pub geocoder: GeocoderSettings,
    /// Directory the profile was loaded from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeSettings {
    pub threshold: u8,
    pub kernel_width: u32,
    pub kernel_height: u32,
    pub close_iterations: u32,
    pub open_iterations: u32,
    /// Drop thresholded components of at most this many pixels before
    /// closing (scanner-salt cleanup); 0, the default, disables it.
    #[serde(default)]
    pub despeckle_area: usize,
}

impl Default for MergeSettings {
    fn default() -> Self {
        let c = MergeConfig::default();
        MergeSettings {
            threshold: c.threshold,
            kernel_width: c.kernel.width(),
            kernel_height: c.kernel.height(),
            close_iterations: c.close_iterations,
            open_iterations: c.open_iterations,
            despeckle_area: c.despeckle_area,
        }
    }
}

impl MergeSettings {
    pub fn to_config(&self) -> Result<MergeConfig> {
        let config = MergeConfig {
            threshold: self.threshold,
            kernel: StructuringKernel::new(self.kernel_width, self.kernel_height)?,
            close_iterations: self.close_iterations,
            open_iterations: self.open_iterations,
            despeckle_area: self.despeckle_area,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Grammar source: inline patterns, a separate TOML file, or the default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GrammarRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_pattern: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcrSettings {
    /// `mock` or `subprocess`.
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<PathBuf>,
    /// Extra engine arguments, e.g. `["--psm", "6"]` for tesseract to force
    /// single-block segmentation (layout is already done by this point).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
}

impl Default for OcrSettings {
    fn default() -> Self {
        OcrSettings {
            backend: "mock".into(),
            engine: None,
            args: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeocoderSettings {
    /// `file` or `http`.
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gazetteer: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "d_timeout")]
    pub timeout_secs: u64,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "d_score_scale")]
    pub score_scale: f64,
    /// Optional `[min_lat, max_lat, min_lon, max_lon]` sanity box for
    /// gazetteer rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
}

fn d_timeout() -> u64 {
    10
}
fn d_score_scale() -> f64 {
    100.0
}

impl Default for GeocoderSettings {
    fn default() -> Self {
        GeocoderSettings {
            backend: "file".into(),
            gazetteer: None,
            endpoint: None,
            timeout_secs: d_timeout(),
            api_key_env: None,
            score_scale: d_score_scale(),
            bounds: None,
        }
    }
}

impl Profile {
    /// A usable profile with every knob at its default.
    pub fn defaults(year: u16, columns: usize) -> Self {
        Profile {
            year,
            columns,
            sigma_threshold: d_sigma(),
            center_tol: d_center_tol(),
            indent_px: None,
            min_rows: d_min_rows(),
            min_blob_area: 0,
            min_ratio: d_min_ratio(),
            min_conf: d_min_conf(),
            merge: MergeSettings::default(),
            grammar: GrammarRef::default(),
            ocr: OcrSettings::default(),
            geocoder: GeocoderSettings::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut profile: Profile = toml::from_str(&text)
            .map_err(|e| Error::BadProfile(format!("{}: {e}", path.display())))?;
        profile.base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadProfile(msg));
        if self.columns == 0 {
            return bad("columns must be at least 1".into());
        }
        if !(self.sigma_threshold > 0.0) {
            return bad(format!("sigma_threshold must be positive, got {}", self.sigma_threshold));
        }
        if !(0.0..=0.5).contains(&self.center_tol) {
            return bad(format!("center_tol must be in [0, 0.5], got {}", self.center_tol));
        }
        if self.min_rows == 0 {
            return bad("min_rows must be at least 1".into());
        }
        for (name, v) in [("min_ratio", self.min_ratio), ("min_conf", self.min_conf)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        self.merge.to_config()?;
        self.build_grammar()?;
        match self.ocr.backend.as_str() {
            "mock" => {}
            "subprocess" => {
                if self.ocr.engine.is_none() {
                    return bad("ocr.backend = \"subprocess\" requires ocr.engine".into());
                }
            }
            other => return bad(format!("unknown ocr.backend {other:?}")),
        }
        match self.geocoder.backend.as_str() {
            "file" => {}
            "http" => {
                if self.geocoder.endpoint.is_none() {
                    return bad("geocoder.backend = \"http\" requires geocoder.endpoint".into());
                }
            }
            other => return bad(format!("unknown geocoder.backend {other:?}")),
        }
        if let Some([min_lat, max_lat, min_lon, max_lon]) = self.geocoder.bounds {
            if min_lat >= max_lat || min_lon >= max_lon {
                return bad("geocoder.bounds must be [min_lat, max_lat, min_lon, max_lon]".into());
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn build_grammar(&self) -> Result<RecordGrammar> {
        if let Some(path) = &self.grammar.path {
            let text = std::fs::read_to_string(self.resolve(path))?;
            #[derive(Deserialize)]
            struct File {
                record_pattern: String,
                heading_pattern: String,
            }
            let f: File = toml::from_str(&text)
                .map_err(|e| Error::BadGrammar(format!("{}: {e}", path.display())))?;
            return RecordGrammar::new(&f.record_pattern, &f.heading_pattern);
        }
        let default = RecordGrammar::default();
        RecordGrammar::new(
            self.grammar
                .record_pattern
                .as_deref()
                .unwrap_or(&default.record_pattern),
            self.grammar
                .heading_pattern
                .as_deref()
                .unwrap_or(&default.heading_pattern),
        )
    }

    pub fn build_ocr(&self) -> Result<Box<dyn OcrBackend>> {
        match self.ocr.backend.as_str() {
            "mock" => Ok(Box::new(MockOcr)),
            "subprocess" => {
                let engine = self.ocr.engine.as_ref().ok_or_else(|| {
                    Error::BadProfile("ocr.backend = \"subprocess\" requires ocr.engine".into())
                })?;
                Ok(Box::new(SubprocessOcr::new(
                    self.resolve(engine),
                    self.ocr.args.clone(),
                )))
            }
            other => Err(Error::BadProfile(format!("unknown ocr.backend {other:?}"))),
        }
    }

    pub fn geo_bounds(&self) -> Option<GeoBounds> {
        self.geocoder.bounds.map(|[min_lat, max_lat, min_lon, max_lon]| GeoBounds {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
        })
    }

    /// Pick the gazetteer path: CLI flag, then environment, then profile.
    pub fn resolve_gazetteer(&self, cli: Option<&Path>, env: Option<&str>) -> Option<PathBuf> {
        cli.map(Path::to_path_buf)
            .or_else(|| env.map(PathBuf::from))
            .or_else(|| self.geocoder.gazetteer.as_ref().map(|p| self.resolve(p)))
    }

    pub fn load_gazetteer(&self, path: &Path) -> Result<Gazetteer> {
        Gazetteer::load(path, self.geo_bounds().as_ref())
    }

    /// Build the configured geocoder, cache-wrapped.
    pub fn build_geocoder(&self, gazetteer: &Gazetteer) -> Result<Box<dyn Geocoder>> {
        match self.geocoder.backend.as_str() {
            "file" => Ok(Box::new(CachingGeocoder::new(FileGazetteerGeocoder::new(
                gazetteer.clone(),
            )))),
            "http" => {
                let endpoint = self.geocoder.endpoint.as_ref().ok_or_else(|| {
                    Error::BadProfile("geocoder.backend = \"http\" requires geocoder.endpoint".into())
                })?;
                let api_key = match &self.geocoder.api_key_env {
                    Some(var) => std::env::var(var).ok(),
                    None => None,
                };
                Ok(Box::new(CachingGeocoder::new(HttpGeocoder::new(
                    endpoint.clone(),
                    Duration::from_secs(self.geocoder.timeout_secs),
                    api_key,
                    self.geocoder.score_scale,
                ))))
            }
            other => Err(Error::BadProfile(format!(
                "unknown geocoder.backend {other:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_profile_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("1953.toml");
        std::fs::write(&path, "year = 1953\ncolumns = 2\n").unwrap();
        let p = Profile::load(&path).unwrap();
        assert_eq!(p.year, 1953);
        assert_eq!(p.columns, 2);
        assert_eq!(p.sigma_threshold, 2.0);
        assert_eq!(p.min_conf, 0.75);
        assert_eq!(p.merge.kernel_height, 9);
        assert_eq!(p.ocr.backend, "mock");
        assert_eq!(p.geocoder.backend, "file");
        assert_eq!(p.base_dir, dir.path());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let p = Profile::defaults(1967, 3);
        let text = toml::to_string(&p).unwrap();
        let back: Profile = toml::from_str(&text).unwrap();
        assert_eq!(back.year, 1967);
        assert_eq!(back.columns, 3);
        assert_eq!(back.merge.kernel_width, p.merge.kernel_width);
        back.validate().unwrap();
    }

    #[test]
    fn invalid_settings_are_rejected_with_context() {
        let cases = [
            "year = 1953\ncolumns = 0\n",
            "year = 1953\ncolumns = 2\nmin_conf = 1.5\n",
            "year = 1953\ncolumns = 2\nsigma_threshold = 0.0\n",
            "year = 1953\ncolumns = 2\n[ocr]\nbackend = \"carrier-pigeon\"\n",
            "year = 1953\ncolumns = 2\n[ocr]\nbackend = \"subprocess\"\n",
            "year = 1953\ncolumns = 2\n[geocoder]\nbackend = \"http\"\n",
            "year = 1953\ncolumns = 2\n[merge]\nthreshold = 128\nkernel_width = 4\nkernel_height = 9\nclose_iterations = 3\nopen_iterations = 1\n",
        ];
        for text in cases {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.toml");
            std::fs::write(&path, text).unwrap();
            assert!(Profile::load(&path).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn inline_grammar_overrides_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(
            &path,
            "year = 1953\ncolumns = 2\n[grammar]\nrecord_pattern = '^(?P<name>[A-Z ]+) / (?P<address>.+)$'\n",
        )
        .unwrap();
        let p = Profile::load(&path).unwrap();
        let g = p.build_grammar().unwrap();
        assert_eq!(g.record_pattern, "^(?P<name>[A-Z ]+) / (?P<address>.+)$");
        // heading pattern stays at the default
        assert!(g.heading_pattern.contains("city"));
    }

    #[test]
    fn grammar_file_loads_relative_to_profile() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("grammar.toml"),
            "record_pattern = '^(?P<name>.+) @ (?P<address>.+)$'\nheading_pattern = '^(?P<city>[A-Z]+)$'\n",
        )
        .unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(
            &path,
            "year = 1953\ncolumns = 2\n[grammar]\npath = \"grammar.toml\"\n",
        )
        .unwrap();
        let p = Profile::load(&path).unwrap();
        let g = p.build_grammar().unwrap();
        assert!(g.record_pattern.contains('@'));
    }

    #[test]
    fn gazetteer_resolution_prefers_flag_then_env_then_profile() {
        let mut p = Profile::defaults(1953, 2);
        p.base_dir = PathBuf::from("/profiles");
        p.geocoder.gazetteer = Some(PathBuf::from("gaz.txt"));
        assert_eq!(
            p.resolve_gazetteer(Some(Path::new("/cli/g.txt")), Some("/env/g.txt")),
            Some(PathBuf::from("/cli/g.txt"))
        );
        assert_eq!(
            p.resolve_gazetteer(None, Some("/env/g.txt")),
            Some(PathBuf::from("/env/g.txt"))
        );
        assert_eq!(
            p.resolve_gazetteer(None, None),
            Some(PathBuf::from("/profiles/gaz.txt"))
        );
        p.geocoder.gazetteer = None;
        assert_eq!(p.resolve_gazetteer(None, None), None);
    }

    #[test]
    fn backend_builders_match_settings() {
        let p = Profile::defaults(1953, 2);
        assert_eq!(p.build_ocr().unwrap().info().name, "mock");

        let mut sub = Profile::defaults(1953, 2);
        sub.ocr.backend = "subprocess".into();
        sub.ocr.engine = Some(PathBuf::from("/usr/bin/true"));
        assert_eq!(sub.build_ocr().unwrap().info().name, "subprocess");
    }
}
