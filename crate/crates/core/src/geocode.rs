//! City normalization and address geocoding.
//!
//! OCR'd city names are snapped to a state gazetteer by Levenshtein ratio;
//! addresses then resolve to coordinates through a pluggable [`Geocoder`].
//! The built-in file backend answers from the gazetteer itself: street-level
//! hits score 0.9, city-centroid fallbacks 0.5 — anchored so street hits
//! clear a 0.75 confidence cutoff and centroids don't.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::records::ParsedRecord;

/// Minimum edit operations (insert/delete/substitute) turning `a` into `b`.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn fold(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_uppercase()
}

/// Similarity in [0, 1]: `1 − d/max(|a|,|b|)` over case-folded,
/// whitespace-normalized inputs. Two empty strings rate 1.
pub fn match_ratio(a: &str, b: &str) -> f64 {
    let (a, b) = (fold(a), fold(b));
    let denom = a.chars().count().max(b.chars().count());
    if denom == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / denom as f64
}

/// Best gazetteer city for a raw OCR string, if it clears `min_ratio`.
/// Ties break lexicographically; an empty input never matches.
pub fn match_city(raw: &str, gaz: &Gazetteer, min_ratio: f64) -> Option<String> {
    if fold(raw).is_empty() {
        return None;
    }
    let mut best: Option<(f64, &str)> = None;
    for city in gaz.cities() {
        let r = match_ratio(raw, city);
        let better = match best {
            None => true,
            // cities are sorted, so strict improvement keeps the
            // lexicographically first among ties
            Some((br, _)) => r > br,
        };
        if better {
            best = Some((r, city));
        }
    }
    best.filter(|&(r, _)| r >= min_ratio).map(|(_, c)| c.to_string())
}

// ---------------------------------------------------------------------------
// Gazetteer
// ---------------------------------------------------------------------------

/// Inclusive latitude/longitude box used to sanity-check gazetteer rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBounds {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl GeoBounds {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min_lat && lat <= self.max_lat && lon >= self.min_lon && lon <= self.max_lon
    }
}

/// Canonical city names plus known street coordinates.
///
/// File format, one row per line, `;`-separated:
/// `CITY;STREET;LAT;LON` — a row with an empty STREET field gives the city's
/// centroid. `#` lines and blank lines are ignored.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    cities: Vec<String>,
    streets: HashMap<(String, String), (f64, f64)>,
    centroids: HashMap<String, (f64, f64)>,
}

impl Gazetteer {
    pub fn load(path: impl AsRef<Path>, bounds: Option<&GeoBounds>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_reader(std::io::BufReader::new(file), bounds)
    }

    pub fn from_reader(reader: impl BufRead, bounds: Option<&GeoBounds>) -> Result<Self> {
        let mut gaz = Gazetteer::default();
        let mut cities: Vec<String> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(';').collect();
            let bad = |what: &str| {
                Error::BadGazetteer(format!("line {}: {what}: {line}", lineno + 1))
            };
            if fields.len() != 4 {
                return Err(bad("expected CITY;STREET;LAT;LON"));
            }
            let city = fold(fields[0]);
            if city.is_empty() {
                return Err(bad("empty city"));
            }
            let street = fold(fields[1]);
            let lat: f64 = fields[2].trim().parse().map_err(|_| bad("bad latitude"))?;
            let lon: f64 = fields[3].trim().parse().map_err(|_| bad("bad longitude"))?;
            if !lat.is_finite() || !lon.is_finite() {
                return Err(bad("non-finite coordinate"));
            }
            if let Some(b) = bounds {
                if !b.contains(lat, lon) {
                    return Err(bad("coordinate outside configured bounds"));
                }
            }
            cities.push(city.clone());
            if street.is_empty() {
                if gaz.centroids.insert(city, (lat, lon)).is_some() {
                    return Err(bad("duplicate centroid row"));
                }
            } else if gaz.streets.insert((city, street), (lat, lon)).is_some() {
                return Err(bad("duplicate street row"));
            }
        }
        cities.sort();
        cities.dedup();
        gaz.cities = cities;
        Ok(gaz)
    }

    /// Canonical city names, sorted.
    pub fn cities(&self) -> &[String] {
        &self.cities
    }

    pub fn street(&self, city: &str, street: &str) -> Option<(f64, f64)> {
        self.streets
            .get(&(city.to_string(), street.to_string()))
            .copied()
    }

    pub fn centroid(&self, city: &str) -> Option<(f64, f64)> {
        self.centroids.get(city).copied()
    }
}

// ---------------------------------------------------------------------------
// Geocoders
// ---------------------------------------------------------------------------

/// Coordinates plus the backend's confidence that they're right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoResult {
    pub latitude: f64,
    pub longitude: f64,
    pub confidence: f64,
}

/// A record with its snapped city and (when resolvable) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRecord {
    pub record: ParsedRecord,
    pub city_matched: Option<String>,
    pub geo: Option<GeoResult>,
}

pub trait Geocoder: Send + Sync {
    /// `Ok(None)` is a legitimate miss; `Err` means the backend itself failed.
    fn geocode(&self, city: &str, street: &str) -> Result<Option<GeoResult>>;
    /// How many lookups may be in flight at once.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// Uppercase, strip punctuation, collapse whitespace, and drop leading
/// house-number tokens: `"12 Pine St." → "PINE ST"`.
pub fn normalize_street(raw: &str) -> String {
    let cleaned: String = raw
        .to_uppercase()
        .chars()
        .filter_map(|c| match c {
            // periods join abbreviations: "P.O." → "PO", "ST." → "ST"
            '.' => None,
            c if c.is_alphanumeric() || c == ' ' => Some(c),
            _ => Some(' '),
        })
        .collect();
    let mut tokens: Vec<&str> = cleaned.split_whitespace().collect();
    while let Some(first) = tokens.first() {
        if first.chars().all(|c| c.is_ascii_digit()) {
            tokens.remove(0);
        } else {
            break;
        }
    }
    tokens.join(" ")
}

/// Answers lookups straight from a [`Gazetteer`].
pub struct FileGazetteerGeocoder {
    gazetteer: Gazetteer,
}

const STREET_CONFIDENCE: f64 = 0.9;
const CENTROID_CONFIDENCE: f64 = 0.5;

impl FileGazetteerGeocoder {
    pub fn new(gazetteer: Gazetteer) -> Self {
        FileGazetteerGeocoder { gazetteer }
    }
}

impl Geocoder for FileGazetteerGeocoder {
    fn geocode(&self, city: &str, street: &str) -> Result<Option<GeoResult>> {
        let street = normalize_street(street);
        // a post office box names no physical street to resolve
        if street.is_empty() || street.starts_with("PO BOX") || street.starts_with("P O BOX") {
            return Ok(None);
        }
        if let Some((lat, lon)) = self.gazetteer.street(city, &street) {
            return Ok(Some(GeoResult {
                latitude: lat,
                longitude: lon,
                confidence: STREET_CONFIDENCE,
            }));
        }
        if let Some((lat, lon)) = self.gazetteer.centroid(city) {
            return Ok(Some(GeoResult {
                latitude: lat,
                longitude: lon,
                confidence: CENTROID_CONFIDENCE,
            }));
        }
        Ok(None)
    }

    fn max_in_flight(&self) -> usize {
        // in-memory lookups: no reason to throttle
        usize::MAX
    }
}

/// Remote geocoding over HTTP.
///
/// Sends `GET {endpoint}?city=..&street=..[&key=..]` and expects a JSON body
/// like `{"found": true, "lat": 41.8, "lon": -71.4, "score": 95}`; `score`
/// is divided by `score_scale` and clamped to [0, 1]. A 404 (or
/// `"found": false`) is a miss; transport failures and 5xx are backend errors.
pub struct HttpGeocoder {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    score_scale: f64,
}

impl HttpGeocoder {
    pub fn new(
        endpoint: impl Into<String>,
        timeout: Duration,
        api_key: Option<String>,
        score_scale: f64,
    ) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        HttpGeocoder {
            agent: config.into(),
            endpoint: endpoint.into(),
            api_key,
            score_scale,
        }
    }
}

impl Geocoder for HttpGeocoder {
    fn geocode(&self, city: &str, street: &str) -> Result<Option<GeoResult>> {
        let mut req = self
            .agent
            .get(&self.endpoint)
            .query("city", city)
            .query("street", street);
        if let Some(key) = &self.api_key {
            req = req.query("key", key);
        }
        let mut res = match req.call() {
            Ok(res) => res,
            Err(ureq::Error::StatusCode(404)) => return Ok(None),
            Err(e) => return Err(Error::Geocode(format!("{}: {e}", self.endpoint))),
        };
        let body: serde_json::Value = res
            .body_mut()
            .read_json()
            .map_err(|e| Error::Geocode(format!("bad response body: {e}")))?;
        if body.get("found").and_then(|v| v.as_bool()) == Some(false) {
            return Ok(None);
        }
        let num = |key: &str| -> Result<f64> {
            body.get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Geocode(format!("response missing numeric `{key}`")))
        };
        let confidence = (num("score")? / self.score_scale).clamp(0.0, 1.0);
        Ok(Some(GeoResult {
            latitude: num("lat")?,
            longitude: num("lon")?,
            confidence,
        }))
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}

/// Memoizes another geocoder per (city, street) for the life of a run.
pub struct CachingGeocoder<G: Geocoder> {
    inner: G,
    cache: Mutex<HashMap<(String, String), Option<GeoResult>>>,
}

impl<G: Geocoder> CachingGeocoder<G> {
    pub fn new(inner: G) -> Self {
        CachingGeocoder {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<G: Geocoder> Geocoder for CachingGeocoder<G> {
    fn geocode(&self, city: &str, street: &str) -> Result<Option<GeoResult>> {
        let key = (city.to_string(), street.to_string());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let fresh = self.inner.geocode(city, street)?;
        self.cache.lock().unwrap().insert(key, fresh);
        Ok(fresh)
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }
}

/// Records whose geocode confidence reaches `min_conf`, order preserved.
pub fn filter_confident(records: &[GeoRecord], min_conf: f64) -> Vec<GeoRecord> {
    records
        .iter()
        .filter(|r| r.geo.is_some_and(|g| g.confidence >= min_conf))
        .cloned()
        .collect()
}
