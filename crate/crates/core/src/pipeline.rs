//! End-to-end orchestration: page image → merged blobs → contours → columns
//! → OCR → parsed records → geocoded rows, plus the tabular outputs.
//!
//! Pages of one registry are processed in order because heading context
//! carries across page breaks. Different registries (years) are independent
//! work units.

use std::collections::BTreeSet;
use std::path::Path;

use crate::contours::{extract_contours, split_at_indentations, BBox};
use crate::error::{Error, Result};
use crate::geocode::{filter_confident, match_city, Gazetteer, GeoBounds, GeoRecord, Geocoder};
use crate::layout::{classify_blocks, kmeans_fit, BoundsPoint};
use crate::ocr::{recognize, OcrBackend};
use crate::profile::Profile;
use crate::raster::{merge_text_blobs, GrayRaster, MergeConfig};
use crate::records::{parse_block, propagate_headings, BlockParse, Heading, RecordGrammar, StreamBlock};

const KMEANS_MAX_ITER: u32 = 100;
const KMEANS_TOL: f64 = 1e-9;

/// Everything needed to process pages: validated profile plus built backends.
pub struct PipelineContext {
    pub profile: Profile,
    pub grammar: RecordGrammar,
    pub merge: MergeConfig,
    pub ocr: Box<dyn OcrBackend>,
    pub gazetteer: Gazetteer,
    pub geocoder: Box<dyn Geocoder>,
}

impl PipelineContext {
    /// Build from a profile, loading the gazetteer from `gazetteer_path`.
    pub fn new(profile: Profile, gazetteer_path: &Path) -> Result<Self> {
        profile.validate()?;
        let gazetteer = profile.load_gazetteer(gazetteer_path)?;
        let ocr = profile.build_ocr()?;
        let geocoder = profile.build_geocoder(&gazetteer)?;
        Self::with_backends(profile, gazetteer, ocr, geocoder)
    }

    /// Assemble from already-built parts (tests, embedding).
    pub fn with_backends(
        profile: Profile,
        gazetteer: Gazetteer,
        ocr: Box<dyn OcrBackend>,
        geocoder: Box<dyn Geocoder>,
    ) -> Result<Self> {
        profile.validate()?;
        let grammar = profile.build_grammar()?;
        let merge = profile.merge.to_config()?;
        Ok(PipelineContext {
            profile,
            grammar,
            merge,
            ocr,
            gazetteer,
            geocoder,
        })
    }
}

/// Per-page block accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PageCounts {
    pub page: u32,
    /// Blocks that parsed as records.
    pub identified: usize,
    /// Identified records whose geocode confidence reached the profile cutoff.
    pub geocoded_confident: usize,
    pub headings: usize,
    pub noise_blocks: usize,
    /// Boxes the column classifier rejected as layout outliers.
    pub rejected_blocks: usize,
    /// Blocks where the OCR backend failed non-fatally (degraded to noise).
    pub ocr_failures: usize,
}

#[derive(Debug, Default)]
pub struct RegistryResult {
    pub year: u16,
    pub records: Vec<GeoRecord>,
    pub pages: Vec<PageCounts>,
    pub identified: usize,
    pub geocoded_confident: usize,
}

/// Run the full pipeline over one page.
///
/// Returns the page's geocoded records (reading order), the heading carry for
/// the next page, and the block accounting. Per-block OCR failures degrade to
/// noise; a missing/broken OCR engine aborts the run.
pub fn process_page(
    ctx: &PipelineContext,
    img: &GrayRaster,
    page: u32,
    carry: Option<Heading>,
) -> Result<(Vec<GeoRecord>, Option<Heading>, PageCounts)> {
    let mut counts = PageCounts {
        page,
        ..PageCounts::default()
    };
    let merged = merge_text_blobs(img, &ctx.merge)?;

    let mut boxes: Vec<BBox> = Vec::new();
    for contour in extract_contours(&merged) {
        if contour.area < ctx.profile.min_blob_area as usize {
            continue;
        }
        let indent = ctx
            .profile
            .indent_px
            .unwrap_or_else(|| (contour.bbox.width() / 20).max(1));
        match split_at_indentations(&contour, &merged, indent, ctx.profile.min_rows) {
            Ok(parts) => boxes.extend(parts),
            // box too narrow for the indentation rule: keep it whole
            Err(Error::IndentTooWide { .. }) => boxes.push(contour.bbox),
            Err(e) => return Err(e),
        }
    }
    if boxes.is_empty() {
        return Ok((Vec::new(), carry, counts));
    }

    let points: Vec<BoundsPoint> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| BoundsPoint::from_bbox(b, i))
        .collect();
    let distinct = points
        .iter()
        .map(|p| (p.left.to_bits(), p.right.to_bits()))
        .collect::<BTreeSet<_>>()
        .len();
    let k = ctx.profile.columns.min(distinct);
    let model = kmeans_fit(&points, k, KMEANS_MAX_ITER, KMEANS_TOL)?;
    let layout = classify_blocks(
        &boxes,
        &model,
        ctx.profile.sigma_threshold,
        img.width(),
        ctx.profile.center_tol,
    );
    counts.rejected_blocks = layout.rejected.len();

    let read = |bbox: &BBox| -> Result<Option<BlockParse>> {
        match recognize(ctx.ocr.as_ref(), img, bbox) {
            Ok(res) => Ok(Some(parse_block(&res.text, &ctx.grammar))),
            Err(e @ Error::OcrUnavailable(_)) => Err(e),
            Err(_) => Ok(None),
        }
    };

    let mut stream: Vec<StreamBlock> = Vec::new();
    for (col, blocks) in layout.column_blocks.iter().enumerate() {
        for bbox in blocks {
            let parse = match read(bbox)? {
                Some(p) => p,
                None => {
                    counts.ocr_failures += 1;
                    BlockParse::Noise(String::new())
                }
            };
            match &parse {
                BlockParse::Heading(_) => counts.headings += 1,
                BlockParse::Noise(_) => counts.noise_blocks += 1,
                BlockParse::Record(_) => {}
            }
            stream.push(StreamBlock::Column {
                col,
                top: bbox.top,
                bbox: *bbox,
                parse,
            });
        }
    }
    for bbox in &layout.centered_blocks {
        match read(bbox)? {
            Some(BlockParse::Heading(city)) => {
                counts.headings += 1;
                stream.push(StreamBlock::Centered {
                    top: bbox.top,
                    heading: Heading {
                        city,
                        page,
                        top: bbox.top,
                    },
                });
            }
            Some(_) => counts.noise_blocks += 1,
            None => {
                counts.ocr_failures += 1;
                counts.noise_blocks += 1;
            }
        }
    }

    let (parsed, carry_out) = propagate_headings(&stream, carry, ctx.profile.year, page);

    let mut records = Vec::with_capacity(parsed.len());
    for rec in parsed {
        let city_matched = rec
            .city_raw
            .as_deref()
            .and_then(|raw| match_city(raw, &ctx.gazetteer, ctx.profile.min_ratio));
        let geo = match &city_matched {
            Some(city) => ctx.geocoder.geocode(city, &rec.address)?,
            None => None,
        };
        records.push(GeoRecord {
            record: rec,
            city_matched,
            geo,
        });
    }
    counts.identified = records.len();
    counts.geocoded_confident = filter_confident(&records, ctx.profile.min_conf).len();
    Ok((records, carry_out, counts))
}

/// Fold [`process_page`] over a page sequence, threading the heading carry.
pub fn process_registry_iter(
    ctx: &PipelineContext,
    pages: impl IntoIterator<Item = Result<GrayRaster>>,
) -> Result<RegistryResult> {
    let mut result = RegistryResult {
        year: ctx.profile.year,
        ..RegistryResult::default()
    };
    let mut carry = None;
    for (i, img) in pages.into_iter().enumerate() {
        let img = img?;
        let (records, carry_out, counts) = process_page(ctx, &img, i as u32 + 1, carry)?;
        carry = carry_out;
        result.identified += counts.identified;
        result.geocoded_confident += counts.geocoded_confident;
        result.pages.push(counts);
        result.records.extend(records);
    }
    Ok(result)
}

/// Process in-memory pages (numbered from 1 in the given order).
pub fn process_registry_images(
    ctx: &PipelineContext,
    pages: Vec<GrayRaster>,
) -> Result<RegistryResult> {
    process_registry_iter(ctx, pages.into_iter().map(Ok))
}

/// Process every page image in a directory, in filename order.
pub fn process_registry_dir(ctx: &PipelineContext, dir: &Path) -> Result<RegistryResult> {
    let pages = crate::io::list_pages(dir)?;
    process_registry_iter(ctx, pages.iter().map(|p| crate::io::load_gray(p)))
}

// ---------------------------------------------------------------------------
// Estimates and reports
// ---------------------------------------------------------------------------

/// Registry size estimate from hand-counted sample pages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub sampled_pages: usize,
    pub mean_records_per_page: f64,
    pub total_pages: usize,
    pub estimated_records: u64,
}

/// Mean records per sampled page times the page count, rounded half-up.
pub fn estimate_records(page_samples: &[usize], total_pages: usize) -> Estimate {
    assert!(!page_samples.is_empty(), "need at least one sampled page");
    let mean = page_samples.iter().sum::<usize>() as f64 / page_samples.len() as f64;
    Estimate {
        sampled_pages: page_samples.len(),
        mean_records_per_page: mean,
        total_pages,
        estimated_records: (mean * total_pages as f64 + 0.5).floor() as u64,
    }
}

fn pct(n: usize, d: u64) -> String {
    if d == 0 {
        // undefined, not a division error
        "NA".to_string()
    } else {
        format!("{:.1}", n as f64 * 100.0 / d as f64)
    }
}

/// Per-year and overall identification/geocoding rates against estimates,
/// as CSV text. Every result year must have an estimate.
pub fn accuracy_report(
    results: &[RegistryResult],
    estimates: &[(u16, Estimate)],
) -> Result<String> {
    let mut out = String::from(
        "year,identified,geocoded_confident,estimated,identified_pct,geocoded_pct\n",
    );
    let mut tot = (0usize, 0usize, 0u64);
    for r in results {
        let est = estimates
            .iter()
            .find(|(y, _)| *y == r.year)
            .map(|(_, e)| e)
            .ok_or(Error::MissingEstimate(r.year))?;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.year,
            r.identified,
            r.geocoded_confident,
            est.estimated_records,
            pct(r.identified, est.estimated_records),
            pct(r.geocoded_confident, est.estimated_records),
        ));
        tot.0 += r.identified;
        tot.1 += r.geocoded_confident;
        tot.2 += est.estimated_records;
    }
    out.push_str(&format!(
        "all,{},{},{},{},{}\n",
        tot.0,
        tot.1,
        tot.2,
        pct(tot.0, tot.2),
        pct(tot.1, tot.2),
    ));
    Ok(out)
}

/// Count confident records per geographic grid cell.
///
/// Cells tile `bounds` starting at its south-west corner; every cell is
/// emitted (zeros included) as `(center_lat, center_lon, count)`, latitude
/// ascending then longitude. `sector_filter` keeps records whose sector
/// contains the given text.
pub fn density_grid(
    records: &[GeoRecord],
    cell_deg: f64,
    bounds: &GeoBounds,
    sector_filter: Option<&str>,
    min_conf: f64,
) -> Vec<(f64, f64, usize)> {
    assert!(cell_deg > 0.0, "cell size must be positive");
    let nx = ((bounds.max_lon - bounds.min_lon) / cell_deg).ceil().max(1.0) as usize;
    let ny = ((bounds.max_lat - bounds.min_lat) / cell_deg).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; nx * ny];
    for r in filter_confident(records, min_conf) {
        if let Some(filter) = sector_filter {
            if !r.record.sector.contains(filter) {
                continue;
            }
        }
        let g = r.geo.expect("filter_confident keeps geo");
        if !bounds.contains(g.latitude, g.longitude) {
            continue;
        }
        let ix = (((g.longitude - bounds.min_lon) / cell_deg) as usize).min(nx - 1);
        let iy = (((g.latitude - bounds.min_lat) / cell_deg) as usize).min(ny - 1);
        counts[iy * nx + ix] += 1;
    }
    let mut rows = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            rows.push((
                bounds.min_lat + (iy as f64 + 0.5) * cell_deg,
                bounds.min_lon + (ix as f64 + 0.5) * cell_deg,
                counts[iy * nx + ix],
            ));
        }
    }
    rows
}

pub fn density_csv(rows: &[(f64, f64, usize)]) -> String {
    let mut out = String::from("lat,lon,count\n");
    for (lat, lon, count) in rows {
        out.push_str(&format!("{lat},{lon},{count}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

/// Fixed column order; geo columns stay empty for records that didn't
/// geocode — identification and geocoding rates are analyzed separately.
pub const CSV_COLUMNS: [&str; 12] = [
    "year",
    "page",
    "name",
    "address",
    "city_raw",
    "city_matched",
    "sector",
    "employees_min",
    "employees_max",
    "latitude",
    "longitude",
    "confidence",
];

pub fn records_csv(records: &[GeoRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in records {
        let rec = &r.record;
        let (emin, emax) = match rec.employees {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        let (lat, lon, conf) = match r.geo {
            Some(g) => (
                g.latitude.to_string(),
                g.longitude.to_string(),
                g.confidence.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            rec.year.to_string(),
            rec.page.to_string(),
            rec.name.clone(),
            rec.address.clone(),
            rec.city_raw.clone().unwrap_or_default(),
            r.city_matched.clone().unwrap_or_default(),
            rec.sector.clone(),
            emin,
            emax,
            lat,
            lon,
            conf,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 rows")
}

pub fn write_records_csv(records: &[GeoRecord], path: &Path) -> Result<()> {
    std::fs::write(path, records_csv(records))?;
    Ok(())
}

/// GeoJSON FeatureCollection of the confident records only — the subset
/// that would be mapped.
pub fn records_geojson(records: &[GeoRecord], min_conf: f64) -> String {
    let features: Vec<serde_json::Value> = filter_confident(records, min_conf)
        .iter()
        .map(|r| {
            let g = r.geo.expect("filter_confident keeps geo");
            let rec = &r.record;
            serde_json::json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [g.longitude, g.latitude],
                },
                "properties": {
                    "year": rec.year,
                    "page": rec.page,
                    "name": rec.name,
                    "address": rec.address,
                    "city": r.city_matched,
                    "sector": rec.sector,
                    "employees_min": rec.employees.map(|e| e.0),
                    "employees_max": rec.employees.map(|e| e.1),
                    "confidence": g.confidence,
                },
            })
        })
        .collect();
    let doc = serde_json::json!({
        "type": "FeatureCollection",
        "features": features,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("static structure");
    text.push('\n');
    text
}

pub fn write_records_geojson(records: &[GeoRecord], min_conf: f64, path: &Path) -> Result<()> {
    std::fs::write(path, records_geojson(records, min_conf))?;
    Ok(())
}

/// Per-page accounting plus a total row, as CSV text.
pub fn counts_csv(result: &RegistryResult) -> String {
    let mut out = String::from(
        "page,identified,geocoded_confident,headings,noise,rejected,ocr_failures\n",
    );
    let mut tot = PageCounts::default();
    for c in &result.pages {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.page,
            c.identified,
            c.geocoded_confident,
            c.headings,
            c.noise_blocks,
            c.rejected_blocks,
            c.ocr_failures
        ));
        tot.identified += c.identified;
        tot.geocoded_confident += c.geocoded_confident;
        tot.headings += c.headings;
        tot.noise_blocks += c.noise_blocks;
        tot.rejected_blocks += c.rejected_blocks;
        tot.ocr_failures += c.ocr_failures;
    }
    out.push_str(&format!(
        "total,{},{},{},{},{},{}\n",
        tot.identified,
        tot.geocoded_confident,
        tot.headings,
        tot.noise_blocks,
        tot.rejected_blocks,
        tot.ocr_failures
    ));
    out
}

pub fn estimate_csv(year: u16, est: &Estimate) -> String {
    format!(
        "year,sampled_pages,mean_records_per_page,total_pages,estimated_records\n{year},{},{},{},{}\n",
        est.sampled_pages, est.mean_records_per_page, est.total_pages, est.estimated_records
    )
}

/// Parse a file produced by [`estimate_csv`] back into its year and estimate.
pub fn parse_estimate_csv(text: &str) -> Result<(u16, Estimate)> {
    let bad = || Error::BadEstimateFile(text.lines().nth(1).unwrap_or("").to_string());
    let row = text.lines().nth(1).ok_or_else(bad)?;
    let mut f = row.split(',');
    let mut next = || f.next().ok_or_else(bad);
    let est = (
        next()?.parse::<u16>().map_err(|_| bad())?,
        Estimate {
            sampled_pages: next()?.parse().map_err(|_| bad())?,
            mean_records_per_page: next()?.parse().map_err(|_| bad())?,
            total_pages: next()?.parse().map_err(|_| bad())?,
            estimated_records: next()?.parse().map_err(|_| bad())?,
        },
    );
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::font;
    use crate::geocode::{FileGazetteerGeocoder, GeoResult};
    use crate::ocr::{BackendInfo, MockOcr, OcrResult};
    use crate::records::ParsedRecord;

    #[test]
    fn estimate_arithmetic() {
        assert_eq!(estimate_records(&[10, 10, 10], 50).estimated_records, 500);
        assert_eq!(estimate_records(&[8, 12], 100).estimated_records, 1000);
        let ten = [7, 9, 11, 13, 10, 10, 10, 10, 10, 10];
        let est = estimate_records(&ten, 250);
        assert_eq!(est.mean_records_per_page, 10.0);
        assert_eq!(est.estimated_records, 2500);
        // half rounds up
        assert_eq!(estimate_records(&[1, 2], 3).estimated_records, 5);
    }

    #[test]
    fn estimate_file_round_trips() {
        let est = estimate_records(&[8, 12, 13], 250);
        let (year, back) = parse_estimate_csv(&estimate_csv(1958, &est)).unwrap();
        assert_eq!(year, 1958);
        assert_eq!(back, est);
        assert!(matches!(
            parse_estimate_csv("year\n"),
            Err(Error::BadEstimateFile(_))
        ));
    }

    fn registry(year: u16, identified: usize, geocoded: usize) -> RegistryResult {
        RegistryResult {
            year,
            identified,
            geocoded_confident: geocoded,
            ..RegistryResult::default()
        }
    }

    fn flat_estimate(records: u64) -> Estimate {
        Estimate {
            sampled_pages: 1,
            mean_records_per_page: records as f64,
            total_pages: 1,
            estimated_records: records,
        }
    }

    #[test]
    fn accuracy_report_rows_and_totals() {
        let results = [registry(1953, 99, 61), registry(1967, 50, 25)];
        let estimates = [(1953, flat_estimate(100)), (1967, flat_estimate(100))];
        let report = accuracy_report(&results, &estimates).unwrap();
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines[1], "1953,99,61,100,99.0,61.0");
        assert_eq!(lines[2], "1967,50,25,100,50.0,25.0");
        assert_eq!(lines[3], "all,149,86,200,74.5,43.0");
    }

    #[test]
    fn accuracy_report_zero_estimate_prints_na() {
        let report =
            accuracy_report(&[registry(1953, 5, 1)], &[(1953, flat_estimate(0))]).unwrap();
        assert!(report.lines().nth(1).unwrap().ends_with("0,NA,NA"));
    }

    #[test]
    fn accuracy_report_requires_matching_year() {
        let err = accuracy_report(&[registry(1953, 5, 1)], &[(1967, flat_estimate(10))])
            .unwrap_err();
        assert!(matches!(err, Error::MissingEstimate(1953)));
    }

    fn geo_record(sector: &str, lat: f64, lon: f64, conf: f64) -> GeoRecord {
        GeoRecord {
            record: ParsedRecord {
                name: "X CO".into(),
                address: "1 A ST".into(),
                sector: sector.into(),
                employees: None,
                city_raw: Some("PAWTUCKET".into()),
                year: 1953,
                page: 1,
                bbox: BBox::new(0, 0, 1, 1),
            },
            city_matched: Some("PAWTUCKET".into()),
            geo: Some(GeoResult {
                latitude: lat,
                longitude: lon,
                confidence: conf,
            }),
        }
    }

    #[test]
    fn density_grid_bins_confident_records() {
        let bounds = GeoBounds {
            min_lat: 41.0,
            max_lat: 42.0,
            min_lon: -72.0,
            max_lon: -71.0,
        };
        assert!(density_grid(&[], 0.5, &bounds, None, 0.75)
            .iter()
            .all(|&(_, _, c)| c == 0));

        let records = vec![
            geo_record("JEWELRY", 41.1, -71.9, 0.9),
            geo_record("JEWELRY", 41.2, -71.8, 0.9),
            geo_record("TOOLING", 41.15, -71.85, 0.9),
            geo_record("JEWELRY", 41.1, -71.9, 0.5), // below cutoff
            geo_record("JEWELRY", 45.0, -71.9, 0.9), // outside bounds
        ];
        let rows = density_grid(&records, 0.5, &bounds, None, 0.75);
        assert_eq!(rows.len(), 4);
        let total: usize = rows.iter().map(|r| r.2).sum();
        assert_eq!(total, 3);
        // all three live in the south-west cell
        assert_eq!(rows[0], (41.25, -71.75, 3));

        let jewelry = density_grid(&records, 0.5, &bounds, Some("JEWELRY"), 0.75);
        assert_eq!(jewelry.iter().map(|r| r.2).sum::<usize>(), 2);

        let csv = density_csv(&rows);
        assert!(csv.starts_with("lat,lon,count\n41.25,-71.75,3\n"));
    }

    #[test]
    fn csv_rows_follow_the_documented_column_order() {
        let mut with_geo = geo_record("WIRE", 41.876, -71.381, 0.9);
        with_geo.record.employees = Some((10, 49));
        let mut without = geo_record("WIRE", 0.0, 0.0, 0.0);
        without.geo = None;
        without.city_matched = None;
        without.record.city_raw = None;

        let text = records_csv(&[with_geo, without]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(
            lines[1],
            "1953,1,X CO,1 A ST,PAWTUCKET,PAWTUCKET,WIRE,10,49,41.876,-71.381,0.9"
        );
        assert_eq!(lines[2], "1953,1,X CO,1 A ST,,,WIRE,,,,,");
    }

    #[test]
    fn geojson_maps_only_confident_records() {
        let records = vec![
            geo_record("WIRE", 41.876, -71.381, 0.9),
            geo_record("WIRE", 41.0, -71.0, 0.5),
        ];
        let text = records_geojson(&records, 0.75);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["type"], "FeatureCollection");
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 1);
        assert_eq!(
            features[0]["geometry"]["coordinates"],
            serde_json::json!([-71.381, 41.876])
        );
        assert_eq!(features[0]["properties"]["city"], "PAWTUCKET");
    }

    // -- full composition on hand-rendered pages -----------------------------

    fn test_profile() -> Profile {
        let mut p = Profile::defaults(1953, 1);
        // single-column toy pages: keep the classifier permissive
        p.sigma_threshold = 30.0;
        p.merge.kernel_width = 23; // close word gaps in the embedded font
        p.merge.open_iterations = 0;
        p
    }

    fn test_gazetteer() -> Gazetteer {
        let text = "PAWTUCKET;PINE ST;41.876;-71.381\nPAWTUCKET;;41.8787;-71.3826\n";
        Gazetteer::from_reader(text.as_bytes(), None).unwrap()
    }

    fn ctx_with(ocr: Box<dyn OcrBackend>) -> PipelineContext {
        let gaz = test_gazetteer();
        let geocoder = Box::new(FileGazetteerGeocoder::new(gaz.clone()));
        PipelineContext::with_backends(test_profile(), gaz, ocr, geocoder).unwrap()
    }

    fn render_page(lines: &[(u32, u32, &str)]) -> GrayRaster {
        let mut img = GrayRaster::filled(700, 300, 255);
        for &(x, y, text) in lines {
            font::draw_text(&mut img, x, y, text).unwrap();
        }
        img
    }

    #[test]
    fn two_page_registry_threads_carry_and_geocodes() {
        let page1 = render_page(&[
            (60, 40, "PAWTUCKET"),
            (60, 100, "ACME CO, 12 PINE ST; WIRE; 5 EMP"),
            (60, 160, "BAY CO, P.O. BOX 141; TOOLS"),
        ]);
        let page2 = render_page(&[(60, 40, "COVE CO, 9 ELM ST; WIRE")]);

        let ctx = ctx_with(Box::new(MockOcr));
        let result = process_registry_images(&ctx, vec![page1, page2]).unwrap();

        assert_eq!(result.identified, 3);
        assert_eq!(result.records.len(), 3);
        let names: Vec<&str> = result.records.iter().map(|r| r.record.name.as_str()).collect();
        assert_eq!(names, ["ACME CO", "BAY CO", "COVE CO"]);
        for r in &result.records {
            assert_eq!(r.record.city_raw.as_deref(), Some("PAWTUCKET"));
            assert_eq!(r.city_matched.as_deref(), Some("PAWTUCKET"));
        }
        // street hit / PO box / centroid fallback
        assert_eq!(result.records[0].geo.unwrap().confidence, 0.9);
        assert_eq!(result.records[0].geo.unwrap().latitude, 41.876);
        assert_eq!(result.records[1].geo, None);
        assert_eq!(result.records[2].geo.unwrap().confidence, 0.5);
        assert_eq!(result.geocoded_confident, 1);
        assert_eq!(result.records[0].record.employees, Some((5, 5)));
        assert_eq!(result.pages[0].headings, 1);
        // carry came from page 1
        assert_eq!(result.records[2].record.page, 2);
    }

    #[test]
    fn blank_page_passes_carry_through() {
        let ctx = ctx_with(Box::new(MockOcr));
        let img = GrayRaster::filled(400, 200, 255);
        let carry = Some(Heading {
            city: "WARWICK".into(),
            page: 1,
            top: 10,
        });
        let (records, out, counts) = process_page(&ctx, &img, 2, carry.clone()).unwrap();
        assert!(records.is_empty());
        assert_eq!(out, carry);
        assert_eq!(counts.identified, 0);
    }

    struct FailingOcr;
    impl OcrBackend for FailingOcr {
        fn info(&self) -> BackendInfo {
            BackendInfo {
                name: "failing",
                concurrent_safe: true,
            }
        }
        fn recognize_raster(&self, _: &GrayRaster) -> Result<OcrResult> {
            Err(Error::OcrBlock("scrambled".into()))
        }
    }

    struct DownOcr;
    impl OcrBackend for DownOcr {
        fn info(&self) -> BackendInfo {
            BackendInfo {
                name: "down",
                concurrent_safe: true,
            }
        }
        fn recognize_raster(&self, _: &GrayRaster) -> Result<OcrResult> {
            Err(Error::OcrUnavailable("engine missing".into()))
        }
    }

    #[test]
    fn per_block_ocr_failures_degrade_to_noise() {
        let page = render_page(&[(60, 40, "ACME CO, 12 PINE ST; WIRE")]);
        let ctx = ctx_with(Box::new(FailingOcr));
        let (records, _, counts) = process_page(&ctx, &page, 1, None).unwrap();
        assert!(records.is_empty());
        assert_eq!(counts.ocr_failures, 1);
        assert_eq!(counts.noise_blocks, 1);
    }

    #[test]
    fn missing_ocr_engine_aborts_the_run() {
        let page = render_page(&[(60, 40, "ACME CO, 12 PINE ST; WIRE")]);
        let ctx = ctx_with(Box::new(DownOcr));
        assert!(matches!(
            process_page(&ctx, &page, 1, None),
            Err(Error::OcrUnavailable(_))
        ));
    }

    #[test]
    fn repeat_runs_are_byte_identical() {
        let pages = || {
            vec![
                render_page(&[
                    (60, 40, "PAWTUCKET"),
                    (60, 100, "ACME CO, 12 PINE ST; WIRE; 5 EMP"),
                ]),
                render_page(&[(60, 40, "COVE CO, 9 ELM ST; WIRE")]),
            ]
        };
        let ctx = ctx_with(Box::new(MockOcr));
        let a = process_registry_images(&ctx, pages()).unwrap();
        let b = process_registry_images(&ctx, pages()).unwrap();
        assert_eq!(records_csv(&a.records), records_csv(&b.records));
        assert_eq!(
            records_geojson(&a.records, 0.75),
            records_geojson(&b.records, 0.75)
        );
        assert_eq!(counts_csv(&a), counts_csv(&b));
    }
}
