//! Synthetic registry corpora with ground truth.
//!
//! Renders pages in the embedded font with the same conventions the pipeline
//! expects from scanned registries: column layout, city headings (in-column
//! banners or page-centered bands), records separated by blank space or
//! marked by first-line indentation, plus optional scanner-style damage
//! (salt-and-pepper flips, unreadable glyphs). Every corpus comes with a
//! truth table, a matching gazetteer, and a tuned profile, so end-to-end
//! accuracy is measurable without any hand-labeled scans.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::font::{self, CELL_GAP, CELL_H, CELL_W, PITCH};
use crate::raster::GrayRaster;

const MARGIN: u32 = 50;
const GUTTER: u32 = 40;
/// Blank rows between the lines of one record; closed by the merge kernel.
const LINE_GAP: u32 = 4;
/// Blank rows between blocks; survives the merge kernel.
const BLOCK_GAP: u32 = 24;
/// First-line indent in indent mode: two glyph pitches.
const INDENT: u32 = 2 * PITCH;
/// Splitter threshold written into emitted profiles; comfortably between
/// glyph left-bearing wobble (≤4px) and [`INDENT`].
const PROFILE_INDENT_PX: u32 = 16;

/// How the printed register separates consecutive records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordSeparator {
    /// A blank gap; each record merges into its own blob.
    BlankLine,
    /// No gap, but each record's first line is indented.
    Indent,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub year: u16,
    pub pages: usize,
    pub columns: usize,
    pub page_width: u32,
    pub page_height: u32,
    /// Inclusive range of records per column (page height permitting).
    pub records_per_column: (usize, usize),
    /// Probability that a heading precedes a record slot (or starts a band).
    pub heading_frequency: f64,
    /// Page-wide centered headings instead of in-column banners.
    pub centered_headings: bool,
    pub separator: RecordSeparator,
    /// Per-record horizontal jitter, uniform in ±this many pixels.
    pub jitter_px: u32,
    /// Fraction of pixels flipped; half go white, half black.
    pub salt_pepper: f64,
    /// Probability that a drawn glyph is replaced by unreadable damage.
    pub glyph_corruption: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            year: 1950,
            pages: 3,
            columns: 2,
            page_width: 1060,
            page_height: 1400,
            records_per_column: (6, 10),
            heading_frequency: 0.2,
            centered_headings: false,
            separator: RecordSeparator::BlankLine,
            jitter_px: 2,
            salt_pepper: 0.0,
            glyph_corruption: 0.0,
        }
    }
}

/// One record as printed, with the geography it should resolve to.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub page: u32,
    pub name: String,
    pub address: String,
    pub city: Option<String>,
    pub sector: String,
    pub employees: Option<(u32, u32)>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub pages: Vec<GrayRaster>,
    /// Reading order: page by page, matching the pipeline's output order.
    pub truth: Vec<TruthRecord>,
    pub gazetteer: String,
    pub profile: String,
}

// ---------------------------------------------------------------------------
// Geography and vocabulary
// ---------------------------------------------------------------------------

const CITIES: &[(&str, f64, f64)] = &[
    ("PROVIDENCE", 41.8236, -71.4222),
    ("PAWTUCKET", 41.8787, -71.3826),
    ("WOONSOCKET", 42.0029, -71.5147),
    ("CRANSTON", 41.7798, -71.4373),
    ("WARWICK", 41.7001, -71.4162),
    ("NEWPORT", 41.4901, -71.3128),
    ("BRISTOL", 41.6771, -71.2662),
    ("WESTERLY", 41.3776, -71.8273),
];

const STREET_NAMES: &[&str] = &[
    "MAIN ST",
    "MILL ST",
    "BROAD ST",
    "HIGH ST",
    "UNION ST",
    "RIVER RD",
    "PARK AVE",
    "ELM ST",
    "PINE ST",
    "WATER ST",
    "CHURCH ST",
    "CANAL ST",
    "CHESTNUT ST",
    "FOUNTAIN ST",
    "DEXTER ST",
    "HARRIS AVE",
];

const STREETS_PER_CITY: usize = 10;

const NAME_WORDS: &[&str] = &[
    "ACME", "ATLANTIC", "BAY", "BLACKSTONE", "CENTRAL", "COASTAL", "CROWN", "DIAMOND", "EAGLE",
    "EASTERN", "EMPIRE", "FEDERAL", "GENERAL", "GRANITE", "HARBOR", "IDEAL", "IMPERIAL",
    "KEYSTONE", "LIBERTY", "MERCURY", "MODERN", "NATIONAL", "OCEAN", "PIONEER", "PREMIER",
    "QUALITY", "RELIANCE", "ROYAL", "STANDARD", "STERLING", "SUPERIOR", "UNION", "UNITED",
    "VALLEY", "VICTORY", "WESTERN",
];

const NAME_SUFFIXES: &[&str] = &["CO", "MFG CO", "CORP", "BROS", "& SONS", "WORKS", "INC"];

const SECTORS: &[&str] = &[
    "JEWELRY",
    "TEXTILES",
    "MACHINE TOOLS",
    "WIRE GOODS",
    "METAL STAMPING",
    "RUBBER GOODS",
    "SILVERWARE",
    "DYEING",
    "WORSTED MILLS",
    "FOUNDRY",
    "PLATING",
    "TOOLMAKING",
];

/// Street index for city `ci`, slot `si` — rotated so neighbouring cities
/// share some street names (realistic, and exercises keyed lookup).
fn street_of(ci: usize, si: usize) -> &'static str {
    STREET_NAMES[(ci * 3 + si) % STREET_NAMES.len()]
}

fn street_coords(ci: usize, si: usize) -> (f64, f64) {
    // Quantized to the gazetteer's four printed decimals so truth coordinates
    // compare exactly against values read back from the file.
    let quarter = |v: f64| (v * 1e4).round() / 1e4;
    let (_, lat, lon) = CITIES[ci];
    (
        quarter(lat + 0.004 * si as f64),
        quarter(lon - 0.003 * si as f64),
    )
}

/// The gazetteer matching [`generate`]'s geography: one row per known
/// street plus a centroid row per city.
pub fn gazetteer_text() -> String {
    let mut out = String::from("# synthetic state gazetteer\n");
    for (ci, (city, lat, lon)) in CITIES.iter().enumerate() {
        for si in 0..STREETS_PER_CITY {
            let (slat, slon) = street_coords(ci, si);
            out.push_str(&format!("{city};{};{slat:.4};{slon:.4}\n", street_of(ci, si)));
        }
        out.push_str(&format!("{city};;{lat:.4};{lon:.4}\n"));
    }
    out
}

/// The processing profile matched to this generator's geometry. The merge
/// kernel reaches ±11px horizontally: enough to close inter-word gaps in the
/// embedded font (≤22px) while the column gutter and block gaps stay open.
/// Opening is disabled so the 2px-tall banner dashes survive, and a blob
/// area floor keeps pepper speckle out of the layout stage instead. The
/// column test threshold is generous because every real block on these pages
/// belongs to a column: a cluster of n points never holds a member further
/// than √n sigmas from its mean, and n stays well under 64 blocks here.
/// min_rows sits between the two indented-run heights this layout produces:
/// a record's indented first line is a full glyph cell (14px) while a
/// heading's letters overhang its mid-cell dashes by only 6px top and
/// bottom, so 8 splits records without carving headings in half.
pub fn profile_text(spec: &SynthSpec) -> String {
    format!(
        r#"year = {year}
columns = {columns}
sigma_threshold = 8.0
center_tol = 0.05
indent_px = {indent}
min_rows = 8
min_blob_area = 9
min_ratio = 0.8
min_conf = 0.75

[merge]
threshold = 128
kernel_width = 23
kernel_height = 9
close_iterations = 1
open_iterations = 0
despeckle_area = 3

[ocr]
backend = "mock"

[geocoder]
backend = "file"
gazetteer = "gazetteer.txt"
bounds = [41.1, 42.2, -72.0, -71.0]
"#,
        year = spec.year,
        columns = spec.columns,
        indent = PROFILE_INDENT_PX,
    )
}

// ---------------------------------------------------------------------------
// Text construction
// ---------------------------------------------------------------------------

struct GenRecord {
    name: String,
    address: String,
    sector: String,
    employees: Option<(u32, u32)>,
    city: Option<usize>,
    street: usize,
}

impl GenRecord {
    fn text(&self) -> String {
        let mut t = format!("{}, {}; {}", self.name, self.address, self.sector);
        match self.employees {
            Some((lo, hi)) if lo == hi => t.push_str(&format!("; {lo} EMP")),
            Some((lo, hi)) => t.push_str(&format!("; {lo}-{hi} EMP")),
            None => {}
        }
        t
    }

    fn truth(&self, page: u32) -> TruthRecord {
        let (lat, lon) = match self.city {
            Some(ci) => {
                let (lat, lon) = street_coords(ci, self.street);
                (Some(lat), Some(lon))
            }
            None => (None, None),
        };
        TruthRecord {
            page,
            name: self.name.clone(),
            address: self.address.clone(),
            city: self.city.map(|ci| CITIES[ci].0.to_string()),
            sector: self.sector.clone(),
            employees: self.employees,
            latitude: lat,
            longitude: lon,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn gen_record(rng: &mut ChaCha8Rng, city: Option<usize>) -> GenRecord {
    let mut name = pick(rng, NAME_WORDS).to_string();
    if rng.random_bool(0.4) {
        name.push(' ');
        name.push_str(pick(rng, NAME_WORDS));
    }
    name.push(' ');
    name.push_str(pick(rng, NAME_SUFFIXES));

    let street = rng.random_range(0..STREETS_PER_CITY);
    let number = rng.random_range(1..1000);
    let address = format!("{number} {}", street_of(city.unwrap_or(0), street));
    let sector = pick(rng, SECTORS).to_string();
    let employees = match rng.random_range(0..3u8) {
        0 => None,
        1 => {
            let n = rng.random_range(1..200);
            Some((n, n))
        }
        _ => {
            let lo = rng.random_range(1..100);
            Some((lo, lo + rng.random_range(1..150)))
        }
    };
    GenRecord {
        name,
        address,
        sector,
        employees,
        city,
        street,
    }
}

/// Pad the name with extra words until the text cannot fit on one line of
/// `cap1` glyphs — indent mode needs every record to wrap.
fn force_wrap(rng: &mut ChaCha8Rng, rec: &mut GenRecord, cap1: usize) {
    while rec.text().chars().count() <= cap1 + 2 {
        let cut = rec.name.rfind(' ').unwrap_or(0);
        rec.name.insert_str(cut, &format!(" {}", pick(rng, NAME_WORDS)));
    }
}

/// Greedy word wrap; the first line may have a different capacity.
fn wrap(text: &str, cap1: usize, cap: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    let mut limit = cap1;
    for word in text.split(' ') {
        if cur.is_empty() {
            cur = word.to_string();
        } else if cur.chars().count() + 1 + word.chars().count() <= limit {
            cur.push(' ');
            cur.push_str(word);
        } else {
            lines.push(std::mem::take(&mut cur));
            cur = word.to_string();
            limit = cap;
        }
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

fn banner_text(city: &str, total_glyphs: usize) -> String {
    let pad = total_glyphs.saturating_sub(city.chars().count() + 2);
    let left = pad / 2;
    format!("{} {city} {}", "-".repeat(left), "-".repeat(pad - left))
}

// ---------------------------------------------------------------------------
// Drawing
// ---------------------------------------------------------------------------

/// Replace the glyph cell at (x, y) with damage no template comes close to.
fn corrupt_cell(img: &mut GrayRaster, rng: &mut ChaCha8Rng, x: u32, y: u32) {
    let templates = font::templates();
    let cell = (CELL_W * CELL_H) as usize;
    loop {
        let bits: Vec<u8> = (0..cell).map(|_| rng.random_bool(0.5) as u8).collect();
        let readable = templates.iter().any(|(_, t)| {
            bits.iter().zip(t).filter(|(a, b)| a != b).count() <= crate::ocr::MAX_MISMATCH
        });
        if readable {
            continue;
        }
        for r in 0..CELL_H {
            for c in 0..CELL_W {
                let ink = bits[(r * CELL_W + c) as usize] == 1;
                img.set(x + c, y + r, if ink { 0 } else { 255 });
            }
        }
        return;
    }
}

fn draw_line(
    img: &mut GrayRaster,
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    x: u32,
    y: u32,
    text: &str,
) -> Result<()> {
    font::draw_text(img, x, y, text)?;
    for (i, _) in text.chars().enumerate() {
        if rng.random_bool(spec.glyph_corruption) {
            corrupt_cell(img, rng, x + i as u32 * PITCH, y);
        }
    }
    Ok(())
}

fn record_height(lines: usize) -> u32 {
    lines as u32 * CELL_H + (lines as u32 - 1) * LINE_GAP
}

fn jitter(rng: &mut ChaCha8Rng, spec: &SynthSpec, base: u32) -> u32 {
    let j = spec.jitter_px as i64;
    (base as i64 + rng.random_range(-j..=j)).max(0) as u32
}

fn apply_noise(img: &mut GrayRaster, seed: u64, page: usize, rate: f64) {
    if rate <= 0.0 {
        return;
    }
    // separate stream per page so noise never perturbs content generation
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (page as u64 + 1),
    );
    for y in 0..img.height() {
        for x in 0..img.width() {
            let u: f64 = rng.random();
            if u < rate / 2.0 {
                img.set(x, y, 0);
            } else if u < rate {
                img.set(x, y, 255);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Page generation
// ---------------------------------------------------------------------------

struct Geometry {
    col_width: u32,
    cap: usize,
    cap1: usize,
    limit: u32,
}

impl Geometry {
    fn of(spec: &SynthSpec) -> Result<Geometry> {
        let fixed = 2 * MARGIN + (spec.columns as u32 - 1) * GUTTER;
        if spec.columns == 0 || spec.page_width <= fixed {
            return Err(Error::BadImage(format!(
                "page width {} cannot hold {} columns",
                spec.page_width, spec.columns
            )));
        }
        let col_width = (spec.page_width - fixed) / spec.columns as u32;
        if col_width < 26 * PITCH {
            return Err(Error::BadImage(format!(
                "column width {col_width}px is too narrow to print records"
            )));
        }
        if spec.page_height < 2 * MARGIN + 200 {
            return Err(Error::BadImage(format!(
                "page height {} leaves no room for text",
                spec.page_height
            )));
        }
        Ok(Geometry {
            col_width,
            cap: ((col_width + CELL_GAP) / PITCH) as usize,
            cap1: ((col_width - INDENT + CELL_GAP) / PITCH) as usize,
            limit: spec.page_height - MARGIN,
        })
    }

    fn col_left(&self, col: usize) -> u32 {
        MARGIN + col as u32 * (self.col_width + GUTTER)
    }
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    geo: Geometry,
    rng: ChaCha8Rng,
    /// Current city, carried across columns and pages.
    city: Option<usize>,
    /// The corpus opens with a heading so every record has one (when
    /// headings are enabled at all).
    need_first_heading: bool,
    truth: Vec<TruthRecord>,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a SynthSpec) -> Result<Self> {
        Ok(Generator {
            spec,
            geo: Geometry::of(spec)?,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            city: None,
            need_first_heading: spec.heading_frequency > 0.0,
            truth: Vec::new(),
        })
    }

    fn new_city(&mut self) -> usize {
        loop {
            let ci = self.rng.random_range(0..CITIES.len());
            if Some(ci) != self.city {
                return ci;
            }
        }
    }

    fn make_record(&mut self, city: Option<usize>) -> (GenRecord, Vec<String>) {
        let mut rec = gen_record(&mut self.rng, city);
        let (cap1, cap) = match self.spec.separator {
            RecordSeparator::Indent => (self.geo.cap1, self.geo.cap),
            RecordSeparator::BlankLine => (self.geo.cap, self.geo.cap),
        };
        if self.spec.separator == RecordSeparator::Indent {
            force_wrap(&mut self.rng, &mut rec, cap1);
        }
        let lines = wrap(&rec.text(), cap1, cap);
        (rec, lines)
    }

    fn draw_record(
        &mut self,
        img: &mut GrayRaster,
        col: usize,
        y: u32,
        lines: &[String],
    ) -> Result<()> {
        let x = jitter(&mut self.rng, self.spec, self.geo.col_left(col));
        for (i, line) in lines.iter().enumerate() {
            let indent = match self.spec.separator {
                RecordSeparator::Indent if i == 0 => INDENT,
                _ => 0,
            };
            draw_line(
                img,
                &mut self.rng,
                self.spec,
                x + indent,
                y + i as u32 * (CELL_H + LINE_GAP),
                line,
            )?;
        }
        Ok(())
    }

    fn record_gap(&self) -> u32 {
        match self.spec.separator {
            RecordSeparator::BlankLine => BLOCK_GAP,
            RecordSeparator::Indent => LINE_GAP,
        }
    }

    /// In-column banner headings: columns are filled independently, the city
    /// flowing down each column and across column/page breaks.
    fn banner_page(&mut self, img: &mut GrayRaster, page: u32) -> Result<()> {
        for col in 0..self.spec.columns {
            let target = self
                .rng
                .random_range(self.spec.records_per_column.0..=self.spec.records_per_column.1);
            let mut y = MARGIN;
            let mut after_record = false;
            for _ in 0..target {
                let wants_heading = self.spec.heading_frequency > 0.0
                    && (self.need_first_heading
                        || self.rng.random_bool(self.spec.heading_frequency));
                let new_city = if wants_heading {
                    Some(self.new_city())
                } else {
                    None
                };
                let (rec, lines) = self.make_record(new_city.or(self.city));

                let mut needed = record_height(lines.len());
                if wants_heading {
                    // banners need a clear gap even where records pack tight
                    let lead = if after_record {
                        BLOCK_GAP - self.record_gap()
                    } else {
                        0
                    };
                    needed += lead + CELL_H + BLOCK_GAP;
                }
                if y + needed > self.geo.limit {
                    break;
                }

                if let Some(ci) = new_city {
                    if after_record {
                        y += BLOCK_GAP - self.record_gap();
                    }
                    self.city = Some(ci);
                    self.need_first_heading = false;
                    let text = banner_text(CITIES[ci].0, self.geo.cap);
                    let x = jitter(&mut self.rng, self.spec, self.geo.col_left(col));
                    draw_line(img, &mut self.rng, self.spec, x, y, &text)?;
                    y += CELL_H + BLOCK_GAP;
                }

                self.draw_record(img, col, y, &lines)?;
                y += record_height(lines.len()) + self.record_gap();
                after_record = true;
                self.truth.push(rec.truth(page));
            }
        }
        Ok(())
    }

    /// Page-centered headings divide pages into bands read left-to-right.
    fn centered_page(&mut self, img: &mut GrayRaster, page: u32) -> Result<()> {
        let targets: Vec<usize> = (0..self.spec.columns)
            .map(|_| {
                self.rng
                    .random_range(self.spec.records_per_column.0..=self.spec.records_per_column.1)
            })
            .collect();
        let mut counts = vec![0usize; self.spec.columns];
        let mut y = MARGIN;
        let mut first_band = true;
        let heading_glyphs = (self.spec.page_width * 3 / 5 + CELL_GAP) / PITCH;

        loop {
            let head = if first_band && page > 1 {
                // sometimes resume the previous page's city mid-band
                self.rng.random_bool(0.5)
            } else {
                true
            };
            if head {
                if y + CELL_H + BLOCK_GAP + CELL_H > self.geo.limit {
                    break;
                }
                let ci = self.new_city();
                self.city = Some(ci);
                self.need_first_heading = false;
                let text = banner_text(CITIES[ci].0, heading_glyphs as usize);
                let width = font::text_width(text.chars().count() as u32);
                let x = jitter(
                    &mut self.rng,
                    self.spec,
                    (self.spec.page_width - width) / 2,
                );
                draw_line(img, &mut self.rng, self.spec, x, y, &text)?;
                y += CELL_H + BLOCK_GAP;
            }
            first_band = false;

            let band_rows = self.rng.random_range(1..=3usize);
            let mut bottom = y;
            let mut drew = false;
            for col in 0..self.spec.columns {
                let mut cy = y;
                for _ in 0..band_rows {
                    if counts[col] >= targets[col] {
                        break;
                    }
                    let (rec, lines) = self.make_record(self.city);
                    let h = record_height(lines.len());
                    if cy + h > self.geo.limit {
                        break;
                    }
                    self.draw_record(img, col, cy, &lines)?;
                    cy += h + self.record_gap();
                    self.truth.push(rec.truth(page));
                    counts[col] += 1;
                    drew = true;
                }
                if cy > y {
                    bottom = bottom.max(cy - self.record_gap());
                }
            }
            if !drew {
                break;
            }
            y = bottom + BLOCK_GAP;
            if counts
                .iter()
                .zip(&targets)
                .all(|(c, t)| c >= t)
            {
                break;
            }
        }
        Ok(())
    }
}

/// Render a full corpus in memory.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    let mut g = Generator::new(spec)?;
    let mut pages = Vec::with_capacity(spec.pages);
    for p in 0..spec.pages {
        let mut img = GrayRaster::filled(spec.page_width, spec.page_height, 255);
        let page = p as u32 + 1;
        if spec.centered_headings {
            g.centered_page(&mut img, page)?;
        } else {
            g.banner_page(&mut img, page)?;
        }
        apply_noise(&mut img, spec.seed, p, spec.salt_pepper);
        pages.push(img);
    }
    Ok(SynthCorpus {
        pages,
        truth: g.truth,
        gazetteer: gazetteer_text(),
        profile: profile_text(spec),
    })
}

// ---------------------------------------------------------------------------
// On-disk corpus
// ---------------------------------------------------------------------------

pub fn truth_csv(truth: &[TruthRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "page",
        "name",
        "address",
        "city",
        "sector",
        "employees_min",
        "employees_max",
        "latitude",
        "longitude",
    ])
    .expect("in-memory write");
    for t in truth {
        let (emin, emax) = match t.employees {
            Some((lo, hi)) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            t.page.to_string(),
            t.name.clone(),
            t.address.clone(),
            t.city.clone().unwrap_or_default(),
            t.sector.clone(),
            emin,
            emax,
            t.latitude.map(|v| v.to_string()).unwrap_or_default(),
            t.longitude.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 rows")
}

pub fn load_truth_csv(path: &Path) -> Result<Vec<TruthRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").to_string();
        let opt = |i: usize| Some(field(i)).filter(|s| !s.is_empty());
        let num = |i: usize| opt(i).and_then(|s| s.parse().ok());
        out.push(TruthRecord {
            page: field(0).parse().unwrap_or(0),
            name: field(1),
            address: field(2),
            city: opt(3),
            sector: field(4),
            employees: match (num(5), num(6)) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                _ => None,
            },
            latitude: opt(7).and_then(|s| s.parse().ok()),
            longitude: opt(8).and_then(|s| s.parse().ok()),
        });
    }
    Ok(out)
}

/// Write `pages/NNN.pgm`, `truth.csv`, `gazetteer.txt`, and `profile.toml`
/// under `dir`. The profile references the gazetteer by relative path, so
/// `run --input <dir>/pages --profile <dir>/profile.toml` works as-is.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<SynthCorpus> {
    let corpus = generate(spec)?;
    let pages_dir = dir.join("pages");
    std::fs::create_dir_all(&pages_dir)?;
    for (i, img) in corpus.pages.iter().enumerate() {
        crate::io::write_gray_pgm(img, &pages_dir.join(format!("{:03}.pgm", i + 1)))?;
    }
    std::fs::write(dir.join("truth.csv"), truth_csv(&corpus.truth))?;
    std::fs::write(dir.join("gazetteer.txt"), &corpus.gazetteer)?;
    std::fs::write(dir.join("profile.toml"), &corpus.profile)?;
    Ok(corpus)
}
