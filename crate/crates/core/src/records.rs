//! Record grammar: classifying block text and extracting fields.
//!
//! Every laid-out block's text is tested against a heading pattern first
//! (a heading is a line of city text, possibly wrapped in dash leaders),
//! then against the record pattern; anything else is noise. Headings bind
//! the records that follow them in reading order, carrying across pages.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::contours::BBox;
use crate::error::{Error, Result};

/// Canonical record shape: `NAME, ADDRESS; SECTOR; N-M EMP` with the
/// employee tail optional. `0/O` and `1/I` confusions are tolerated in the
/// employee counts, and a final unparseable `;`-segment is discarded rather
/// than poisoning the whole record.
pub const DEFAULT_RECORD_PATTERN: &str = r"^(?P<name>[^,;]+), (?P<address>[^;]+); (?P<sector>[^;]+?)(?:; (?P<employees>[0-9OI]+(?:-[0-9OI]+)?) EMP|;[^;]*)?$";

/// A heading is uppercase city text, optionally framed by dash leaders
/// (`--- PAWTUCKET ---`).
pub const DEFAULT_HEADING_PATTERN: &str = r"^[- ]*(?P<city>[A-Z][A-Z ]*?)[- ]*$";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordGrammar {
    pub record_pattern: String,
    pub heading_pattern: String,
    #[serde(skip)]
    record: Option<Regex>,
    #[serde(skip)]
    heading: Option<Regex>,
}

impl RecordGrammar {
    pub fn new(record_pattern: &str, heading_pattern: &str) -> Result<Self> {
        let record = Regex::new(record_pattern)
            .map_err(|e| Error::BadGrammar(format!("record pattern: {e}")))?;
        let heading = Regex::new(heading_pattern)
            .map_err(|e| Error::BadGrammar(format!("heading pattern: {e}")))?;
        for cap in ["name", "address"] {
            if !record.capture_names().flatten().any(|n| n == cap) {
                return Err(Error::BadGrammar(format!(
                    "record pattern must define a `{cap}` capture"
                )));
            }
        }
        if !heading.capture_names().flatten().any(|n| n == "city") {
            return Err(Error::BadGrammar(
                "heading pattern must define a `city` capture".into(),
            ));
        }
        Ok(RecordGrammar {
            record_pattern: record_pattern.to_string(),
            heading_pattern: heading_pattern.to_string(),
            record: Some(record),
            heading: Some(heading),
        })
    }

    /// Rebuild the compiled patterns after deserialization.
    pub fn compile(&mut self) -> Result<()> {
        *self = RecordGrammar::new(&self.record_pattern, &self.heading_pattern)?;
        Ok(())
    }

    fn record(&self) -> &Regex {
        self.record.as_ref().expect("grammar not compiled")
    }

    fn heading(&self) -> &Regex {
        self.heading.as_ref().expect("grammar not compiled")
    }
}

impl Default for RecordGrammar {
    fn default() -> Self {
        RecordGrammar::new(DEFAULT_RECORD_PATTERN, DEFAULT_HEADING_PATTERN)
            .expect("default grammar compiles")
    }
}

/// Field values pulled out of one record block, before heading propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordFields {
    pub name: String,
    pub address: String,
    pub sector: String,
    pub employees: Option<(u32, u32)>,
}

/// A city heading and where it was printed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heading {
    pub city: String,
    pub page: u32,
    pub top: u32,
}

/// Classification of one block's text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockParse {
    Record(RecordFields),
    /// City text of a heading line.
    Heading(String),
    /// Unparseable text, kept for diagnostics.
    Noise(String),
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse `O`/`I`-tolerant employee text: "10-49" → (10, 49), "12" → (12, 12).
/// Anything malformed (or an inverted range) yields `None`.
fn parse_employees(text: &str) -> Option<(u32, u32)> {
    let digits: String = text
        .chars()
        .map(|c| match c {
            'O' => '0',
            'I' => '1',
            other => other,
        })
        .collect();
    let mut parts = digits.split('-');
    let lo: u32 = parts.next()?.parse().ok()?;
    let range = match parts.next() {
        None => (lo, lo),
        Some(hi) => (lo, hi.parse().ok()?),
    };
    if parts.next().is_some() || range.0 > range.1 {
        return None;
    }
    Some(range)
}

/// Classify one block's text. The heading pattern is tested first — a bare
/// city name would otherwise partially satisfy the record's name capture.
pub fn parse_block(text: &str, grammar: &RecordGrammar) -> BlockParse {
    let joined = normalize_ws(
        &text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" "),
    );
    if joined.is_empty() {
        return BlockParse::Noise(String::new());
    }
    if let Some(caps) = grammar.heading().captures(&joined) {
        if let Some(city) = caps.name("city") {
            let city = normalize_ws(city.as_str());
            if !city.is_empty() {
                return BlockParse::Heading(city);
            }
        }
    }
    if let Some(caps) = grammar.record().captures(&joined) {
        let field = |name: &str| {
            caps.name(name)
                .map(|m| normalize_ws(m.as_str()))
                .unwrap_or_default()
        };
        let name = field("name");
        if !name.is_empty() {
            return BlockParse::Record(RecordFields {
                name,
                address: field("address"),
                sector: field("sector"),
                employees: caps
                    .name("employees")
                    .and_then(|m| parse_employees(m.as_str())),
            });
        }
    }
    BlockParse::Noise(joined)
}

/// A fully extracted record with its provenance and (after propagation) the
/// city context it was printed under.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub name: String,
    pub address: String,
    pub sector: String,
    pub employees: Option<(u32, u32)>,
    pub city_raw: Option<String>,
    pub year: u16,
    pub page: u32,
    pub bbox: BBox,
}

/// One element of a page's layout stream, ready for heading propagation.
#[derive(Debug, Clone)]
pub enum StreamBlock {
    /// A block assigned to a column, with its column index and top edge.
    Column {
        col: usize,
        top: u32,
        bbox: BBox,
        parse: BlockParse,
    },
    /// A page-centered heading at some vertical position.
    Centered { top: u32, heading: Heading },
}

/// Attach city context to every record on a page.
///
/// A centered heading spans the full page width, so in print it divides the
/// page into horizontal bands: everything above it (all columns) is read
/// first, then the heading, then everything below. Within a band the columns
/// read left to right, top to bottom, and an in-column heading keeps applying
/// across the column break. `carry` is the heading state entering the page;
/// the returned carry is the state leaving it.
pub fn propagate_headings(
    stream: &[StreamBlock],
    carry: Option<Heading>,
    year: u16,
    page: u32,
) -> (Vec<ParsedRecord>, Option<Heading>) {
    let mut centered: Vec<&Heading> = stream
        .iter()
        .filter_map(|b| match b {
            StreamBlock::Centered { heading, .. } => Some(heading),
            _ => None,
        })
        .collect();
    centered.sort_by_key(|h| h.top);

    let mut columns: Vec<(usize, u32, &BBox, &BlockParse)> = stream
        .iter()
        .filter_map(|b| match b {
            StreamBlock::Column {
                col,
                top,
                bbox,
                parse,
            } => Some((*col, *top, bbox, parse)),
            _ => None,
        })
        .collect();
    columns.sort_by_key(|&(col, top, ..)| (col, top));
    let col_ids: Vec<usize> = {
        let mut ids: Vec<usize> = columns.iter().map(|&(c, ..)| c).collect();
        ids.dedup();
        ids
    };

    // band index of a block = number of centered headings at or above its top
    let band_of = |top: u32| centered.iter().take_while(|h| h.top <= top).count();

    let mut state = carry;
    let mut out = Vec::new();
    for band in 0..=centered.len() {
        if band > 0 {
            state = Some(centered[band - 1].clone());
        }
        for &col in &col_ids {
            for &(c, top, bbox, parse) in &columns {
                if c != col || band_of(top) != band {
                    continue;
                }
                match parse {
                    BlockParse::Record(fields) => out.push(ParsedRecord {
                        name: fields.name.clone(),
                        address: fields.address.clone(),
                        sector: fields.sector.clone(),
                        employees: fields.employees,
                        city_raw: state.as_ref().map(|h| h.city.clone()),
                        year,
                        page,
                        bbox: *bbox,
                    }),
                    BlockParse::Heading(city) => {
                        state = Some(Heading {
                            city: city.clone(),
                            page,
                            top,
                        });
                    }
                    BlockParse::Noise(_) => {}
                }
            }
        }
    }
    (out, state)
}
