//! Text recognition backends.
//!
//! The pipeline hands each laid-out block to an [`OcrBackend`] as a grayscale
//! crop of the original page. Two backends ship here:
//!
//! * [`MockOcr`] — a deterministic template matcher over the embedded font.
//!   It exists so the whole pipeline can be exercised hermetically on
//!   synthetic pages, with a meaningful per-block confidence.
//! * [`SubprocessOcr`] — shells out to an external engine binary
//!   (tesseract-style calling convention: `engine input.pgm out_base [args]`,
//!   text appears in `out_base.txt`).

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::contours::BBox;
use crate::error::{Error, Result};
use crate::font::{self, CELL_H, CELL_W, PITCH, REPLACEMENT};
use crate::raster::{despeckle, threshold_invert, GrayRaster};

/// Pixels of background added around a crop before recognition.
const CROP_PAD: u32 = 2;

/// Recognized text for one block plus the mean per-glyph confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct OcrResult {
    pub text: String,
    /// Mean confidence over all glyph cells, in [0, 1]. An empty block
    /// reads as fully confident.
    pub mean_confidence: f64,
}

#[derive(Debug, Clone)]
pub struct BackendInfo {
    pub name: &'static str,
    /// Whether `recognize_raster` may be called from several threads at once.
    pub concurrent_safe: bool,
}

pub trait OcrBackend: Send + Sync {
    fn info(&self) -> BackendInfo;
    /// Recognize an already-cropped, already-padded grayscale image.
    fn recognize_raster(&self, crop: &GrayRaster) -> Result<OcrResult>;
}

/// Crop `bounds` out of `img`, pad with background, and run the backend.
pub fn recognize(backend: &dyn OcrBackend, img: &GrayRaster, bounds: &BBox) -> Result<OcrResult> {
    if bounds.right > img.width() || bounds.bottom > img.height() {
        return Err(Error::BoxOutOfBounds {
            left: bounds.left,
            top: bounds.top,
            right: bounds.right,
            bottom: bounds.bottom,
            width: img.width(),
            height: img.height(),
        });
    }
    let crop = img.crop(bounds.left, bounds.top, bounds.right, bounds.bottom);
    let mut padded = GrayRaster::filled(
        crop.width() + 2 * CROP_PAD,
        crop.height() + 2 * CROP_PAD,
        255,
    );
    for y in 0..crop.height() {
        for x in 0..crop.width() {
            padded.set(x + CROP_PAD, y + CROP_PAD, crop.get(x, y));
        }
    }
    backend.recognize_raster(&padded)
}

// ---------------------------------------------------------------------------
// Template-matching backend
// ---------------------------------------------------------------------------

/// Matches each glyph cell against the embedded font by Hamming distance.
///
/// Line starts and the cell grid origin are unknown in a crop (blocks carry a
/// little background margin and sit at arbitrary offsets), so for each inked
/// row-run the matcher searches a small window of vertical and horizontal
/// alignments and keeps the one with the lowest total distance.
#[derive(Debug, Default, Clone)]
pub struct MockOcr;

/// Ink is anything darker than this, matching the merge threshold default.
const INK_THRESHOLD: u8 = 128;
/// A cell within this Hamming distance of its best template is accepted;
/// anything farther decodes as [`REPLACEMENT`] with zero confidence.
pub(crate) const MAX_MISMATCH: usize = (CELL_W * CELL_H) as usize * 15 / 100;
/// Ink components of at most this many pixels in a crop are scanner salt,
/// not print: the smallest real glyph mark (the apostrophe) is 12 pixels.
/// Salt left in place bridges the blank gap between lines and drags run
/// bounds away from the glyph grid.
const DESPECKLE_MAX_AREA: usize = 3;
/// Extra alignment candidates past the ink bounds, tolerating salt fused
/// directly onto a glyph's edge (which survives despeckling).
const ALIGN_SLACK: i64 = 2;

impl MockOcr {
    /// Hamming distance, abandoning early once `cap` is reached.
    fn distance_capped(a: &[u8], b: &[u8], cap: usize) -> usize {
        let mut d = 0;
        for (x, y) in a.iter().zip(b) {
            if x != y {
                d += 1;
                if d >= cap {
                    return d;
                }
            }
        }
        d
    }

    /// Best (template index, distance) for one cell bitmap.
    fn best_template(cell: &[u8]) -> (usize, usize) {
        let mut best = (0usize, usize::MAX);
        for (i, (_, tpl)) in font::templates().iter().enumerate() {
            let d = Self::distance_capped(cell, tpl, best.1);
            if d < best.1 {
                best = (i, d);
                if d == 0 {
                    break;
                }
            }
        }
        best
    }

    /// Extract the CELL_W x CELL_H cell whose top-left is (`left`, `top`) in
    /// the binarized crop; out-of-bounds pixels read as background.
    fn cell_at(bin: &[u8], w: u32, h: u32, top: i64, left: i64) -> Vec<u8> {
        let mut cell = vec![0u8; (CELL_W * CELL_H) as usize];
        for y in 0..CELL_H as i64 {
            let py = top + y;
            if py < 0 || py >= h as i64 {
                continue;
            }
            for x in 0..CELL_W as i64 {
                let px = left + x;
                if px < 0 || px >= w as i64 {
                    continue;
                }
                cell[(y * CELL_W as i64 + x) as usize] = bin[(py * w as i64 + px) as usize];
            }
        }
        cell
    }

    /// Decode one row-run of ink (one text line). Returns the line's text and
    /// appends each cell's confidence to `confidences`.
    fn decode_run(
        bin: &[u8],
        w: u32,
        rows: (u32, u32),
        cols: (u32, u32),
        confidences: &mut Vec<f64>,
    ) -> String {
        let h = bin.len() as u32 / w;
        let (r0, r1) = rows;
        let (c0, c1) = cols;

        let t_lo = r1 as i64 - CELL_H as i64;
        let t_hi = r0 as i64;
        let t_cands: Vec<i64> = if t_lo <= t_hi + 2 * ALIGN_SLACK {
            (t_lo - ALIGN_SLACK..=t_hi + ALIGN_SLACK).collect()
        } else {
            vec![t_lo] // run far taller than a cell: noise, decode best-effort
        };
        // No slack below l_lo: one more step left would let an alignment a
        // full pitch early tie the true one (its leading cell is blank).
        let l_lo = c0 as i64 - (CELL_W as i64 - 1);
        let l_hi = c0 as i64 + ALIGN_SLACK;

        let mut best: Option<(usize, i64, i64)> = None; // (score, t, l)
        'search: for &t in &t_cands {
            for l in l_lo..=l_hi {
                let ncells = ((c1 as i64 - l) / PITCH as i64 + 1) as usize;
                let cap = best.map_or(usize::MAX, |(s, _, _)| s);
                let mut acc = 0usize;
                for j in 0..ncells {
                    let cell = Self::cell_at(bin, w, h, t, l + j as i64 * PITCH as i64);
                    let (_, d) = Self::best_template(&cell);
                    acc += d;
                    if acc >= cap {
                        break;
                    }
                }
                if acc < cap {
                    best = Some((acc, t, l));
                    if acc == 0 {
                        break 'search;
                    }
                }
            }
        }

        let (_, t, l) = best.expect("alignment search always has candidates");
        let ncells = ((c1 as i64 - l) / PITCH as i64 + 1) as usize;
        let area = (CELL_W * CELL_H) as f64;
        let mut line = String::with_capacity(ncells);
        for j in 0..ncells {
            let cell = Self::cell_at(bin, w, h, t, l + j as i64 * PITCH as i64);
            let (idx, d) = Self::best_template(&cell);
            if d == 0 {
                line.push(font::templates()[idx].0);
                confidences.push(1.0);
            } else if d <= MAX_MISMATCH {
                line.push(font::templates()[idx].0);
                confidences.push(1.0 - d as f64 / area);
            } else {
                line.push(REPLACEMENT);
                confidences.push(0.0);
            }
        }
        // Clean print never ends in a space (the last cell holds the run's
        // rightmost ink); a trailing space is a junk cell past the text.
        while line.ends_with(' ') {
            line.pop();
            confidences.pop();
        }
        line
    }
}

impl OcrBackend for MockOcr {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            name: "mock",
            concurrent_safe: true,
        }
    }

    fn recognize_raster(&self, crop: &GrayRaster) -> Result<OcrResult> {
        let (w, h) = (crop.width(), crop.height());
        let bits = despeckle(&threshold_invert(crop, INK_THRESHOLD), DESPECKLE_MAX_AREA);
        let bin = bits.as_bits();

        let row_has_ink: Vec<bool> = (0..h)
            .map(|y| bin[(y * w) as usize..((y + 1) * w) as usize].contains(&1))
            .collect();

        let mut lines = Vec::new();
        let mut confidences = Vec::new();
        let mut y = 0u32;
        while y < h {
            if !row_has_ink[y as usize] {
                y += 1;
                continue;
            }
            let r0 = y;
            while y < h && row_has_ink[y as usize] {
                y += 1;
            }
            let r1 = y;

            let mut c0 = u32::MAX;
            let mut c1 = 0u32;
            for ry in r0..r1 {
                for x in 0..w {
                    if bin[(ry * w + x) as usize] == 1 {
                        c0 = c0.min(x);
                        c1 = c1.max(x);
                    }
                }
            }
            lines.push(Self::decode_run(&bin, w, (r0, r1), (c0, c1), &mut confidences));
        }

        let mean_confidence = if confidences.is_empty() {
            1.0
        } else {
            confidences.iter().sum::<f64>() / confidences.len() as f64
        };
        Ok(OcrResult {
            text: lines.join("\n"),
            mean_confidence,
        })
    }
}

// ---------------------------------------------------------------------------
// Subprocess backend
// ---------------------------------------------------------------------------

/// Runs an external recognizer once per block.
///
/// Calling convention: `engine <input.pgm> <out_base> [extra args...]` with
/// the transcript expected at `<out_base>.txt`. A missing binary or non-zero
/// exit is fatal ([`Error::OcrUnavailable`]); an engine that exits cleanly
/// but produces no transcript fails only that block.
pub struct SubprocessOcr {
    pub engine: PathBuf,
    /// Extra arguments after input and output base (e.g. a page-segmentation
    /// mode flag — segmentation has already happened upstream).
    pub args: Vec<String>,
    /// Scratch root for per-call work dirs; system temp when `None`.
    pub scratch_dir: Option<PathBuf>,
}

impl SubprocessOcr {
    pub fn new(engine: impl Into<PathBuf>, args: Vec<String>) -> Self {
        SubprocessOcr {
            engine: engine.into(),
            args,
            scratch_dir: None,
        }
    }
}

impl OcrBackend for SubprocessOcr {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            name: "subprocess",
            concurrent_safe: true, // every call gets its own work dir
        }
    }

    fn recognize_raster(&self, crop: &GrayRaster) -> Result<OcrResult> {
        let dir = match &self.scratch_dir {
            Some(root) => tempfile::tempdir_in(root),
            None => tempfile::tempdir(),
        }
        .map_err(Error::Io)?;
        let input = dir.path().join("block.pgm");
        let out_base = dir.path().join("block");
        crate::io::write_gray_pgm(crop, &input)?;

        let output = Command::new(&self.engine)
            .arg(&input)
            .arg(&out_base)
            .args(&self.args)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                Error::OcrUnavailable(format!("cannot run {}: {e}", self.engine.display()))
            })?
            .wait_with_output()
            .map_err(|e| Error::OcrUnavailable(format!("engine failed: {e}")))?;

        if !output.status.success() {
            let mut stderr = String::from_utf8_lossy(&output.stderr).into_owned();
            stderr.truncate(200);
            return Err(Error::OcrUnavailable(format!(
                "{} exited with {}: {}",
                self.engine.display(),
                output.status,
                stderr.trim()
            )));
        }

        let txt_path = out_base.with_extension("txt");
        let mut text = String::new();
        std::fs::File::open(&txt_path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::OcrBlock(format!("engine produced no transcript: {e}")))?;

        Ok(OcrResult {
            text: text.trim_end().to_string(),
            // plain-text engines report no per-glyph scores
            mean_confidence: 1.0,
        })
    }
}
