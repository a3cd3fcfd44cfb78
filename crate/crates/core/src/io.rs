//! On-disk image formats: binary PGM (P5) and PNG in, binary PBM (P4) and
//! overlay PNG out for debugging.

use std::fs;
use std::path::{Path, PathBuf};

use crate::contours::BBox;
use crate::error::{Error, Result};
use crate::raster::{BitRaster, GrayRaster};

// --- PGM (P5) ---

/// Parse ASCII header tokens (with `#` comments) from a PNM byte stream.
/// Returns the token and the index just past it.
fn pnm_token(bytes: &[u8], mut pos: usize) -> Result<(u64, usize)> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        break;
    }
    let start = pos;
    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
        pos += 1;
    }
    if pos == start {
        return Err(Error::BadImage("malformed PNM header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
    let value: u64 = text
        .parse()
        .map_err(|_| Error::BadImage(format!("bad PNM header number {text:?}")))?;
    Ok((value, pos))
}

pub fn read_gray_pgm(path: &Path) -> Result<GrayRaster> {
    let bytes = fs::read(path)?;
    decode_gray_pgm(&bytes)
}

pub fn decode_gray_pgm(bytes: &[u8]) -> Result<GrayRaster> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::BadImage("not a binary PGM (P5) file".into()));
    }
    let (width, pos) = pnm_token(bytes, 2)?;
    let (height, pos) = pnm_token(bytes, pos)?;
    let (maxval, pos) = pnm_token(bytes, pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::BadImage(format!(
            "unsupported PGM maxval {maxval} (8-bit only)"
        )));
    }
    // exactly one whitespace byte separates header from raster data
    let data_start = pos + 1;
    let n = width as usize * height as usize;
    if bytes.len() < data_start + n {
        return Err(Error::BadImage("PGM pixel data truncated".into()));
    }
    let mut data = bytes[data_start..data_start + n].to_vec();
    if maxval != 255 {
        for v in &mut data {
            *v = ((*v as u64 * 255) / maxval) as u8;
        }
    }
    GrayRaster::from_raw(width as u32, height as u32, data)
}

pub fn write_gray_pgm(img: &GrayRaster, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    fs::write(path, out)?;
    Ok(())
}

// --- PBM (P4) ---

/// Dump a binary raster as PBM P4. Rows are packed MSB-first and padded to a
/// byte boundary; foreground (1) is written as the PBM black bit, so the dump
/// shows merged text blobs as black on white. The packing is fixed so dumps
/// of identical rasters are byte-identical.
pub fn write_bit_pbm(img: &BitRaster, path: &Path) -> Result<()> {
    let mut out = format!("P4\n{} {}\n", img.width(), img.height()).into_bytes();
    let row_bytes = (img.width() as usize).div_ceil(8);
    for y in 0..img.height() {
        let mut row = vec![0u8; row_bytes];
        for x in 0..img.width() {
            if img.get(x, y) == 1 {
                row[x as usize / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_bit_pbm(path: &Path) -> Result<BitRaster> {
    let bytes = fs::read(path)?;
    if bytes.len() < 2 || &bytes[0..2] != b"P4" {
        return Err(Error::BadImage("not a binary PBM (P4) file".into()));
    }
    let (width, pos) = pnm_token(&bytes, 2)?;
    let (height, pos) = pnm_token(&bytes, pos)?;
    let data_start = pos + 1;
    let row_bytes = (width as usize).div_ceil(8);
    if bytes.len() < data_start + row_bytes * height as usize {
        return Err(Error::BadImage("PBM pixel data truncated".into()));
    }
    let mut out = BitRaster::zeros(width as u32, height as u32);
    for y in 0..height as u32 {
        let row = &bytes[data_start + y as usize * row_bytes..];
        for x in 0..width as u32 {
            let bit = (row[x as usize / 8] >> (7 - x % 8)) & 1;
            out.set(x, y, bit);
        }
    }
    Ok(out)
}

// --- PNG ---

pub fn read_gray_png(path: &Path) -> Result<GrayRaster> {
    let img = image::open(path)
        .map_err(|e| Error::BadImage(format!("{}: {e}", path.display())))?
        .to_luma8();
    GrayRaster::from_raw(img.width(), img.height(), img.into_raw())
}

/// Load a page image by extension (`.pgm` or `.png`).
pub fn load_gray(path: &Path) -> Result<GrayRaster> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("pgm") => read_gray_pgm(path),
        Some("png") => read_gray_png(path),
        other => Err(Error::BadImage(format!(
            "unsupported page image extension {other:?} ({})",
            path.display()
        ))),
    }
}

/// Page images in a corpus directory, sorted by file name.
pub fn list_pages(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut pages: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                Some("pgm") | Some("png")
            )
        })
        .collect();
    pages.sort();
    Ok(pages)
}

/// Debug overlay: the page in gray with colored bbox outlines per group.
pub fn write_overlay_png(img: &GrayRaster, groups: &[([u8; 3], Vec<BBox>)], path: &Path) -> Result<()> {
    let (w, h) = (img.width(), img.height());
    let mut rgb = image::RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = img.get(x, y);
            rgb.put_pixel(x, y, image::Rgb([v, v, v]));
        }
    }
    let mut draw = |x: u32, y: u32, c: [u8; 3]| {
        if x < w && y < h {
            rgb.put_pixel(x, y, image::Rgb(c));
        }
    };
    for (color, boxes) in groups {
        for b in boxes {
            let right = b.right.saturating_sub(1);
            let bottom = b.bottom.saturating_sub(1);
            for x in b.left..b.right {
                draw(x, b.top, *color);
                draw(x, bottom, *color);
            }
            for y in b.top..b.bottom {
                draw(b.left, y, *color);
                draw(right, y, *color);
            }
        }
    }
    rgb.save(path)
        .map_err(|e| Error::BadImage(format!("overlay write failed: {e}")))?;
    Ok(())
}
