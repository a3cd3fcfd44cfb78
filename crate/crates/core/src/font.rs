//! Embedded 5x7 bitmap font, rendered at 2x scale.
//!
//! This is the glyph set for synthetic registry pages and the template bank
//! for the built-in recognizer. Covers A-Z, 0-9, space, and `. , - & ( ) / '`.
//! The dash is deliberately full-width: heading leader runs (`----`) must
//! fuse into one bar under the merge kernel.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::raster::GrayRaster;

pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;
pub const SCALE: u32 = 2;
/// Rendered cell size in pixels.
pub const CELL_W: u32 = GLYPH_W * SCALE;
pub const CELL_H: u32 = GLYPH_H * SCALE;
/// Gap between adjacent cells.
pub const CELL_GAP: u32 = 2;
/// Horizontal advance from one cell to the next.
pub const PITCH: u32 = CELL_W + CELL_GAP;
/// Emitted for an unrecognizable cell.
pub const REPLACEMENT: char = '?';

/// Rows are 5-bit patterns, bit 4 = leftmost column.
#[rustfmt::skip]
pub const GLYPHS: &[(char, [u8; 7])] = &[
    ('A', [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11]),
    ('B', [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E]),
    ('C', [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E]),
    ('D', [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E]),
    ('E', [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F]),
    ('F', [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10]),
    ('G', [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F]),
    ('H', [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11]),
    ('I', [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E]),
    ('J', [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C]),
    ('K', [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11]),
    ('L', [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F]),
    ('M', [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11]),
    ('N', [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11]),
    ('O', [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E]),
    ('P', [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10]),
    ('Q', [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D]),
    ('R', [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11]),
    ('S', [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E]),
    ('T', [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04]),
    ('U', [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E]),
    ('V', [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04]),
    ('W', [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A]),
    ('X', [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11]),
    ('Y', [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04]),
    ('Z', [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F]),
    ('0', [0x0E, 0x13, 0x13, 0x15, 0x19, 0x19, 0x0E]),
    ('1', [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x1F]),
    ('2', [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F]),
    ('3', [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E]),
    ('4', [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02]),
    ('5', [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E]),
    ('6', [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E]),
    ('7', [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08]),
    ('8', [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E]),
    ('9', [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C]),
    (' ', [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00]),
    ('.', [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C]),
    (',', [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08]),
    (';', [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x04, 0x08]),
    ('-', [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00]),
    ('&', [0x0C, 0x12, 0x14, 0x08, 0x15, 0x12, 0x0D]),
    ('(', [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02]),
    (')', [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08]),
    ('/', [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10]),
    ('\'', [0x04, 0x04, 0x08, 0x00, 0x00, 0x00, 0x00]),
];

pub fn supported(c: char) -> bool {
    GLYPHS.iter().any(|&(g, _)| g == c)
}

pub fn glyph_rows(c: char) -> Option<&'static [u8; 7]> {
    GLYPHS.iter().find(|&&(g, _)| g == c).map(|(_, rows)| rows)
}

/// Width of `n` rendered cells (no trailing gap).
pub fn text_width(n_glyphs: u32) -> u32 {
    if n_glyphs == 0 {
        0
    } else {
        n_glyphs * PITCH - CELL_GAP
    }
}

/// Scale a 5x7 pattern to the rendered CELL_W x CELL_H bitmap (0/1 bytes).
pub fn scale_pattern(rows: &[u8; 7]) -> Vec<u8> {
    let mut out = vec![0u8; (CELL_W * CELL_H) as usize];
    for (gy, row) in rows.iter().enumerate() {
        for gx in 0..GLYPH_W {
            if (row >> (GLYPH_W - 1 - gx)) & 1 == 1 {
                for sy in 0..SCALE {
                    for sx in 0..SCALE {
                        let x = gx * SCALE + sx;
                        let y = gy as u32 * SCALE + sy;
                        out[(y * CELL_W + x) as usize] = 1;
                    }
                }
            }
        }
    }
    out
}

/// Stamp one line of text with glyph cell tops at `(x, y)`, ink value 0.
pub fn draw_text(img: &mut GrayRaster, x: u32, y: u32, text: &str) -> Result<()> {
    for (i, ch) in text.chars().enumerate() {
        let rows = glyph_rows(ch).ok_or(Error::UnsupportedGlyph(ch))?;
        let pat = scale_pattern(rows);
        let gx = x + i as u32 * PITCH;
        for yy in 0..CELL_H {
            for xx in 0..CELL_W {
                if pat[(yy * CELL_W + xx) as usize] == 1 {
                    img.set(gx + xx, y + yy, 0);
                }
            }
        }
    }
    Ok(())
}

/// All glyphs as rendered-size templates, in `GLYPHS` order.
pub fn templates() -> &'static [(char, Vec<u8>)] {
    static TEMPLATES: OnceLock<Vec<(char, Vec<u8>)>> = OnceLock::new();
    TEMPLATES.get_or_init(|| {
        GLYPHS
            .iter()
            .map(|(c, rows)| (*c, scale_pattern(rows)))
            .collect()
    })
}
