//! Distorted text images for the text category.
//!
//! Each glyph comes from a 5×7 bitmap font and sits in an 8-pixel cell on a
//! 24-pixel-tall canvas with a 4-pixel margin left and right, so an image
//! of `n` glyphs is `8n + 8` pixels wide. Per glyph, a vertical jitter in
//! `[-3, 3]` and a horizontal shear in `[-2, 2]` are drawn from a ChaCha8
//! stream seeded with the caller's seed (jitter first, then shear). A shear
//! of `s` moves the glyph's top row `s` pixels right and leaves the bottom
//! row in place, rows in between are shifted by `round(s * (6 - row) / 6)`.
//!
//! Output is binary PGM (`P5`) with background 255 and ink 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const CANVAS_HEIGHT: usize = 24;
pub const CELL_WIDTH: usize = 8;
pub const MARGIN: usize = 4;
pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;
pub const MAX_JITTER: i32 = 3;
pub const MAX_SHEAR: i32 = 2;
pub const MAX_GLYPHS: usize = 8;

const BACKGROUND: u8 = 255;
const INK: u8 = 0;
/// Top row of an undistorted glyph: (24 - 7) / 2, rounded down.
const BASELINE_TOP: i32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("character {0:?} is not in [A-Z0-9]")]
    InvalidCharset(char),
    #[error("text must be 1 to {MAX_GLYPHS} characters, got {0}")]
    InvalidLength(usize),
}

/// Per-glyph distortion drawn for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphDistortion {
    pub jitter: i32,
    pub shear: i32,
}

/// The distortion sequence `render_text_image` uses for `len` glyphs.
pub fn distortion_plan(len: usize, seed: u64) -> Vec<GlyphDistortion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let jitter = rng.random_range(-MAX_JITTER..=MAX_JITTER);
            let shear = rng.random_range(-MAX_SHEAR..=MAX_SHEAR);
            GlyphDistortion { jitter, shear }
        })
        .collect()
}

/// Row bitmaps for `c`; bit 4 is the leftmost column.
pub fn glyph(c: char) -> Option<[u8; GLYPH_HEIGHT]> {
    let rows = match c {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        _ => return None,
    };
    Some(rows)
}

/// Horizontal offset of glyph row `row` under shear `shear`.
pub fn shear_offset(shear: i32, row: usize) -> i32 {
    let num = shear * (GLYPH_HEIGHT as i32 - 1 - row as i32);
    let den = GLYPH_HEIGHT as i32 - 1;
    // round half away from zero
    if num >= 0 {
        (2 * num + den) / (2 * den)
    } else {
        -((-2 * num + den) / (2 * den))
    }
}

/// Renders `text` as a distorted PGM image.
pub fn render_text_image(text: &str, seed: u64) -> Result<Vec<u8>, RenderError> {
    let glyphs = text
        .chars()
        .map(|c| glyph(c).ok_or(RenderError::InvalidCharset(c)))
        .collect::<Result<Vec<_>, _>>()?;
    if glyphs.is_empty() || glyphs.len() > MAX_GLYPHS {
        return Err(RenderError::InvalidLength(glyphs.len()));
    }

    let width = CELL_WIDTH * glyphs.len() + 2 * MARGIN;
    let mut pixels = vec![BACKGROUND; width * CANVAS_HEIGHT];
    let plan = distortion_plan(glyphs.len(), seed);
    for (i, (rows, d)) in glyphs.iter().zip(&plan).enumerate() {
        // center the 5-wide glyph in its 8-wide cell
        let left = (MARGIN + CELL_WIDTH * i + 1) as i32;
        let top = BASELINE_TOP + d.jitter;
        for (r, bits) in rows.iter().enumerate() {
            let y = top + r as i32;
            let dx = shear_offset(d.shear, r);
            for col in 0..GLYPH_WIDTH {
                if bits & (0x10 >> col) == 0 {
                    continue;
                }
                let x = left + col as i32 + dx;
                if (0..width as i32).contains(&x) && (0..CANVAS_HEIGHT as i32).contains(&y) {
                    pixels[y as usize * width + x as usize] = INK;
                }
            }
        }
    }

    let mut out = format!("P5 {width} {CANVAS_HEIGHT} 255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}
