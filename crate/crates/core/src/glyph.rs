//! Built-in 5×7 dot-matrix font and the formula rasterizer.

use serde::{Deserialize, Serialize};

use crate::dataset::AdditionKey;
use crate::error::{Error, Result};

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// A 5×7 binary glyph. Each row is stored in the low five bits, MSB = leftmost column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphBitmap {
    pub ch: char,
    pub rows: [u8; GLYPH_H],
}

impl GlyphBitmap {
    #[inline]
    pub fn ink(&self, row: usize, col: usize) -> bool {
        (self.rows[row] >> (GLYPH_W - 1 - col)) & 1 == 1
    }

    /// Inclusive column range containing ink.
    pub fn ink_cols(&self) -> (usize, usize) {
        let mask = self.rows.iter().fold(0u8, |a, r| a | r);
        let first = (0..GLYPH_W).find(|&c| (mask >> (GLYPH_W - 1 - c)) & 1 == 1).unwrap_or(0);
        let last = (0..GLYPH_W).rev().find(|&c| (mask >> (GLYPH_W - 1 - c)) & 1 == 1).unwrap_or(0);
        (first, last)
    }

    /// Inclusive row range containing ink.
    pub fn ink_rows(&self) -> (usize, usize) {
        let first = self.rows.iter().position(|&r| r != 0).unwrap_or(0);
        let last = self.rows.iter().rposition(|&r| r != 0).unwrap_or(0);
        (first, last)
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut rows = self.rows;
        for r in rows.iter_mut() {
            *r = r.reverse_bits() >> (8 - GLYPH_W);
        }
        Self { ch: self.ch, rows }
    }

    pub fn flip_vertical(&self) -> Self {
        let mut rows = self.rows;
        rows.reverse();
        Self { ch: self.ch, rows }
    }
}

const FONT: [GlyphBitmap; 11] = [
    GlyphBitmap { ch: '0', rows: [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110] },
    GlyphBitmap { ch: '1', rows: [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110] },
    GlyphBitmap { ch: '2', rows: [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111] },
    GlyphBitmap { ch: '3', rows: [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110] },
    GlyphBitmap { ch: '4', rows: [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010] },
    GlyphBitmap { ch: '5', rows: [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110] },
    GlyphBitmap { ch: '6', rows: [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110] },
    GlyphBitmap { ch: '7', rows: [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000] },
    GlyphBitmap { ch: '8', rows: [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110] },
    GlyphBitmap { ch: '9', rows: [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100] },
    GlyphBitmap { ch: '+', rows: [0b00000, 0b00100, 0b00100, 0b11111, 0b00100, 0b00100, 0b00000] },
];

/// All glyphs of the built-in font, digits first.
pub fn font() -> &'static [GlyphBitmap] {
    &FONT
}

pub fn glyph_for(c: char) -> Result<GlyphBitmap> {
    match c {
        '0'..='9' => Ok(FONT[c as usize - '0' as usize]),
        '+' => Ok(FONT[10]),
        other => Err(Error::UnsupportedGlyph(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Auto,
    Fixed(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub gap_cells: u32,
    pub ink: u8,
    pub background: u8,
    pub scale: Scale,
}

impl RenderConfig {
    /// Square canvas with margin `max(2, size / 28)`: 8 px at 224, 2 px at 64.
    pub fn square(size: u32) -> Self {
        Self::for_canvas(size, size)
    }

    /// Default layout for a `width`×`height` canvas (margin from the shorter side).
    pub fn for_canvas(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            margin: (width.min(height) / 28).max(2),
            gap_cells: 1,
            ink: 0,
            background: 255,
            scale: Scale::Auto,
        }
    }

    pub fn preset_224() -> Self {
        Self::square(224)
    }

    pub fn preset_64() -> Self {
        Self::square(64)
    }

    fn check_colors(&self) -> Result<()> {
        if self.ink == self.background {
            return Err(Error::InvalidRenderConfig("ink equals background".into()));
        }
        Ok(())
    }
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self::preset_64()
    }
}

/// Number of decimal digits of `v` (at least one).
pub fn digit_count(v: u32) -> u32 {
    v.checked_ilog10().map_or(1, |l| l + 1)
}

/// Width in glyph cells of a `g`-glyph string, gaps included.
fn cells_wide(g: u32, gap: u32) -> u32 {
    GLYPH_W as u32 * g + gap * (g - 1)
}

/// Largest integer scale at which "n_max+n_max" fits inside the margins.
pub fn auto_scale(n_max: u32, cfg: &RenderConfig) -> Result<u32> {
    cfg.check_colors()?;
    let g = 2 * digit_count(n_max) + 1;
    let cells = cells_wide(g, cfg.gap_cells);
    let avail_w = cfg.width.saturating_sub(2 * cfg.margin);
    let avail_h = cfg.height.saturating_sub(2 * cfg.margin);
    let s = (avail_w / cells).min(avail_h / GLYPH_H as u32);
    if s == 0 {
        return Err(Error::CanvasTooSmall {
            n_max,
            detail: format!(
                "{g} glyphs need at least {}x{} px plus {} px margins, canvas is {}x{}",
                cells, GLYPH_H, cfg.margin, cfg.width, cfg.height
            ),
        });
    }
    Ok(s)
}

/// Scale actually used for a set with maximum integer `n_max`.
pub fn resolve_scale(n_max: u32, cfg: &RenderConfig) -> Result<u32> {
    let max = auto_scale(n_max, cfg)?;
    match cfg.scale {
        Scale::Auto => Ok(max),
        Scale::Fixed(0) => Err(Error::InvalidRenderConfig("scale must be positive".into())),
        Scale::Fixed(s) if s > max => Err(Error::CanvasTooSmall {
            n_max,
            detail: format!("fixed scale {s} exceeds the largest fitting scale {max}"),
        }),
        Scale::Fixed(s) => Ok(s),
    }
}

/// Grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, pixels: vec![value; (width * height) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of pixels different from `background`.
    pub fn ink_bbox(&self, background: u8) -> Option<(u32, u32, u32, u32)> {
        let mut bbox: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) != background {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                    });
                }
            }
        }
        bbox
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

pub fn formula_string(key: AdditionKey) -> String {
    format!("{}+{}", key.n, key.m)
}

/// Draws "n+m" with its ink bounding box centered on the canvas; an odd
/// leftover pixel goes to the right/bottom.
pub fn render_formula(key: AdditionKey, n_max: u32, cfg: &RenderConfig) -> Result<Image> {
    let s = resolve_scale(n_max, cfg)? as i64;
    let text = formula_string(key);
    let glyphs = text.chars().map(glyph_for).collect::<Result<Vec<_>>>()?;
    let pitch = (GLYPH_W as u32 + cfg.gap_cells) as i64;

    // ink extent in scale-1 cell units
    let left = glyphs[0].ink_cols().0 as i64;
    let last = glyphs.len() as i64 - 1;
    let right = last * pitch + glyphs[glyphs.len() - 1].ink_cols().1 as i64 + 1;
    let top = glyphs.iter().map(|g| g.ink_rows().0).min().unwrap_or(0) as i64;
    let bottom = glyphs.iter().map(|g| g.ink_rows().1).max().unwrap_or(0) as i64 + 1;

    let (w, h) = (cfg.width as i64, cfg.height as i64);
    let ox = (w - (right - left) * s) / 2 - left * s;
    let oy = (h - (bottom - top) * s) / 2 - top * s;

    let mut img = Image::filled(cfg.width, cfg.height, cfg.background);
    for (i, g) in glyphs.iter().enumerate() {
        let gx = ox + i as i64 * pitch * s;
        for row in 0..GLYPH_H {
            for col in 0..GLYPH_W {
                if !g.ink(row, col) {
                    continue;
                }
                let x0 = gx + col as i64 * s;
                let y0 = oy + row as i64 * s;
                debug_assert!(x0 >= 0 && y0 >= 0 && x0 + s <= w && y0 + s <= h);
                for y in y0..y0 + s {
                    let base = (y * w) as usize;
                    img.pixels[base + x0 as usize..base + (x0 + s) as usize].fill(cfg.ink);
                }
            }
        }
    }
    Ok(img)
}
