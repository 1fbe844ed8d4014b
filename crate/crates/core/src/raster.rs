//! RGB raster buffer, binary PPM (P6) codec and the built-in bitmap font.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];

/// Font cell geometry: 5x7 glyphs drawn at scale 2 with a 2 px gap.
pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;
pub const FONT_SCALE: usize = 2;
pub const CELL_W: usize = GLYPH_W * FONT_SCALE;
pub const CELL_H: usize = GLYPH_H * FONT_SCALE;
pub const CHAR_ADVANCE: usize = CELL_W + 2;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("not a binary P6 image")]
    BadMagic,
    #[error("malformed PPM header: {0}")]
    BadHeader(String),
    #[error("only maxval 255 is supported, got {0}")]
    BadMaxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{})", self.width, self.height)
    }
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Raster { width, height, pixels: fill.repeat(width * height) }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.pixels[i..i + 3].copy_from_slice(&c);
        }
    }

    pub fn set_i(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 {
            self.set(x as usize, y as usize, c);
        }
    }

    /// Fill the inclusive rectangle `(x0,y0)-(x1,y1)`, clipped to the raster.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        let xa = x0.max(0) as usize;
        let ya = y0.max(0) as usize;
        let xb = (x1.min(self.width as i64 - 1)).max(-1);
        let yb = (y1.min(self.height as i64 - 1)).max(-1);
        if xb < xa as i64 || yb < ya as i64 {
            return;
        }
        for y in ya..=yb as usize {
            let row = (y * self.width) * 3;
            for px in self.pixels[row + xa * 3..row + (xb as usize + 1) * 3].chunks_exact_mut(3) {
                px.copy_from_slice(&c);
            }
        }
    }

    /// One-pixel rectangle outline.
    pub fn stroke_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        self.fill_rect(x0, y0, x1, y0, c);
        self.fill_rect(x0, y1, x1, y1, c);
        self.fill_rect(x0, y0, x0, y1, c);
        self.fill_rect(x1, y0, x1, y1, c);
    }

    /// Thick line: every pixel whose centre lies within `half` of the segment.
    pub fn draw_line(&mut self, a: (f64, f64), b: (f64, f64), half: f64, c: Rgb) {
        let x0 = (a.0.min(b.0) - half).floor().max(0.0) as i64;
        let x1 = (a.0.max(b.0) + half).ceil() as i64;
        let y0 = (a.1.min(b.1) - half).floor().max(0.0) as i64;
        let y1 = (a.1.max(b.1) + half).ceil() as i64;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = dx.hypot(dy);
        for y in y0..=y1.min(self.height as i64 - 1) {
            for x in x0..=x1.min(self.width as i64 - 1) {
                // Distance to the infinite line bounds the segment distance from below.
                let (px, py) = (x as f64 + 0.5 - a.0, y as f64 + 0.5 - a.1);
                if len > 0.0 && (px * dy - py * dx).abs() > (half + 1e-9) * len {
                    continue;
                }
                let (d, _) = crate::geometry::point_segment_distance((x as f64 + 0.5, y as f64 + 0.5), a, b);
                if d <= half {
                    self.set(x as usize, y as usize, c);
                }
            }
        }
    }

    /// Draw text with the built-in font; `(x, y)` is the top-left of the
    /// first cell. Characters outside the charset render as blank cells.
    pub fn draw_text(&mut self, x: i64, y: i64, text: &str, c: Rgb) {
        let font = font();
        for (i, ch) in text.chars().enumerate() {
            let Some(glyph) = font.glyph(ch) else { continue };
            let cx = x + (i * CHAR_ADVANCE) as i64;
            for (gy, row) in glyph.iter().enumerate() {
                for gx in 0..GLYPH_W {
                    if row & (1 << (GLYPH_W - 1 - gx)) != 0 {
                        let px = cx + (gx * FONT_SCALE) as i64;
                        let py = y + (gy * FONT_SCALE) as i64;
                        self.fill_rect(px, py, px + FONT_SCALE as i64 - 1, py + FONT_SCALE as i64 - 1, c);
                    }
                }
            }
        }
    }

    /// Binary PPM, maxval 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Raster, PpmError> {
        if !bytes.starts_with(b"P6") {
            return Err(PpmError::BadMagic);
        }
        let mut pos = 2;
        let mut fields = Vec::new();
        while fields.len() < 3 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(PpmError::BadHeader("missing dimension".into()));
            }
            let s = std::str::from_utf8(&bytes[start..pos]).expect("digits are ASCII");
            fields.push(s.parse::<u32>().map_err(|e| PpmError::BadHeader(e.to_string()))?);
        }
        if fields[2] != 255 {
            return Err(PpmError::BadMaxval(fields[2]));
        }
        // Exactly one whitespace byte separates the header from the data.
        pos += 1;
        let (w, h) = (fields[0] as usize, fields[1] as usize);
        let expected = w * h * 3;
        let data = bytes.get(pos..).unwrap_or(&[]);
        if data.len() < expected {
            return Err(PpmError::Truncated { expected, got: data.len() });
        }
        Ok(Raster { width: w, height: h, pixels: data[..expected].to_vec() })
    }
}

/// Glyph rows as 5-bit masks (MSB = leftmost column).
pub type Glyph = [u8; GLYPH_H];

pub struct Font {
    glyphs: Vec<(char, Glyph)>,
    by_char: HashMap<char, Glyph>,
    by_bits: HashMap<Glyph, char>,
}

impl Font {
    pub fn parse(table: &str) -> Font {
        let mut glyphs = Vec::new();
        let mut lines = table.lines().filter(|l| !l.starts_with('#') || l.len() == GLYPH_W);
        while let Some(header) = lines.next() {
            let Some(rest) = header.strip_prefix("glyph ") else { continue };
            let ch = rest.chars().next().expect("glyph header names a character");
            let mut glyph = [0u8; GLYPH_H];
            for row in glyph.iter_mut() {
                let line = lines.next().expect("glyph has 7 rows");
                for (i, b) in line.bytes().take(GLYPH_W).enumerate() {
                    if b == b'#' {
                        *row |= 1 << (GLYPH_W - 1 - i);
                    }
                }
            }
            glyphs.push((ch, glyph));
        }
        let by_char = glyphs.iter().copied().collect();
        let by_bits = glyphs.iter().map(|(c, g)| (*g, *c)).collect();
        Font { glyphs, by_char, by_bits }
    }

    pub fn glyph(&self, ch: char) -> Option<&Glyph> {
        self.by_char.get(&ch)
    }

    pub fn lookup(&self, bits: &Glyph) -> Option<char> {
        self.by_bits.get(bits).copied()
    }

    pub fn charset(&self) -> impl Iterator<Item = char> + '_ {
        self.glyphs.iter().map(|(c, _)| *c)
    }

    pub fn supports(&self, text: &str) -> bool {
        text.chars().all(|c| self.by_char.contains_key(&c))
    }
}

static FONT: OnceLock<Font> = OnceLock::new();

pub fn font() -> &'static Font {
    FONT.get_or_init(|| Font::parse(include_str!("../assets/font5x7.txt")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn font_table_is_complete_and_unique() {
        let f = font();
        let chars: String = f.charset().collect();
        for c in ('A'..='Z').chain('a'..='z').chain('0'..='9') {
            assert!(chars.contains(c), "missing {c}");
        }
        for c in " .,:;_'\"()+=-/".chars() {
            assert!(chars.contains(c), "missing {c:?}");
        }
        assert_eq!(f.by_bits.len(), f.glyphs.len());
        assert_eq!(f.lookup(&[0; 7]), Some(' '));
    }

    #[test]
    fn ppm_round_trip() {
        let mut r = Raster::new(7, 5, WHITE);
        r.set(3, 2, [1, 2, 3]);
        let bytes = r.to_ppm();
        assert!(bytes.starts_with(b"P6\n7 5\n255\n"));
        assert_eq!(Raster::from_ppm(&bytes).unwrap(), r);
        assert!(matches!(Raster::from_ppm(b"P3\n1 1\n255\n"), Err(PpmError::BadMagic)));
        assert!(matches!(Raster::from_ppm(b"P6\n2 2\n255\n\0\0"), Err(PpmError::Truncated { .. })));
    }

    #[test]
    fn fill_rect_clips() {
        let mut r = Raster::new(4, 4, WHITE);
        r.fill_rect(-3, -3, 1, 1, BLACK);
        assert_eq!(r.get(1, 1), BLACK);
        assert_eq!(r.get(2, 2), WHITE);
        r.fill_rect(10, 10, 20, 20, BLACK);
    }
}
