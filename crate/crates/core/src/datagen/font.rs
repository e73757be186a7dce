//! Embedded 5×7 bitmap font: uppercase letters and digits.

use crate::raster::Raster;

pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;
/// Horizontal advance per character, including one column of spacing.
pub const ADVANCE: u32 = GLYPH_W + 1;

// Each row holds five bits, most significant bit leftmost.
const LETTERS: [[u8; 7]; 26] = [
    [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001], // A
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110], // B
    [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110], // C
    [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110], // D
    [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111], // E
    [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000], // F
    [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111], // G
    [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001], // H
    [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // I
    [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100], // J
    [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001], // K
    [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111], // L
    [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001], // M
    [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001], // N
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110], // O
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000], // P
    [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101], // Q
    [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001], // R
    [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110], // S
    [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100], // T
    [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110], // U
    [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100], // V
    [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010], // W
    [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001], // X
    [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100], // Y
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111], // Z
];

const DIGITS: [[u8; 7]; 10] = [
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
];

pub fn glyph(c: char) -> Option<&'static [u8; 7]> {
    match c {
        'A'..='Z' => Some(&LETTERS[c as usize - 'A' as usize]),
        '0'..='9' => Some(&DIGITS[c as usize - '0' as usize]),
        _ => None,
    }
}

/// Pixel size of `text` rendered at `scale`: (width, height).
pub fn text_dims(text: &str, scale: u32) -> (u32, u32) {
    let n = text.chars().count() as u32;
    ((n * ADVANCE).saturating_sub(1) * scale, GLYPH_H * scale)
}

/// Draws `text` with its top-left corner at (x, y). Characters without a
/// glyph (spaces) advance the pen without drawing. Pixels falling outside
/// the raster are skipped.
pub fn draw_text(img: &mut Raster, text: &str, x: u32, y: u32, scale: u32, ink: [u8; 3]) {
    let mut pen = x;
    for c in text.chars() {
        if let Some(rows) = glyph(c) {
            for (gy, row) in rows.iter().enumerate() {
                for gx in 0..GLYPH_W {
                    if row >> (GLYPH_W - 1 - gx) & 1 == 1 {
                        fill(img, pen + gx * scale, y + gy as u32 * scale, scale, ink);
                    }
                }
            }
        }
        pen += ADVANCE * scale;
    }
}

fn fill(img: &mut Raster, x: u32, y: u32, scale: u32, ink: [u8; 3]) {
    for dy in 0..scale {
        for dx in 0..scale {
            if x + dx < img.width() && y + dy < img.height() {
                img.set(x + dx, y + dy, ink);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn glyphs_are_distinct_and_fit() {
        let all: Vec<_> = ('A'..='Z').chain('0'..='9').map(|c| glyph(c).unwrap()).collect();
        let unique: HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), 36);
        assert!(all.iter().flat_map(|g| g.iter()).all(|r| *r < 32));
        assert!(glyph('a').is_none());
    }

    #[test]
    fn rendered_extent_matches_dims() {
        let mut img = Raster::filled(60, 20, [255; 3]);
        draw_text(&mut img, "HI 7", 2, 3, 2, [0, 0, 0]);
        let (w, h) = text_dims("HI 7", 2);
        assert_eq!((w, h), (46, 14));
        let inked: Vec<(u32, u32)> = (0..20)
            .flat_map(|y| (0..60).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) == [0, 0, 0])
            .collect();
        let min_x = inked.iter().map(|p| p.0).min().unwrap();
        let max_x = inked.iter().map(|p| p.0).max().unwrap();
        let min_y = inked.iter().map(|p| p.1).min().unwrap();
        let max_y = inked.iter().map(|p| p.1).max().unwrap();
        // H touches both edges of its cell and 7 reaches the right edge of its top row
        assert_eq!((min_x, max_x + 1), (2, 2 + w));
        assert_eq!((min_y, max_y + 1), (3, 3 + h));
    }
}
