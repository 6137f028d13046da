//! Image value types and netpbm (PGM/PPM) reading and writing.
//!
//! Only 8-bit files (maxval 255) are accepted. Grayscale inputs expand to
//! RGB pixels with equal channels.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("unsupported image format (expected P2, P3, P5 or P6)")]
    UnsupportedFormat,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} samples, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("pixel buffer of length {len} does not match {width}x{height}")]
    SizeMismatch { width: u32, height: u32, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Pixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Pixel {
    pub const BLACK: Pixel = Pixel { r: 0, g: 0, b: 0 };
    pub const WHITE: Pixel = Pixel {
        r: 255,
        g: 255,
        b: 255,
    };

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Pixel { r, g, b }
    }

    pub const fn gray(v: u8) -> Self {
        Pixel { r: v, g: v, b: v }
    }

    /// Floor of the channel mean.
    pub fn luma(self) -> u8 {
        ((self.r as u16 + self.g as u16 + self.b as u16) / 3) as u8
    }
}

/// Row-major RGB image. Width and height are at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Pixel>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<Pixel>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize {
            return Err(RasterError::SizeMismatch {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: u32, height: u32, fill: Pixel) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        RasterImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> Pixel {
        self.pixels[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, p: Pixel) {
        let i = self.index(x, y);
        self.pixels[i] = p;
    }
}

/// Two-valued ridge map; `true` cells are black (ridge).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    black: Vec<bool>,
}

impl BinaryImage {
    /// All-white image.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        BinaryImage {
            width,
            height,
            black: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_cells(width: u32, height: u32, black: Vec<bool>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || black.len() != width as usize * height as usize {
            return Err(RasterError::SizeMismatch {
                width,
                height,
                len: black.len(),
            });
        }
        Ok(BinaryImage {
            width,
            height,
            black,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.black
    }

    pub fn is_black(&self, x: u32, y: u32) -> bool {
        self.black[y as usize * self.width as usize + x as usize]
    }

    /// Out-of-bounds coordinates read as white.
    pub fn is_black_at(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.is_black(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, black: bool) {
        let i = y as usize * self.width as usize + x as usize;
        self.black[i] = black;
    }

    pub fn black_count(&self) -> usize {
        self.black.iter().filter(|&&b| b).count()
    }

    pub fn row(&self, y: u32) -> &[bool] {
        let w = self.width as usize;
        &self.black[y as usize * w..(y as usize + 1) * w]
    }

    /// Iterates black cells in row-major order.
    pub fn black_cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.black
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i as u32 % w, i as u32 / w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveFormat {
    /// ASCII graymap of the floor channel mean.
    P2FromLuma,
    /// ASCII pixmap, lossless.
    P3,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Magic {
    AsciiGray,
    AsciiRgb,
    BinaryGray,
    BinaryRgb,
}

impl Magic {
    fn channels(self) -> usize {
        match self {
            Magic::AsciiGray | Magic::BinaryGray => 1,
            Magic::AsciiRgb | Magic::BinaryRgb => 3,
        }
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next whitespace-delimited token, or `None` at end of input.
    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<u32, RasterError> {
        let tok = self
            .token()
            .ok_or_else(|| RasterError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                RasterError::MalformedHeader(format!(
                    "non-numeric {what}: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Decodes a P2, P3, P5 or P6 file.
pub fn load_image(bytes: &[u8]) -> Result<RasterImage, RasterError> {
    if bytes.is_empty() || bytes == b"P" {
        return Err(RasterError::MalformedHeader("truncated magic".into()));
    }
    if bytes.len() < 2 {
        return Err(RasterError::UnsupportedFormat);
    }
    let magic = match &bytes[..2] {
        b"P2" => Magic::AsciiGray,
        b"P3" => Magic::AsciiRgb,
        b"P5" => Magic::BinaryGray,
        b"P6" => Magic::BinaryRgb,
        _ => return Err(RasterError::UnsupportedFormat),
    };
    let mut cur = Cursor {
        data: bytes,
        pos: 2,
    };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(RasterError::UnsupportedFormat);
    }
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(RasterError::MalformedHeader("zero dimension".into()));
    }
    if width > 65_535 || height > 65_535 {
        return Err(RasterError::MalformedHeader(
            "dimension exceeds 65535".into(),
        ));
    }
    if maxval != 255 {
        return Err(RasterError::MalformedHeader(format!(
            "maxval {maxval} (only 255 supported)"
        )));
    }

    let channels = magic.channels();
    let expected = width as usize * height as usize * channels;
    let samples: Vec<u8> = match magic {
        Magic::AsciiGray | Magic::AsciiRgb => {
            let mut out = Vec::with_capacity(expected);
            while out.len() < expected {
                // A sample running into end of input may itself be cut short.
                let tok = match cur.token() {
                    Some(tok) if cur.pos < bytes.len() => tok,
                    _ => {
                        return Err(RasterError::TruncatedData {
                            expected,
                            found: out.len(),
                        })
                    }
                };
                let v = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse::<u32>().ok())
                    .filter(|&v| v <= 255)
                    .ok_or_else(|| {
                        RasterError::MalformedHeader(format!(
                            "bad sample {:?}",
                            String::from_utf8_lossy(tok)
                        ))
                    })?;
                out.push(v as u8);
            }
            out
        }
        Magic::BinaryGray | Magic::BinaryRgb => {
            // Exactly one whitespace byte separates maxval from the raster.
            let start = cur.pos + 1;
            let avail = bytes.len().saturating_sub(start);
            if start > bytes.len() || avail < expected {
                return Err(RasterError::TruncatedData {
                    expected,
                    found: avail,
                });
            }
            bytes[start..start + expected].to_vec()
        }
    };

    let pixels = if channels == 1 {
        samples.into_iter().map(Pixel::gray).collect()
    } else {
        samples
            .chunks_exact(3)
            .map(|c| Pixel::new(c[0], c[1], c[2]))
            .collect()
    };
    RasterImage::new(width, height, pixels)
}

/// Encodes as ASCII netpbm: one raster row per line, single spaces between
/// samples, trailing newline.
pub fn save_image(img: &RasterImage, format: SaveFormat) -> Vec<u8> {
    let (magic, per_px) = match format {
        SaveFormat::P2FromLuma => ("P2", 4),
        SaveFormat::P3 => ("P3", 12),
    };
    let mut out = String::with_capacity(16 + img.pixels.len() * per_px);
    let _ = write!(out, "{magic}\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width as usize) {
        for (i, p) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match format {
                SaveFormat::P2FromLuma => {
                    let _ = write!(out, "{}", p.luma());
                }
                SaveFormat::P3 => {
                    let _ = write!(out, "{} {} {}", p.r, p.g, p.b);
                }
            }
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Black cells become (0,0,0), all others (255,255,255).
pub fn binary_to_raster(b: &BinaryImage) -> RasterImage {
    RasterImage {
        width: b.width,
        height: b.height,
        pixels: b
            .black
            .iter()
            .map(|&black| if black { Pixel::BLACK } else { Pixel::WHITE })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_graymap() {
        let img = load_image(b"P2\n1 1\n255\n0\n").unwrap();
        assert_eq!((img.width(), img.height()), (1, 1));
        assert_eq!(img.get(0, 0), Pixel::BLACK);
    }

    #[test]
    fn ascii_pixmap_extremes() {
        let img = load_image(b"P3\n2 1\n255\n255 255 255 0 0 0\n").unwrap();
        assert_eq!(img.pixels(), &[Pixel::WHITE, Pixel::BLACK]);
    }

    #[test]
    fn binary_graymap_row_major() {
        let mut bytes = b"P5\n4 3\n255\n".to_vec();
        bytes.extend(0u8..12);
        let img = load_image(&bytes).unwrap();
        // y * width + x = 2 * 4 + 1
        assert_eq!(img.get(1, 2), Pixel::gray(9));
    }

    #[test]
    fn binary_pixmap() {
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend([1, 2, 3, 4, 5, 6]);
        let img = load_image(&bytes).unwrap();
        assert_eq!(img.pixels(), &[Pixel::new(1, 2, 3), Pixel::new(4, 5, 6)]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = load_image(b"P2\n# made by hand\n2 1 # dims\n255\n7 8\n").unwrap();
        assert_eq!(img.pixels(), &[Pixel::gray(7), Pixel::gray(8)]);
    }

    #[test]
    fn rejects_bad_headers() {
        assert_eq!(
            load_image(b"P1\n1 1\n1\n"),
            Err(RasterError::UnsupportedFormat)
        );
        assert_eq!(load_image(b"GIF89a"), Err(RasterError::UnsupportedFormat));
        assert!(matches!(
            load_image(b"P2\nx 1\n255\n0\n"),
            Err(RasterError::MalformedHeader(_))
        ));
        assert!(matches!(
            load_image(b"P2\n1 1\n65535\n0\n"),
            Err(RasterError::MalformedHeader(_))
        ));
        assert!(matches!(
            load_image(b"P2\n1 1\n15\n0\n"),
            Err(RasterError::MalformedHeader(_))
        ));
        assert_eq!(
            load_image(b"P3\n2 1\n255\n1 2 3 4\n"),
            Err(RasterError::TruncatedData {
                expected: 6,
                found: 4
            })
        );
    }

    #[test]
    fn save_black_pixel() {
        let img = RasterImage::filled(1, 1, Pixel::BLACK);
        assert_eq!(save_image(&img, SaveFormat::P3), b"P3\n1 1\n255\n0 0 0\n");
    }

    #[test]
    fn save_luma_floors_the_mean() {
        let img = RasterImage::filled(2, 2, Pixel::new(30, 60, 90));
        assert_eq!(
            save_image(&img, SaveFormat::P2FromLuma),
            b"P2\n2 2\n255\n60 60\n60 60\n"
        );
        let img = RasterImage::filled(1, 1, Pixel::new(1, 1, 2));
        assert_eq!(
            save_image(&img, SaveFormat::P2FromLuma),
            b"P2\n1 1\n255\n1\n"
        );
    }

    #[test]
    fn binary_to_raster_colors() {
        let mut b = BinaryImage::new(2, 2);
        assert!(binary_to_raster(&b)
            .pixels()
            .iter()
            .all(|&p| p == Pixel::WHITE));
        b.set(0, 0, true);
        let r = binary_to_raster(&b);
        assert_eq!(r.get(0, 0), Pixel::BLACK);
        assert_eq!(r.get(1, 0), Pixel::WHITE);
    }

    #[test]
    fn binary_to_raster_inverts_filter() {
        let mut b = BinaryImage::new(5, 4);
        for (x, y) in [(0, 0), (2, 1), (4, 3), (3, 3)] {
            b.set(x, y, true);
        }
        let back = crate::preprocess::filter(&binary_to_raster(&b), 128).unwrap();
        assert_eq!(back, b);
    }

    fn arb_image(max: u32) -> impl Strategy<Value = RasterImage> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<(u8, u8, u8)>(), (w * h) as usize).prop_map(move |v| {
                RasterImage::new(
                    w,
                    h,
                    v.into_iter().map(|(r, g, b)| Pixel::new(r, g, b)).collect(),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn p3_round_trip(img in arb_image(8)) {
            prop_assert_eq!(load_image(&save_image(&img, SaveFormat::P3)).unwrap(), img);
        }

        #[test]
        fn row_major_addressing(img in arb_image(9)) {
            let mut i = 0;
            for y in 0..img.height() {
                for x in 0..img.width() {
                    prop_assert_eq!(img.get(x, y), img.pixels()[i]);
                    i += 1;
                }
            }
        }

        #[test]
        fn every_truncated_prefix_is_rejected(img in arb_image(4)) {
            let bytes = save_image(&img, SaveFormat::P3);
            for cut in 0..bytes.len() {
                let err = load_image(&bytes[..cut]).unwrap_err();
                let data_err = matches!(
                    err,
                    RasterError::TruncatedData { .. } | RasterError::MalformedHeader(_)
                );
                prop_assert!(data_err, "prefix {} gave {:?}", cut, err);
            }
        }
    }
}
