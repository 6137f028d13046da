//! The three-stage cleanup chain: filtering, enhancement, and shaping
//! (lining followed by disk smoothing).

use thiserror::Error;

use crate::raster::{BinaryImage, RasterImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("threshold {0} outside [0, 255]")]
    BadThreshold(u32),
    #[error("ridge thickness must be odd and at least 1, got {0}")]
    BadThickness(u32),
    #[error("stage {stage} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        stage: usize,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub threshold: u32,
    pub ridge_thickness: u32,
    pub shape_radius: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            threshold: 128,
            ridge_thickness: 3,
            shape_radius: 1,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.threshold > 255 {
            return Err(PreprocessError::BadThreshold(self.threshold));
        }
        if self.ridge_thickness.is_multiple_of(2) {
            return Err(PreprocessError::BadThickness(self.ridge_thickness));
        }
        Ok(())
    }
}

/// Global threshold on the floor mean of the channels: a cell is black iff
/// its mean intensity is strictly below `threshold`.
pub fn filter(img: &RasterImage, threshold: u32) -> Result<BinaryImage, PreprocessError> {
    if threshold > 255 {
        return Err(PreprocessError::BadThreshold(threshold));
    }
    let cells = img
        .pixels()
        .iter()
        .map(|p| (p.luma() as u32) < threshold)
        .collect();
    Ok(BinaryImage::from_cells(img.width(), img.height(), cells).expect("dimensions preserved"))
}

/// Normalizes ridge width row by row. Every maximal horizontal black run
/// longer than `ridge_thickness` shrinks to that width around the run's
/// midpoint; shorter runs are kept as they are.
pub fn enhance(b: &BinaryImage, ridge_thickness: u32) -> Result<BinaryImage, PreprocessError> {
    if ridge_thickness.is_multiple_of(2) {
        return Err(PreprocessError::BadThickness(ridge_thickness));
    }
    let mut out = BinaryImage::new(b.width(), b.height());
    let half = (ridge_thickness / 2) as usize;
    let last = b.width() as usize - 1;
    for y in 0..b.height() {
        let row = b.row(y);
        let mut x = 0;
        while x < row.len() {
            if !row[x] {
                x += 1;
                continue;
            }
            let start = x;
            while x < row.len() && row[x] {
                x += 1;
            }
            let end = x - 1;
            let (lo, hi) = if end - start < ridge_thickness as usize {
                (start, end)
            } else {
                let mid = (start + end) / 2;
                (mid.saturating_sub(half), (mid + half).min(last))
            };
            for cx in lo..=hi {
                out.set(cx as u32, y, true);
            }
        }
    }
    Ok(out)
}

/// Neighbors of a cell in the order P2..P9: N, NE, E, SE, S, SW, W, NW.
pub(crate) const RING: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

pub(crate) fn ring_values(b: &BinaryImage, x: u32, y: u32) -> [bool; 8] {
    RING.map(|(dx, dy)| b.is_black_at(x as i64 + dx, y as i64 + dy))
}

/// Zhang–Suen thinning, iterated until neither sub-iteration deletes a cell.
///
/// An isolated 2×2 block would be erased whole by the plain algorithm; its
/// lower-right cell is retained so no component disappears.
pub fn line(b: &BinaryImage) -> BinaryImage {
    let mut img = b.clone();
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for second_pass in [false, true] {
            doomed.clear();
            for (x, y) in img.black_cells() {
                let n = ring_values(&img, x, y);
                let count = n.iter().filter(|&&v| v).count();
                if !(2..=6).contains(&count) {
                    continue;
                }
                let transitions = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
                if transitions != 1 {
                    continue;
                }
                let [p2, _, p4, _, p6, _, p8, _] = n;
                let removable = if second_pass {
                    !(p2 && p4 && p8) && !(p2 && p6 && p8)
                } else {
                    !(p2 && p4 && p6) && !(p4 && p6 && p8)
                };
                if removable && !is_isolated_square_anchor(&n) {
                    doomed.push((x, y));
                }
            }
            for &(x, y) in &doomed {
                img.set(x, y, false);
            }
            changed |= !doomed.is_empty();
        }
        if !changed {
            return img;
        }
    }
}

/// True for the lower-right cell of a 2×2 block with no other neighbors.
fn is_isolated_square_anchor(n: &[bool; 8]) -> bool {
    // Only N, NW and W set.
    *n == [true, false, false, false, false, false, true, true]
}

/// Morphological dilation by the disk `dx² + dy² ≤ radius²`.
pub fn shape(b: &BinaryImage, radius: u32) -> BinaryImage {
    if radius == 0 {
        return b.clone();
    }
    let r = radius as i64;
    let disk: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let (w, h) = (b.width() as i64, b.height() as i64);
    let mut out = BinaryImage::new(b.width(), b.height());
    for (x, y) in b.black_cells() {
        for &(dx, dy) in &disk {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < w && ny < h {
                out.set(nx as u32, ny as u32, true);
            }
        }
    }
    out
}

/// Outputs of every stage, each feeding the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stages {
    pub filtered: BinaryImage,
    pub enhanced: BinaryImage,
    pub lined: BinaryImage,
    pub shaped: BinaryImage,
}

impl Stages {
    pub const NAMES: [&'static str; 4] = ["filter", "enhance", "line", "shape"];

    pub fn as_array(&self) -> [&BinaryImage; 4] {
        [&self.filtered, &self.enhanced, &self.lined, &self.shaped]
    }

    pub fn into_vec(self) -> Vec<BinaryImage> {
        vec![self.filtered, self.enhanced, self.lined, self.shaped]
    }
}

pub fn run_pipeline(img: &RasterImage, cfg: &PreprocessConfig) -> Result<Stages, PreprocessError> {
    cfg.validate()?;
    let filtered = filter(img, cfg.threshold)?;
    let enhanced = enhance(&filtered, cfg.ridge_thickness)?;
    let lined = line(&enhanced);
    let shaped = shape(&lined, cfg.shape_radius);
    Ok(Stages {
        filtered,
        enhanced,
        lined,
        shaped,
    })
}

/// Black-cell density per stage, preceded by the share of original pixels
/// whose mean intensity is below 128.
pub fn intensity_profile(
    stages: &[&BinaryImage],
    original: &RasterImage,
) -> Result<Vec<f64>, PreprocessError> {
    let area = original.width() as f64 * original.height() as f64;
    let mut out = Vec::with_capacity(stages.len() + 1);
    let dark = original.pixels().iter().filter(|p| p.luma() < 128).count();
    out.push(dark as f64 / area);
    for (i, s) in stages.iter().enumerate() {
        if s.width() != original.width() || s.height() != original.height() {
            return Err(PreprocessError::DimensionMismatch {
                stage: i,
                got_w: s.width(),
                got_h: s.height(),
                want_w: original.width(),
                want_h: original.height(),
            });
        }
        out.push(s.black_count() as f64 / area);
    }
    Ok(out)
}
