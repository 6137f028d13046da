//! Ridge endings and bifurcations from a thinned ridge map, found with the
//! crossing-number rule, and clipping to a rectangular region.

use std::fmt;
use std::str::FromStr;

use crate::preprocess::ring_values;
use crate::raster::BinaryImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
}

impl MinutiaKind {
    pub fn code(self) -> char {
        match self {
            MinutiaKind::Ending => 'e',
            MinutiaKind::Bifurcation => 'b',
        }
    }
}

impl FromStr for MinutiaKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "e" => Ok(MinutiaKind::Ending),
            "b" => Ok(MinutiaKind::Bifurcation),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Minutia {
    pub x: u32,
    pub y: u32,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub const fn new(x: u32, y: u32, kind: MinutiaKind) -> Self {
        Minutia { x, y, kind }
    }

    pub const fn ending(x: u32, y: u32) -> Self {
        Minutia::new(x, y, MinutiaKind::Ending)
    }

    pub const fn bifurcation(x: u32, y: u32) -> Self {
        Minutia::new(x, y, MinutiaKind::Bifurcation)
    }

    /// Sort key: row, then column, then kind.
    pub fn sort_key(&self) -> (u32, u32, MinutiaKind) {
        (self.y, self.x, self.kind)
    }
}

impl Ord for Minutia {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Minutia {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Minutia {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p {} {} {}", self.x, self.y, self.kind.code())
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Region {
    /// `None` unless `x0 <= x1` and `y0 <= y1`.
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Option<Self> {
        (x0 <= x1 && y0 <= y1).then_some(Region { x0, y0, x1, y1 })
    }

    pub fn full(width: u32, height: u32) -> Self {
        Region {
            x0: 0,
            y0: 0,
            x1: width.saturating_sub(1),
            y1: height.saturating_sub(1),
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// Crossing number of the cell at `(x, y)`: half the number of value changes
/// around its 8-neighborhood.
pub fn crossing_number(b: &BinaryImage, x: u32, y: u32) -> u32 {
    let n = ring_values(b, x, y);
    (0..8).filter(|&i| n[i] != n[(i + 1) % 8]).count() as u32 / 2
}

/// Emits an ending for every interior black cell with crossing number 1 and
/// a bifurcation for crossing number 3. Cells on the image border never emit.
pub fn extract(thinned: &BinaryImage) -> Vec<Minutia> {
    let (w, h) = (thinned.width(), thinned.height());
    let mut out = Vec::new();
    // black_cells is row-major, so the output is already sorted.
    for (x, y) in thinned.black_cells() {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            continue;
        }
        match crossing_number(thinned, x, y) {
            1 => out.push(Minutia::ending(x, y)),
            3 => out.push(Minutia::bifurcation(x, y)),
            _ => {}
        }
    }
    out
}

pub fn clip_region(points: &[Minutia], r: &Region) -> Vec<Minutia> {
    points
        .iter()
        .filter(|p| r.contains(p.x, p.y))
        .copied()
        .collect()
}

/// Centered rectangle covering `fraction` of each dimension (at least one
/// pixel).
///
/// # Panics
/// If `fraction` is not in `(0, 1]` or a dimension is zero.
pub fn default_region(width: u32, height: u32, fraction: f64) -> Region {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "region fraction must be in (0, 1], got {fraction}"
    );
    assert!(width > 0 && height > 0);
    let span = |n: u32| -> (u32, u32) {
        let side = ((fraction * n as f64).floor() as u32).clamp(1, n);
        let start = (n - side) / 2;
        (start, start + side - 1)
    };
    let (x0, x1) = span(width);
    let (y0, y1) = span(height);
    Region { x0, y0, x1, y1 }
}
