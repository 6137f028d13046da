//! Compact fingerprint templates: minutiae coordinates plus every pairwise
//! scanline ("correlation") distance, and their `.aft` text encoding.
//!
//! ```text
//! AFIS-TEMPLATE 1
//! mode paper
//! image 300 300
//! region 37 37 261 261
//! count 2
//! p 40 50 e
//! p 90 50 b
//! d 0 1 50
//! crc 1a2b3c4d
//! ```
//!
//! The trailing `crc` line holds the CRC-32 of every preceding byte. Writers
//! always emit it; readers verify it when present.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::minutiae::{Minutia, Region};

pub const MAGIC: &str = "AFIS-TEMPLATE 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DistanceMode {
    /// Branch-for-branch scanline distance, including the collapsed cases
    /// for rows one or two apart.
    #[default]
    PaperFaithful,
    /// Absolute gap between row-major linear indices.
    Canonical,
}

impl DistanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMode::PaperFaithful => "paper",
            DistanceMode::Canonical => "canonical",
        }
    }
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(DistanceMode::PaperFaithful),
            "canonical" => Ok(DistanceMode::Canonical),
            other => Err(format!("unknown distance mode {other:?} (paper|canonical)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("minutia ({x}, {y}) lies outside the region or image")]
    PointOutOfBounds { x: u32, y: u32 },
    #[error("invalid template geometry: {0}")]
    BadGeometry(String),
    #[error("not a template file (bad magic line)")]
    BadMagic,
    #[error("line {line}: {reason}")]
    BadField { line: usize, reason: String },
    #[error("count declares {declared} points but {found} point lines follow")]
    CountMismatch { declared: usize, found: usize },
    #[error("distance {i}-{j}: stored {stored}, recomputed {computed}")]
    CorrelationMismatch {
        i: usize,
        j: usize,
        stored: u64,
        computed: u64,
    },
    #[error("duplicate minutia at ({x}, {y})")]
    DuplicatePoint { x: u32, y: u32 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
}

/// Scanline distance between two minutiae in an image of the given width.
///
/// In [`DistanceMode::PaperFaithful`] points on the same row are `|Δx|`
/// apart, points one or two rows apart are `0` and `2` apart, and points
/// further apart measure `(Δy − 2)·width` plus the column walk from the upper
/// point to the end of its row and on to the lower point.
pub fn raster_distance(a: &Minutia, b: &Minutia, width: u32, mode: DistanceMode) -> u64 {
    let w = width as u64;
    match mode {
        DistanceMode::Canonical => {
            let ia = a.y as u64 * w + a.x as u64;
            let ib = b.y as u64 * w + b.x as u64;
            ia.abs_diff(ib)
        }
        DistanceMode::PaperFaithful => {
            // `lower` has the larger row index.
            let (lower, upper) = match a.y.cmp(&b.y) {
                std::cmp::Ordering::Equal => return a.x.abs_diff(b.x) as u64,
                std::cmp::Ordering::Greater => (a, b),
                std::cmp::Ordering::Less => (b, a),
            };
            match lower.y - upper.y {
                1 => 0,
                2 => 2,
                dy => (dy as u64 - 2) * w + (w - upper.x as u64) + lower.x as u64,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Correlation {
    pub i: usize,
    pub j: usize,
    pub d: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    width: u32,
    height: u32,
    region: Region,
    minutiae: Vec<Minutia>,
    correlations: Vec<Correlation>,
    mode: DistanceMode,
}

impl Template {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    /// All pairs `i < j` in lexicographic order.
    pub fn correlations(&self) -> &[Correlation] {
        &self.correlations
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    /// Distance between points `i` and `j` (`i != j`), read from the stored
    /// correlation list.
    pub fn distance(&self, i: usize, j: usize) -> u64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let n = self.minutiae.len();
        // Offset of row i in the packed upper triangle.
        let k = i * (2 * n - i - 1) / 2 + (j - i - 1);
        self.correlations[k].d
    }
}

fn check_geometry(width: u32, height: u32, region: &Region) -> Result<(), TemplateError> {
    if width == 0 || height == 0 {
        return Err(TemplateError::BadGeometry(format!(
            "image dimensions {width}x{height}"
        )));
    }
    if region.x0 > region.x1 || region.y0 > region.y1 || region.x1 >= width || region.y1 >= height {
        return Err(TemplateError::BadGeometry(format!(
            "region {} {} {} {} does not fit a {width}x{height} image",
            region.x0, region.y0, region.x1, region.y1
        )));
    }
    Ok(())
}

/// Sorts the points canonically and computes every pairwise distance.
pub fn build_template(
    points: &[Minutia],
    width: u32,
    height: u32,
    region: Region,
    mode: DistanceMode,
) -> Result<Template, TemplateError> {
    check_geometry(width, height, &region)?;
    if let Some(p) = points
        .iter()
        .find(|p| p.x >= width || p.y >= height || !region.contains(p.x, p.y))
    {
        return Err(TemplateError::PointOutOfBounds { x: p.x, y: p.y });
    }
    let mut minutiae = points.to_vec();
    minutiae.sort();
    let n = minutiae.len();
    let mut correlations = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            correlations.push(Correlation {
                i,
                j,
                d: raster_distance(&minutiae[i], &minutiae[j], width, mode),
            });
        }
    }
    Ok(Template {
        width,
        height,
        region,
        minutiae,
        correlations,
        mode,
    })
}

/// Deterministic `.aft` encoding.
pub fn serialize(t: &Template) -> Vec<u8> {
    let mut s = String::with_capacity(96 + t.minutiae.len() * 12 + t.correlations.len() * 16);
    let r = &t.region;
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "mode {}", t.mode);
    let _ = writeln!(s, "image {} {}", t.width, t.height);
    let _ = writeln!(s, "region {} {} {} {}", r.x0, r.y0, r.x1, r.y1);
    let _ = writeln!(s, "count {}", t.minutiae.len());
    for m in &t.minutiae {
        let _ = writeln!(s, "{m}");
    }
    for c in &t.correlations {
        let _ = writeln!(s, "d {} {} {}", c.i, c.j, c.d);
    }
    let crc = crc32fast::hash(s.as_bytes());
    let _ = writeln!(s, "crc {crc:08x}");
    s.into_bytes()
}

/// Splits a line into single-space separated fields, rejecting any other
/// whitespace layout.
fn fields(line: &str, lineno: usize) -> Result<Vec<&str>, TemplateError> {
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad(lineno, "empty field or stray space"));
    }
    if line.chars().any(|c| c.is_whitespace() && c != ' ') {
        return Err(bad(lineno, "unexpected whitespace"));
    }
    Ok(parts)
}

fn bad(line: usize, reason: impl Into<String>) -> TemplateError {
    TemplateError::BadField {
        line,
        reason: reason.into(),
    }
}

/// Canonical decimal: no sign, no leading zeros.
fn number<T: FromStr>(tok: &str, lineno: usize) -> Result<T, TemplateError> {
    let canonical = !tok.is_empty()
        && tok.bytes().all(|c| c.is_ascii_digit())
        && (tok == "0" || !tok.starts_with('0'));
    if !canonical {
        return Err(bad(lineno, format!("bad number {tok:?}")));
    }
    tok.parse()
        .map_err(|_| bad(lineno, format!("number out of range {tok:?}")))
}

fn keyed<'a>(
    line: Option<&'a str>,
    key: &str,
    arity: usize,
    lineno: usize,
) -> Result<Vec<&'a str>, TemplateError> {
    let line = line.ok_or_else(|| bad(lineno, format!("missing {key} line")))?;
    let f = fields(line, lineno)?;
    if f[0] != key || f.len() != arity + 1 {
        return Err(bad(
            lineno,
            format!("expected \"{key}\" with {arity} values"),
        ));
    }
    Ok(f[1..].to_vec())
}

/// Decodes an `.aft` file and checks it against itself: every stored
/// distance is recomputed from the coordinates, and the checksum line (if
/// present) must match.
pub fn parse(bytes: &[u8]) -> Result<Template, TemplateError> {
    let text = std::str::from_utf8(bytes).map_err(|_| bad(1, "not UTF-8"))?;
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| bad(text.lines().count().max(1), "missing trailing newline"))?;
    let mut lines: Vec<&str> = body.split('\n').collect();

    if lines.first() != Some(&MAGIC) {
        return Err(TemplateError::BadMagic);
    }

    // Optional checksum trailer, verified after the structural checks.
    let mut checksum = None;
    if let Some(last) = lines.last() {
        if last.starts_with("crc") {
            let n = lines.len();
            let f = fields(last, n)?;
            if f.len() != 2 || f[0] != "crc" || f[1].len() != 8 {
                return Err(bad(n, "expected \"crc\" with 8 hex digits"));
            }
            let canonical_hex = f[1].bytes().all(|c| matches!(c, b'0'..=b'9' | b'a'..=b'f'));
            let stored = u32::from_str_radix(f[1], 16)
                .ok()
                .filter(|_| canonical_hex)
                .ok_or_else(|| bad(n, "bad checksum digits"))?;
            let covered = text.len() - last.len() - 1;
            checksum = Some((stored, crc32fast::hash(&bytes[..covered])));
            lines.pop();
        }
    }

    let mut it = lines
        .iter()
        .copied()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l));
    let mut next = |key: &str, arity: usize| {
        let (n, l) = it.next().map_or((0, None), |(n, l)| (n, Some(l)));
        keyed(l, key, arity, n.max(1)).map(|v| (n, v))
    };

    let (n, mode) = next("mode", 1)?;
    let mode: DistanceMode = mode[0].parse().map_err(|e: String| bad(n, e))?;
    let (n, dims) = next("image", 2)?;
    let width: u32 = number(dims[0], n)?;
    let height: u32 = number(dims[1], n)?;
    let (n, reg) = next("region", 4)?;
    let region = Region {
        x0: number(reg[0], n)?,
        y0: number(reg[1], n)?,
        x1: number(reg[2], n)?,
        y1: number(reg[3], n)?,
    };
    check_geometry(width, height, &region).map_err(|e| bad(n, e.to_string()))?;
    let (n, count) = next("count", 1)?;
    let declared: usize = number(count[0], n)?;

    let rest = &lines[5.min(lines.len())..];
    let found = rest.iter().take_while(|l| l.starts_with("p ")).count();
    if found != declared {
        return Err(TemplateError::CountMismatch { declared, found });
    }

    let mut minutiae = Vec::with_capacity(declared);
    for (k, line) in rest[..declared].iter().enumerate() {
        let lineno = 6 + k;
        let f = fields(line, lineno)?;
        if f.len() != 4 {
            return Err(bad(lineno, "expected \"p <x> <y> <e|b>\""));
        }
        let x: u32 = number(f[1], lineno)?;
        let y: u32 = number(f[2], lineno)?;
        let kind = f[3]
            .parse()
            .map_err(|_| bad(lineno, format!("bad minutia kind {:?}", f[3])))?;
        let m = Minutia::new(x, y, kind);
        if !region.contains(x, y) {
            return Err(bad(lineno, format!("point ({x}, {y}) outside region")));
        }
        if let Some(prev) = minutiae.last() {
            let prev: &Minutia = prev;
            if (prev.x, prev.y) == (x, y) {
                return Err(TemplateError::DuplicatePoint { x, y });
            }
            if prev.sort_key() > m.sort_key() {
                return Err(bad(lineno, "points not in canonical order"));
            }
        }
        minutiae.push(m);
    }

    let t = build_template(&minutiae, width, height, region, mode)?;
    let dist_lines = &rest[declared..];
    if dist_lines.len() != t.correlations.len() {
        return Err(bad(
            6 + declared + dist_lines.len().min(t.correlations.len()),
            format!(
                "expected {} distance lines, found {}",
                t.correlations.len(),
                dist_lines.len()
            ),
        ));
    }
    for (k, (line, c)) in dist_lines.iter().zip(&t.correlations).enumerate() {
        let lineno = 6 + declared + k;
        let f = fields(line, lineno)?;
        if f.len() != 4 || f[0] != "d" {
            return Err(bad(lineno, "expected \"d <i> <j> <distance>\""));
        }
        let i: usize = number(f[1], lineno)?;
        let j: usize = number(f[2], lineno)?;
        if (i, j) != (c.i, c.j) {
            return Err(bad(lineno, format!("expected pair {} {}", c.i, c.j)));
        }
        let stored: u64 = number(f[3], lineno)?;
        if stored != c.d {
            return Err(TemplateError::CorrelationMismatch {
                i,
                j,
                stored,
                computed: c.d,
            });
        }
    }

    if let Some((stored, computed)) = checksum {
        if stored != computed {
            return Err(TemplateError::ChecksumMismatch { stored, computed });
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::MinutiaKind;
    use proptest::prelude::*;

    const P: DistanceMode = DistanceMode::PaperFaithful;
    const C: DistanceMode = DistanceMode::Canonical;

    fn e(x: u32, y: u32) -> Minutia {
        Minutia::ending(x, y)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(raster_distance(&e(10, 5), &e(20, 5), 100, P), 10);
        assert_eq!(raster_distance(&e(3, 8), &e(7, 5), 10, P), 16);
        assert_eq!(raster_distance(&e(7, 5), &e(3, 8), 10, P), 16);
        assert_eq!(raster_distance(&e(3, 8), &e(7, 5), 10, C), 26);
        for mode in [P, C] {
            assert_eq!(raster_distance(&e(4, 4), &e(4, 4), 10, mode), 0);
        }
        // Rows one and two apart collapse to constants.
        assert_eq!(raster_distance(&e(0, 3), &e(9, 4), 10, P), 0);
        assert_eq!(raster_distance(&e(0, 3), &e(9, 5), 10, P), 2);
    }

    #[test]
    fn build_small_templates() {
        let full = Region::full(100, 120);
        let t = build_template(&[], 100, 120, full, P).unwrap();
        assert!(t.is_empty() && t.correlations().is_empty());

        let pts = [e(5, 9), e(1, 1), Minutia::bifurcation(50, 4)];
        let t = build_template(&pts, 100, 120, full, P).unwrap();
        let pairs: Vec<_> = t.correlations().iter().map(|c| (c.i, c.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(t.minutiae()[0], e(1, 1));

        let t = build_template(&[e(10, 5), e(20, 5)], 100, 120, full, P).unwrap();
        assert_eq!(t.correlations(), &[Correlation { i: 0, j: 1, d: 10 }]);
        let text = String::from_utf8(serialize(&t)).unwrap();
        assert!(text.lines().any(|l| l == "d 0 1 10"));
    }

    #[test]
    fn build_rejects_points_outside_region() {
        let r = Region::new(10, 10, 20, 20).unwrap();
        assert_eq!(
            build_template(&[e(5, 15)], 100, 100, r, P),
            Err(TemplateError::PointOutOfBounds { x: 5, y: 15 })
        );
        assert!(matches!(
            build_template(&[], 10, 10, Region::full(20, 20), P),
            Err(TemplateError::BadGeometry(_))
        ));
    }

    #[test]
    fn empty_template_encoding() {
        let t = build_template(&[], 100, 120, Region::full(100, 120), P).unwrap();
        let text = String::from_utf8(serialize(&t)).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            &lines[..5],
            &[
                MAGIC,
                "mode paper",
                "image 100 120",
                "region 0 0 99 119",
                "count 0"
            ]
        );
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("crc "));
        assert_eq!(parse(text.as_bytes()).unwrap(), t);
        // The checksum trailer is optional on input.
        let bare = lines[..5].join("\n") + "\n";
        assert_eq!(parse(bare.as_bytes()).unwrap(), t);
    }

    #[test]
    fn distance_lookup_matches_list() {
        let pts = [e(1, 1), e(7, 9), e(3, 4), e(2, 30), e(8, 12)];
        let t = build_template(&pts, 10, 40, Region::full(10, 40), P).unwrap();
        for c in t.correlations() {
            assert_eq!(t.distance(c.i, c.j), c.d);
            assert_eq!(t.distance(c.j, c.i), c.d);
        }
    }

    fn bare(t: &Template) -> String {
        let text = String::from_utf8(serialize(t)).unwrap();
        let mut lines: Vec<_> = text.lines().collect();
        lines.pop();
        lines.join("\n") + "\n"
    }

    #[test]
    fn structural_errors() {
        let t = build_template(&[e(1, 1), e(5, 5)], 10, 10, Region::full(10, 10), P).unwrap();
        let good = bare(&t);

        assert_eq!(parse(b"AFIS-TEMPLATE 2\n"), Err(TemplateError::BadMagic));

        let short = good.replace("p 5 5 e\n", "");
        assert_eq!(
            parse(short.as_bytes()),
            Err(TemplateError::CountMismatch {
                declared: 2,
                found: 1
            })
        );

        let d = t.correlations()[0].d;
        let off = good.replace(&format!("d 0 1 {d}"), &format!("d 0 1 {}", d + 1));
        assert_eq!(
            parse(off.as_bytes()),
            Err(TemplateError::CorrelationMismatch {
                i: 0,
                j: 1,
                stored: d + 1,
                computed: d
            })
        );

        let dup = good.replace("p 5 5 e", "p 1 1 e");
        assert_eq!(
            parse(dup.as_bytes()),
            Err(TemplateError::DuplicatePoint { x: 1, y: 1 })
        );
        let dup_kind = good.replace("p 5 5 e", "p 1 1 b");
        assert_eq!(
            parse(dup_kind.as_bytes()),
            Err(TemplateError::DuplicatePoint { x: 1, y: 1 })
        );

        let unsorted = good.replace("p 1 1 e\np 5 5 e", "p 5 5 e\np 1 1 e");
        assert!(matches!(
            parse(unsorted.as_bytes()),
            Err(TemplateError::BadField { .. })
        ));
        let padded = good.replace("count 2", "count 02");
        assert!(matches!(
            parse(padded.as_bytes()),
            Err(TemplateError::BadField { .. })
        ));
        let no_newline = good.trim_end();
        assert!(matches!(
            parse(no_newline.as_bytes()),
            Err(TemplateError::BadField { .. })
        ));
        let kind = good.replace("p 5 5 e", "p 5 5 x");
        assert!(matches!(
            parse(kind.as_bytes()),
            Err(TemplateError::BadField { .. })
        ));
    }

    #[test]
    fn checksum_catches_silent_edits() {
        let t = build_template(&[e(1, 1), e(5, 5)], 10, 10, Region::full(10, 10), P).unwrap();
        let text = String::from_utf8(serialize(&t)).unwrap();
        let flipped = text.replace("p 5 5 e", "p 5 5 b");
        assert!(matches!(
            parse(flipped.as_bytes()),
            Err(TemplateError::ChecksumMismatch { .. })
        ));
    }

    fn arb_template() -> impl Strategy<Value = Template> {
        (4u32..200, 4u32..200, any::<bool>()).prop_flat_map(|(w, h, canon)| {
            prop::collection::btree_set((0..w, 0..h), 0..24).prop_map(move |set| {
                let pts: Vec<_> = set
                    .into_iter()
                    .enumerate()
                    .map(|(k, (x, y))| {
                        let kind = if k % 3 == 0 {
                            MinutiaKind::Bifurcation
                        } else {
                            MinutiaKind::Ending
                        };
                        Minutia::new(x, y, kind)
                    })
                    .collect();
                let mode = if canon { C } else { P };
                build_template(&pts, w, h, Region::full(w, h), mode).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_fixpoint(t in arb_template()) {
            let bytes = serialize(&t);
            let back = parse(&bytes).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(serialize(&back), bytes);
        }

        #[test]
        fn canonical_distance_is_a_metric(
            w in 1u32..50,
            pts in prop::collection::vec((0u32..50, 0u32..50), 3),
        ) {
            let p: Vec<_> = pts.iter().map(|&(x, y)| e(x % w, y)).collect();
            let d = |a: &Minutia, b: &Minutia| raster_distance(a, b, w, C);
            prop_assert_eq!(d(&p[0], &p[1]), d(&p[1], &p[0]));
            prop_assert_eq!(d(&p[0], &p[1]) == 0, (p[0].x, p[0].y) == (p[1].x, p[1].y));
            prop_assert!(d(&p[0], &p[2]) <= d(&p[0], &p[1]) + d(&p[1], &p[2]));
        }

        #[test]
        fn scanline_distances_survive_translation(
            w in 8u32..60,
            pts in prop::collection::vec((0u32..30, 0u32..30), 2..10),
            dx in 0u32..20,
            dy in 0u32..20,
        ) {
            let a: Vec<_> = pts.iter().map(|&(x, y)| e(x % (w / 2), y)).collect();
            let dx = dx % (w / 2);
            for i in 0..a.len() {
                for j in 0..a.len() {
                    let (p, q) = (&a[i], &a[j]);
                    let (ps, qs) = (e(p.x + dx, p.y + dy), e(q.x + dx, q.y + dy));
                    prop_assert_eq!(
                        raster_distance(p, q, w, P),
                        raster_distance(&ps, &qs, w, P)
                    );
                }
            }
        }
    }
}
