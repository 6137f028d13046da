//! Evaluation helpers: detection scoring against ground truth, percentage
//! tables, poor-vs-improved counts, size and timing benchmarks, CSV reports
//! and a seeded synthetic fingerprint generator.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matcher::{match_templates, MatchConfig};
use crate::minutiae::{extract, Minutia};
use crate::pipeline::{image_to_template, PipelineConfig, PipelineError};
use crate::preprocess::{filter, PreprocessConfig, PreprocessError};
use crate::raster::{load_image, Pixel, RasterError, RasterImage};
use crate::template::{parse, serialize, TemplateError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("percentages need at least one ground-truth minutia")]
    ZeroContained,
    #[error("invalid synthetic fingerprint parameters: {0}")]
    ParamError(String),
    #[error("ground truth line {line}: {reason}")]
    BadTruth { line: usize, reason: String },
    #[error("benchmark needs at least 3 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Match(#[from] crate::matcher::MatchError),
}

/// Manually annotated minutiae of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub image_id: String,
    pub points: Vec<Minutia>,
}

pub const TRUTH_MAGIC: &str = "AFIS-TRUTH 1";

impl GroundTruth {
    /// `.gt` encoding: magic line, `image <id>`, then one `p <x> <y> <e|b>`
    /// line per point.
    pub fn to_text(&self) -> String {
        let mut s = format!("{TRUTH_MAGIC}\nimage {}\n", self.image_id);
        for p in &self.points {
            let _ = writeln!(s, "{p}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let bad = |line: usize, reason: &str| EvalError::BadTruth {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        if lines.next() != Some(TRUTH_MAGIC) {
            return Err(bad(1, "missing AFIS-TRUTH 1 header"));
        }
        let image_id = lines
            .next()
            .and_then(|l| l.strip_prefix("image "))
            .filter(|id| !id.is_empty())
            .ok_or_else(|| bad(2, "expected \"image <id>\""))?
            .to_string();
        let mut points = Vec::new();
        for (k, line) in lines.enumerate() {
            let lineno = k + 3;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 || f[0] != "p" {
                return Err(bad(lineno, "expected \"p <x> <y> <e|b>\""));
            }
            let x = f[1].parse().map_err(|_| bad(lineno, "bad x"))?;
            let y = f[2].parse().map_err(|_| bad(lineno, "bad y"))?;
            let kind = f[3].parse().map_err(|_| bad(lineno, "bad kind"))?;
            points.push(Minutia::new(x, y, kind));
        }
        Ok(GroundTruth { image_id, points })
    }
}

/// Minutiae classification counts for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalRow {
    pub contained: usize,
    pub selected: usize,
    pub dropped: usize,
    pub false_pos: usize,
    pub correct: usize,
}

impl EvalRow {
    /// Builds a row from contained/false/dropped/correct counts, checking that
    /// they are consistent.
    pub fn from_counts(
        contained: usize,
        false_pos: usize,
        dropped: usize,
        correct: usize,
    ) -> Option<Self> {
        (correct + dropped == contained).then_some(EvalRow {
            contained,
            selected: correct + false_pos,
            dropped,
            false_pos,
            correct,
        })
    }

    pub fn identities_hold(&self) -> bool {
        self.selected == self.correct + self.false_pos
            && self.contained == self.correct + self.dropped
    }
}

/// Greedy one-to-one pairing of detections with annotations by ascending
/// Euclidean distance; pairs further apart than `match_radius` are not
/// admissible. Kinds are ignored.
pub fn score_detection(detected: &[Minutia], truth: &GroundTruth, match_radius: f64) -> EvalRow {
    let r2 = match_radius * match_radius;
    let mut candidates: Vec<(u64, Minutia, Minutia, usize, usize)> = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        for (j, t) in truth.points.iter().enumerate() {
            let dx = d.x as i64 - t.x as i64;
            let dy = d.y as i64 - t.y as i64;
            let dist2 = (dx * dx + dy * dy) as u64;
            if dist2 as f64 <= r2 {
                candidates.push((dist2, *d, *t, i, j));
            }
        }
    }
    // Ties are broken on coordinates, not input positions, so the result does
    // not depend on list order.
    candidates.sort_unstable_by_key(|&(d2, a, b, _, _)| (d2, a, b));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.points.len()];
    let mut correct = 0;
    for (_, _, _, i, j) in candidates {
        if !used_d[i] && !used_t[j] {
            used_d[i] = true;
            used_t[j] = true;
            correct += 1;
        }
    }
    EvalRow {
        contained: truth.points.len(),
        selected: detected.len(),
        dropped: truth.points.len() - correct,
        false_pos: detected.len() - correct,
        correct,
    }
}

/// An exact share `count / total`, printed as a percentage with two decimals
/// (round half up).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Percentage {
    pub count: usize,
    pub total: usize,
}

impl Percentage {
    pub fn value(&self) -> f64 {
        100.0 * self.count as f64 / self.total as f64
    }

    /// The percentage in hundredths of a point, rounded half up.
    pub fn hundredths(&self) -> u64 {
        let (c, t) = (self.count as u64, self.total as u64);
        (20_000 * c + t) / (2 * t)
    }
}

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PercentRow {
    pub false_pct: Percentage,
    pub drop_pct: Percentage,
    pub correct_pct: Percentage,
}

pub fn percentages(row: &EvalRow) -> Result<PercentRow, EvalError> {
    if row.contained == 0 {
        return Err(EvalError::ZeroContained);
    }
    let of = |count| Percentage {
        count,
        total: row.contained,
    };
    Ok(PercentRow {
        false_pct: of(row.false_pos),
        drop_pct: of(row.dropped),
        correct_pct: of(row.correct),
    })
}

/// Minutiae found on the merely binarized image versus on the thinned stage
/// of the full pipeline.
pub fn poor_vs_improved(
    raw: &RasterImage,
    cfg: &PreprocessConfig,
) -> Result<(usize, usize), EvalError> {
    let poor = extract(&filter(raw, cfg.threshold)?).len();
    let stages = crate::preprocess::run_pipeline(raw, cfg)?;
    Ok((poor, extract(&stages.lined).len()))
}

/// File sizes and median durations for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub image_bytes: u64,
    pub template_bytes: u64,
    /// Load, preprocess, extract, build the template and match it.
    pub full_pipeline_ms: f64,
    /// Parse two template files and match them.
    pub template_match_ms: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Times the image path against the template path for one image. The
/// template is written to a scratch directory so its on-disk size can be
/// measured.
pub fn benchmark(
    img_path: &Path,
    cfg: &PipelineConfig,
    match_cfg: &MatchConfig,
    repetitions: usize,
) -> Result<TimingRow, EvalError> {
    if repetitions < 3 {
        return Err(EvalError::TooFewRepetitions(repetitions));
    }
    let image_bytes = std::fs::metadata(img_path)?.len();
    let reference = image_to_template(&load_image(&std::fs::read(img_path)?)?, cfg)?.template;

    let scratch = tempfile::tempdir()?;
    let aft = scratch.path().join("reference.aft");
    std::fs::write(&aft, serialize(&reference))?;
    let template_bytes = std::fs::metadata(&aft)?.len();

    let mut full = Vec::with_capacity(repetitions);
    let mut quick = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let img = load_image(&std::fs::read(img_path)?)?;
        let probe = image_to_template(&img, cfg)?.template;
        std::hint::black_box(match_templates(&reference, &probe, match_cfg)?);
        full.push(start.elapsed().as_secs_f64() * 1e3);

        let start = Instant::now();
        let a = parse(&std::fs::read(&aft)?)?;
        let b = parse(&std::fs::read(&aft)?)?;
        std::hint::black_box(match_templates(&a, &b, match_cfg)?);
        quick.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(TimingRow {
        image_bytes,
        template_bytes,
        full_pipeline_ms: median(full),
        template_match_ms: median(quick),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Table1,
    Table2,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl ReportKind {
    pub fn header(self) -> &'static str {
        match self {
            ReportKind::Table1 => "image,contained,selected,dropped,false,correct,match_radius",
            ReportKind::Table2 => "image,false_pct,drop_pct,correct_pct",
            ReportKind::Fig2 => "image,poor_count,improved_count",
            ReportKind::Fig3 => {
                "image,input_density,filter_density,enhance_density,line_density,shape_density"
            }
            ReportKind::Fig4 => "image,image_bytes,template_bytes,ratio",
            ReportKind::Fig5 => "image,full_pipeline_ms,template_match_ms,speedup",
        }
    }
}

/// Rows for one CSV report, keyed by image id.
#[derive(Debug, Clone)]
pub enum Report {
    Table1 {
        match_radius: f64,
        rows: Vec<(String, EvalRow)>,
    },
    Table2(Vec<(String, PercentRow)>),
    Fig2(Vec<(String, usize, usize)>),
    Fig3(Vec<(String, Vec<f64>)>),
    Fig4(Vec<(String, TimingRow)>),
    Fig5(Vec<(String, TimingRow)>),
}

impl Report {
    pub fn kind(&self) -> ReportKind {
        match self {
            Report::Table1 { .. } => ReportKind::Table1,
            Report::Table2(_) => ReportKind::Table2,
            Report::Fig2(_) => ReportKind::Fig2,
            Report::Fig3(_) => ReportKind::Fig3,
            Report::Fig4(_) => ReportKind::Fig4,
            Report::Fig5(_) => ReportKind::Fig5,
        }
    }

    fn records(&self) -> Vec<Vec<String>> {
        match self {
            Report::Table1 { match_radius, rows } => rows
                .iter()
                .map(|(id, r)| {
                    vec![
                        id.clone(),
                        r.contained.to_string(),
                        r.selected.to_string(),
                        r.dropped.to_string(),
                        r.false_pos.to_string(),
                        r.correct.to_string(),
                        match_radius.to_string(),
                    ]
                })
                .collect(),
            Report::Table2(rows) => rows
                .iter()
                .map(|(id, p)| {
                    vec![
                        id.clone(),
                        p.false_pct.to_string(),
                        p.drop_pct.to_string(),
                        p.correct_pct.to_string(),
                    ]
                })
                .collect(),
            Report::Fig2(rows) => rows
                .iter()
                .map(|(id, poor, improved)| {
                    vec![id.clone(), poor.to_string(), improved.to_string()]
                })
                .collect(),
            Report::Fig3(rows) => rows
                .iter()
                .map(|(id, d)| {
                    std::iter::once(id.clone())
                        .chain(d.iter().map(|v| format!("{v:.6}")))
                        .collect()
                })
                .collect(),
            Report::Fig4(rows) => rows
                .iter()
                .map(|(id, t)| {
                    vec![
                        id.clone(),
                        t.image_bytes.to_string(),
                        t.template_bytes.to_string(),
                        format!(
                            "{:.1}",
                            t.image_bytes as f64 / t.template_bytes.max(1) as f64
                        ),
                    ]
                })
                .collect(),
            Report::Fig5(rows) => rows
                .iter()
                .map(|(id, t)| {
                    vec![
                        id.clone(),
                        format!("{:.3}", t.full_pipeline_ms),
                        format!("{:.3}", t.template_match_ms),
                        format!("{:.1}", t.full_pipeline_ms / t.template_match_ms.max(1e-9)),
                    ]
                })
                .collect(),
        }
    }

    /// Label and bar pairs for the figure kinds; tables have none.
    fn series(&self) -> Vec<(String, Vec<(&'static str, f64)>)> {
        match self {
            Report::Table1 { .. } | Report::Table2(_) => Vec::new(),
            Report::Fig2(rows) => rows
                .iter()
                .map(|(id, p, i)| {
                    (
                        id.clone(),
                        vec![("poor", *p as f64), ("improved", *i as f64)],
                    )
                })
                .collect(),
            Report::Fig3(rows) => rows
                .iter()
                .map(|(id, d)| {
                    let names = ["input", "filter", "enhance", "line", "shape"];
                    (
                        id.clone(),
                        names.iter().copied().zip(d.iter().copied()).collect(),
                    )
                })
                .collect(),
            Report::Fig4(rows) => rows
                .iter()
                .map(|(id, t)| {
                    (
                        id.clone(),
                        vec![
                            ("image", t.image_bytes as f64),
                            ("template", t.template_bytes as f64),
                        ],
                    )
                })
                .collect(),
            Report::Fig5(rows) => rows
                .iter()
                .map(|(id, t)| {
                    (
                        id.clone(),
                        vec![
                            ("full_ms", t.full_pipeline_ms),
                            ("template_ms", t.template_match_ms),
                        ],
                    )
                })
                .collect(),
        }
    }
}

/// Writes the report as CSV to `sink` and returns the same bytes.
pub fn emit_report<W: Write>(report: &Report, sink: &mut W) -> Result<Vec<u8>, EvalError> {
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(&mut buf);
        w.write_record(report.kind().header().split(','))
            .map_err(csv_io)?;
        for rec in report.records() {
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
    }
    sink.write_all(&buf)?;
    Ok(buf)
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Horizontal bar chart of a figure report, one block per image, bars
/// scaled to the largest value in the report.
pub fn ascii_chart(report: &Report, width: usize) -> String {
    let series = report.series();
    let max = series
        .iter()
        .flat_map(|(_, bars)| bars.iter().map(|b| b.1))
        .fold(0.0f64, f64::max);
    let label_w = series
        .iter()
        .flat_map(|(_, bars)| bars.iter().map(|b| b.0.len()))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (id, bars) in series {
        let _ = writeln!(out, "{id}");
        for (label, v) in bars {
            let n = if max > 0.0 {
                (v / max * width as f64).round() as usize
            } else {
                0
            };
            let _ = writeln!(out, "  {label:<label_w$} |{} {v}", "#".repeat(n));
        }
    }
    out
}

/// Parameters for [`synth_fingerprint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Ridge-to-ridge spacing in pixels.
    pub ridge_period: u32,
    pub n_endings: usize,
    pub n_bifurcations: usize,
    /// Share of pixels flipped black/white outside annotation neighborhoods.
    pub noise_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            width: 300,
            height: 300,
            ridge_period: 9,
            n_endings: 4,
            n_bifurcations: 3,
            noise_rate: 0.0,
        }
    }
}

/// Fraction of each dimension kept free of injected minutiae along the edges.
const FEATURE_MARGIN: f64 = 0.16;

/// Share of the period covered by a binarized ridge.
const RIDGE_SHARE: f64 = 0.5;

/// Smooth vertical ridge field: ridge `k` runs through the points where
/// `x + bend(y) = offset + k * period`.
struct RidgeField {
    period: f64,
    offset: f64,
    amplitude: f64,
    wavelength: f64,
    bend_phase: f64,
}

impl RidgeField {
    fn phase(&self, x: f64, y: f64) -> f64 {
        let bend =
            self.amplitude * (std::f64::consts::TAU * y / self.wavelength + self.bend_phase).sin();
        (x + bend - self.offset) / self.period
    }

    /// Column of ridge `k` on row `y`.
    fn center(&self, k: i64, y: f64) -> f64 {
        let bend =
            self.amplitude * (std::f64::consts::TAU * y / self.wavelength + self.bend_phase).sin();
        self.offset + k as f64 * self.period - bend
    }

    fn ridge_at(&self, x: f64, y: f64) -> i64 {
        self.phase(x, y).round() as i64
    }
}

/// Which rows of an ending ridge are erased.
#[derive(Clone, Copy)]
enum Cut {
    Above(f64),
    Below(f64),
}

/// A ridge that drifts sideways onto its neighbor and continues as one with
/// it. Halfway through the drift is at row `mid`.
struct Merge {
    ridge: i64,
    /// +1 to drift right, -1 to drift left.
    toward: f64,
    mid: f64,
    /// Whether the merged part lies below `mid`.
    downward: bool,
    length: f64,
}

impl Merge {
    /// Drift progress in `[0, 1]` at row `y`.
    fn progress(&self, y: f64) -> f64 {
        let t = if self.downward {
            (y - self.mid) / self.length + 0.5
        } else {
            (self.mid - y) / self.length + 0.5
        };
        let t = t.clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    }

    fn center(&self, field: &RidgeField, y: f64) -> f64 {
        field.center(self.ridge, y) + self.toward * field.period * self.progress(y)
    }

    /// Signed row offset from `mid` at which the gap to the neighbor closes.
    fn junction_offset(&self) -> f64 {
        let target = 1.0 - RIDGE_SHARE;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..50 {
            let t = (lo + hi) / 2.0;
            if t * t * (3.0 - 2.0 * t) < target {
                lo = t;
            } else {
                hi = t;
            }
        }
        let off = (lo - 0.5) * self.length;
        if self.downward {
            off
        } else {
            -off
        }
    }
}

/// Darkness of a ridge cross-section at horizontal offset `d`; above one
/// half within `RIDGE_SHARE / 2` of the period from the center.
fn profile(d: f64, period: f64) -> f64 {
    let half = RIDGE_SHARE * period;
    if d.abs() < half {
        0.5 + 0.5 * (std::f64::consts::PI * d / half).cos()
    } else {
        0.0
    }
}

/// Renders a seeded synthetic fingerprint and the minutiae injected into it.
///
/// The base pattern is a sinusoidal grating of near-vertical ridges. Each
/// ending removes one ridge from a point to the nearer horizontal image edge.
/// Each bifurcation bends a ridge smoothly onto its neighbor so the two run
/// on as one; it is annotated where the valley between them closes. Finally
/// a share of pixels away from the annotations is inverted.
pub fn synth_fingerprint(p: &SynthParams) -> Result<(RasterImage, GroundTruth), EvalError> {
    if p.ridge_period < 4 {
        return Err(EvalError::ParamError(format!(
            "ridge period {} below 4",
            p.ridge_period
        )));
    }
    if !(0.0..=0.2).contains(&p.noise_rate) {
        return Err(EvalError::ParamError(format!(
            "noise rate {} outside [0, 0.2]",
            p.noise_rate
        )));
    }
    if p.width < 32 || p.height < 32 {
        return Err(EvalError::ParamError("image must be at least 32x32".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let period = p.ridge_period as f64;
    let (w, h) = (p.width as f64, p.height as f64);
    let field = RidgeField {
        period,
        offset: rng.gen_range(0.0..period),
        amplitude: rng.gen_range(0.3..0.8) * period,
        wavelength: h * rng.gen_range(0.9..1.6),
        bend_phase: rng.gen_range(0.0..std::f64::consts::TAU),
    };

    let min_sep = 3.0 * period;
    let (x_lo, x_hi) = (FEATURE_MARGIN * w, (1.0 - FEATURE_MARGIN) * w);
    let (y_lo, y_hi) = (FEATURE_MARGIN * h, (1.0 - FEATURE_MARGIN) * h);
    let k_lo = field.ridge_at(x_lo, h / 2.0) + 1;
    let k_hi = field.ridge_at(x_hi, h / 2.0) - 1;
    let mut used_ridges = std::collections::HashSet::new();
    let mut placed: Vec<(f64, f64)> = Vec::new();
    let mut cuts: Vec<(i64, Cut)> = Vec::new();
    let mut merges: Vec<Merge> = Vec::new();
    let mut truth = Vec::new();

    let kinds =
        std::iter::repeat_n(true, p.n_bifurcations).chain(std::iter::repeat_n(false, p.n_endings));
    for is_bif in kinds {
        let mut ok = false;
        for _ in 0..2000 {
            if k_hi <= k_lo + 1 {
                break;
            }
            let k = rng.gen_range(k_lo..=k_hi);
            let y = rng.gen_range(y_lo..y_hi).round();
            if used_ridges.contains(&k) {
                continue;
            }
            let (x, feature) = if is_bif {
                let branch = if rng.gen_bool(0.5) { k - 1 } else { k + 1 };
                if used_ridges.contains(&branch) {
                    continue;
                }
                let mut merge = Merge {
                    ridge: branch,
                    toward: (k - branch) as f64,
                    mid: y,
                    downward: rng.gen_bool(0.5),
                    length: 4.0 * period,
                };
                merge.mid = y - merge.junction_offset();
                let x = (field.center(k, y) + merge.center(&field, y)) / 2.0;
                (x, Ok(merge))
            } else {
                let cut = if y < h / 2.0 {
                    Cut::Above(y)
                } else {
                    Cut::Below(y)
                };
                (field.center(k, y), Err(cut))
            };
            if x < x_lo || x > x_hi {
                continue;
            }
            if placed
                .iter()
                .any(|&(px, py)| (px - x).hypot(py - y) < min_sep)
            {
                continue;
            }
            used_ridges.insert(k);
            match feature {
                Ok(merge) => {
                    used_ridges.insert(merge.ridge);
                    merges.push(merge);
                    truth.push(Minutia::bifurcation(x.round() as u32, y as u32));
                }
                Err(cut) => {
                    cuts.push((k, cut));
                    truth.push(Minutia::ending(x.round() as u32, y as u32));
                }
            }
            placed.push((x, y));
            ok = true;
            break;
        }
        if !ok {
            return Err(EvalError::ParamError(format!(
                "cannot fit {} endings and {} bifurcations at period {} in {}x{}",
                p.n_endings, p.n_bifurcations, p.ridge_period, p.width, p.height
            )));
        }
    }

    let mut pixels = Vec::with_capacity((p.width * p.height) as usize);
    for py in 0..p.height {
        let y = py as f64;
        let merged: Vec<f64> = merges.iter().map(|m| m.center(&field, y)).collect();
        for px in 0..p.width {
            let x = px as f64;
            let k0 = field.ridge_at(x, y);
            let mut dark = merged
                .iter()
                .map(|&c| profile(x - c, period))
                .fold(0.0, f64::max);
            for k in k0 - 1..=k0 + 1 {
                if merges.iter().any(|m| m.ridge == k) {
                    continue;
                }
                let erased = cuts.iter().any(|&(ck, cut)| {
                    ck == k
                        && match cut {
                            Cut::Above(cy) => y < cy,
                            Cut::Below(cy) => y > cy,
                        }
                });
                if !erased {
                    dark = dark.max(profile(x - field.center(k, y), period));
                }
            }
            pixels.push(Pixel::gray((255.0 * (1.0 - dark)).round() as u8));
        }
    }
    let img = RasterImage::new(p.width, p.height, pixels).expect("dimensions match");

    truth.sort();
    let truth = GroundTruth {
        image_id: format!("synth-{}", p.seed),
        points: truth,
    };
    let noisy = add_noise(
        &img,
        p.noise_rate,
        p.seed ^ 0x9e37_79b9_7f4a_7c15,
        &truth.points,
        period * 2.0,
    );
    Ok((noisy, truth))
}

/// Inverts `rate` of all pixels (black ↔ white around the mid level) at
/// seeded positions, skipping anything within `keep_out` pixels of `avoid`.
pub fn add_noise(
    img: &RasterImage,
    rate: f64,
    seed: u64,
    avoid: &[Minutia],
    keep_out: f64,
) -> RasterImage {
    let mut out = img.clone();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let eligible: Vec<usize> = (0..w * h)
        .filter(|&i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            avoid
                .iter()
                .all(|m| (m.x as f64 - x).hypot(m.y as f64 - y) > keep_out)
        })
        .collect();
    let n = ((rate * (w * h) as f64).round() as usize).min(eligible.len());
    if n == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in sample(&mut rng, eligible.len(), n) {
        let i = eligible[k];
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        let flipped = if img.get(x, y).luma() < 128 {
            Pixel::WHITE
        } else {
            Pixel::BLACK
        };
        out.set(x, y, flipped);
    }
    out
}

/// Shifts image content by `(dx, dy)`; uncovered pixels become white.
pub fn translate_image(img: &RasterImage, dx: i64, dy: i64) -> RasterImage {
    let mut out = RasterImage::filled(img.width(), img.height(), Pixel::WHITE);
    let (w, h) = (img.width() as i64, img.height() as i64);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = (x - dx, y - dy);
            if sx >= 0 && sy >= 0 && sx < w && sy < h {
                out.set(x as u32, y as u32, img.get(sx as u32, sy as u32));
            }
        }
    }
    out
}
