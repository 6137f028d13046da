//! Template-vs-template matching.
//!
//! Each minutia is described by its signature: the sorted distances from it
//! to every other minutia of the same template. Two minutiae from different
//! templates may be paired when enough of their distances agree within a
//! tolerance. Pairs are then picked greedily, one-to-one, by decreasing
//! agreement, and the score is `matched / max(n_a, n_b)`.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::template::{DistanceMode, Template};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("templates use different distance modes ({0} vs {1})")]
    ModeMismatch(DistanceMode, DistanceMode),
    #[error("minutia index {index} out of range for a template of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid match configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Largest gap at which two distances still agree.
    pub distance_tolerance: u64,
    /// Share of the smaller template's signature length that must agree
    /// before two minutiae can be paired.
    pub signature_fraction: f64,
    /// Scores at or above this are accepted.
    pub decision_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            distance_tolerance: 3,
            signature_fraction: 0.5,
            decision_threshold: 0.6,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.signature_fraction > 0.0 && self.signature_fraction <= 1.0) {
            return Err(MatchError::BadConfig(format!(
                "signature fraction {} not in (0, 1]",
                self.signature_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(MatchError::BadConfig(format!(
                "decision threshold {} not in [0, 1]",
                self.decision_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub matched: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub eq: f64,
    /// `(index in a, index in b)`, ascending by index in a.
    pub pairs: Vec<(usize, usize)>,
    pub decision: Decision,
}

impl MatchResult {
    pub const CSV_HEADER: &'static str = "n_a,n_b,matched,eq,decision";

    /// `n_a,n_b,matched,eq,decision`
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{}",
            self.n_a, self.n_b, self.matched, self.eq, self.decision
        )
    }
}

/// Distances from minutia `i` to every other minutia, ascending.
pub fn point_signature(t: &Template, i: usize) -> Result<Vec<u64>, MatchError> {
    let n = t.len();
    if i >= n {
        return Err(MatchError::IndexOutOfRange { index: i, len: n });
    }
    let mut sig: Vec<u64> = (0..n)
        .filter(|&j| j != i)
        .map(|j| t.distance(i, j))
        .collect();
    sig.sort_unstable();
    Ok(sig)
}

/// Size of the largest one-to-one pairing between two ascending lists where
/// elements pair iff they differ by at most `tolerance`.
///
/// On sorted input the two-pointer sweep is optimal: an element too small to
/// reach the other list's current head can never pair with anything later.
pub fn signature_overlap(s1: &[u64], s2: &[u64], tolerance: u64) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < s1.len() && j < s2.len() {
        let (a, b) = (s1[i], s2[j]);
        if a.abs_diff(b) <= tolerance {
            count += 1;
            i += 1;
            j += 1;
        } else if a < b {
            i += 1;
        } else {
            j += 1;
        }
    }
    count
}

pub fn decide(eq: f64, threshold: f64) -> Decision {
    if eq >= threshold {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Matched count over the larger template size; two empty templates score 1.
pub fn eq_score(matched: usize, n_a: usize, n_b: usize) -> f64 {
    match n_a.max(n_b) {
        0 => 1.0,
        greater => matched as f64 / greater as f64,
    }
}

pub fn match_templates(
    a: &Template,
    b: &Template,
    cfg: &MatchConfig,
) -> Result<MatchResult, MatchError> {
    cfg.validate()?;
    if a.mode() != b.mode() {
        return Err(MatchError::ModeMismatch(a.mode(), b.mode()));
    }
    if a.width() != b.width() {
        log::warn!(
            "matching templates from images of different widths ({} vs {}); distances may not be comparable",
            a.width(),
            b.width()
        );
    }

    // Greedy tie-breaking depends on argument order, so always run in a
    // fixed orientation and map the pairs back.
    let swapped = orientation(a, b) == Ordering::Greater;
    let (first, second) = if swapped { (b, a) } else { (a, b) };
    let mut pairs = greedy_pairs(first, second, cfg);
    if swapped {
        for p in &mut pairs {
            *p = (p.1, p.0);
        }
    }
    pairs.sort_unstable();

    let (n_a, n_b) = (a.len(), b.len());
    let matched = pairs.len();
    let eq = eq_score(matched, n_a, n_b);
    Ok(MatchResult {
        matched,
        n_a,
        n_b,
        eq,
        pairs,
        decision: decide(eq, cfg.decision_threshold),
    })
}

fn orientation(a: &Template, b: &Template) -> Ordering {
    let key = |t: &Template| {
        let r = t.region();
        (t.len(), t.width(), t.height(), (r.x0, r.y0, r.x1, r.y1))
    };
    key(a)
        .cmp(&key(b))
        .then_with(|| a.minutiae().cmp(b.minutiae()))
}

fn greedy_pairs(a: &Template, b: &Template, cfg: &MatchConfig) -> Vec<(usize, usize)> {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return Vec::new();
    }
    let sig_a: Vec<_> = (0..na).map(|i| point_signature(a, i).unwrap()).collect();
    let sig_b: Vec<_> = (0..nb).map(|j| point_signature(b, j).unwrap()).collect();
    let required = (cfg.signature_fraction * (na.min(nb) - 1) as f64).ceil() as usize;

    let mut candidates = Vec::new();
    for (i, sa) in sig_a.iter().enumerate() {
        for (j, sb) in sig_b.iter().enumerate() {
            let overlap = signature_overlap(sa, sb, cfg.distance_tolerance);
            if overlap >= required {
                candidates.push((overlap, i, j));
            }
        }
    }
    candidates.sort_unstable_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut used_a = vec![false; na];
    let mut used_b = vec![false; nb];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}
