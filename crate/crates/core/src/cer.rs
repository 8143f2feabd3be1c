//! Character error rate.

use crate::error::{PuceError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_length: usize,
    pub cer: f64,
}

impl CerReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    fn from_counts(s: usize, d: usize, i: usize, n: usize) -> Self {
        CerReport {
            substitutions: s,
            deletions: d,
            insertions: i,
            reference_length: n,
            cer: (s + d + i) as f64 / n as f64,
        }
    }
}

/// Unit-cost Levenshtein alignment over characters. Among minimum-cost
/// alignments the one with the most substitutions (fewest insertion/deletion
/// pairs) is reported.
pub fn compute_cer(reference: &str, hypothesis: &str) -> Result<CerReport> {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    if r.is_empty() {
        return Err(PuceError::Invalid("reference is empty".into()));
    }
    // (cost, insertions + deletions, substitutions, deletions) per cell; the
    // first two are minimized lexicographically.
    type Cell = (usize, usize, usize, usize);
    let w = h.len() + 1;
    let mut prev: Vec<Cell> = (0..w).map(|j| (j, j, 0, 0)).collect();
    let mut cur: Vec<Cell> = vec![(0, 0, 0, 0); w];
    for i in 1..=r.len() {
        cur[0] = (i, i, 0, i);
        for j in 1..w {
            let (c, id, s, d) = prev[j - 1];
            let diag = if r[i - 1] == h[j - 1] {
                (c, id, s, d)
            } else {
                (c + 1, id, s + 1, d)
            };
            let (c, id, s, d) = prev[j];
            let del = (c + 1, id + 1, s, d + 1);
            let (c, id, s, d) = cur[j - 1];
            let ins = (c + 1, id + 1, s, d);
            cur[j] = [diag, del, ins]
                .into_iter()
                .min_by_key(|&(c, id, _, _)| (c, id))
                .expect("three candidates");
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, _, s, d) = prev[h.len()];
    let i = cost - s - d;
    Ok(CerReport::from_counts(s, d, i, r.len()))
}

/// Micro-average over line pairs: total errors over total reference characters.
pub fn corpus_cer(reports: &[CerReport]) -> CerReport {
    let (s, d, i, n) = reports.iter().fold((0, 0, 0, 0), |acc, r| {
        (
            acc.0 + r.substitutions,
            acc.1 + r.deletions,
            acc.2 + r.insertions,
            acc.3 + r.reference_length,
        )
    });
    if n == 0 {
        return CerReport::from_counts(0, 0, 0, 1);
    }
    CerReport::from_counts(s, d, i, n)
}
