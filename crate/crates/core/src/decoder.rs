//! CI beam search over emission lattices and N-best rescoring.
//!
//! The acoustic model's top-1 syllable and tone outputs are frozen into
//! [`Slot::Fixed`] entries; only the character index stays open, as a
//! [`Slot::Choice`] with its candidate log-posteriors. Scores are additive and
//! choices independent, so the search needs no model calls and the N-best
//! lists all have the same number of units.
//!
//! Lattice file grammar, one slot per line:
//!
//! ```text
//! F ma③ -0.1
//! C 2
//! 1 -0.2
//! 2 -1.8
//! ```

use std::cmp::Ordering;

use crate::codec::{ci_symbol, parse_unit_any, tone_from_symbol};
use crate::error::{PuceError, Result};
use crate::lexicon::{DictionaryPair, MAX_CI};
use crate::lm::LmScorer;

/// Slack on the log-sum-exp of a choice slot's candidates.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Named LM weights tuned on dev sets for each training/test condition.
pub const LAMBDA_PRESETS: [(&str, f64); 6] = [
    ("aishell-in", 1.16),
    ("aishell-cross", 2.08),
    ("magic208-in", 0.55),
    ("magic208-cross", 1.85),
    ("magic1000-in", 0.61),
    ("magic1000-cross", 1.50),
];

pub fn lambda_preset(name: &str) -> Option<f64> {
    LAMBDA_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| *v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    /// A unit without its character index, e.g. `ma③` or `ma3`.
    Fixed { token: String, logp: f64 },
    /// Index candidates, sorted by descending log-posterior.
    Choice { candidates: Vec<(u16, f64)> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmissionLattice {
    slots: Vec<Slot>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_logp(logp: f64) -> std::result::Result<(), String> {
    if logp.is_nan() {
        Err("log probability is NaN".into())
    } else if logp > 0.0 {
        Err(format!("log probability {logp} is positive"))
    } else {
        Ok(())
    }
}

impl EmissionLattice {
    /// Validates every slot; choice candidates are re-sorted.
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        let mut lattice = EmissionLattice {
            slots: Vec::with_capacity(slots.len()),
        };
        for (i, slot) in slots.into_iter().enumerate() {
            let slot = validate_slot(slot, MASS_TOLERANCE)
                .map_err(|m| PuceError::Invalid(format!("slot {i}: {m}")))?;
            lattice.slots.push(slot);
        }
        Ok(lattice)
    }

    /// Like [`EmissionLattice::new`] but without the probability-mass check,
    /// for slots holding scaled or otherwise unnormalized log scores.
    pub fn new_unnormalized(slots: Vec<Slot>) -> Result<Self> {
        let slots = slots
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                validate_slot(slot, f64::INFINITY)
                    .map_err(|m| PuceError::Invalid(format!("slot {i}: {m}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmissionLattice { slots })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_choices(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| matches!(s, Slot::Choice { .. }))
            .count()
    }

    /// Builds the surface units for one assignment of indices, one per choice slot.
    ///
    /// A choice completes the unit opened by the preceding fixed token, using
    /// the token's tone style (meta symbol or digit) for the index. A choice
    /// with no open unit stands alone as a bare index symbol.
    pub fn units_for(&self, cis: &[u16]) -> Vec<String> {
        let mut units: Vec<String> = Vec::new();
        let mut open = false;
        let mut next = cis.iter();
        for slot in &self.slots {
            match slot {
                Slot::Fixed { token, .. } => {
                    units.push(token.clone());
                    open = true;
                }
                Slot::Choice { .. } => {
                    let ci = *next.next().expect("one index per choice slot");
                    let symbol = ci_symbol(ci).expect("validated index");
                    match units.last_mut() {
                        Some(u) if open => {
                            let int_style = u.chars().last().is_some_and(|c| c.is_ascii_digit());
                            if int_style {
                                u.push('#');
                                u.push_str(&ci.to_string());
                            } else {
                                u.push(symbol);
                            }
                        }
                        _ => units.push(symbol.to_string()),
                    }
                    open = false;
                }
            }
        }
        units
    }
}

fn validate_slot(slot: Slot, mass_tolerance: f64) -> std::result::Result<Slot, String> {
    match slot {
        Slot::Fixed { token, logp } => {
            check_logp(logp)?;
            if token.is_empty() || token.contains(char::is_whitespace) {
                return Err(format!("invalid token {token:?}"));
            }
            Ok(Slot::Fixed { token, logp })
        }
        Slot::Choice { mut candidates } => {
            if candidates.is_empty() {
                return Err("choice slot has no candidates".into());
            }
            for (i, &(ci, logp)) in candidates.iter().enumerate() {
                if !(1..=MAX_CI).contains(&ci) {
                    return Err(format!("character index {ci} out of range 1..={MAX_CI}"));
                }
                check_logp(logp)?;
                if candidates[..i].iter().any(|&(c, _)| c == ci) {
                    return Err(format!("duplicate character index {ci}"));
                }
            }
            let mass = log_sum_exp(candidates.iter().map(|c| c.1));
            if mass > mass_tolerance {
                return Err(format!(
                    "candidate probabilities sum above 1 (log-sum-exp {mass:.6})"
                ));
            }
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            Ok(Slot::Choice { candidates })
        }
    }
}

/// Parses the lattice file grammar; errors carry the line number.
pub fn parse_lattice(text: &str) -> Result<EmissionLattice> {
    let mut slots = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let parse_logp = |s: &str, n: usize| -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| PuceError::parse(n, format!("bad log probability {s:?}")))?;
        check_logp(v).map_err(|m| PuceError::parse(n, m))?;
        Ok(v)
    };
    while let Some((n, line)) = lines.next() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            ["F", token, logp] => {
                let logp = parse_logp(logp, n)?;
                slots.push(Slot::Fixed {
                    token: token.to_string(),
                    logp,
                });
            }
            ["C", k] => {
                let k: usize = k
                    .parse()
                    .ok()
                    .filter(|&k| k > 0)
                    .ok_or_else(|| PuceError::parse(n, format!("bad candidate count {k:?}")))?;
                let mut candidates = Vec::with_capacity(k);
                for _ in 0..k {
                    let (m, cand) = lines.next().ok_or_else(|| {
                        PuceError::parse(n, format!("expected {k} candidate lines"))
                    })?;
                    let [ci, logp] = cand.split_whitespace().collect::<Vec<_>>()[..] else {
                        return Err(PuceError::parse(m, "candidate must be `<ci> <logp>`"));
                    };
                    let ci: u16 = ci
                        .parse()
                        .ok()
                        .filter(|c| (1..=MAX_CI).contains(c))
                        .ok_or_else(|| {
                            PuceError::parse(m, format!("bad character index {ci:?}"))
                        })?;
                    let logp = parse_logp(logp, m)?;
                    if candidates.iter().any(|&(c, _)| c == ci) {
                        return Err(PuceError::parse(
                            m,
                            format!("duplicate character index {ci}"),
                        ));
                    }
                    candidates.push((ci, logp));
                }
                let slot = validate_slot(Slot::Choice { candidates }, MASS_TOLERANCE)
                    .map_err(|msg| PuceError::parse(n, msg))?;
                slots.push(slot);
            }
            _ => {
                return Err(PuceError::parse(
                    n,
                    format!("expected `F <token> <logp>` or `C <k>`, found {line:?}"),
                ))
            }
        }
    }
    Ok(EmissionLattice { slots })
}

impl std::fmt::Display for EmissionLattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for slot in &self.slots {
            match slot {
                Slot::Fixed { token, logp } => writeln!(f, "F {token} {logp}")?,
                Slot::Choice { candidates } => {
                    writeln!(f, "C {}", candidates.len())?;
                    for (ci, logp) in candidates {
                        writeln!(f, "{ci} {logp}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Surface units with the chosen indices filled in.
    pub units: Vec<String>,
    /// Chosen index per choice slot.
    pub cis: Vec<u16>,
    /// Sum of all fixed and chosen log-posteriors.
    pub acoustic_logp: f64,
    pub text: Option<String>,
    pub lm_logp: Option<f64>,
    pub fused_score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescoreConfig {
    lambda: f64,
    n_best: usize,
    beam_width: usize,
}

impl RescoreConfig {
    pub fn new(lambda: f64, n_best: usize, beam_width: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(PuceError::Invalid(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        if n_best == 0 {
            return Err(PuceError::Invalid("n-best must be at least 1".into()));
        }
        if beam_width < n_best {
            return Err(PuceError::Invalid(format!(
                "beam width {beam_width} is smaller than n-best {n_best}"
            )));
        }
        Ok(RescoreConfig {
            lambda,
            n_best,
            beam_width,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_best(&self) -> usize {
        self.n_best
    }

    pub fn beam_width(&self) -> usize {
        self.beam_width
    }
}

/// Descending score, then lexicographically smaller index sequence.
pub fn hypothesis_order(a_score: f64, a_cis: &[u16], b_score: f64, b_cis: &[u16]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_cis.cmp(b_cis))
}

#[derive(Clone, Copy)]
struct BeamEntry {
    score: f64,
    /// Rank of this entry's index sequence in lexicographic order within the beam.
    lex_rank: usize,
    /// Index into this step's back-pointer table, `None` before the first choice.
    node: Option<usize>,
}

/// Left-to-right beam search over the choice slots.
///
/// Returns at most `n_best` hypotheses, best first. With `beam_width >=
/// n_best` the result equals the top of the exhaustive product because every
/// prefix of a top-n hypothesis is itself among the top-n prefixes.
pub fn ci_beam_search(lattice: &EmissionLattice, cfg: &RescoreConfig) -> Vec<Hypothesis> {
    // back-pointers: (parent node, chosen index)
    let mut nodes: Vec<(Option<usize>, u16)> = Vec::new();
    let mut beam = vec![BeamEntry {
        score: 0.0,
        lex_rank: 0,
        node: None,
    }];
    let mut expanded: Vec<(BeamEntry, u16)> = Vec::new();

    for slot in lattice.slots() {
        match slot {
            Slot::Fixed { logp, .. } => {
                for e in &mut beam {
                    e.score += logp;
                }
            }
            Slot::Choice { candidates } => {
                expanded.clear();
                for e in &beam {
                    for &(ci, logp) in candidates {
                        expanded.push((
                            BeamEntry {
                                score: e.score + logp,
                                ..*e
                            },
                            ci,
                        ));
                    }
                }
                let cmp = |a: &(BeamEntry, u16), b: &(BeamEntry, u16)| {
                    b.0.score
                        .total_cmp(&a.0.score)
                        .then(a.0.lex_rank.cmp(&b.0.lex_rank))
                        .then(a.1.cmp(&b.1))
                };
                let keep = cfg.beam_width.min(expanded.len());
                if keep < expanded.len() {
                    expanded.select_nth_unstable_by(keep - 1, cmp);
                    expanded.truncate(keep);
                }
                // lexicographic ranks for the next step
                let mut lex: Vec<usize> = (0..expanded.len()).collect();
                lex.sort_by(|&i, &j| {
                    let (a, b) = (&expanded[i], &expanded[j]);
                    a.0.lex_rank.cmp(&b.0.lex_rank).then(a.1.cmp(&b.1))
                });
                let mut ranks = vec![0; expanded.len()];
                for (r, &i) in lex.iter().enumerate() {
                    ranks[i] = r;
                }
                beam.clear();
                for (i, (e, ci)) in expanded.iter().enumerate() {
                    nodes.push((e.node, *ci));
                    beam.push(BeamEntry {
                        score: e.score,
                        lex_rank: ranks[i],
                        node: Some(nodes.len() - 1),
                    });
                }
            }
        }
    }

    beam.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.lex_rank.cmp(&b.lex_rank))
    });
    beam.truncate(cfg.n_best);
    beam.iter()
        .map(|e| {
            let mut cis = Vec::with_capacity(lattice.num_choices());
            let mut node = e.node;
            while let Some(n) = node {
                cis.push(nodes[n].1);
                node = nodes[n].0;
            }
            cis.reverse();
            Hypothesis {
                units: lattice.units_for(&cis),
                cis,
                acoustic_logp: e.score,
                text: None,
                lm_logp: None,
                fused_score: None,
            }
        })
        .collect()
}

/// Decodes each hypothesis's units to characters.
pub fn decode_hypotheses(hyps: &mut [Hypothesis], dict: &DictionaryPair) -> Result<()> {
    for (rank, h) in hyps.iter_mut().enumerate() {
        let mut text = String::new();
        for unit in &h.units {
            let c = parse_unit_any(unit)
                .ok()
                .and_then(|code| dict.character(&code))
                .ok_or_else(|| PuceError::Undecodable {
                    rank: rank + 1,
                    unit: unit.clone(),
                })?;
            text.push(c);
        }
        h.text = Some(text);
    }
    Ok(())
}

/// `fused = acoustic + lambda * lm`, one LM call per hypothesis, then a
/// stable sort by descending fused score. No length normalization: every
/// hypothesis from one lattice has the same number of units.
pub fn fuse_and_rerank<L: LmScorer + ?Sized>(
    mut hyps: Vec<Hypothesis>,
    lm: &L,
    dict: &DictionaryPair,
    lambda: f64,
) -> Result<Vec<Hypothesis>> {
    decode_hypotheses(&mut hyps, dict)?;
    for h in &mut hyps {
        let lm_logp = lm.score(h.text.as_deref().unwrap_or_default());
        h.lm_logp = Some(lm_logp);
        h.fused_score = Some(h.acoustic_logp + lambda * lm_logp);
    }
    hyps.sort_by(|a, b| {
        let (fa, fb) = (
            a.fused_score.unwrap_or(f64::NEG_INFINITY),
            b.fused_score.unwrap_or(f64::NEG_INFINITY),
        );
        fb.total_cmp(&fa)
    });
    Ok(hyps)
}

/// One TSV line per hypothesis: rank, acoustic, lm, fused, text, units.
pub fn format_nbest(hyps: &[Hypothesis]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    let mut out = String::new();
    for (i, h) in hyps.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{:.6}\t{}\t{}\t{}\t{}\n",
            i + 1,
            h.acoustic_logp,
            opt(h.lm_logp),
            opt(h.fused_score),
            h.text.as_deref().unwrap_or("-"),
            h.units.join(" ")
        ));
    }
    out
}

/// True when `token` ends with a tone meta symbol.
pub fn is_ms_token(token: &str) -> bool {
    token
        .chars()
        .last()
        .is_some_and(|c| tone_from_symbol(c).is_ok())
}
