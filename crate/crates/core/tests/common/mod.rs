//! Generators and independent oracles shared by the integration suites.
#![allow(dead_code)]

use puce_core::decoder::Slot;
use puce_core::{EmissionLattice, LexiconEntry, TonalSyllable};
use rand::seq::SliceRandom;
use rand::Rng;

const INITIALS: [&str; 12] = ["", "b", "m", "d", "l", "g", "j", "x", "zh", "sh", "y", "w"];
const FINALS: [&str; 10] = ["a", "o", "e", "i", "u", "an", "ang", "ing", "ong", "ue"];

/// Every base syllable the generators draw from (120 of them).
pub fn syllable_bases() -> Vec<String> {
    INITIALS
        .iter()
        .flat_map(|i| FINALS.iter().map(move |f| format!("{i}{f}")))
        .collect()
}

pub fn cjk(i: usize) -> char {
    char::from_u32(0x4E00 + i as u32).unwrap()
}

/// A lexicon of `n_chars` characters with `groups` homophone groups of 3..=8
/// characters each and `polyphones` characters carrying a second reading.
pub fn synthetic_lexicon<R: Rng>(
    rng: &mut R,
    n_chars: usize,
    groups: usize,
    polyphones: usize,
) -> Vec<LexiconEntry> {
    let bases = syllable_bases();
    let mut syllables: Vec<TonalSyllable> = bases
        .iter()
        .flat_map(|b| (1..=5).map(move |t| TonalSyllable::new(b.clone(), t).unwrap()))
        .collect();
    syllables.shuffle(rng);
    let (group_syls, rest) = syllables.split_at(groups);

    let mut prons: Vec<Vec<TonalSyllable>> = Vec::with_capacity(n_chars);
    for syl in group_syls {
        let size = rng.gen_range(3..=8);
        for _ in 0..size {
            if prons.len() < n_chars {
                prons.push(vec![syl.clone()]);
            }
        }
    }
    while prons.len() < n_chars {
        let syl = if !group_syls.is_empty() && rng.gen_bool(0.3) {
            group_syls[rng.gen_range(0..group_syls.len())].clone()
        } else {
            rest[rng.gen_range(0..rest.len())].clone()
        };
        prons.push(vec![syl]);
    }
    let mut idx: Vec<usize> = (0..n_chars).collect();
    idx.shuffle(rng);
    for &i in idx.iter().take(polyphones) {
        loop {
            let extra = syllables[rng.gen_range(0..syllables.len())].clone();
            if !prons[i].contains(&extra) {
                if rng.gen_bool(0.5) {
                    prons[i].push(extra);
                } else {
                    prons[i].insert(0, extra);
                }
                break;
            }
        }
    }
    prons.shuffle(rng);
    prons
        .into_iter()
        .enumerate()
        .map(|(i, p)| LexiconEntry::new(cjk(i), p).unwrap())
        .collect()
}

/// `k` candidates with distinct indices in `1..=max_ci` whose probabilities sum
/// to at most 1. Roughly one slot in four carries exact ties.
pub fn sub_distribution<R: Rng>(rng: &mut R, k: usize, max_ci: u16) -> Vec<(u16, f64)> {
    let mut cis: Vec<u16> = (1..=max_ci).collect();
    cis.shuffle(rng);
    let mass: f64 = rng.gen_range(0.3..0.999);
    let tied = rng.gen_bool(0.25);
    let weights: Vec<f64> = (0..k)
        .map(|_| if tied { 1.0 } else { rng.gen_range(0.01..1.0) })
        .collect();
    let total: f64 = weights.iter().sum();
    cis.into_iter()
        .take(k)
        .zip(weights)
        .map(|(ci, w)| (ci, (w / total * mass).ln()))
        .collect()
}

/// Exhaustive top-`n` by enumerating every index assignment. Scores are summed
/// slot by slot from 0.0 in lattice order.
pub fn exhaustive_top_n(lattice: &EmissionLattice, n: usize) -> Vec<(Vec<u16>, f64)> {
    let choices: Vec<&Vec<(u16, f64)>> = lattice
        .slots()
        .iter()
        .filter_map(|s| match s {
            Slot::Choice { candidates } => Some(candidates),
            Slot::Fixed { .. } => None,
        })
        .collect();
    let mut digits = vec![0usize; choices.len()];
    let mut all = Vec::new();
    loop {
        let mut score = 0.0f64;
        let mut cis = Vec::with_capacity(choices.len());
        let mut c = 0;
        for slot in lattice.slots() {
            match slot {
                Slot::Fixed { logp, .. } => score += logp,
                Slot::Choice { .. } => {
                    let (ci, lp) = choices[c][digits[c]];
                    score += lp;
                    cis.push(ci);
                    c += 1;
                }
            }
        }
        all.push((cis, score));
        // odometer increment
        let mut pos = choices.len();
        loop {
            if pos == 0 {
                all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                all.truncate(n);
                return all;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < choices[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Plain full-matrix Levenshtein distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}
