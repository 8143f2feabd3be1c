//! Sub-character tokenization over the pronunciation part of each unit.
//!
//! Training is greedy pair merging in the style of byte-pair encoding, but a
//! merge never crosses a unit boundary and never touches the character index:
//! only base letters and the tone may fuse. The character index (one meta
//! symbol in MS mode, `#` plus single digits in INT mode) always stays as
//! standalone tokens, which also marks where each unit ends.
//!
//! Model file:
//!
//! ```text
//! mode=MS vocab=17
//! <unk>
//! <pad>
//! a
//! ...
//! #MERGES
//! m a
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::codec::{
    ci_symbol, parse_unit_any, render_pronunciation, render_unit_with, split_units, EncodedUnit,
    SymbolMode,
};
use crate::error::{PuceError, Result};
use crate::lexicon::PuceCode;

pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_ID: u32 = 0;
pub const PAD_ID: u32 = 1;
const NUM_SPECIALS: usize = 2;
const MERGES_MARKER: &str = "#MERGES";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerModel {
    mode: SymbolMode,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

/// Pronunciation atoms and index atoms of one unit.
fn unit_parts(code: &PuceCode, mode: SymbolMode) -> (Vec<String>, Vec<String>) {
    let pron = render_pronunciation(code.syllable(), mode)
        .chars()
        .map(String::from)
        .collect();
    let ci = match mode {
        SymbolMode::Ms => vec![ci_symbol(code.ci()).expect("valid code").to_string()],
        SymbolMode::Int => std::iter::once("#".to_string())
            .chain(code.ci().to_string().chars().map(String::from))
            .collect(),
    };
    (pron, ci)
}

fn parse_codes(line: &str, line_no: usize, mode: SymbolMode) -> Result<Vec<PuceCode>> {
    split_units(line, mode)
        .map_err(|e| PuceError::parse(line_no, e.to_string()))?
        .into_iter()
        .map(|u| match u {
            EncodedUnit::Puce(code) => Ok(code),
            EncodedUnit::Passthrough(text) => Err(PuceError::parse(
                line_no,
                format!("{text:?} is not a {mode} unit"),
            )),
        })
        .collect()
}

/// Greedy pair-merge training.
///
/// `target_vocab_size` counts regular tokens only; the two specials come on
/// top. Training stops at the target or once no pair occurs twice. Equal pair
/// counts go to the lexicographically greatest concatenation.
pub fn train_tokenizer<'a, I>(
    lines: I,
    target_vocab_size: usize,
    mode: SymbolMode,
) -> Result<TokenizerModel>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut word_counts: HashMap<Vec<String>, u64> = HashMap::new();
    let mut atoms: BTreeSet<String> = BTreeSet::new();
    for (i, line) in lines.into_iter().enumerate() {
        for code in parse_codes(line, i + 1, mode)? {
            let (pron, ci) = unit_parts(&code, mode);
            atoms.extend(pron.iter().cloned());
            atoms.extend(ci);
            *word_counts.entry(pron).or_insert(0) += 1;
        }
    }
    if target_vocab_size < atoms.len() {
        return Err(PuceError::Invalid(format!(
            "target vocabulary {target_vocab_size} is too small: minimum inventory is {} (+{NUM_SPECIALS} specials)",
            atoms.len()
        )));
    }

    let mut vocab: Vec<String> = vec![UNK_TOKEN.into(), PAD_TOKEN.into()];
    vocab.extend(atoms);
    let mut known: BTreeSet<String> = vocab.iter().cloned().collect();
    let mut words: Vec<(Vec<String>, u64)> = word_counts.into_iter().collect();
    words.sort();
    let mut merges = Vec::new();

    while vocab.len() - NUM_SPECIALS < target_vocab_size {
        let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (w, n) in &words {
            for p in w.windows(2) {
                *pair_counts.entry((&p[0], &p[1])).or_insert(0) += n;
            }
        }
        let best = pair_counts
            .into_iter()
            .max_by(|(a, ca), (b, cb)| {
                ca.cmp(cb)
                    .then_with(|| {
                        let ja = a.0.chars().chain(a.1.chars());
                        let jb = b.0.chars().chain(b.1.chars());
                        ja.cmp(jb)
                    })
                    .then_with(|| a.0.cmp(b.0))
            })
            .filter(|(_, c)| *c >= 2)
            .map(|((l, r), _)| (l.to_string(), r.to_string()));
        let Some((left, right)) = best else { break };
        let merged = format!("{left}{right}");
        for (w, _) in &mut words {
            merge_in_place(w, &left, &right, &merged);
        }
        if known.insert(merged.clone()) {
            vocab.push(merged);
        }
        merges.push((left, right));
    }
    Ok(TokenizerModel::from_parts(mode, vocab, merges))
}

fn merge_in_place(word: &mut Vec<String>, left: &str, right: &str, merged: &str) {
    let mut i = 0;
    while i + 1 < word.len() {
        if word[i] == left && word[i + 1] == right {
            word[i] = merged.to_string();
            word.remove(i + 1);
        }
        i += 1;
    }
}

impl TokenizerModel {
    fn from_parts(mode: SymbolMode, vocab: Vec<String>, merges: Vec<(String, String)>) -> Self {
        let ids = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        TokenizerModel {
            mode,
            vocab,
            ids,
            merges,
            ranks,
        }
    }

    pub fn mode(&self) -> SymbolMode {
        self.mode
    }

    /// Full vocabulary including the specials at ids 0 and 1.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    fn apply_merges(&self, mut parts: Vec<String>) -> Vec<String> {
        loop {
            let best = parts
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0].clone(), p[1].clone())).copied())
                .min();
            let Some(rank) = best else { return parts };
            let (l, r) = &self.merges[rank];
            let merged = format!("{l}{r}");
            merge_in_place(&mut parts, l, r, &merged);
        }
    }

    /// Token strings for one encoded line. Units that do not parse in the
    /// model's mode become a single unknown token.
    pub fn tokenize_to_strings(&self, line: &str) -> Vec<String> {
        let units = match split_units(line, self.mode) {
            Ok(u) => u,
            Err(_) => return vec![UNK_TOKEN.to_string()],
        };
        let mut out = Vec::new();
        for unit in units {
            match unit {
                EncodedUnit::Puce(code) => {
                    let (pron, ci) = unit_parts(&code, self.mode);
                    out.extend(self.apply_merges(pron));
                    out.extend(ci);
                }
                EncodedUnit::Passthrough(_) => out.push(UNK_TOKEN.to_string()),
            }
        }
        out
    }

    pub fn tokenize(&self, line: &str) -> Vec<u32> {
        self.tokenize_to_strings(line)
            .iter()
            .map(|t| self.token_id(t).unwrap_or(UNK_ID))
            .collect()
    }

    /// Concatenates tokens and restores the spaces between units.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        let tokens: Vec<&str> = ids
            .iter()
            .filter(|&&id| id != PAD_ID)
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN))
            .collect();
        self.join_tokens(&tokens)
    }

    /// As [`TokenizerModel::detokenize`] for token strings.
    pub fn join_tokens(&self, tokens: &[&str]) -> String {
        let mut out = String::new();
        let mut unit_open = false;
        let mut in_index = false;
        for &tok in tokens {
            if tok == PAD_TOKEN {
                continue;
            }
            let is_digit = !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit());
            if self.mode == SymbolMode::Int && in_index && !is_digit {
                in_index = false;
                unit_open = false;
            }
            if !unit_open && !out.is_empty() {
                out.push(' ');
            }
            out.push_str(tok);
            unit_open = true;
            match self.mode {
                SymbolMode::Ms => {
                    if tok.chars().any(crate::codec::is_ci_symbol) {
                        unit_open = false;
                    }
                }
                SymbolMode::Int => {
                    if tok == "#" {
                        in_index = true;
                    }
                }
            }
        }
        out
    }

    pub fn to_model_string(&self) -> String {
        let mut s = format!("mode={} vocab={}\n", self.mode, self.vocab.len());
        for t in &self.vocab {
            s.push_str(t);
            s.push('\n');
        }
        s.push_str(MERGES_MARKER);
        s.push('\n');
        for (l, r) in &self.merges {
            let _ = writeln!(s, "{l} {r}");
        }
        s
    }

    pub fn from_model_string(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| PuceError::parse(1, "empty tokenizer model"))?;
        let mut mode = None;
        let mut size = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("mode", m)) => mode = Some(m.parse::<SymbolMode>()?),
                Some(("vocab", n)) => {
                    size = Some(
                        n.parse::<usize>()
                            .map_err(|_| PuceError::parse(1, format!("bad vocab size {n:?}")))?,
                    )
                }
                _ => {
                    return Err(PuceError::parse(
                        1,
                        format!("unexpected header field {field:?}"),
                    ))
                }
            }
        }
        let (Some(mode), Some(size)) = (mode, size) else {
            return Err(PuceError::parse(
                1,
                "header must be `mode=<MS|INT> vocab=<n>`",
            ));
        };

        let mut vocab = Vec::with_capacity(size);
        for _ in 0..size {
            let (n, tok) = lines
                .next()
                .ok_or_else(|| PuceError::parse(size + 1, "vocabulary shorter than header"))?;
            if tok.is_empty() || tok.contains(' ') {
                return Err(PuceError::parse(n, format!("invalid token {tok:?}")));
            }
            if vocab.contains(&tok.to_string()) {
                return Err(PuceError::parse(n, format!("duplicate token {tok:?}")));
            }
            vocab.push(tok.to_string());
        }
        if vocab.len() < NUM_SPECIALS || vocab[0] != UNK_TOKEN || vocab[1] != PAD_TOKEN {
            return Err(PuceError::parse(2, "ids 0 and 1 must be <unk> and <pad>"));
        }
        match lines.next() {
            Some((_, MERGES_MARKER)) => {}
            Some((n, other)) => {
                return Err(PuceError::parse(
                    n,
                    format!("expected {MERGES_MARKER}, found {other:?}"),
                ))
            }
            None => {
                return Err(PuceError::parse(
                    size + 2,
                    format!("missing {MERGES_MARKER}"),
                ))
            }
        }
        let mut merges = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (l, r) = line
                .split_once(' ')
                .ok_or_else(|| PuceError::parse(n, "merge must be `<left> <right>`"))?;
            let merged = format!("{l}{r}");
            for t in [l, r, merged.as_str()] {
                if !vocab.iter().any(|v| v == t) {
                    return Err(PuceError::parse(
                        n,
                        format!("merge token {t:?} not in vocabulary"),
                    ));
                }
            }
            if l.chars().chain(r.chars()).any(crate::codec::is_ci_symbol) {
                return Err(PuceError::parse(n, "merge involves a CI symbol"));
            }
            merges.push((l.to_string(), r.to_string()));
        }
        Ok(TokenizerModel::from_parts(mode, vocab, merges))
    }
}

/// Atom inventory of a corpus under one tone/index rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inventory {
    pub letters: usize,
    pub tone_atoms: usize,
    pub ci_atoms: usize,
    /// Distinct atoms overall; tone and index digits are shared under INT/INT.
    pub total: usize,
}

/// Minimum token inventory of an encoded corpus (units in any mode) when
/// rendered with the given tone and index modes.
pub fn vocab_report<'a, I>(
    lines: I,
    tone_mode: SymbolMode,
    ci_mode: SymbolMode,
) -> Result<Inventory>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut letters = BTreeSet::new();
    let mut tones = BTreeSet::new();
    let mut cis = BTreeSet::new();
    for (i, line) in lines.into_iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        for unit in line.split(' ') {
            let code = parse_unit_any(unit).map_err(|e| PuceError::parse(i + 1, e.to_string()))?;
            letters.extend(code.syllable().base().chars());
            let rendered = render_unit_with(&code, tone_mode, ci_mode);
            let tail: Vec<char> = rendered
                .chars()
                .skip(code.syllable().base().len())
                .collect();
            tones.insert(tail[0]);
            cis.extend(tail[1..].iter().copied());
        }
    }
    let all: BTreeSet<char> = letters.iter().chain(&tones).chain(&cis).copied().collect();
    Ok(Inventory {
        letters: letters.len(),
        tone_atoms: tones.len(),
        ci_atoms: cis.len(),
        total: all.len(),
    })
}
