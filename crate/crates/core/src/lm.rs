//! Character n-gram language model with additive smoothing.
//!
//! Each line is padded with `order - 1` start markers and one end marker.
//! The conditional probability of symbol `w` after context `h` is
//! `(count(h, w) + k) / (count(h) + k * |V|)` where `V` holds every observed
//! character plus both markers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use crate::error::{PuceError, Result};

/// Anything that can assign a log probability to a decoded character string.
pub trait LmScorer {
    /// Natural-log probability; must be finite.
    fn score(&self, text: &str) -> f64;
}

impl<T: LmScorer + ?Sized> LmScorer for &T {
    fn score(&self, text: &str) -> f64 {
        (**self).score(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Start,
    End,
    Char(char),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Start => f.write_str("<s>"),
            Symbol::End => f.write_str("</s>"),
            Symbol::Char('\\') => f.write_str("\\\\"),
            Symbol::Char('<') => f.write_str("\\<"),
            Symbol::Char(' ') => f.write_str("\\s"),
            Symbol::Char('\t') => f.write_str("\\t"),
            Symbol::Char('\n') => f.write_str("\\n"),
            Symbol::Char('\r') => f.write_str("\\r"),
            Symbol::Char(c) => write!(f, "{c}"),
        }
    }
}

/// Parses a space-free run of rendered symbols, e.g. `<s>a\sb`.
fn parse_symbols(s: &str) -> Option<Vec<Symbol>> {
    let mut out = Vec::new();
    let mut rest = s;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("<s>") {
            out.push(Symbol::Start);
            rest = r;
        } else if let Some(r) = rest.strip_prefix("</s>") {
            out.push(Symbol::End);
            rest = r;
        } else if let Some(r) = rest.strip_prefix('\\') {
            let mut it = r.chars();
            let c = match it.next()? {
                '\\' => '\\',
                '<' => '<',
                's' => ' ',
                't' => '\t',
                'n' => '\n',
                'r' => '\r',
                _ => return None,
            };
            out.push(Symbol::Char(c));
            rest = it.as_str();
        } else {
            let mut it = rest.chars();
            let c = it.next()?;
            if c == '<' {
                return None;
            }
            out.push(Symbol::Char(c));
            rest = it.as_str();
        }
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    k: f64,
    counts: BTreeMap<Vec<Symbol>, BTreeMap<Symbol, u64>>,
    totals: BTreeMap<Vec<Symbol>, u64>,
    vocab: BTreeSet<Symbol>,
}

impl NGramModel {
    pub fn train<'a, I>(lines: I, order: usize, k: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if order == 0 {
            return Err(PuceError::Invalid("n-gram order must be at least 1".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(PuceError::Invalid(format!(
                "smoothing constant must be positive, got {k}"
            )));
        }
        let mut model = NGramModel {
            order,
            k,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
            vocab: [Symbol::Start, Symbol::End].into_iter().collect(),
        };
        let mut any = false;
        for line in lines {
            any = true;
            model.vocab.extend(line.chars().map(Symbol::Char));
            model.for_each_event(line, |ctx, sym, m| {
                *m.counts
                    .entry(ctx.to_vec())
                    .or_default()
                    .entry(sym)
                    .or_insert(0) += 1;
                *m.totals.entry(ctx.to_vec()).or_insert(0) += 1;
            });
        }
        if !any {
            return Err(PuceError::Invalid("cannot train on an empty corpus".into()));
        }
        Ok(model)
    }

    /// Calls `f(context, symbol)` for every predicted position of `line`.
    fn for_each_event<F>(&mut self, line: &str, mut f: F)
    where
        F: FnMut(&[Symbol], Symbol, &mut Self),
    {
        let mut seq: Vec<Symbol> = vec![Symbol::Start; self.order - 1];
        seq.extend(line.chars().map(Symbol::Char));
        seq.push(Symbol::End);
        let h = self.order - 1;
        for i in h..seq.len() {
            f(&seq[i - h..i], seq[i], self);
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &BTreeSet<Symbol> {
        &self.vocab
    }

    pub fn count(&self, context: &[Symbol], symbol: Symbol) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(&symbol))
            .copied()
            .unwrap_or(0)
    }

    pub fn contexts(&self) -> impl Iterator<Item = &[Symbol]> {
        self.counts.keys().map(Vec::as_slice)
    }

    /// Smoothed conditional probability; `context` must have length `order - 1`.
    pub fn prob(&self, context: &[Symbol], symbol: Symbol) -> f64 {
        let total = self.totals.get(context).copied().unwrap_or(0) as f64;
        let c = self.count(context, symbol) as f64;
        (c + self.k) / (total + self.k * self.vocab.len() as f64)
    }

    /// Natural-log probability of `text` including the end marker.
    pub fn log_prob(&self, text: &str) -> f64 {
        let h = self.order - 1;
        let mut seq: Vec<Symbol> = vec![Symbol::Start; h];
        seq.extend(text.chars().map(Symbol::Char));
        seq.push(Symbol::End);
        (h..seq.len())
            .map(|i| self.prob(&seq[i - h..i], seq[i]).ln())
            .sum()
    }

    /// Header `order k vocab_size`, then `context<TAB>symbol<TAB>count` lines.
    pub fn to_model_string(&self) -> String {
        let mut s = format!("{} {} {}\n", self.order, self.k, self.vocab.len());
        for (ctx, row) in &self.counts {
            let ctx: String = ctx.iter().map(ToString::to_string).collect();
            for (sym, n) in row {
                let _ = writeln!(s, "{ctx}\t{sym}\t{n}");
            }
        }
        s
    }

    pub fn from_model_string(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| PuceError::parse(1, "empty LM file"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        let [order, k, vsize] = fields[..] else {
            return Err(PuceError::parse(1, "header must be `order k vocab_size`"));
        };
        let bad = |m: &str| PuceError::parse(1, m.to_string());
        let order: usize = order.parse().map_err(|_| bad("bad order"))?;
        let k: f64 = k.parse().map_err(|_| bad("bad k"))?;
        let vsize: usize = vsize.parse().map_err(|_| bad("bad vocab size"))?;
        if order == 0 || !(k > 0.0 && k.is_finite()) {
            return Err(bad("order must be >= 1 and k > 0"));
        }
        let mut model = NGramModel {
            order,
            k,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
            vocab: [Symbol::Start, Symbol::End].into_iter().collect(),
        };
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [ctx, sym, count] = parts[..] else {
                return Err(PuceError::parse(n, "expected context<TAB>symbol<TAB>count"));
            };
            let ctx = parse_symbols(ctx)
                .filter(|c| c.len() == order - 1)
                .ok_or_else(|| PuceError::parse(n, format!("bad context {ctx:?}")))?;
            let sym = match parse_symbols(sym).as_deref() {
                Some([s]) => *s,
                _ => return Err(PuceError::parse(n, format!("bad symbol {sym:?}"))),
            };
            let count: u64 = count
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| PuceError::parse(n, format!("bad count {count:?}")))?;
            model.vocab.extend(ctx.iter().copied());
            model.vocab.insert(sym);
            *model.totals.entry(ctx.clone()).or_insert(0) += count;
            if model
                .counts
                .entry(ctx)
                .or_default()
                .insert(sym, count)
                .is_some()
            {
                return Err(PuceError::parse(n, "duplicate n-gram"));
            }
        }
        if model.vocab.len() != vsize {
            return Err(PuceError::parse(
                1,
                format!(
                    "header vocab size {vsize} but file implies {}",
                    model.vocab.len()
                ),
            ));
        }
        Ok(model)
    }
}

impl LmScorer for NGramModel {
    fn score(&self, text: &str) -> f64 {
        self.log_prob(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unigram_counts() {
        let m = NGramModel::train(["aa"], 1, 1.0).unwrap();
        assert_eq!(m.count(&[], Symbol::Char('a')), 2);
        assert_eq!(m.count(&[], Symbol::End), 1);
        assert_eq!(m.contexts().count(), 1);
    }

    #[test]
    fn bigram_counts() {
        let m = NGramModel::train(["ab", "ab"], 2, 1.0).unwrap();
        assert_eq!(m.count(&[Symbol::Start], Symbol::Char('a')), 2);
        assert_eq!(m.count(&[Symbol::Char('a')], Symbol::Char('b')), 2);
        assert_eq!(m.count(&[Symbol::Char('b')], Symbol::End), 2);
        assert_eq!(m.vocab_size(), 4);
    }

    #[test]
    fn bad_parameters() {
        assert!(NGramModel::train(["ab"], 0, 1.0).is_err());
        assert!(NGramModel::train(["ab"], 2, 0.0).is_err());
        assert!(NGramModel::train(std::iter::empty::<&str>(), 2, 1.0).is_err());
    }

    #[test]
    fn bigram_score_matches_hand_computation() {
        let m = NGramModel::train(["ab", "ab"], 2, 1.0).unwrap();
        // each step: (2 + 1) / (2 + 4 * 1)
        let want = 3.0 * (3.0f64 / 6.0).ln();
        assert!((m.score("ab") - want).abs() < 1e-12);
        assert!((want - (-2.0794)).abs() < 1e-4);
    }

    #[test]
    fn empty_text_scores_end_only() {
        let m = NGramModel::train(["ab", "ab"], 2, 1.0).unwrap();
        let want = m.prob(&[Symbol::Start], Symbol::End).ln();
        assert_eq!(m.score(""), want);
        assert!((want - (1.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn unseen_characters_stay_finite() {
        let m = NGramModel::train(["ab"], 3, 0.1).unwrap();
        assert!(m.score("完全没见过的字 <\\>").is_finite());
    }

    #[test]
    fn model_file_round_trip() {
        let m = NGramModel::train(["a b\tc", "<s>\\", "语音识别"], 3, 0.1).unwrap();
        let text = m.to_model_string();
        assert!(text.starts_with("3 0.1 "));
        let back = NGramModel::from_model_string(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_model_string(), text);
        assert_eq!(back.score("a b"), m.score("a b"));
    }

    #[test]
    fn model_file_errors() {
        assert!(NGramModel::from_model_string("").is_err());
        assert!(NGramModel::from_model_string("2 1 4\n<s>\ta\t0\n").is_err());
        assert!(NGramModel::from_model_string("2 1 5\n<s>\ta\t1\n").is_err());
        assert!(NGramModel::from_model_string("2 1 3\n<s>\ta\t1\n").is_ok());
    }
}
