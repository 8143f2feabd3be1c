//! Lexicon ingestion and the paired encode/decode dictionaries.
//!
//! A lexicon file maps each character to one or more tonal syllables:
//!
//! ```text
//! # comment
//! 妈<TAB>ma1
//! 乐<TAB>yue4;le4
//! ```
//!
//! Characters sharing a tonal syllable are numbered 1, 2, ... in order of first
//! appearance; that number is the character index (CI). The decode dictionary
//! maps `syllable#ci` to the character and the encode dictionary is its
//! inverse, one code per pronunciation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{PuceError, Result};

/// Largest character index representable by the CI meta-symbol range.
pub const MAX_CI: u16 = 900;

/// Neutral tone is written as 5.
pub const NEUTRAL_TONE: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TonalSyllable {
    base: String,
    tone: u8,
}

impl TonalSyllable {
    /// `base` must be lowercase ASCII letters (ü written as `v`), `tone` in 1..=5.
    pub fn new(base: impl Into<String>, tone: u8) -> Result<Self> {
        let base = base.into();
        if base.is_empty() {
            return Err(PuceError::Range("syllable base is empty".into()));
        }
        if let Some(c) = base.chars().find(|c| !c.is_ascii_lowercase()) {
            return Err(PuceError::Range(format!(
                "syllable {base:?} contains non-letter {c:?}"
            )));
        }
        if !(1..=NEUTRAL_TONE).contains(&tone) {
            return Err(PuceError::Range(format!("tone {tone} out of range 1..=5")));
        }
        Ok(TonalSyllable { base, tone })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn tone(&self) -> u8 {
        self.tone
    }
}

impl fmt::Display for TonalSyllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.base, self.tone)
    }
}

impl FromStr for TonalSyllable {
    type Err = PuceError;

    /// Parses `ma3`: letters followed by exactly one tone digit.
    fn from_str(s: &str) -> Result<Self> {
        let Some(last) = s.chars().last() else {
            return Err(PuceError::Range("empty syllable".into()));
        };
        let Some(tone) = last.to_digit(10) else {
            return Err(PuceError::Range(format!(
                "syllable {s:?} has no tone digit"
            )));
        };
        TonalSyllable::new(&s[..s.len() - 1], tone as u8)
    }
}

/// One character's encoding: tonal syllable plus character index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PuceCode {
    syllable: TonalSyllable,
    ci: u16,
}

impl PuceCode {
    pub fn new(syllable: TonalSyllable, ci: u16) -> Result<Self> {
        if !(1..=MAX_CI).contains(&ci) {
            return Err(PuceError::Range(format!(
                "character index {ci} out of range 1..={MAX_CI}"
            )));
        }
        Ok(PuceCode { syllable, ci })
    }

    pub fn syllable(&self) -> &TonalSyllable {
        &self.syllable
    }

    pub fn ci(&self) -> u16 {
        self.ci
    }
}

/// Renders the integer notation `ma3#2`.
impl fmt::Display for PuceCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.syllable, self.ci)
    }
}

impl FromStr for PuceCode {
    type Err = PuceError;

    fn from_str(s: &str) -> Result<Self> {
        let (syl, ci) = s
            .split_once('#')
            .ok_or_else(|| PuceError::Range(format!("code {s:?} has no '#'")))?;
        let syllable = syl.parse()?;
        if ci.is_empty() || !ci.bytes().all(|b| b.is_ascii_digit()) {
            return Err(PuceError::Range(format!(
                "code {s:?} has a malformed index"
            )));
        }
        let ci = ci
            .parse::<u16>()
            .map_err(|_| PuceError::Range(format!("character index in {s:?} out of range")))?;
        PuceCode::new(syllable, ci)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub character: char,
    /// First entry is the canonical pronunciation.
    pub pronunciations: Vec<TonalSyllable>,
}

impl LexiconEntry {
    pub fn new(character: char, pronunciations: Vec<TonalSyllable>) -> Result<Self> {
        if pronunciations.is_empty() {
            return Err(PuceError::Invalid(format!(
                "character {character:?} has no pronunciation"
            )));
        }
        let mut seen = HashSet::new();
        for p in &pronunciations {
            if !seen.insert(p) {
                return Err(PuceError::Invalid(format!(
                    "character {character:?} lists pronunciation {p} twice"
                )));
            }
        }
        Ok(LexiconEntry {
            character,
            pronunciations,
        })
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Parses a lexicon file. Blank lines and `#` comments are skipped.
pub fn parse_lexicon(text: &str) -> Result<Vec<LexiconEntry>> {
    let mut entries = Vec::new();
    let mut seen: HashMap<char, usize> = HashMap::new();
    for (line_no, line) in content_lines(text) {
        let (key, prons) = line
            .split_once('\t')
            .ok_or_else(|| PuceError::parse(line_no, "missing tab"))?;
        let mut chars = key.chars();
        let character = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => {
                return Err(PuceError::parse(
                    line_no,
                    format!("key {key:?} must be a single character"),
                ))
            }
        };
        let pronunciations = prons
            .split(';')
            .map(|p| parse_lexicon_syllable(p.trim(), line_no))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = seen.insert(character, line_no) {
            return Err(PuceError::parse(
                line_no,
                format!("duplicate character {character:?} (first defined on line {first})"),
            ));
        }
        let entry = LexiconEntry::new(character, pronunciations).map_err(|e| match e {
            PuceError::Invalid(m) => PuceError::parse(line_no, m),
            other => other,
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

fn parse_lexicon_syllable(s: &str, line_no: usize) -> Result<TonalSyllable> {
    s.parse()
        .map_err(|e: PuceError| PuceError::parse(line_no, e.to_string()))
}

/// Parses a `<char><TAB><count>` file used to reorder a lexicon by corpus frequency.
pub fn parse_frequency_counts(text: &str) -> Result<HashMap<char, u64>> {
    let mut counts = HashMap::new();
    for (line_no, line) in content_lines(text) {
        let (key, count) = line
            .split_once('\t')
            .ok_or_else(|| PuceError::parse(line_no, "missing tab"))?;
        let mut chars = key.chars();
        let c = match (chars.next(), chars.next()) {
            (Some(c), None) => c,
            _ => return Err(PuceError::parse(line_no, "key must be a single character")),
        };
        let n = count
            .trim()
            .parse::<u64>()
            .map_err(|_| PuceError::parse(line_no, format!("bad count {count:?}")))?;
        *counts.entry(c).or_insert(0) += n;
    }
    Ok(counts)
}

/// Stable reorder by descending frequency; characters without a count keep
/// their relative order after all counted ones.
pub fn sort_by_frequency(entries: &mut [LexiconEntry], counts: &HashMap<char, u64>) {
    entries.sort_by_key(|e| std::cmp::Reverse(counts.get(&e.character).copied().unwrap_or(0)));
}

/// Paired encode (char → codes) and decode (code → char) dictionaries.
///
/// Immutable once built; all invariants (mutual inverse, contiguous CIs) are
/// checked on construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DictionaryPair {
    encode: BTreeMap<char, Vec<PuceCode>>,
    decode: BTreeMap<PuceCode, char>,
    per_syllable: BTreeMap<TonalSyllable, u16>,
}

/// Assigns character indices in entry order.
pub fn build_dictionaries(entries: &[LexiconEntry]) -> Result<DictionaryPair> {
    let mut dict = DictionaryPair::default();
    for entry in entries {
        if dict.encode.contains_key(&entry.character) {
            return Err(PuceError::Invalid(format!(
                "duplicate character {:?}",
                entry.character
            )));
        }
        let mut codes = Vec::with_capacity(entry.pronunciations.len());
        for syllable in &entry.pronunciations {
            if codes.iter().any(|c: &PuceCode| c.syllable == *syllable) {
                return Err(PuceError::Invalid(format!(
                    "character {:?} lists pronunciation {syllable} twice",
                    entry.character
                )));
            }
            let count = dict.per_syllable.entry(syllable.clone()).or_insert(0);
            if *count >= MAX_CI {
                return Err(PuceError::Capacity {
                    syllable: syllable.to_string(),
                    max: MAX_CI,
                });
            }
            *count += 1;
            let code = PuceCode::new(syllable.clone(), *count)?;
            dict.decode.insert(code.clone(), entry.character);
            codes.push(code);
        }
        dict.encode.insert(entry.character, codes);
    }
    Ok(dict)
}

impl DictionaryPair {
    /// All codes of `c`, canonical first.
    pub fn codes(&self, c: char) -> Option<&[PuceCode]> {
        self.encode.get(&c).map(Vec::as_slice)
    }

    pub fn canonical(&self, c: char) -> Option<&PuceCode> {
        self.encode.get(&c).and_then(|v| v.first())
    }

    pub fn character(&self, code: &PuceCode) -> Option<char> {
        self.decode.get(code).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.encode.contains_key(&c)
    }

    /// Number of characters sharing `syllable` (0 when unknown).
    pub fn syllable_count(&self, syllable: &TonalSyllable) -> u16 {
        self.per_syllable.get(syllable).copied().unwrap_or(0)
    }

    pub fn encode_map(&self) -> &BTreeMap<char, Vec<PuceCode>> {
        &self.encode
    }

    pub fn decode_map(&self) -> &BTreeMap<PuceCode, char> {
        &self.decode
    }

    pub fn per_syllable_count(&self) -> &BTreeMap<TonalSyllable, u16> {
        &self.per_syllable
    }

    pub fn num_characters(&self) -> usize {
        self.encode.len()
    }

    pub fn max_ci(&self) -> u16 {
        self.per_syllable.values().copied().max().unwrap_or(0)
    }

    /// Renders `(encode file, decode file)`.
    ///
    /// Decode lines are `ma3#2<TAB>码` sorted by code; encode lines are
    /// `乐<TAB>yue4#1;le4#1` sorted by character, codes in pronunciation order.
    pub fn serialize(&self) -> (String, String) {
        let mut enc = String::new();
        for (c, codes) in &self.encode {
            let joined: Vec<String> = codes.iter().map(ToString::to_string).collect();
            enc.push(*c);
            enc.push('\t');
            enc.push_str(&joined.join(";"));
            enc.push('\n');
        }
        let mut dec = String::new();
        for (code, c) in &self.decode {
            dec.push_str(&code.to_string());
            dec.push('\t');
            dec.push(*c);
            dec.push('\n');
        }
        (enc, dec)
    }

    /// Inverse of [`DictionaryPair::serialize`]; rejects files that break the
    /// dictionary invariants.
    pub fn deserialize(encode_file: &str, decode_file: &str) -> Result<Self> {
        let mut decode = BTreeMap::new();
        for (line_no, line) in content_lines(decode_file) {
            let (code, ch) = line
                .split_once('\t')
                .ok_or_else(|| PuceError::parse(line_no, "missing tab"))?;
            let code: PuceCode = code
                .parse()
                .map_err(|e: PuceError| PuceError::parse(line_no, e.to_string()))?;
            let c = single_char(ch).ok_or_else(|| {
                PuceError::parse(line_no, format!("value {ch:?} must be a single character"))
            })?;
            if decode.insert(code.clone(), c).is_some() {
                return Err(PuceError::parse(line_no, format!("duplicate code {code}")));
            }
        }

        let mut per_syllable: BTreeMap<TonalSyllable, u16> = BTreeMap::new();
        let mut members: BTreeMap<&TonalSyllable, HashSet<char>> = BTreeMap::new();
        for (code, c) in &decode {
            let expected = per_syllable.get(&code.syllable).copied().unwrap_or(0) + 1;
            // BTreeMap iteration is ordered by (syllable, ci)
            if code.ci != expected {
                return Err(PuceError::Dictionary(format!(
                    "ci gap: {} expected index {expected} but found {code}",
                    code.syllable
                )));
            }
            per_syllable.insert(code.syllable.clone(), expected);
            if !members.entry(&code.syllable).or_default().insert(*c) {
                return Err(PuceError::Dictionary(format!(
                    "character {c:?} appears twice under {}",
                    code.syllable
                )));
            }
        }

        let mut encode: BTreeMap<char, Vec<PuceCode>> = BTreeMap::new();
        let mut covered = 0usize;
        for (line_no, line) in content_lines(encode_file) {
            let (ch, codes) = line
                .split_once('\t')
                .ok_or_else(|| PuceError::parse(line_no, "missing tab"))?;
            let c = single_char(ch).ok_or_else(|| {
                PuceError::parse(line_no, format!("key {ch:?} must be a single character"))
            })?;
            let codes = codes
                .split(';')
                .map(|s| {
                    s.parse::<PuceCode>()
                        .map_err(|e| PuceError::parse(line_no, e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            for (i, code) in codes.iter().enumerate() {
                if codes[..i].iter().any(|o| o.syllable == code.syllable) {
                    return Err(PuceError::parse(
                        line_no,
                        format!("{c:?} lists syllable {} twice", code.syllable),
                    ));
                }
                match decode.get(code) {
                    Some(d) if *d == c => {}
                    Some(d) => {
                        return Err(PuceError::Dictionary(format!(
                            "not inverse: encode {c:?} -> {code} but decode {code} -> {d:?}"
                        )))
                    }
                    None => {
                        return Err(PuceError::Dictionary(format!(
                            "not inverse: encode {c:?} -> {code} missing from decode file"
                        )))
                    }
                }
            }
            covered += codes.len();
            if encode.insert(c, codes).is_some() {
                return Err(PuceError::parse(
                    line_no,
                    format!("duplicate character {c:?}"),
                ));
            }
        }
        if covered != decode.len() {
            let missing = decode
                .iter()
                .find(|(code, c)| !encode.get(c).is_some_and(|v| v.contains(code)))
                .map(|(code, c)| format!("{code} -> {c:?}"))
                .unwrap_or_default();
            return Err(PuceError::Dictionary(format!(
                "not inverse: decode {missing} missing from encode file"
            )));
        }
        Ok(DictionaryPair {
            encode,
            decode,
            per_syllable,
        })
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const FIXTURE_LEX: &str =
        "妈\tma1\n麻\tma2\n马\tma3\n码\tma3\n吗\tma5\n语\tyu3\n音\tyin1\n乐\tyue4;le4\n";

    pub(crate) fn fixture() -> DictionaryPair {
        build_dictionaries(&parse_lexicon(FIXTURE_LEX).unwrap()).unwrap()
    }

    fn code(base: &str, tone: u8, ci: u16) -> PuceCode {
        PuceCode::new(TonalSyllable::new(base, tone).unwrap(), ci).unwrap()
    }

    #[test]
    fn parses_single_line() {
        let e = parse_lexicon("妈\tma1").unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].character, '妈');
        assert_eq!(
            e[0].pronunciations,
            vec![TonalSyllable::new("ma", 1).unwrap()]
        );
    }

    #[test]
    fn parses_polyphone_in_order() {
        let e = parse_lexicon("乐\tyue4;le4").unwrap();
        assert_eq!(
            e[0].pronunciations,
            vec![
                TonalSyllable::new("yue", 4).unwrap(),
                TonalSyllable::new("le", 4).unwrap()
            ]
        );
    }

    #[test]
    fn tone_zero_is_rejected_with_line() {
        let err = parse_lexicon("马\tma0").unwrap_err();
        assert!(matches!(err, PuceError::Parse { line: 1, .. }));
        assert_eq!(err.to_string(), "line 1: tone 0 out of range 1..=5");
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse_lexicon("# c\n\n马 ma3").unwrap_err(),
            PuceError::Parse { line: 3, .. }
        ));
        assert!(parse_lexicon("马\tMa3").is_err());
        assert!(parse_lexicon("马\tm-a3").is_err());
        assert!(parse_lexicon("马\t3").is_err());
        assert!(parse_lexicon("马马\tma3").is_err());
        assert!(parse_lexicon("马\tma6").is_err());
        assert!(parse_lexicon("马\tma3;ma3").is_err());
        assert!(matches!(
            parse_lexicon("马\tma3\n马\tma4").unwrap_err(),
            PuceError::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let e = parse_lexicon("# header\n\n妈\tma1\r\n  \n").unwrap();
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn fixture_homophones_follow_file_order() {
        let d = fixture();
        assert_eq!(d.character(&code("ma", 3, 1)), Some('马'));
        assert_eq!(d.character(&code("ma", 3, 2)), Some('码'));
        assert_eq!(d.syllable_count(&TonalSyllable::new("ma", 3).unwrap()), 2);
    }

    #[test]
    fn fixture_polyphone_codes() {
        let d = fixture();
        assert_eq!(
            d.codes('乐').unwrap(),
            &[code("yue", 4, 1), code("le", 4, 1)]
        );
        assert_eq!(d.canonical('乐'), Some(&code("yue", 4, 1)));
    }

    #[test]
    fn capacity_error_at_901() {
        let entries: Vec<_> = (0..901u32)
            .map(|i| {
                LexiconEntry::new(
                    char::from_u32(0x4E00 + i).unwrap(),
                    vec![TonalSyllable::new("ma", 3).unwrap()],
                )
                .unwrap()
            })
            .collect();
        assert!(build_dictionaries(&entries[..900]).is_ok());
        assert_eq!(
            build_dictionaries(&entries).unwrap_err(),
            PuceError::Capacity {
                syllable: "ma3".into(),
                max: 900
            }
        );
    }

    #[test]
    fn frequency_sort_reorders_indices() {
        let mut entries = parse_lexicon(FIXTURE_LEX).unwrap();
        let counts = parse_frequency_counts("码\t10\n马\t3\n").unwrap();
        sort_by_frequency(&mut entries, &counts);
        let d = build_dictionaries(&entries).unwrap();
        assert_eq!(d.character(&code("ma", 3, 1)), Some('码'));
        assert_eq!(d.character(&code("ma", 3, 2)), Some('马'));
        // uncounted entries keep file order
        assert_eq!(entries[2].character, '妈');
    }

    #[test]
    fn decode_file_renders_int_notation() {
        let (enc, dec) = fixture().serialize();
        assert!(dec.lines().any(|l| l == "ma3#2\t码"));
        assert!(enc.lines().any(|l| l == "乐\tyue4#1;le4#1"));
        let lines: Vec<&str> = dec.lines().collect();
        assert_eq!(lines[0], "le4#1\t乐");
    }

    #[test]
    fn serialization_is_idempotent() {
        let (enc, dec) = fixture().serialize();
        let back = DictionaryPair::deserialize(&enc, &dec).unwrap();
        assert_eq!(back, fixture());
        assert_eq!(back.serialize(), (enc, dec));
    }

    #[test]
    fn deserialize_rejects_gap() {
        let err = DictionaryPair::deserialize("马\tma3#1\nX\tma3#3\n", "ma3#1\t马\nma3#3\tX\n")
            .unwrap_err();
        assert!(err.to_string().contains("ci gap"), "{err}");
    }

    #[test]
    fn deserialize_rejects_non_inverse() {
        let err = DictionaryPair::deserialize("马\tma3#2\n码\tma3#1\n", "ma3#1\t马\nma3#2\t码\n")
            .unwrap_err();
        assert!(err.to_string().contains("not inverse"), "{err}");
        let err = DictionaryPair::deserialize("马\tma3#1\n", "ma3#1\t马\nma3#2\t码\n").unwrap_err();
        assert!(err.to_string().contains("not inverse"), "{err}");
        let err = DictionaryPair::deserialize("马\tma3#1\n", "ma3#1\t马\nma3#2\t马\n").unwrap_err();
        assert!(err.to_string().contains("twice"), "{err}");
    }

    #[test]
    fn code_text_forms() {
        assert_eq!("ma3#2".parse::<PuceCode>().unwrap(), code("ma", 3, 2));
        assert!("ma3#0".parse::<PuceCode>().is_err());
        assert!("ma3#901".parse::<PuceCode>().is_err());
        assert!("ma3#+1".parse::<PuceCode>().is_err());
        assert!("ma#1".parse::<PuceCode>().is_err());
        assert_eq!(code("lv", 4, 12).to_string(), "lv4#12");
    }
}
