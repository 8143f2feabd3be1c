//! Text ↔ PUCE surface units.
//!
//! A unit is rendered either with meta symbols (MS) or integers (INT):
//!
//! | mode | tone      | index        | `码` (ma3, ci 2)  |
//! |------|-----------|--------------|-------------------|
//! | MS   | U+2741..  | U+A028..     | `ma\u{2743}\u{A029}` |
//! | INT  | digit     | `#` + decimal | `ma3#2`          |
//!
//! Tone `t` is code point `10048 + t` (10049..=10053; 10054 stays reserved)
//! and character index `i` is `40999 + i` (41000..=41899). Units in an encoded
//! line are separated by one ASCII space.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{PuceError, Result};
use crate::lexicon::{DictionaryPair, PuceCode, TonalSyllable, MAX_CI, NEUTRAL_TONE};

pub const TONE_BASE: u32 = 10048;
pub const CI_BASE: u32 = 40999;
/// Stands in for a literal space inside a passthrough unit.
pub const SPACE_ESCAPE: char = '\u{2581}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolMode {
    /// Meta symbols.
    Ms,
    /// Integers.
    Int,
}

impl fmt::Display for SymbolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolMode::Ms => "MS",
            SymbolMode::Int => "INT",
        })
    }
}

impl FromStr for SymbolMode {
    type Err = PuceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ms" => Ok(SymbolMode::Ms),
            "int" => Ok(SymbolMode::Int),
            _ => Err(PuceError::Invalid(format!(
                "unknown symbol mode {s:?} (expected ms or int)"
            ))),
        }
    }
}

pub fn tone_symbol(tone: u8) -> Result<char> {
    if !(1..=NEUTRAL_TONE).contains(&tone) {
        return Err(PuceError::Range(format!("tone {tone} out of range 1..=5")));
    }
    Ok(char::from_u32(TONE_BASE + tone as u32).expect("valid scalar"))
}

pub fn ci_symbol(ci: u16) -> Result<char> {
    if !(1..=MAX_CI).contains(&ci) {
        return Err(PuceError::Range(format!(
            "character index {ci} out of range 1..={MAX_CI}"
        )));
    }
    Ok(char::from_u32(CI_BASE + ci as u32).expect("valid scalar"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaSymbol {
    Tone(u8),
    Ci(u16),
}

pub fn meta_symbol_value(c: char) -> Result<MetaSymbol> {
    let cp = c as u32;
    if (TONE_BASE + 1..=TONE_BASE + NEUTRAL_TONE as u32).contains(&cp) {
        Ok(MetaSymbol::Tone((cp - TONE_BASE) as u8))
    } else if (CI_BASE + 1..=CI_BASE + MAX_CI as u32).contains(&cp) {
        Ok(MetaSymbol::Ci((cp - CI_BASE) as u16))
    } else {
        Err(PuceError::Range(format!(
            "{c:?} (U+{cp:04X}) is not a meta symbol"
        )))
    }
}

pub fn tone_from_symbol(c: char) -> Result<u8> {
    match meta_symbol_value(c)? {
        MetaSymbol::Tone(t) => Ok(t),
        MetaSymbol::Ci(_) => Err(PuceError::Range(format!("{c:?} is not a tone symbol"))),
    }
}

pub fn ci_from_symbol(c: char) -> Result<u16> {
    match meta_symbol_value(c)? {
        MetaSymbol::Ci(i) => Ok(i),
        MetaSymbol::Tone(_) => Err(PuceError::Range(format!("{c:?} is not a CI symbol"))),
    }
}

pub(crate) fn is_ci_symbol(c: char) -> bool {
    matches!(meta_symbol_value(c), Ok(MetaSymbol::Ci(_)))
}

pub fn render_unit(code: &PuceCode, mode: SymbolMode) -> String {
    render_unit_with(code, mode, mode)
}

/// Renders with independent tone and index modes, e.g. MS tone with INT index
/// gives `ma\u{2743}#2`.
pub fn render_unit_with(code: &PuceCode, tone_mode: SymbolMode, ci_mode: SymbolMode) -> String {
    let mut out = String::with_capacity(code.syllable().base().len() + 8);
    out.push_str(code.syllable().base());
    push_pronunciation_tail(&mut out, code.syllable().tone(), tone_mode);
    match ci_mode {
        SymbolMode::Ms => out.push(ci_symbol(code.ci()).expect("validated code")),
        SymbolMode::Int => {
            out.push('#');
            out.push_str(&code.ci().to_string());
        }
    }
    out
}

/// Base letters plus the rendered tone, i.e. the part that tokenization may merge.
pub fn render_pronunciation(syllable: &TonalSyllable, mode: SymbolMode) -> String {
    let mut out = syllable.base().to_string();
    push_pronunciation_tail(&mut out, syllable.tone(), mode);
    out
}

fn push_pronunciation_tail(out: &mut String, tone: u8, mode: SymbolMode) {
    match mode {
        SymbolMode::Ms => out.push(tone_symbol(tone).expect("validated syllable")),
        SymbolMode::Int => out.push(char::from(b'0' + tone)),
    }
}

pub fn parse_unit(surface: &str, mode: SymbolMode) -> Result<PuceCode> {
    parse_unit_parts(surface, Some(mode), Some(mode))
}

/// Parses a unit whose tone and index may each be in either mode.
pub fn parse_unit_any(surface: &str) -> Result<PuceCode> {
    parse_unit_parts(surface, None, None)
}

fn parse_unit_parts(
    surface: &str,
    tone_mode: Option<SymbolMode>,
    ci_mode: Option<SymbolMode>,
) -> Result<PuceCode> {
    let chars: Vec<char> = surface.chars().collect();
    let err = |pos: usize, msg: &str| PuceError::unit(surface, pos, msg);

    let letters = chars.iter().take_while(|c| c.is_ascii_lowercase()).count();
    if letters == 0 {
        return Err(err(0, "expected syllable letters"));
    }
    let base: String = chars[..letters].iter().collect();
    let mut pos = letters;

    let tone = match chars.get(pos) {
        None => return Err(err(pos, "missing tone")),
        Some(&c) if c.is_ascii_digit() && tone_mode != Some(SymbolMode::Ms) => {
            let t = c as u8 - b'0';
            if !(1..=NEUTRAL_TONE).contains(&t) {
                return Err(err(pos, "tone digit out of range 1..=5"));
            }
            t
        }
        Some(&c) if tone_mode != Some(SymbolMode::Int) => {
            tone_from_symbol(c).map_err(|_| err(pos, "expected tone symbol"))?
        }
        Some(_) => return Err(err(pos, "expected tone digit")),
    };
    pos += 1;

    let ci = match chars.get(pos) {
        None => return Err(err(pos, "missing character index")),
        Some('#') if ci_mode != Some(SymbolMode::Ms) => {
            pos += 1;
            let digits = &chars[pos..];
            if digits.is_empty() {
                return Err(err(pos, "missing index digits"));
            }
            if let Some(i) = digits.iter().position(|c| !c.is_ascii_digit()) {
                return Err(err(pos + i, "expected decimal digit"));
            }
            if digits[0] == '0' {
                return Err(err(pos, "index has a leading zero"));
            }
            let text: String = digits.iter().collect();
            let ci = text
                .parse::<u16>()
                .ok()
                .filter(|&i| i <= MAX_CI)
                .ok_or_else(|| err(pos, "character index out of range"))?;
            pos = chars.len();
            ci
        }
        Some(&c) if ci_mode != Some(SymbolMode::Int) => {
            let ci = ci_from_symbol(c).map_err(|_| err(pos, "expected CI symbol"))?;
            pos += 1;
            ci
        }
        Some(_) => return Err(err(pos, "expected '#'")),
    };
    if pos != chars.len() {
        return Err(err(pos, "trailing characters"));
    }
    let syllable = TonalSyllable::new(base, tone).map_err(|e| err(0, &e.to_string()))?;
    PuceCode::new(syllable, ci).map_err(|e| err(0, &e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodedUnit {
    Puce(PuceCode),
    /// Characters outside the lexicon, copied verbatim.
    Passthrough(String),
}

impl EncodedUnit {
    pub fn render(&self, mode: SymbolMode) -> String {
        match self {
            EncodedUnit::Puce(code) => render_unit(code, mode),
            EncodedUnit::Passthrough(text) => text.replace(' ', &SPACE_ESCAPE.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Fail,
    Pass,
    Skip,
}

impl FromStr for OovPolicy {
    type Err = PuceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(OovPolicy::Fail),
            "pass" => Ok(OovPolicy::Pass),
            "skip" => Ok(OovPolicy::Skip),
            _ => Err(PuceError::Invalid(format!(
                "unknown OOV policy {s:?} (expected fail, pass or skip)"
            ))),
        }
    }
}

/// Per-character pronunciation overrides for polyphones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    overrides: HashMap<char, TonalSyllable>,
}

impl Annotations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, character: char, syllable: TonalSyllable) {
        self.overrides.insert(character, syllable);
    }

    pub fn get(&self, character: char) -> Option<&TonalSyllable> {
        self.overrides.get(&character)
    }

    /// Parses `<char><TAB><syllable>` lines, e.g. `乐<TAB>le4`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ann = Annotations::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| PuceError::parse(i + 1, m);
            let (ch, syl) = line
                .split_once('\t')
                .ok_or_else(|| bad("missing tab".into()))?;
            let mut it = ch.chars();
            let c = match (it.next(), it.next()) {
                (Some(c), None) => c,
                _ => return Err(bad(format!("key {ch:?} must be a single character"))),
            };
            let syllable: TonalSyllable = syl
                .trim()
                .parse()
                .map_err(|e: PuceError| bad(e.to_string()))?;
            ann.insert(c, syllable);
        }
        Ok(ann)
    }
}

/// Splits `text` into characters and looks each one up.
///
/// Runs of consecutive out-of-lexicon characters form one passthrough unit
/// under [`OovPolicy::Pass`]. A run that would itself parse as a unit is
/// emitted one character per unit so decoding stays unambiguous.
pub fn encode_units(
    text: &str,
    dict: &DictionaryPair,
    mode: SymbolMode,
    oov: OovPolicy,
    annotations: Option<&Annotations>,
) -> Result<Vec<EncodedUnit>> {
    let mut units = Vec::new();
    let mut run = String::new();
    let flush = |run: &mut String, units: &mut Vec<EncodedUnit>| {
        if run.is_empty() {
            return;
        }
        let escaped = run.replace(' ', &SPACE_ESCAPE.to_string());
        if parse_unit(&escaped, mode).is_ok() {
            units.extend(run.chars().map(|c| EncodedUnit::Passthrough(c.to_string())));
        } else {
            units.push(EncodedUnit::Passthrough(std::mem::take(run)));
        }
        run.clear();
    };
    for (offset, c) in text.chars().enumerate() {
        match dict.codes(c) {
            Some(codes) => {
                flush(&mut run, &mut units);
                let code = match annotations.and_then(|a| a.get(c)) {
                    Some(syl) => codes.iter().find(|k| k.syllable() == syl).ok_or_else(|| {
                        PuceError::Annotation {
                            character: c,
                            syllable: syl.to_string(),
                        }
                    })?,
                    None => &codes[0],
                };
                units.push(EncodedUnit::Puce(code.clone()));
            }
            None => match oov {
                OovPolicy::Fail => {
                    return Err(PuceError::OutOfVocabulary {
                        character: c,
                        offset,
                    })
                }
                OovPolicy::Skip => {}
                OovPolicy::Pass => {
                    if c == SPACE_ESCAPE {
                        return Err(PuceError::Invalid(format!(
                            "offset {offset}: U+2581 is reserved as the space escape"
                        )));
                    }
                    run.push(c);
                }
            },
        }
    }
    flush(&mut run, &mut units);
    Ok(units)
}

/// Encodes one line of text into space-separated surface units.
pub fn encode_text(
    text: &str,
    dict: &DictionaryPair,
    mode: SymbolMode,
    oov: OovPolicy,
    annotations: Option<&Annotations>,
) -> Result<String> {
    let units = encode_units(text, dict, mode, oov, annotations)?;
    Ok(units
        .iter()
        .map(|u| u.render(mode))
        .collect::<Vec<_>>()
        .join(" "))
}

/// Splits an encoded line into units. Anything that does not parse as a code
/// in `mode` is a passthrough unit.
pub fn split_units(surface: &str, mode: SymbolMode) -> Result<Vec<EncodedUnit>> {
    if surface.is_empty() {
        return Ok(Vec::new());
    }
    surface
        .split(' ')
        .enumerate()
        .map(|(i, unit)| {
            if unit.is_empty() {
                return Err(PuceError::Invalid(format!("empty unit at position {i}")));
            }
            Ok(match parse_unit(unit, mode) {
                Ok(code) => EncodedUnit::Puce(code),
                Err(_) => EncodedUnit::Passthrough(unit.replace(SPACE_ESCAPE, " ")),
            })
        })
        .collect()
}

/// Maps every unit back through the decode dictionary.
pub fn decode_text(surface: &str, dict: &DictionaryPair, mode: SymbolMode) -> Result<String> {
    let mut out = String::new();
    for unit in split_units(surface, mode)? {
        match unit {
            EncodedUnit::Puce(code) => match dict.character(&code) {
                Some(c) => out.push(c),
                None => return Err(PuceError::UnknownCode(render_unit(&code, mode))),
            },
            EncodedUnit::Passthrough(text) => out.push_str(&text),
        }
    }
    Ok(out)
}
