//! Python bindings: dictionaries, codec, tokenizer, n-gram LM, beam search and CER.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use puce_core::codec;
use puce_core::decoder::{fuse_and_rerank, lambda_preset};
use puce_core::{
    build_dictionaries, ci_beam_search, parse_lattice, parse_lexicon, Annotations, DictionaryPair,
    LmScorer, NGramModel, OovPolicy, PuceError, RescoreConfig, SymbolMode, TokenizerModel,
};

fn err(e: PuceError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(s: &str) -> PyResult<SymbolMode> {
    s.parse().map_err(err)
}

/// Encode and decode dictionaries built from a lexicon.
#[pyclass(name = "Dictionary", module = "puce", frozen)]
struct PyDictionary(DictionaryPair);

#[pymethods]
impl PyDictionary {
    /// Build from lexicon text (`<char>\t<syl>[;<syl>...]` per line).
    #[staticmethod]
    fn from_lexicon(text: &str) -> PyResult<Self> {
        let entries = parse_lexicon(text).map_err(err)?;
        Ok(Self(build_dictionaries(&entries).map_err(err)?))
    }

    /// Load from the two serialized dictionary files' contents.
    #[staticmethod]
    fn from_files(encode: &str, decode: &str) -> PyResult<Self> {
        Ok(Self(
            DictionaryPair::deserialize(encode, decode).map_err(err)?,
        ))
    }

    /// Returns `(encode_text, decode_text)`.
    fn serialize(&self) -> (String, String) {
        self.0.serialize()
    }

    #[pyo3(signature = (text, mode = "ms", oov = "fail", annotations = None))]
    fn encode(
        &self,
        text: &str,
        mode: &str,
        oov: &str,
        annotations: Option<&str>,
    ) -> PyResult<String> {
        let policy: OovPolicy = oov.parse().map_err(err)?;
        let ann = annotations
            .map(Annotations::parse)
            .transpose()
            .map_err(err)?;
        codec::encode_text(text, &self.0, self::mode(mode)?, policy, ann.as_ref()).map_err(err)
    }

    #[pyo3(signature = (text, mode = "ms"))]
    fn decode(&self, text: &str, mode: &str) -> PyResult<String> {
        codec::decode_text(text, &self.0, self::mode(mode)?).map_err(err)
    }

    /// Codes of `character` as INT strings, canonical first.
    fn codes(&self, character: char) -> Vec<String> {
        self.0
            .codes(character)
            .map(|cs| cs.iter().map(ToString::to_string).collect())
            .unwrap_or_default()
    }

    fn __len__(&self) -> usize {
        self.0.num_characters()
    }

    #[getter]
    fn max_ci(&self) -> u16 {
        self.0.max_ci()
    }
}

#[pyclass(name = "Tokenizer", module = "puce", frozen)]
struct PyTokenizer(TokenizerModel);

#[pymethods]
impl PyTokenizer {
    #[staticmethod]
    #[pyo3(signature = (lines, vocab_size, mode = "ms"))]
    fn train(lines: Vec<String>, vocab_size: usize, mode: &str) -> PyResult<Self> {
        let m = puce_core::train_tokenizer(
            lines.iter().map(String::as_str),
            vocab_size,
            self::mode(mode)?,
        )
        .map_err(err)?;
        Ok(Self(m))
    }

    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        Ok(Self(TokenizerModel::from_model_string(text).map_err(err)?))
    }

    fn save(&self) -> String {
        self.0.to_model_string()
    }

    fn tokenize(&self, line: &str) -> Vec<u32> {
        self.0.tokenize(line)
    }

    fn tokenize_to_strings(&self, line: &str) -> Vec<String> {
        self.0.tokenize_to_strings(line)
    }

    fn detokenize(&self, ids: Vec<u32>) -> String {
        self.0.detokenize(&ids)
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.0.vocab().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.vocab_size()
    }
}

#[pyclass(name = "NGramLM", module = "puce", frozen)]
struct PyNGramLM(NGramModel);

#[pymethods]
impl PyNGramLM {
    #[staticmethod]
    #[pyo3(signature = (lines, order = 3, k = 0.1))]
    fn train(lines: Vec<String>, order: usize, k: f64) -> PyResult<Self> {
        Ok(Self(
            NGramModel::train(lines.iter().map(String::as_str), order, k).map_err(err)?,
        ))
    }

    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        Ok(Self(NGramModel::from_model_string(text).map_err(err)?))
    }

    fn save(&self) -> String {
        self.0.to_model_string()
    }

    /// Natural-log probability of a whole sentence.
    fn score(&self, text: &str) -> f64 {
        self.0.score(text)
    }
}

/// One decoded hypothesis.
#[pyclass(name = "Hypothesis", module = "puce", frozen, get_all)]
struct PyHypothesis {
    units: Vec<String>,
    cis: Vec<u16>,
    acoustic_logp: f64,
    text: Option<String>,
    lm_logp: Option<f64>,
    fused_score: Option<f64>,
}

#[pymethods]
impl PyHypothesis {
    fn __repr__(&self) -> String {
        format!(
            "Hypothesis(text={:?}, acoustic_logp={}, fused_score={:?})",
            self.text, self.acoustic_logp, self.fused_score
        )
    }
}

/// N-best CI beam search over a lattice in text form, optionally rescored
/// with `lm` at weight `lam` (or a named `preset`).
#[pyfunction]
#[pyo3(signature = (lattice, dictionary, n_best = 10, beam_width = None, lm = None, lam = None, preset = None))]
fn beam_search(
    lattice: &str,
    dictionary: &PyDictionary,
    n_best: usize,
    beam_width: Option<usize>,
    lm: Option<&PyNGramLM>,
    lam: Option<f64>,
    preset: Option<&str>,
) -> PyResult<Vec<PyHypothesis>> {
    let lattice = parse_lattice(lattice).map_err(err)?;
    if lm.is_none() && (lam.is_some() || preset.is_some()) {
        return Err(PyValueError::new_err("an LM weight needs an lm"));
    }
    let lambda = match (lam, preset) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("give lam or preset, not both")),
        (Some(l), None) => l,
        (None, Some(p)) => lambda_preset(p)
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset {p:?}")))?,
        (None, None) => 0.0,
    };
    let cfg = RescoreConfig::new(lambda, n_best, beam_width.unwrap_or(n_best)).map_err(err)?;
    let mut hyps = ci_beam_search(&lattice, &cfg);
    hyps = match lm {
        Some(lm) => fuse_and_rerank(hyps, &lm.0, &dictionary.0, lambda).map_err(err)?,
        None => {
            puce_core::decoder::decode_hypotheses(&mut hyps, &dictionary.0).map_err(err)?;
            hyps
        }
    };
    Ok(hyps
        .into_iter()
        .map(|h| PyHypothesis {
            units: h.units,
            cis: h.cis,
            acoustic_logp: h.acoustic_logp,
            text: h.text,
            lm_logp: h.lm_logp,
            fused_score: h.fused_score,
        })
        .collect())
}

/// Returns `(cer, substitutions, deletions, insertions, reference_length)`.
#[pyfunction]
fn compute_cer(reference: &str, hypothesis: &str) -> PyResult<(f64, usize, usize, usize, usize)> {
    let r = puce_core::compute_cer(reference, hypothesis).map_err(err)?;
    Ok((
        r.cer,
        r.substitutions,
        r.deletions,
        r.insertions,
        r.reference_length,
    ))
}

#[pyfunction]
fn tone_symbol(tone: u8) -> PyResult<char> {
    codec::tone_symbol(tone).map_err(err)
}

#[pyfunction]
fn ci_symbol(ci: u16) -> PyResult<char> {
    codec::ci_symbol(ci).map_err(err)
}

#[pymodule]
fn puce(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDictionary>()?;
    m.add_class::<PyTokenizer>()?;
    m.add_class::<PyNGramLM>()?;
    m.add_class::<PyHypothesis>()?;
    m.add_function(wrap_pyfunction!(beam_search, m)?)?;
    m.add_function(wrap_pyfunction!(compute_cer, m)?)?;
    m.add_function(wrap_pyfunction!(tone_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(ci_symbol, m)?)?;
    Ok(())
}
