use thiserror::Error;

pub type Result<T> = std::result::Result<T, PuceError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PuceError {
    /// A line of a text file did not follow its grammar.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A surface unit could not be parsed; `position` is a character offset into the unit.
    #[error("cannot parse unit {unit:?} at position {position}: {message}")]
    Unit {
        unit: String,
        position: usize,
        message: String,
    },

    #[error("{0}")]
    Range(String),

    #[error("tonal syllable {syllable} has more than {max} characters")]
    Capacity { syllable: String, max: u16 },

    #[error("invalid dictionary: {0}")]
    Dictionary(String),

    #[error("character {character:?} at offset {offset} is not in the lexicon")]
    OutOfVocabulary { character: char, offset: usize },

    #[error(
        "annotation for {character:?} names {syllable}, which is not one of its pronunciations"
    )]
    Annotation { character: char, syllable: String },

    #[error("unknown code {0}")]
    UnknownCode(String),

    #[error("hypothesis {rank}: unknown code {unit}")]
    Undecodable { rank: usize, unit: String },

    #[error("{0}")]
    Invalid(String),
}

impl PuceError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        PuceError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn unit(unit: &str, position: usize, message: impl Into<String>) -> Self {
        PuceError::Unit {
            unit: unit.to_string(),
            position,
            message: message.into(),
        }
    }
}
