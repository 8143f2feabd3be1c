//! `puce` command line: lexicon → dictionaries → encoded corpus → tokens,
//! plus lattice decoding with LM rescoring and CER scoring.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use puce_core::codec::{self, Annotations, OovPolicy, SymbolMode};
use puce_core::decoder::{self, lambda_preset, RescoreConfig, LAMBDA_PRESETS};
use puce_core::lexicon::{self, DictionaryPair};
use puce_core::{cer, lm::NGramModel, tokenizer, PuceError};

const ENCODE_FILE: &str = "encode.dict";
const DECODE_FILE: &str = "decode.dict";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

type CliResult<T> = Result<T, CliError>;

fn data_err(source: &str, e: PuceError) -> CliError {
    CliError::Data(format!("{source}: {e}"))
}

/// Attaches a line number to errors that do not carry one.
fn line_err(source: &str, line: usize, e: PuceError) -> CliError {
    match e {
        PuceError::Parse { .. } => data_err(source, e),
        other => CliError::Data(format!("{source}: line {line}: {other}")),
    }
}

#[derive(Parser)]
#[command(
    name = "puce",
    version,
    about = "Pronunciation-aware unique character encoding for Mandarin ASR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ms,
    Int,
}

impl From<Mode> for SymbolMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ms => SymbolMode::Ms,
            Mode::Int => SymbolMode::Int,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Oov {
    Fail,
    Pass,
    Skip,
}

impl From<Oov> for OovPolicy {
    fn from(o: Oov) -> Self {
        match o {
            Oov::Fail => OovPolicy::Fail,
            Oov::Pass => OovPolicy::Pass,
            Oov::Skip => OovPolicy::Skip,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build encode.dict and decode.dict from a lexicon.
    BuildDict {
        #[arg(long)]
        lexicon: PathBuf,
        /// `<char><TAB><count>` file; characters are indexed by descending count.
        #[arg(long)]
        sort_by_frequency: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode text lines from stdin.
    Encode {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum, default_value = "fail")]
        oov: Oov,
        /// `<char><TAB><syllable>` pronunciation overrides.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Decode encoded lines from stdin.
    Decode {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Learn subword merges over an encoded corpus; indices are never merged.
    TrainTokenizer {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encoded lines on stdin → tokens.
    Tokenize(TokenArgs),
    /// Tokens on stdin → encoded lines.
    Detokenize(TokenArgs),
    /// Minimum token inventory of an encoded corpus under a tone/index rendering.
    VocabReport {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        ti: Mode,
        #[arg(long, value_enum)]
        ci: Mode,
    },
    /// Train an add-k character n-gram LM on plain text lines.
    TrainLm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// N-best CI beam search over lattice files, optionally rescored by an LM.
    Beam(BeamArgs),
    /// Character error rate of a hypothesis file against a reference file.
    Cer {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
    },
}

#[derive(Args)]
struct TokenArgs {
    #[arg(long)]
    model: PathBuf,
    /// Token ids instead of token strings.
    #[arg(long)]
    ids: bool,
}

#[derive(Args)]
struct BeamArgs {
    #[arg(long, required = true, num_args = 1..)]
    lattice: Vec<PathBuf>,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 10)]
    n_best: usize,
    /// Defaults to --n-best.
    #[arg(long)]
    beam_width: Option<usize>,
    /// n-gram model file written by train-lm.
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long, conflicts_with = "lambda_preset")]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_preset: Option<String>,
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_stdin() -> CliResult<String> {
    let mut s = String::new();
    io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| CliError::Data(format!("<stdin>: {e}")))?;
    Ok(s)
}

/// Applies `f` to every line, preserving line structure and the final newline.
fn map_lines<F>(input: &str, mut f: F) -> CliResult<String>
where
    F: FnMut(usize, &str) -> CliResult<String>,
{
    let mut out = String::with_capacity(input.len() * 2);
    for (i, chunk) in input.split_inclusive('\n').enumerate() {
        let (line, nl) = match chunk.strip_suffix('\n') {
            Some(l) => (l, true),
            None => (chunk, false),
        };
        out.push_str(&f(i + 1, line)?);
        if nl {
            out.push('\n');
        }
    }
    Ok(out)
}

fn load_dict(dir: &Path) -> CliResult<DictionaryPair> {
    let enc_path = dir.join(ENCODE_FILE);
    let dec_path = dir.join(DECODE_FILE);
    let enc = read_file(&enc_path)?;
    let dec = read_file(&dec_path)?;
    DictionaryPair::deserialize(&enc, &dec).map_err(|e| {
        CliError::Data(format!(
            "{} / {}: {e}",
            enc_path.display(),
            dec_path.display()
        ))
    })
}

fn emit(s: &str) -> CliResult<()> {
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Data(format!("<stdout>: {e}")))
}

/// Worker count from `PUCE_THREADS`; 0 or unset means sequential.
fn worker_threads() -> CliResult<usize> {
    match std::env::var("PUCE_THREADS") {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "PUCE_THREADS must be a non-negative integer, got {v:?}"
            ))
        }),
    }
}

/// Maps `f` over `items` in order, on a pool of `PUCE_THREADS` workers when set.
fn ordered_map<T, R, F>(items: &[T], f: F) -> CliResult<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let threads = worker_threads()?;
    if threads == 0 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::BuildDict {
            lexicon,
            sort_by_frequency,
            out,
        } => {
            let src = lexicon.display().to_string();
            let mut entries =
                lexicon::parse_lexicon(&read_file(&lexicon)?).map_err(|e| data_err(&src, e))?;
            if let Some(path) = sort_by_frequency {
                let counts = lexicon::parse_frequency_counts(&read_file(&path)?)
                    .map_err(|e| data_err(&path.display().to_string(), e))?;
                lexicon::sort_by_frequency(&mut entries, &counts);
            }
            let dict = lexicon::build_dictionaries(&entries).map_err(|e| data_err(&src, e))?;
            fs::create_dir_all(&out)
                .map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
            let (enc, dec) = dict.serialize();
            write_file(&out.join(ENCODE_FILE), &enc)?;
            write_file(&out.join(DECODE_FILE), &dec)?;
            eprintln!(
                "{} characters, {} tonal syllables, max index {}",
                dict.num_characters(),
                dict.per_syllable_count().len(),
                dict.max_ci()
            );
            Ok(())
        }
        Command::Encode {
            dict,
            mode,
            oov,
            annotations,
        } => {
            let dict = load_dict(&dict)?;
            let ann = match annotations {
                Some(p) => Some(
                    Annotations::parse(&read_file(&p)?)
                        .map_err(|e| data_err(&p.display().to_string(), e))?,
                ),
                None => None,
            };
            let input = read_stdin()?;
            let out = map_lines(&input, |n, line| {
                codec::encode_text(line, &dict, mode.into(), oov.into(), ann.as_ref())
                    .map_err(|e| line_err("<stdin>", n, e))
            })?;
            emit(&out)
        }
        Command::Decode { dict, mode } => {
            let dict = load_dict(&dict)?;
            let input = read_stdin()?;
            let out = map_lines(&input, |n, line| {
                codec::decode_text(line, &dict, mode.into()).map_err(|e| line_err("<stdin>", n, e))
            })?;
            emit(&out)
        }
        Command::TrainTokenizer {
            input,
            vocab_size,
            mode,
            out,
        } => {
            let text = read_file(&input)?;
            let model = tokenizer::train_tokenizer(text.lines(), vocab_size, mode.into())
                .map_err(|e| data_err(&input.display().to_string(), e))?;
            write_file(&out, &model.to_model_string())?;
            eprintln!(
                "vocab {} ({} merges)",
                model.vocab_size(),
                model.merges().len()
            );
            Ok(())
        }
        Command::Tokenize(args) => {
            let model = load_tokenizer(&args.model)?;
            let input = read_stdin()?;
            let out = map_lines(&input, |_, line| {
                Ok(if args.ids {
                    let ids: Vec<String> =
                        model.tokenize(line).iter().map(u32::to_string).collect();
                    ids.join(" ")
                } else {
                    model.tokenize_to_strings(line).join(" ")
                })
            })?;
            emit(&out)
        }
        Command::Detokenize(args) => {
            let model = load_tokenizer(&args.model)?;
            let input = read_stdin()?;
            let out = map_lines(&input, |n, line| {
                let fields = line.split(' ').filter(|t| !t.is_empty());
                if args.ids {
                    let ids = fields
                        .map(|t| {
                            t.parse::<u32>().map_err(|_| {
                                CliError::Data(format!("<stdin>: line {n}: bad token id {t:?}"))
                            })
                        })
                        .collect::<CliResult<Vec<_>>>()?;
                    Ok(model.detokenize(&ids))
                } else {
                    let toks: Vec<&str> = fields.collect();
                    Ok(model.join_tokens(&toks))
                }
            })?;
            emit(&out)
        }
        Command::VocabReport { input, ti, ci } => {
            let text = read_file(&input)?;
            let inv = tokenizer::vocab_report(text.lines(), ti.into(), ci.into())
                .map_err(|e| data_err(&input.display().to_string(), e))?;
            emit(&format!(
                "TI={} CI={} letters={} tone_atoms={} ci_atoms={} total={}\n",
                SymbolMode::from(ti),
                SymbolMode::from(ci),
                inv.letters,
                inv.tone_atoms,
                inv.ci_atoms,
                inv.total
            ))
        }
        Command::TrainLm {
            input,
            order,
            k,
            out,
        } => {
            let text = read_file(&input)?;
            let model = NGramModel::train(text.lines(), order, k)
                .map_err(|e| data_err(&input.display().to_string(), e))?;
            write_file(&out, &model.to_model_string())
        }
        Command::Beam(args) => beam(args),
        Command::Cer { reference, hyp } => {
            let refs = read_file(&reference)?;
            let hyps = read_file(&hyp)?;
            let refs: Vec<&str> = refs.lines().collect();
            let hyps: Vec<&str> = hyps.lines().collect();
            if refs.len() != hyps.len() {
                return Err(CliError::Data(format!(
                    "{} has {} lines but {} has {}",
                    reference.display(),
                    refs.len(),
                    hyp.display(),
                    hyps.len()
                )));
            }
            let pairs: Vec<(&str, &str)> = refs.into_iter().zip(hyps).collect();
            let src = reference.display().to_string();
            let reports = ordered_map(&pairs, |(r, h)| cer::compute_cer(r, h))?
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| line_err(&src, i + 1, e)))
                .collect::<CliResult<Vec<_>>>()?;
            let mut out = String::new();
            for (i, r) in reports.iter().enumerate() {
                out.push_str(&format_cer(&format!("line {}", i + 1), r));
            }
            out.push_str(&format_cer("corpus", &cer::corpus_cer(&reports)));
            emit(&out)
        }
    }
}

fn format_cer(label: &str, r: &cer::CerReport) -> String {
    format!(
        "{label}: cer {:.4} S={} D={} I={} N={}\n",
        r.cer, r.substitutions, r.deletions, r.insertions, r.reference_length
    )
}

fn load_tokenizer(path: &Path) -> CliResult<tokenizer::TokenizerModel> {
    tokenizer::TokenizerModel::from_model_string(&read_file(path)?)
        .map_err(|e| data_err(&path.display().to_string(), e))
}

fn beam(args: BeamArgs) -> CliResult<()> {
    let lambda = match (&args.lambda_preset, args.lambda) {
        (Some(name), _) => Some(lambda_preset(name).ok_or_else(|| {
            let names: Vec<&str> = LAMBDA_PRESETS.iter().map(|(n, _)| *n).collect();
            CliError::Usage(format!(
                "unknown lambda preset {name:?} (expected one of {})",
                names.join(", ")
            ))
        })?),
        (None, l) => l,
    };
    let lm = match (&args.lm, lambda) {
        (Some(path), Some(_)) => Some(
            NGramModel::from_model_string(&read_file(path)?)
                .map_err(|e| data_err(&path.display().to_string(), e))?,
        ),
        (Some(_), None) => {
            return Err(CliError::Usage(
                "--lm requires --lambda or --lambda-preset".into(),
            ))
        }
        (None, Some(_)) => return Err(CliError::Usage("--lambda requires --lm".into())),
        (None, None) => None,
    };
    let cfg = RescoreConfig::new(
        lambda.unwrap_or(0.0),
        args.n_best,
        args.beam_width.unwrap_or(args.n_best),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let dict = load_dict(&args.dict)?;

    let texts = args
        .lattice
        .iter()
        .map(|p| read_file(p))
        .collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(&PathBuf, &String)> = args.lattice.iter().zip(&texts).collect();
    let blocks = ordered_map(&jobs, |(path, text)| -> CliResult<String> {
        let src = path.display().to_string();
        let lattice = decoder::parse_lattice(text).map_err(|e| data_err(&src, e))?;
        let mut hyps = decoder::ci_beam_search(&lattice, &cfg);
        hyps = match &lm {
            Some(lm) => decoder::fuse_and_rerank(hyps, lm, &dict, cfg.lambda()),
            None => decoder::decode_hypotheses(&mut hyps, &dict).map(|_| hyps),
        }
        .map_err(|e| data_err(&src, e))?;
        Ok(decoder::format_nbest(&hyps))
    })?;
    let multi = jobs.len() > 1;
    let mut out = String::new();
    for ((path, _), block) in jobs.iter().zip(blocks) {
        if multi {
            out.push_str(&format!("# {}\n", path.display()));
        }
        out.push_str(&block?);
    }
    emit(&out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
