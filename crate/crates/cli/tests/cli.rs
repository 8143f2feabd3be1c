use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn puce(args: &[&str], stdin: &str, envs: &[(&str, &str)]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_puce"))
        .args(args)
        .envs(envs.iter().copied())
        .env_remove("PUCE_THREADS")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn puce");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: &str) -> String {
    let out = puce(args, stdin, &[]);
    assert!(
        out.status.success(),
        "puce {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn build_dict(dir: &Path) -> String {
    let d = dir.join("dict");
    ok(
        &[
            "build-dict",
            "--lexicon",
            data("fixture.lex").to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
        ],
        "",
    );
    d.to_str().unwrap().to_string()
}

#[test]
fn encode_decode_is_byte_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let corpus = fs::read_to_string(data("corpus.txt")).unwrap();
    for mode in ["ms", "int"] {
        let enc = ok(
            &["encode", "--dict", &dict, "--mode", mode, "--oov", "pass"],
            &corpus,
        );
        let dec = ok(&["decode", "--dict", &dict, "--mode", mode], &enc);
        assert_eq!(dec, corpus);
    }
    // no trailing newline survives too
    let enc = ok(&["encode", "--dict", &dict, "--mode", "int"], "马码");
    assert_eq!(enc, "ma3#1 ma3#2");
}

#[test]
fn dictionary_files_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let dec = fs::read_to_string(Path::new(&dict).join("decode.dict")).unwrap();
    assert!(dec.lines().any(|l| l == "ma3#2\t码"));
    let enc = fs::read_to_string(Path::new(&dict).join("encode.dict")).unwrap();
    assert!(enc.lines().any(|l| l == "乐\tyue4#1;le4#1"));
}

#[test]
fn frequency_order_changes_indices() {
    let tmp = tempfile::tempdir().unwrap();
    let counts = tmp.path().join("counts.tsv");
    fs::write(&counts, "码\t9\n").unwrap();
    let d = tmp.path().join("d");
    ok(
        &[
            "build-dict",
            "--lexicon",
            data("fixture.lex").to_str().unwrap(),
            "--sort-by-frequency",
            counts.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
        ],
        "",
    );
    let enc = ok(
        &["encode", "--dict", d.to_str().unwrap(), "--mode", "int"],
        "码马\n",
    );
    assert_eq!(enc, "ma3#1 ma3#2\n");
}

#[test]
fn annotations_override_polyphones() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let ann = tmp.path().join("ann.tsv");
    fs::write(&ann, "乐\tle4\n").unwrap();
    let enc = ok(
        &[
            "encode",
            "--dict",
            &dict,
            "--mode",
            "int",
            "--annotations",
            ann.to_str().unwrap(),
        ],
        "乐\n",
    );
    assert_eq!(enc, "le4#1\n");
    assert_eq!(
        ok(&["decode", "--dict", &dict, "--mode", "int"], &enc),
        "乐\n"
    );
}

#[test]
fn full_pipeline_is_lossless() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let text = "语音\n妈麻马码吗\n乐马码\n码码码马\n";
    for mode in ["ms", "int"] {
        let enc = ok(&["encode", "--dict", &dict, "--mode", mode], text);
        let enc_path = tmp.path().join(format!("enc.{mode}"));
        fs::write(&enc_path, &enc).unwrap();
        let model = tmp.path().join(format!("tok.{mode}"));
        ok(
            &[
                "train-tokenizer",
                "--input",
                enc_path.to_str().unwrap(),
                "--vocab-size",
                "25",
                "--mode",
                mode,
                "--out",
                model.to_str().unwrap(),
            ],
            "",
        );
        for ids in [false, true] {
            let mut args = vec!["tokenize", "--model", model.to_str().unwrap()];
            if ids {
                args.push("--ids");
            }
            let toks = ok(&args, &enc);
            args[0] = "detokenize";
            let back = ok(&args, &toks);
            assert_eq!(back, enc);
            assert_eq!(
                ok(&["decode", "--dict", &dict, "--mode", mode], &back),
                text
            );
        }
    }
}

#[test]
fn vocab_report_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let enc = ok(
        &["encode", "--dict", &dict, "--mode", "int"],
        "妈麻马码吗语音乐\n",
    );
    let ann = tmp.path().join("ann.tsv");
    fs::write(&ann, "乐\tle4\n").unwrap();
    let le = ok(
        &[
            "encode",
            "--dict",
            &dict,
            "--mode",
            "int",
            "--annotations",
            ann.to_str().unwrap(),
        ],
        "乐\n",
    );
    let path = tmp.path().join("fixture.enc");
    fs::write(&path, format!("{enc}{le}")).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(
        ok(
            &["vocab-report", "--input", p, "--ti", "ms", "--ci", "ms"],
            ""
        ),
        "TI=MS CI=MS letters=8 tone_atoms=5 ci_atoms=2 total=15\n"
    );
    assert!(ok(
        &["vocab-report", "--input", p, "--ti", "ms", "--ci", "int"],
        ""
    )
    .ends_with("total=16\n"));
}

fn lm_file(dir: &Path) -> String {
    let path = dir.join("lm.txt");
    ok(
        &[
            "train-lm",
            "--input",
            data("lm_corpus.txt").to_str().unwrap(),
            "--order",
            "2",
            "--k",
            "0.5",
            "--out",
            path.to_str().unwrap(),
        ],
        "",
    );
    path.to_str().unwrap().to_string()
}

fn order_of(tsv: &str) -> Vec<String> {
    tsv.lines()
        .map(|l| l.split('\t').nth(4).unwrap().to_string())
        .collect()
}

#[test]
fn beam_lambda_zero_matches_plain_beam() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let lm = lm_file(tmp.path());
    let lat = data("lattice1.txt");
    let base = [
        "beam",
        "--lattice",
        lat.to_str().unwrap(),
        "--dict",
        &dict,
        "--n-best",
        "2",
    ];
    let plain = ok(&base, "");
    assert_eq!(
        plain.lines().next().unwrap(),
        "1\t-0.560000\t-\t-\t马语\tma❃ꀨ yu❃ꀨ"
    );
    let mut with_lm = base.to_vec();
    with_lm.extend(["--lm", &lm, "--lambda", "0"]);
    let zero = ok(&with_lm, "");
    assert_eq!(order_of(&zero), order_of(&plain));
    assert_eq!(order_of(&plain), ["马语", "码语"]);

    // the LM prefers 码语, and a large weight flips the list
    let mut heavy = base.to_vec();
    heavy.extend(["--lm", &lm, "--lambda-preset", "aishell-cross"]);
    assert_eq!(order_of(&ok(&heavy, "")), ["码语", "马语"]);
}

#[test]
fn beam_many_lattices_in_order_with_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());
    let l1 = data("lattice1.txt");
    let l2 = data("lattice2.txt");
    let args = [
        "beam",
        "--lattice",
        l1.to_str().unwrap(),
        l2.to_str().unwrap(),
        l1.to_str().unwrap(),
        "--dict",
        &dict,
        "--n-best",
        "3",
        "--beam-width",
        "5",
    ];
    let seq = ok(&args, "");
    let par = puce(&args, "", &[("PUCE_THREADS", "4")]);
    assert!(par.status.success());
    assert_eq!(String::from_utf8(par.stdout).unwrap(), seq);
    let headers: Vec<&str> = seq.lines().filter(|l| l.starts_with("# ")).collect();
    assert_eq!(headers.len(), 3);
    assert!(headers[1].ends_with("lattice2.txt"));
}

#[test]
fn cer_report() {
    let same = ok(
        &[
            "cer",
            "--ref",
            data("ref.txt").to_str().unwrap(),
            "--hyp",
            data("ref.txt").to_str().unwrap(),
        ],
        "",
    );
    assert!(
        same.ends_with("corpus: cer 0.0000 S=0 D=0 I=0 N=8\n"),
        "{same}"
    );
    let diff = ok(
        &[
            "cer",
            "--ref",
            data("ref.txt").to_str().unwrap(),
            "--hyp",
            data("hyp.txt").to_str().unwrap(),
        ],
        "",
    );
    let lines: Vec<&str> = diff.lines().collect();
    assert_eq!(lines[0], "line 1: cer 0.0000 S=0 D=0 I=0 N=2");
    assert_eq!(lines[1], "line 2: cer 0.3333 S=0 D=1 I=0 N=3");
    assert_eq!(lines[2], "line 3: cer 0.6667 S=1 D=0 I=1 N=3");
    assert_eq!(lines[3], "corpus: cer 0.3750 S=1 D=1 I=1 N=8");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dict = build_dict(tmp.path());

    let out = puce(&["frobnicate"], "", &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = puce(&["encode", "--dict", &dict], "", &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = puce(&["--help"], "", &[]);
    assert_eq!(out.status.code(), Some(0));

    let out = puce(
        &["encode", "--dict", &dict, "--mode", "ms"],
        "语音\n马X\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("<stdin>: line 2"), "{err}");

    let bad_lex = tmp.path().join("bad.lex");
    fs::write(&bad_lex, "妈\tma1\n马\tma0\n").unwrap();
    let out = puce(
        &[
            "build-dict",
            "--lexicon",
            bad_lex.to_str().unwrap(),
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        "",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.lex: line 2"), "{err}");

    let bad_lat = tmp.path().join("bad.lat");
    fs::write(&bad_lat, "F ma3 -0.1\nC 1\n1 0.5\n").unwrap();
    let out = puce(
        &[
            "beam",
            "--lattice",
            bad_lat.to_str().unwrap(),
            "--dict",
            &dict,
        ],
        "",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("bad.lat: line 3"));

    let out = puce(
        &[
            "beam",
            "--lattice",
            bad_lat.to_str().unwrap(),
            "--dict",
            &dict,
            "--n-best",
            "4",
            "--beam-width",
            "2",
        ],
        "",
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let out = puce(
        &[
            "beam",
            "--lattice",
            bad_lat.to_str().unwrap(),
            "--dict",
            &dict,
            "--lambda-preset",
            "nope",
            "--lm",
            "x",
        ],
        "",
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
}
