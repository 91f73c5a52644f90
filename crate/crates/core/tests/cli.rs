mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use story_order::cli::{run, CliError};
use story_order::corpus::{generate_synthetic, write_corpus, CorpusFormat};
use story_order::embed::{embed_hash, EmbeddingTable};

fn cli(args: &[&str]) -> Result<(), CliError> {
    let mut all = vec!["story-order".into()];
    all.extend(args.iter().map(|a| a.into()));
    run(all)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn corpus(&self, n: usize) -> PathBuf {
        let path = self.path("corpus.jsonl");
        cli(&["generate", "--stories", &n.to_string(), "--seed", "4", "--out", p(&path)]).unwrap();
        path
    }

    /// Tiny checkpoint trained for one epoch.
    fn checkpoint(&self, corpus: &Path) -> PathBuf {
        let path = self.path("m.ckpt");
        cli(&[
            "train", "--corpus", p(corpus), "--hidden", "16", "--embed-dim", "16", "--buckets", "64",
            "--epochs", "1", "--seed", "2", "--out", p(&path),
        ])
        .unwrap();
        path
    }
}

#[test]
fn prepare_without_coref_keeps_text() {
    let f = Fixture::new();
    let corpus = f.corpus(20);
    let out = f.path("same.jsonl");
    cli(&["prepare", "--corpus", p(&corpus), "--coref", "off", "--out", p(&out)]).unwrap();
    assert_eq!(fs::read(&corpus).unwrap(), fs::read(&out).unwrap());
    let summary = fs::read_to_string(f.path("same.jsonl.entities.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 21);
}

#[test]
fn prepare_with_coref_substitutes_pronouns() {
    let f = Fixture::new();
    let corpus = f.path("pron.tsv");
    write_corpus(fs::File::create(&corpus).unwrap(), &common::pronoun_corpus(), CorpusFormat::Tsv).unwrap();
    let out = f.path("resolved.tsv");
    let args = story_order::cli::PrepareArgs {
        input: story_order::cli::CorpusArgs {
            corpus: corpus.clone(),
            format: None,
        },
        coref: story_order::cli::Switch::On,
        out: out.clone(),
        summary: None,
    };
    let subs = story_order::cli::cmd_prepare(&args).unwrap();
    assert!(subs > 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("Maria flew kite"), "{text}");
}

#[test]
fn missing_input_is_an_error() {
    let f = Fixture::new();
    let out = f.path("x.jsonl");
    let err = cli(&["prepare", "--corpus", p(&f.path("nope.jsonl")), "--out", p(&out)]).unwrap_err();
    assert!(err.to_string().contains("nope.jsonl"));
    assert!(!out.exists());
}

#[test]
fn training_is_reproducible_and_eval_is_byte_identical() {
    let f = Fixture::new();
    let corpus = f.corpus(40);
    let ckpt = f.checkpoint(&corpus);
    let again = f.path("again.ckpt");
    cli(&[
        "train", "--corpus", p(&corpus), "--hidden", "16", "--embed-dim", "16", "--buckets", "64",
        "--epochs", "1", "--seed", "2", "--out", p(&again),
    ])
    .unwrap();
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&again).unwrap());

    let r1 = f.path("r1.jsonl");
    let r2 = f.path("r2.jsonl");
    for r in [&r1, &r2] {
        cli(&["eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--seed", "9", "--out", p(r)]).unwrap();
    }
    let a = fs::read(&r1).unwrap();
    assert_eq!(a, fs::read(&r2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().last().unwrap().contains("pg2"), "report names the variant");
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn variant_guard_and_force() {
    let f = Fixture::new();
    let corpus = f.corpus(20);
    let ckpt = f.checkpoint(&corpus);
    let base = ["eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--variant", "fully-connected"];
    let err = cli(&base).unwrap_err();
    assert!(err.to_string().contains("--force"), "{err}");
    let mut forced = base.to_vec();
    forced.push("--force");
    cli(&forced).unwrap();
}

#[test]
fn oracle_and_random_reports() {
    let f = Fixture::new();
    let corpus = f.corpus(30);
    let out = f.path("oracle.jsonl");
    cli(&["eval", "--method", "oracle", "--corpus", p(&corpus), "--out", p(&out)]).unwrap();
    let last = fs::read_to_string(&out).unwrap().lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!((v["tau"].as_f64(), v["pmr"].as_f64()), (Some(1.0), Some(1.0)));
    cli(&["eval", "--method", "random", "--corpus", p(&corpus)]).unwrap();
    assert!(matches!(
        cli(&["eval", "--corpus", p(&corpus)]),
        Err(CliError::Usage(_))
    ));
}

#[test]
fn order_then_ensemble() {
    let f = Fixture::new();
    let corpus = f.corpus(30);
    let ckpt = f.checkpoint(&corpus);
    let shown = f.path("shown.jsonl");
    cli(&["shuffle", "--corpus", p(&corpus), "--seed", "3", "--out", p(&shown)]).unwrap();
    // a single-sentence story gets rank 0
    let mut text = fs::read_to_string(&shown).unwrap();
    text.push_str("{\"id\":\"solo\",\"sentences\":[\"Only one.\"]}\n");
    let input = f.path("input.jsonl");
    fs::write(&input, text).unwrap();
    let o1 = f.path("o1.tsv");
    cli(&["order", "--checkpoint", p(&ckpt), "--corpus", p(&input), "--decode", "greedy", "--out", p(&o1)]).unwrap();
    let lines = fs::read_to_string(&o1).unwrap();
    assert_eq!(lines.lines().last().unwrap(), "solo\t0");
    assert_eq!(lines.lines().count(), 31);

    let o2 = f.path("o2.tsv");
    cli(&["order", "--checkpoint", p(&ckpt), "--corpus", p(&shown), "--decode", "beam:4", "--out", p(&o2)]).unwrap();
    let o1b = f.path("o1b.tsv");
    fs::write(&o1b, lines.lines().take(30).map(|l| format!("{l}\n")).collect::<String>()).unwrap();

    let fused = f.path("fused.tsv");
    cli(&["ensemble", "--orderings", p(&o1b), p(&o1b), p(&o1b), "--out", p(&fused)]).unwrap();
    assert_eq!(fs::read(&fused).unwrap(), fs::read(&o1b).unwrap());
    cli(&["ensemble", "--orderings", p(&o2), "--out", p(&fused)]).unwrap();
    assert_eq!(fs::read(&fused).unwrap(), fs::read(&o2).unwrap());

    let report = f.path("fused.jsonl");
    cli(&[
        "ensemble", "--orderings", p(&o1b), p(&o2), p(&o1b), "--corpus", p(&shown), "--out", p(&fused),
        "--report", p(&report),
    ])
    .unwrap();
    assert!(fs::read_to_string(&report).unwrap().contains("\"summary\":\"fused\""));
}

#[test]
fn embedding_file_dimension_must_match() {
    let f = Fixture::new();
    let corpus = f.corpus(20);
    let ckpt = f.checkpoint(&corpus);
    let mut table = EmbeddingTable::new(8);
    for s in generate_synthetic(20, 5, 200, 4) {
        for (i, text) in s.sentences.iter().enumerate() {
            table.insert(&s.id, i, embed_hash(text, 8, 0).unwrap().vector).unwrap();
        }
    }
    let emb = f.path("emb.tsv");
    table.write(fs::File::create(&emb).unwrap()).unwrap();
    let spec = format!("file:{}", p(&emb));
    let out = f.path("o.tsv");
    let err = cli(&["order", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--embedder", &spec, "--out", p(&out)])
        .unwrap_err();
    assert!(err.to_string().contains('8'), "{err}");
    assert!(!out.exists());
}

#[test]
fn ablation_covers_every_variant_reproducibly() {
    let f = Fixture::new();
    let corpus = f.corpus(40);
    let run_once = |name: &str| {
        let out = f.path(name);
        cli(&[
            "ablate", "--corpus", p(&corpus), "--hidden", "8", "--embed-dim", "8", "--buckets", "16",
            "--epochs", "1", "--seed", "5", "--decode", "greedy", "--out", p(&out),
        ])
        .unwrap();
        fs::read_to_string(out).unwrap()
    };
    let table = run_once("a.md");
    assert_eq!(table.lines().count(), 2 + 7);
    assert!(table.lines().next().unwrap().contains("tau") && table.contains("pmr"));
    for v in ["fully-connected", "semi-full-se", "se-graph ", "se-graph-coref", "pg1", "pg2", "pg3"] {
        assert!(table.contains(v), "{v} missing");
    }
    assert_eq!(table, run_once("b.md"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_story-order");
    let f = Fixture::new();
    let ok = Command::new(bin)
        .args(["generate", "--stories", "5", "--out", p(&f.path("g.jsonl"))])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let usage = Command::new(bin).args(["train", "--variant", "pg9", "--corpus", "x", "--out", "y"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let fail = Command::new(bin)
        .args(["eval", "--method", "oracle", "--corpus", p(&f.path("missing.jsonl"))])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stderr).contains("error:"));
}
