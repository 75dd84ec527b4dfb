//! End-to-end runs of the five commands over small fixtures: exit
//! codes, artifact shapes, and the optional score columns.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};

use entcap::archive::{read_archive, write_archive};
use entcap::corpusio::{read_caption_lines, CaptionLine, ReferenceSet};
use entcap::imageio::solid_ppm;
use entcap_core::corpus::DomainTag;
use entcap_core::encoder::DEFAULT_ENCODER_ID;
use entcap_core::metrics::REPORT_SCHEMA_VERSION;
use entcap_core::retrieval::RetrievalConfig;
use entcap_core::Matrix;
use serde_json::{json, Value};

const CORPUS: &str = "\
a dog chases the red ball
the cat sleeps under a tall tree
a small dog runs to the car
the cat watches a blue ball
a dog rests beside the green car
the ball rolls under a low tree
a cat climbs the big tree
the dog barks at a white car
a cat plays with the small ball
the dog waits near a shady tree
";

const DIAG_X: &str = "a dog chases the red ball";
const DIAG_Y: &str = "the cat sleeps under a tall tree";

/// Commands share the on-disk backbone and embedding caches, so the
/// tests run one at a time.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn run(args: &[&str]) -> i32 {
    entcap::run_from(args.iter().copied())
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn num(value: &Value, pointer: &str) -> f64 {
    value
        .pointer(pointer)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("no number at {pointer}"))
}

fn write_captions(path: &Path, rows: &[(&str, &str)]) {
    let retrieval = RetrievalConfig::preset("cross_domain").unwrap();
    let mut text = serde_json::to_string(&CaptionLine::Config(json!({
        "command": "caption",
        "note": "handmade fixture",
    })))
    .unwrap();
    text.push('\n');
    for (id, caption) in rows {
        let line = CaptionLine::Caption {
            id: (*id).to_string(),
            caption: (*caption).to_string(),
            entities: Vec::new(),
            retrieval,
            timing: None,
        };
        text.push_str(&serde_json::to_string(&line).unwrap());
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn write_references(path: &Path, rows: &[(&str, &[&str], Option<DomainTag>)]) {
    let mut text = String::new();
    for (id, references, domain_tag) in rows {
        let set = ReferenceSet {
            id: (*id).to_string(),
            references: references.iter().map(|r| (*r).to_string()).collect(),
            domain_tag: *domain_tag,
        };
        text.push_str(&serde_json::to_string(&set).unwrap());
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

struct Fixtures {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    vocab: PathBuf,
    images: PathBuf,
    train_out: PathBuf,
    checkpoint: PathBuf,
    diag_captions: PathBuf,
    diag_refs: PathBuf,
}

/// One tempdir shared by every test: the backbone cache, a ten-caption
/// corpus, three solid images, and a checkpoint trained for 8 epochs.
fn fixtures() -> &'static Fixtures {
    static FIXTURES: OnceLock<Fixtures> = OnceLock::new();
    FIXTURES.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::env::set_var("ENTCAP_CACHE_DIR", root.join("cache"));

        let corpus = root.join("corpus.txt");
        fs::write(&corpus, CORPUS).unwrap();
        let vocab = root.join("vocab.txt");
        fs::write(&vocab, "dog\ncat\nball\ntree\ncar\n").unwrap();

        let images = root.join("images");
        fs::create_dir(&images).unwrap();
        for (name, color) in [
            ("a.ppm", [40u8, 90, 200]),
            ("b.ppm", [200, 60, 30]),
            ("c.ppm", [30, 180, 90]),
        ] {
            fs::write(images.join(name), solid_ppm(24, 16, color)).unwrap();
        }

        let config = root.join("train.json");
        fs::write(&config, "{\"epochs\": 8}\n").unwrap();
        let train_out = root.join("trained");
        let code = run(&[
            "entcap",
            "train",
            "--corpus",
            s(&corpus),
            "--vocab",
            s(&vocab),
            "--preset",
            "fixture",
            "--config",
            s(&config),
            "--seed",
            "11",
            "--out",
            s(&train_out),
        ]);
        assert_eq!(code, 0, "fixture training failed");

        let diag_captions = root.join("diag-captions.jsonl");
        write_captions(&diag_captions, &[("x", DIAG_X), ("y", DIAG_Y)]);
        let diag_refs = root.join("diag-refs.jsonl");
        write_references(
            &diag_refs,
            &[("x", &[DIAG_X], None), ("y", &[DIAG_Y], None)],
        );

        Fixtures {
            checkpoint: train_out.join("checkpoint.etar"),
            _dir: dir,
            corpus,
            vocab,
            images,
            train_out,
            diag_captions,
            diag_refs,
        }
    })
}

#[test]
fn help_exits_zero_and_usage_errors_exit_two() {
    let _guard = serial();
    assert_eq!(run(&["entcap", "--help"]), 0);
    assert_eq!(run(&["entcap", "--version"]), 0);
    assert_eq!(run(&["entcap", "train"]), 2);
    assert_eq!(run(&["entcap", "nosuch"]), 2);
}

#[test]
fn missing_input_paths_exit_two() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let gone = tmp.path().join("gone.txt");
    let out = tmp.path().join("out");

    let train = run(&[
        "entcap", "train", "--corpus", s(&gone), "--vocab", s(&fx.vocab), "--out", s(&out),
    ]);
    assert_eq!(train, 2);

    let caption = run(&[
        "entcap", "caption", "--checkpoint", s(&gone), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--out", s(&out),
    ]);
    assert_eq!(caption, 2);

    let evaluate = run(&[
        "entcap", "evaluate", "--captions", s(&gone), "--references", s(&fx.diag_refs),
        "--out", s(&out),
    ]);
    assert_eq!(evaluate, 2);

    let diagnose = run(&[
        "entcap", "diagnose", "--checkpoint", s(&gone), "--captions", s(&fx.diag_captions),
        "--references", s(&fx.diag_refs), "--out", s(&out),
    ]);
    assert_eq!(diagnose, 2);

    let retrieve = run(&["entcap", "retrieve", "--image", s(&gone), "--vocab", s(&fx.vocab)]);
    assert_eq!(retrieve, 2);
}

#[test]
fn unknown_presets_templates_and_formats_exit_two() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let preset = run(&[
        "entcap", "train", "--corpus", s(&fx.corpus), "--vocab", s(&fx.vocab),
        "--preset", "nosuch", "--out", s(&out),
    ]);
    assert_eq!(preset, 2);

    let template = run(&[
        "entcap", "train", "--corpus", s(&fx.corpus), "--vocab", s(&fx.vocab),
        "--template", "nosuch", "--out", s(&out),
    ]);
    assert_eq!(template, 2);

    let format = run(&[
        "entcap", "train", "--corpus", s(&fx.corpus), "--vocab", s(&fx.vocab),
        "--format", "nosuch", "--out", s(&out),
    ]);
    assert_eq!(format, 2);

    let caption = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--preset", "nosuch", "--out", s(&out),
    ]);
    assert_eq!(caption, 2);

    let retrieve = run(&[
        "entcap", "retrieve", "--image", s(&fx.images.join("a.ppm")), "--vocab", s(&fx.vocab),
        "--preset", "nosuch",
    ]);
    assert_eq!(retrieve, 2);
}

#[test]
fn unknown_config_fields_exit_two() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let train_cfg = tmp.path().join("train.json");
    fs::write(&train_cfg, "{\"epochs\": 1, \"bogus\": true}").unwrap();
    let train = run(&[
        "entcap", "train", "--corpus", s(&fx.corpus), "--vocab", s(&fx.vocab),
        "--config", s(&train_cfg), "--out", s(&out),
    ]);
    assert_eq!(train, 2);

    let caption_cfg = tmp.path().join("caption.json");
    fs::write(&caption_cfg, "{\"beam\": 2, \"bogus\": 1}").unwrap();
    let caption = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--config", s(&caption_cfg), "--out", s(&out),
    ]);
    assert_eq!(caption, 2);
}

#[test]
fn out_of_range_settings_exit_two() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let mask = run(&[
        "entcap", "train", "--corpus", s(&fx.corpus), "--vocab", s(&fx.vocab),
        "--mask-rate", "1.5", "--out", s(&out),
    ]);
    assert_eq!(mask, 2);

    let beam = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--beam", "0", "--out", s(&out),
    ]);
    assert_eq!(beam, 2);

    let tau_cfg = tmp.path().join("tau.json");
    fs::write(&tau_cfg, "{\"tau\": 0.0}").unwrap();
    let tau = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--config", s(&tau_cfg), "--out", s(&out),
    ]);
    assert_eq!(tau, 2);

    let pure_lm = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint),
        "--captions", s(&fx.diag_captions), "--references", s(&fx.diag_refs),
        "--pure-lm", "nosuch", "--out", s(&out),
    ]);
    assert_eq!(pure_lm, 2);
}

#[test]
fn caption_rejects_config_backbone_mismatch() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("backbone.json");
    fs::write(&cfg, "{\"backbone\": \"other-encoder\"}").unwrap();
    let code = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--config", s(&cfg),
        "--out", s(&tmp.path().join("caps.jsonl")),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn corpora_without_training_captions_exit_one() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let blank = tmp.path().join("blank.txt");
    fs::write(&blank, "\n\n").unwrap();
    let empty = run(&[
        "entcap", "train", "--corpus", s(&blank), "--vocab", s(&fx.vocab), "--out", s(&out),
    ]);
    assert_eq!(empty, 1);

    let test_only = tmp.path().join("test-only.json");
    fs::write(
        &test_only,
        r#"{"images": [{"cocoid": 1, "split": "test", "sentences": [{"raw": "a dog"}]}]}"#,
    )
    .unwrap();
    let wrong_split = run(&[
        "entcap", "train", "--corpus", s(&test_only), "--vocab", s(&fx.vocab), "--out", s(&out),
    ]);
    assert_eq!(wrong_split, 1);
}

#[test]
fn evaluate_rejects_captions_without_references() {
    let _guard = serial();
    let tmp = tempfile::tempdir().unwrap();
    let captions = tmp.path().join("caps.jsonl");
    write_captions(&captions, &[("x", "a dog"), ("y", "a cat"), ("z", "a car")]);
    let references = tmp.path().join("refs.jsonl");
    write_references(
        &references,
        &[("x", &["a dog"], None), ("y", &["a cat"], None)],
    );
    let out = tmp.path().join("report.json");
    let orphan = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--out", s(&out),
    ]);
    assert_eq!(orphan, 1);
    assert!(!out.exists());

    let config_only = tmp.path().join("empty.jsonl");
    write_captions(&config_only, &[]);
    let empty = run(&[
        "entcap", "evaluate", "--captions", s(&config_only), "--references", s(&references),
        "--out", s(&out),
    ]);
    assert_eq!(empty, 1);
}

#[test]
fn caption_writes_one_record_per_image() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("caps.jsonl");
    let code = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--beam", "1", "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let lines = read_caption_lines(&out).unwrap();
    assert_eq!(lines.len(), 4);

    let config = match &lines[0] {
        CaptionLine::Config(value) => value.clone(),
        other => panic!("first line should be the config echo, got {other:?}"),
    };
    assert_eq!(config["command"], "caption");
    assert_eq!(config["backbone"], DEFAULT_ENCODER_ID);
    assert_eq!(config["beam"], 1);
    assert_eq!(config["seed"], 0);
    assert_eq!(config["single_word_vocab"], true);
    assert_eq!(config["vocab_checksum"], config["checkpoint_vocab_checksum"]);

    let preset = RetrievalConfig::preset("cross_domain").unwrap();
    let mut ids = Vec::new();
    for line in &lines[1..] {
        match line {
            CaptionLine::Caption { id, caption, retrieval, timing, .. } => {
                ids.push(id.clone());
                assert!(!caption.is_empty());
                assert_eq!(retrieval.tau, preset.tau);
                assert_eq!(retrieval.k, preset.k);
                assert_eq!(retrieval.p_thres, preset.p_thres);
                assert_eq!(retrieval.ensemble, preset.ensemble);
                assert!(timing.is_none());
            }
            other => panic!("expected a caption record, got {other:?}"),
        }
    }
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn caption_records_errors_for_undecodable_images_and_continues() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("mixed");
    fs::create_dir(&images).unwrap();
    fs::copy(fx.images.join("a.ppm"), images.join("a.ppm")).unwrap();
    fs::copy(fx.images.join("b.ppm"), images.join("b.ppm")).unwrap();
    fs::write(images.join("bad.png"), b"this is not an image").unwrap();

    let out = tmp.path().join("caps.jsonl");
    let emb = tmp.path().join("emb.etar");
    let code = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&images),
        "--vocab", s(&fx.vocab), "--beam", "1", "--out", s(&out),
        "--embeddings-out", s(&emb),
    ]);
    assert_eq!(code, 0, "per-image failures should not fail the run");

    let lines = read_caption_lines(&out).unwrap();
    assert_eq!(lines.len(), 4);
    let captioned: Vec<&str> = lines
        .iter()
        .filter_map(|l| match l {
            CaptionLine::Caption { id, .. } => Some(id.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(captioned, ["a", "b"]);
    let errors: Vec<(&str, &str)> = lines
        .iter()
        .filter_map(|l| match l {
            CaptionLine::Error { id, error } => Some((id.as_str(), error.as_str())),
            _ => None,
        })
        .collect();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0].0, "bad");
    assert!(!errors[0].1.is_empty());

    let archive = read_archive(&emb).unwrap();
    assert_eq!(archive.manifest["kind"], "image_embeddings");
    assert_eq!(archive.manifest["backbone"], DEFAULT_ENCODER_ID);
    assert_eq!(archive.manifest["ids"], json!(["a", "b"]));
    assert_eq!(archive.tensors.len(), 1);
    assert_eq!(archive.tensors[0].0, "embeddings");
    assert_eq!(archive.tensors[0].1.rows, 2);
    assert_eq!(archive.tensors[0].1.cols, 512);
}

#[test]
fn caption_timing_flag_adds_stage_times() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("caps.jsonl");
    let code = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint),
        "--images", s(&fx.images.join("a.ppm")), "--vocab", s(&fx.vocab),
        "--beam", "1", "--timing", "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let lines = read_caption_lines(&out).unwrap();
    assert_eq!(lines.len(), 2);
    match &lines[0] {
        CaptionLine::Config(value) => assert_eq!(value["timing"], true),
        other => panic!("first line should be the config echo, got {other:?}"),
    }
    match &lines[1] {
        CaptionLine::Caption { timing: Some(t), .. } => {
            assert!(t.encode_ms >= 0.0);
            assert!(t.retrieve_ms >= 0.0);
            assert!(t.decode_ms >= 0.0);
        }
        other => panic!("expected a timed caption record, got {other:?}"),
    }
}

#[test]
fn caption_requires_a_supported_image() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("no-images");
    fs::create_dir(&images).unwrap();
    fs::write(images.join("notes.txt"), "nothing to see").unwrap();
    let code = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&images),
        "--vocab", s(&fx.vocab), "--out", s(&tmp.path().join("caps.jsonl")),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn evaluate_scores_identical_candidates_perfectly() {
    let _guard = serial();
    let tmp = tempfile::tempdir().unwrap();
    let rows = [
        ("r1", "a dog chases the red ball"),
        ("r2", "the cat sleeps under a tall tree"),
        ("r3", "a ball rests beside the green car"),
    ];
    let captions = tmp.path().join("caps.jsonl");
    write_captions(&captions, &rows);
    let references = tmp.path().join("refs.jsonl");
    let ref_rows: Vec<(&str, &[&str], Option<DomainTag>)> = rows
        .iter()
        .map(|(id, text)| (*id, std::slice::from_ref(text), None))
        .collect();
    write_references(&references, &ref_rows);

    let out = tmp.path().join("report.json");
    let code = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let report = read_json(&out);
    assert_eq!(report.pointer("/config/command"), Some(&json!("evaluate")));
    assert_eq!(
        report.pointer("/report/schema_version").and_then(Value::as_u64),
        Some(REPORT_SCHEMA_VERSION as u64)
    );
    for metric in ["bleu1", "bleu2", "bleu3", "bleu4"] {
        let value = num(&report, &format!("/report/overall/{metric}"));
        assert!((value - 1.0).abs() < 1e-12, "{metric} = {value}");
    }
    let cider = num(&report, "/report/overall/cider");
    assert!((cider - 10.0).abs() < 1e-9, "cider = {cider}");
    assert_eq!(report.pointer("/report/overall/clip_s"), Some(&Value::Null));
    assert_eq!(
        report.pointer("/report/overall/entity_precision"),
        Some(&Value::Null)
    );
    assert_eq!(report.pointer("/report/entity_counts"), Some(&Value::Null));
    assert_eq!(report.pointer("/report/domains"), Some(&json!({})));
    let samples = report
        .pointer("/report/samples")
        .and_then(Value::as_array)
        .unwrap();
    assert_eq!(samples.len(), 3);
    assert_eq!(samples[0]["id"], "r1");
    assert_eq!(samples[0]["caption"], rows[0].1);
    assert_eq!(samples[0]["references"], json!([rows[0].1]));
}

#[test]
fn evaluate_splits_scores_by_domain_tag() {
    let _guard = serial();
    let tmp = tempfile::tempdir().unwrap();
    let captions = tmp.path().join("caps.jsonl");
    write_captions(
        &captions,
        &[
            ("d1", DIAG_X),
            ("d2", DIAG_Y),
            ("d3", "a dog naps"),
            ("d4", "the ball rolls"),
        ],
    );
    let references = tmp.path().join("refs.jsonl");
    write_references(
        &references,
        &[
            ("d1", &[DIAG_X], Some(DomainTag::In)),
            ("d2", &[DIAG_Y], Some(DomainTag::In)),
            ("d3", &["some cats run far away"], Some(DomainTag::Out)),
            ("d4", &["nine green cars stop there"], Some(DomainTag::Out)),
        ],
    );

    let out = tmp.path().join("report.json");
    let code = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let report = read_json(&out);
    let domains = report
        .pointer("/report/domains")
        .and_then(Value::as_object)
        .unwrap();
    let keys: Vec<&String> = domains.keys().collect();
    assert_eq!(keys, ["in", "out"]);

    let in_cider = num(&report, "/report/domains/in/cider");
    assert!((in_cider - 10.0).abs() < 1e-9, "in-domain cider = {in_cider}");
    assert!((num(&report, "/report/domains/in/bleu4") - 1.0).abs() < 1e-12);
    assert_eq!(num(&report, "/report/domains/out/cider"), 0.0);
    assert_eq!(num(&report, "/report/domains/out/bleu4"), 0.0);

    let samples = report
        .pointer("/report/samples")
        .and_then(Value::as_array)
        .unwrap();
    let tags: Vec<&Value> = samples.iter().map(|s| &s["domain_tag"]).collect();
    assert_eq!(tags, [&json!("in"), &json!("in"), &json!("out"), &json!("out")]);
}

#[test]
fn evaluate_report_replays_byte_identically() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("report.json");
    let args = [
        "entcap", "evaluate", "--captions", s(&fx.diag_captions),
        "--references", s(&fx.diag_refs), "--vocab", s(&fx.vocab), "--out", s(&out),
    ];
    assert_eq!(run(&args), 0);
    let first = fs::read(&out).unwrap();
    assert_eq!(run(&args), 0);
    let second = fs::read(&out).unwrap();
    assert_eq!(first, second, "evaluation reports differ between runs");
}

#[test]
fn evaluate_optional_inputs_add_agreement_and_precision_scores() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let captions = tmp.path().join("caps.jsonl");
    let emb = tmp.path().join("emb.etar");
    let code = run(&[
        "entcap", "caption", "--checkpoint", s(&fx.checkpoint), "--images", s(&fx.images),
        "--vocab", s(&fx.vocab), "--beam", "1", "--out", s(&captions),
        "--embeddings-out", s(&emb),
    ]);
    assert_eq!(code, 0);

    let pairs: Vec<(String, String)> = read_caption_lines(&captions)
        .unwrap()
        .iter()
        .filter_map(|l| match l {
            CaptionLine::Caption { id, caption, .. } => Some((id.clone(), caption.clone())),
            _ => None,
        })
        .collect();
    assert_eq!(pairs.len(), 3);
    let references = tmp.path().join("refs.jsonl");
    let mut text = String::new();
    for (id, caption) in &pairs {
        let set = ReferenceSet {
            id: id.clone(),
            references: vec![caption.clone()],
            domain_tag: None,
        };
        text.push_str(&serde_json::to_string(&set).unwrap());
        text.push('\n');
    }
    fs::write(&references, text).unwrap();

    let out = tmp.path().join("report.json");
    let evaluate = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--image-embeddings", s(&emb), "--vocab", s(&fx.vocab), "--out", s(&out),
    ]);
    assert_eq!(evaluate, 0);

    let report = read_json(&out);
    let clip = num(&report, "/report/overall/clip_s");
    assert!((0.0..=2.5).contains(&clip), "clip_s = {clip}");
    let precision = num(&report, "/report/overall/entity_precision");
    assert!((0.0..=1.0).contains(&precision), "entity_precision = {precision}");
    let correct = report
        .pointer("/report/entity_counts/correct")
        .and_then(Value::as_u64)
        .unwrap();
    let extracted = report
        .pointer("/report/entity_counts/extracted")
        .and_then(Value::as_u64)
        .unwrap();
    assert!(correct <= extracted);
}

#[test]
fn evaluate_validates_the_embedding_archive() {
    let _guard = serial();
    fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let captions = tmp.path().join("caps.jsonl");
    write_captions(&captions, &[("a", "a dog"), ("b", "a cat"), ("c", "a car")]);
    let references = tmp.path().join("refs.jsonl");
    write_references(
        &references,
        &[
            ("a", &["a dog"], None),
            ("b", &["a cat"], None),
            ("c", &["a car"], None),
        ],
    );
    let out = tmp.path().join("report.json");

    let missing = tmp.path().join("missing.etar");
    let two_rows = Matrix::zeros(2, 512);
    write_archive(
        &missing,
        &json!({
            "kind": "image_embeddings",
            "backbone": DEFAULT_ENCODER_ID,
            "dim": 512,
            "ids": ["a", "b"],
        }),
        &[("embeddings", &two_rows)],
    )
    .unwrap();
    let code = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--image-embeddings", s(&missing), "--out", s(&out),
    ]);
    assert_eq!(code, 1, "a caption id without an embedding row should fail");

    let wrong_kind = tmp.path().join("wrong-kind.etar");
    write_archive(&wrong_kind, &json!({"kind": "other"}), &[("embeddings", &two_rows)]).unwrap();
    let code = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--image-embeddings", s(&wrong_kind), "--out", s(&out),
    ]);
    assert_eq!(code, 1, "a non-embedding archive should be rejected");

    let short = tmp.path().join("short.etar");
    write_archive(
        &short,
        &json!({
            "kind": "image_embeddings",
            "backbone": DEFAULT_ENCODER_ID,
            "dim": 512,
            "ids": ["a", "b", "c"],
        }),
        &[("embeddings", &two_rows)],
    )
    .unwrap();
    let code = run(&[
        "entcap", "evaluate", "--captions", s(&captions), "--references", s(&references),
        "--image-embeddings", s(&short), "--out", s(&out),
    ]);
    assert_eq!(code, 1, "id list and row count must agree");
}

#[test]
fn diagnose_csv_curve_balances_guidance_shares() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve.csv");
    let code = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint),
        "--captions", s(&fx.diag_captions), "--references", s(&fx.diag_refs),
        "--m", "1,3,full", "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("# {"), "{}", lines[0]);
    assert!(lines[0].contains("\"command\":\"diagnose\""), "{}", lines[0]);
    let cider_model: f64 = lines[1]
        .strip_prefix("# cider_model ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((cider_model - 10.0).abs() < 1e-9, "cider_model = {cider_model}");
    assert_eq!(lines[2], "m,cider_m,g_vis,g_lang");

    let mut rows = Vec::new();
    for line in &lines[3..] {
        let parts: Vec<&str> = line.split(',').collect();
        assert_eq!(parts.len(), 4, "{line}");
        let m: usize = parts[0].parse().unwrap();
        let cider_m: f64 = parts[1].parse().unwrap();
        let g_vis: f64 = parts[2].parse().unwrap();
        let g_lang: f64 = parts[3].parse().unwrap();
        assert!((0.0..=cider_model + 1e-9).contains(&cider_m), "{line}");
        assert!((0.0..=1.0).contains(&g_vis), "{line}");
        assert_eq!(g_vis + g_lang, 1.0, "{line}");
        rows.push((m, cider_m, g_vis));
    }
    let ms: Vec<usize> = rows.iter().map(|r| r.0).collect();
    assert_eq!(ms, [1, 3, 7]);
    let (_, full_cider, full_g_vis) = rows[2];
    assert_eq!(full_cider, cider_model);
    assert_eq!(full_g_vis, 0.0);
}

#[test]
fn diagnose_json_curve_mirrors_the_csv() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve.json");
    let code = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint),
        "--captions", s(&fx.diag_captions), "--references", s(&fx.diag_refs),
        "--m", "1,full", "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let curve = read_json(&out);
    assert_eq!(curve.pointer("/config/command"), Some(&json!("diagnose")));
    assert_eq!(curve.pointer("/config/m"), Some(&json!([1, 7])));
    let cider_model = num(&curve, "/curve/cider_model");
    assert!((cider_model - 10.0).abs() < 1e-9);
    let points = curve
        .pointer("/curve/points")
        .and_then(Value::as_array)
        .unwrap();
    assert_eq!(points.len(), 2);
    for (i, point) in points.iter().enumerate() {
        let g_vis = point["g_vis"].as_f64().unwrap();
        let g_lang = point["g_lang"].as_f64().unwrap();
        assert_eq!(g_vis + g_lang, 1.0, "point {i}");
    }
    assert_eq!(num(&curve, "/curve/points/1/g_vis"), 0.0);
    assert_eq!(num(&curve, "/curve/points/1/cider_m"), cider_model);
}

#[test]
fn diagnose_empty_prefix_list_writes_a_bare_curve() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve.csv");
    let code = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint),
        "--captions", s(&fx.diag_captions), "--references", s(&fx.diag_refs),
        "--m", "", "--out", s(&out),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2], "m,cider_m,g_vis,g_lang");
}

#[test]
fn diagnose_prefix_list_is_validated() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve.csv");
    for bad in ["0", "abc", "1,,2"] {
        let code = run(&[
            "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint),
            "--captions", s(&fx.diag_captions), "--references", s(&fx.diag_refs),
            "--m", bad, "--out", s(&out),
        ]);
        assert_eq!(code, 2, "m list {bad:?} should be rejected");
    }
}

#[test]
fn diagnose_without_caption_overlap_fails_but_writes_the_artifact() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let captions = tmp.path().join("caps.jsonl");
    write_captions(&captions, &[("p", "qq ww ee rr tt"), ("q", "uu ii oo pp aa")]);
    let references = tmp.path().join("refs.jsonl");
    write_references(
        &references,
        &[
            ("p", &["one two three four"], None),
            ("q", &["five six seven eight"], None),
        ],
    );

    let csv_out = tmp.path().join("curve.csv");
    let csv = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint), "--captions", s(&captions),
        "--references", s(&references), "--m", "1", "--out", s(&csv_out),
    ]);
    assert_eq!(csv, 1);
    let text = fs::read_to_string(&csv_out).unwrap();
    assert!(text.contains("m,cider_m,g_vis,g_lang"), "{text}");
    assert!(text.contains("# error: "), "{text}");

    let json_out = tmp.path().join("curve.json");
    let json_code = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint), "--captions", s(&captions),
        "--references", s(&references), "--m", "1", "--out", s(&json_out),
    ]);
    assert_eq!(json_code, 1);
    let failure = read_json(&json_out);
    assert!(failure["error"].is_string(), "{failure}");
    assert!(failure.get("curve").is_none(), "{failure}");
}

#[test]
fn diagnose_rejects_captions_without_references() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let references = tmp.path().join("refs.jsonl");
    write_references(&references, &[("x", &[DIAG_X], None)]);
    let out = tmp.path().join("curve.csv");
    let code = run(&[
        "entcap", "diagnose", "--checkpoint", s(&fx.checkpoint),
        "--captions", s(&fx.diag_captions), "--references", s(&references),
        "--out", s(&out),
    ]);
    assert_eq!(code, 1);
    assert!(!out.exists());
}

#[test]
fn retrieve_ranks_every_vocabulary_entry() {
    let _guard = serial();
    let fx = fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("retrieval.json");
    let image = fx.images.join("a.ppm");
    let code = run(&[
        "entcap", "retrieve", "--image", s(&image), "--vocab", s(&fx.vocab),
        "--out", s(&out),
    ]);
    assert_eq!(code, 0);

    let doc = read_json(&out);
    assert_eq!(doc.pointer("/config/command"), Some(&json!("retrieve")));
    assert_eq!(doc.pointer("/config/preset"), Some(&json!("cross_domain")));
    assert_eq!(doc.pointer("/config/backbone"), Some(&json!(DEFAULT_ENCODER_ID)));
    assert_eq!(doc["image"], "a");

    let vocab_names = ["dog", "cat", "ball", "tree", "car"];
    let candidates = doc["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), vocab_names.len());
    let mut total = 0.0;
    let mut previous = f64::INFINITY;
    for candidate in candidates {
        let name = candidate["name"].as_str().unwrap();
        assert!(vocab_names.contains(&name), "{name} not in the vocabulary");
        let p = candidate["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(p <= previous, "candidates are not sorted by probability");
        previous = p;
        total += p;
    }
    assert!((total - 1.0).abs() < 1e-9, "probabilities sum to {total}");

    let preset = RetrievalConfig::preset("cross_domain").unwrap();
    let entities = doc["entities"].as_array().unwrap();
    assert!(entities.len() <= preset.k);
    for entity in entities {
        let score = entity["score"].as_f64().unwrap();
        assert!(score > preset.p_thres, "selected entity at p = {score}");
        let name = entity["name"].as_str().unwrap();
        let matching = candidates
            .iter()
            .find(|c| c["name"] == name)
            .unwrap_or_else(|| panic!("{name} missing from the candidate list"));
        assert_eq!(matching["p"].as_f64().unwrap(), score);
    }

    let stdout_only = run(&["entcap", "retrieve", "--image", s(&image), "--vocab", s(&fx.vocab)]);
    assert_eq!(stdout_only, 0);
}

#[test]
fn train_log_records_config_steps_and_summary() {
    let _guard = serial();
    let fx = fixtures();
    assert!(fx.checkpoint.exists());

    let text = fs::read_to_string(fx.train_out.join("train.log.jsonl")).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.len() >= 3);

    let config = &lines[0];
    assert_eq!(config["kind"], "config");
    assert_eq!(config["command"], "train");
    assert_eq!(config["preset"], "fixture");
    assert_eq!(config["corpus_format"], "plain_lines");
    assert_eq!(config["backbone"], DEFAULT_ENCODER_ID);
    assert_eq!(config["single_word_vocab"], true);
    assert_eq!(config.pointer("/training/epochs"), Some(&json!(8)));
    assert_eq!(config.pointer("/training/seed"), Some(&json!(11)));
    assert!(config.pointer("/model/lm/vocab_size").and_then(Value::as_u64).unwrap() > 2);
    assert!(config["vocab_checksum"].is_string());

    let kind_count = |kind: &str| lines.iter().filter(|l| l["kind"] == kind).count();
    assert_eq!(kind_count("step"), 8);
    assert_eq!(kind_count("epoch_end"), 8);
    assert_eq!(kind_count("record_skipped"), 0);

    let summary = lines.last().unwrap();
    assert_eq!(summary["kind"], "summary");
    assert_eq!(summary["epochs_run"], 8);
    assert_eq!(summary["steps"], 8);
    assert_eq!(summary["trained_records"], 10);
    assert_eq!(summary["skipped_records"], 0);
    assert!(summary["wall_clock"].as_f64().unwrap() >= 0.0);
}
