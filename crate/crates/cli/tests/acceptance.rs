//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measurements (visible with `-- --nocapture`).
//!
//! The committed corpus under data/ is the fixture for everything
//! statistical; tolerances and budgets are pinned in the asserts.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use kanchor::anchoring::{AnchorConfig, NtdModel};
use kanchor::matchers::{
    ArchKind, ChannelSet, ChannelizedInput, Dims, MatcherModel, MaxLens, Vocab,
};
use kanchor::synth::toy_kg;
use kanchor::train::{
    evaluate_disambiguation, load_disamb_tsv, load_match_tsv, run_ablation, train_matcher,
    train_ntd, DisambScorer, MatchExample, NtdTrainConfig, TrainConfig,
};
use kanchor_tensor::{gradient_check, Graph64, Rng};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(tag);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn kanchor_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kanchor"))
}

fn trained_ntd() -> NtdModel {
    let kg = toy_kg();
    let rows = load_disamb_tsv(&data_dir().join("synth/disamb_train.tsv")).unwrap();
    train_ntd(&rows, &kg, &AnchorConfig::default(), &NtdTrainConfig::default())
        .unwrap()
        .model
}

fn pass(line: impl AsRef<str>) {
    println!("[PASS] {}", line.as_ref());
}

// ---- criterion 1: gradient fidelity -----------------------------------------

#[test]
fn criterion_1_gradient_fidelity() {
    let start = Instant::now();
    let kg = toy_kg();
    let vocab = Vocab::build(
        &kg,
        ["delete friend recover wechat"],
        kanchor::anchoring::TokenizeMode::Whitespace,
    );
    let dims = Dims { embed: 6, filters: 5, hidden: 4 };
    let max_lens = MaxLens { tokens: 4, entities: 3, triples: 2 };

    let toy_inputs = |model: &MatcherModel| -> (ChannelizedInput, ChannelizedInput) {
        use kanchor::kg::{EntityId, RelationKind::HasOperation};
        let q_anchors = kanchor::matchers::AnchorView {
            entity_ids: vec![EntityId(30), EntityId(2)],
            op_triples: vec![(EntityId(2), HasOperation, EntityId(30))],
        };
        let d_anchors = kanchor::matchers::AnchorView {
            entity_ids: vec![EntityId(31), EntityId(2)],
            op_triples: vec![(EntityId(2), HasOperation, EntityId(31))],
        };
        model.encode(
            "delete friend recover wechat",
            "recover wechat delete friend",
            &q_anchors,
            &d_anchors,
        )
    };

    let mut worst = 0.0f64;
    for arch in ArchKind::ALL {
        let model = MatcherModel::init(
            arch,
            ChannelSet::all(),
            dims,
            max_lens,
            kanchor::anchoring::TokenizeMode::Whitespace,
            vocab.clone(),
            4242,
        )
        .unwrap();
        let (q, d) = toy_inputs(&model);
        let err = gradient_check(
            |graph: &mut Graph64, params| {
                let probs = model.forward_pair(graph, params, &q, &d)?;
                graph.cross_entropy(probs, &[2])
            },
            &model.params,
        )
        .unwrap();
        assert!(err < 1e-4, "{arch}: max relative error {err}");
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(format!(
        "criterion 1 gradient fidelity: all architectures < 1e-4 (worst {worst:.2e}) in {elapsed:.2?}"
    ));
}

// ---- criterion 2: decomposition identities ----------------------------------

#[test]
fn criterion_2_decomposition_identities() {
    let mut rng = Rng::new(0xdeca);
    let mut worst_sum = 0.0f64;
    let mut worst_dot = 0.0f64;
    for _ in 0..1000 {
        let n = 1 + rng.below(6);
        let k = 2 + rng.below(8);
        let hv: Vec<f64> = (0..n * k).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let av: Vec<f64> = (0..n * k).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let mut graph = Graph64::new();
        let h = graph.constant(vec![n, k], hv.clone()).unwrap();
        let a = graph.constant(vec![n, k], av.clone()).unwrap();
        let (p, o) = kanchor::matchers::orthogonal_decompose(&mut graph, h, a).unwrap();
        for i in 0..n * k {
            let residue = (graph.value(p)[i] + graph.value(o)[i] - hv[i]).abs();
            assert!(residue < 1e-9, "reconstruction residue {residue}");
            worst_sum = worst_sum.max(residue);
        }
        for row in 0..n {
            let dot: f64 = (0..k)
                .map(|j| graph.value(o)[row * k + j] * av[row * k + j])
                .sum();
            assert!(dot.abs() < 1e-9, "orthogonality residue {dot}");
            worst_dot = worst_dot.max(dot.abs());
        }
    }
    pass(format!(
        "criterion 2 decomposition identities: 1000 draws, worst |p+o-h| {worst_sum:.2e}, worst |o.a| {worst_dot:.2e}"
    ));
}

// ---- criterion 3: maximum-matching oracle ------------------------------------

type Segmentation = Vec<(usize, usize, kanchor::kg::EntityId)>;

fn enumerate_all(
    tokens: &[String],
    dict: &[(Vec<String>, kanchor::kg::EntityId)],
    start: usize,
    current: &mut Segmentation,
    out: &mut Vec<Segmentation>,
) {
    if start >= tokens.len() {
        out.push(current.clone());
        return;
    }
    enumerate_all(tokens, dict, start + 1, current, out);
    for (alias, entity) in dict {
        let end = start + alias.len();
        if end <= tokens.len() && tokens[start..end] == alias[..] {
            current.push((start, end, *entity));
            enumerate_all(tokens, dict, end, current, out);
            current.pop();
        }
    }
}

fn oracle_pick(all: Vec<Segmentation>) -> Segmentation {
    use std::cmp::Ordering;
    let better = |a: &Segmentation, b: &Segmentation| -> Ordering {
        for (sa, sb) in a.iter().zip(b.iter()) {
            let ka = (sa.0, std::cmp::Reverse(sa.1), sa.2);
            let kb = (sb.0, std::cmp::Reverse(sb.1), sb.2);
            match ka.cmp(&kb) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        b.len().cmp(&a.len())
    };
    let mut all = all;
    all.sort_by(better);
    all.into_iter().next().unwrap_or_default()
}

#[test]
fn criterion_3_fmm_oracle_equivalence() {
    use kanchor::anchoring::{extract_entities_fmm, tokenize, TokenizeMode};
    use kanchor::kg::{Entity, EntityId, KnowledgeGraph};

    let start = Instant::now();
    let mut rng = Rng::new(0xf33d);
    let vocabulary = ["ta", "tb", "tc", "td", "te", "tf", "tg", "th"];
    let mut dicts_tested = 0;
    let mut sequences = 0;
    while dicts_tested < 200 {
        let n_aliases = 2 + rng.below(6);
        let mut aliases: Vec<Vec<String>> = Vec::new();
        for _ in 0..n_aliases {
            let len = 1 + rng.below(3);
            let alias: Vec<String> = (0..len)
                .map(|_| vocabulary[rng.below(vocabulary.len())].to_string())
                .collect();
            if !aliases.contains(&alias) {
                aliases.push(alias);
            }
        }
        let entities: Vec<Entity> = aliases
            .iter()
            .enumerate()
            .map(|(i, alias)| Entity::new(i as u32 + 1, &alias.join(" "), &[], "t"))
            .collect();
        let Ok(kg) = KnowledgeGraph::from_parts(entities, vec![]) else {
            continue;
        };
        let dict: Vec<(Vec<String>, EntityId)> = aliases
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), EntityId(i as u32 + 1)))
            .collect();
        for _ in 0..50 {
            let len = rng.below(13);
            let tokens: Vec<String> = (0..len)
                .map(|_| vocabulary[rng.below(vocabulary.len())].to_string())
                .collect();
            let text = tokens.join(" ");
            let got: Segmentation = extract_entities_fmm(
                &tokenize(&text, TokenizeMode::Whitespace),
                &kg,
            )
            .into_iter()
            .map(|m| (m.token_start, m.token_end, m.entity))
            .collect();
            let mut all = Vec::new();
            enumerate_all(&tokens, &dict, 0, &mut Vec::new(), &mut all);
            assert_eq!(got, oracle_pick(all), "dict {aliases:?} on {tokens:?}");
            sequences += 1;
        }
        dicts_tested += 1;
    }
    pass(format!(
        "criterion 3 maximum-matching oracle: {dicts_tested} dictionaries x 50 sequences ({sequences} checks) exact in {:.2?}",
        start.elapsed()
    ));
}

// ---- criterion 4: disambiguation ordering -------------------------------------

#[test]
fn criterion_4_disambiguation_ordering() {
    let start = Instant::now();
    let kg = toy_kg();
    let cfg = AnchorConfig::default();
    let eval_rows = load_disamb_tsv(&data_dir().join("synth/disamb_eval.tsv")).unwrap();
    assert!(eval_rows.len() >= 1000, "committed set has {} candidates", eval_rows.len());
    let ntd = trained_ntd();

    let rb = evaluate_disambiguation(DisambScorer::Rb, &eval_rows, &kg, &cfg, None).unwrap();
    let rbkr = evaluate_disambiguation(DisambScorer::RbKr, &eval_rows, &kg, &cfg, None).unwrap();
    let full =
        evaluate_disambiguation(DisambScorer::RbKrNtd, &eval_rows, &kg, &cfg, Some(&ntd)).unwrap();

    assert!(
        rb.accuracy < rbkr.accuracy && rbkr.accuracy < full.accuracy,
        "ordering violated: rb {:.4}, rb+kr {:.4}, full {:.4}",
        rb.accuracy,
        rbkr.accuracy,
        full.accuracy
    );
    assert!(full.accuracy >= 0.85, "full ensemble accuracy {:.4}", full.accuracy);
    assert!(full.auc >= 0.90, "full ensemble auc {:.4}", full.auc);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    pass(format!(
        "criterion 4 disambiguation ordering on {} candidates: rb {:.4}/{:.4} < rb+kr {:.4}/{:.4} < full {:.4}/{:.4} in {elapsed:.2?}",
        eval_rows.len(), rb.accuracy, rb.auc, rbkr.accuracy, rbkr.auc, full.accuracy, full.auc
    ));
}

// ---- criterion 5: ablation ordering ---------------------------------------------

fn ablation_config() -> TrainConfig {
    TrainConfig {
        arch: ArchKind::Iwan,
        channels: ChannelSet::all(),
        dims: Dims { embed: 24, filters: 8, hidden: 12 },
        max_lens: MaxLens::default(),
        batch_size: 32,
        lr: 0.01,
        epochs: 26,
        seed: 1,
        verbose: false,
    }
}

#[test]
fn criterion_5_ablation_ordering() {
    let start = Instant::now();
    let kg = toy_kg();
    let examples = load_match_tsv(&data_dir().join("synth/match.tsv")).unwrap();
    let ntd = trained_ntd();
    let seeds = [1u64, 2, 3];
    let report = run_ablation(
        &ablation_config(),
        &examples,
        &kg,
        Some(&ntd),
        &AnchorConfig::default(),
        &seeds,
    )
    .unwrap();

    let row = |name: &str| report.rows.iter().find(|r| r.name == name).unwrap();
    let (tok, ent, tri, all) = (
        row("token"),
        row("token+entity"),
        row("token+triple"),
        row("token+entity+triple"),
    );
    let mut ordered_seeds = 0;
    for (i, &seed) in seeds.iter().enumerate() {
        let (t, e, r, a) = (
            tok.per_seed[i].1,
            ent.per_seed[i].1,
            tri.per_seed[i].1,
            all.per_seed[i].1,
        );
        let ok = t < e && e <= r && r < a;
        eprintln!(
            "  seed {seed}: token {t:.4} | +entity {e:.4} | +triple {r:.4} | all {a:.4} {}",
            if ok { "(ordered)" } else { "(out of order)" }
        );
        if ok {
            ordered_seeds += 1;
        }
    }
    assert!(
        ordered_seeds >= 2,
        "ordering held on {ordered_seeds}/3 seeds; means: token {:.4}, +entity {:.4}, +triple {:.4}, all {:.4}",
        tok.mean_accuracy,
        ent.mean_accuracy,
        tri.mean_accuracy,
        all.mean_accuracy
    );
    let margin = all.mean_accuracy - tok.mean_accuracy;
    assert!(margin >= 0.05, "all-channels margin over token-only: {margin:.4}");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(900), "took {elapsed:?}");
    pass(format!(
        "criterion 5 ablation ordering: {ordered_seeds}/3 seeds ordered, margin {margin:.4}, grid in {elapsed:.2?}"
    ));
}

// ---- criterion 6: capacity --------------------------------------------------------

#[test]
fn criterion_6_capacity_overfit() {
    let kg = toy_kg();
    let examples: Vec<MatchExample> = load_match_tsv(&data_dir().join("synth/match.tsv"))
        .unwrap()
        .into_iter()
        .take(200)
        .collect();
    for arch in ArchKind::ALL {
        let start = Instant::now();
        let config = TrainConfig {
            arch,
            channels: ChannelSet::all(),
            dims: Dims { embed: 24, filters: 16, hidden: 16 },
            max_lens: MaxLens::default(),
            batch_size: 32,
            lr: 0.01,
            epochs: 30,
            seed: 1,
            verbose: false,
        };
        let trained =
            train_matcher(&config, &examples, &kg, None, &AnchorConfig::default(), None).unwrap();
        let best_train = trained
            .history
            .iter()
            .map(|s| s.train_accuracy)
            .fold(0.0, f64::max);
        let elapsed = start.elapsed();
        assert!(
            best_train >= 0.95,
            "{arch}: training accuracy peaked at {best_train:.4} within 30 epochs"
        );
        assert!(elapsed < Duration::from_secs(300), "{arch} took {elapsed:?}");
        pass(format!(
            "criterion 6 capacity ({arch}): train accuracy {best_train:.4} within 30 epochs in {elapsed:.2?}"
        ));
    }
}

// ---- criterion 7: determinism -------------------------------------------------------

#[test]
fn criterion_7_checkpoint_determinism() {
    let dir = tmp_dir("criterion7");
    let data = data_dir();
    // small slice + small config keeps the double train fast
    let slice_path = dir.join("slice.tsv");
    let rows: Vec<MatchExample> = load_match_tsv(&data.join("synth/match.tsv"))
        .unwrap()
        .into_iter()
        .take(300)
        .collect();
    kanchor::train::save_match_tsv(&rows, &slice_path).unwrap();
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        r#"{"arch": "arc1", "channels": ["token","entity","triple"],
            "dims": {"embed": 12, "filters": 8, "hidden": 8},
            "batch_size": 32, "lr": 0.01, "epochs": 3, "seed": 9}"#,
    )
    .unwrap();

    let run = |out: &Path| {
        let status = kanchor_bin()
            .args(["train", "--quiet"])
            .arg("--entities")
            .arg(data.join("kg/entities.jsonl"))
            .arg("--triples")
            .arg(data.join("kg/triples.jsonl"))
            .arg("--config")
            .arg(&config_path)
            .arg("--data")
            .arg(&slice_path)
            .arg("--out")
            .arg(out)
            .status()
            .expect("train runs");
        assert!(status.success(), "train exited with {status}");
    };
    let ckpt_a = dir.join("a.ckpt");
    let ckpt_b = dir.join("b.ckpt");
    run(&ckpt_a);
    run(&ckpt_b);
    let bytes_a = std::fs::read(&ckpt_a).unwrap();
    let bytes_b = std::fs::read(&ckpt_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "repeated training must be byte-identical");
    assert_eq!(
        std::fs::read(dir.join("a.ckpt.meta.json")).unwrap(),
        std::fs::read(dir.join("b.ckpt.meta.json")).unwrap()
    );

    // load -> save round-trips bit-exactly
    let model = MatcherModel::load(&ckpt_a).unwrap();
    let ckpt_c = dir.join("c.ckpt");
    model.save(&ckpt_c).unwrap();
    assert_eq!(bytes_a, std::fs::read(&ckpt_c).unwrap());
    pass(format!(
        "criterion 7 determinism: two runs byte-identical ({} bytes) and round-trip exact",
        bytes_a.len()
    ));
}

// ---- criterion 8: canonical end-to-end case -------------------------------------------

#[test]
fn criterion_8_canonical_anchor_case() {
    let dir = tmp_dir("criterion8");
    let data = data_dir();
    let ntd_path = dir.join("ntd.ckpt");
    let status = kanchor_bin()
        .args(["train-ntd", "--quiet"])
        .arg("--entities")
        .arg(data.join("kg/entities.jsonl"))
        .arg("--triples")
        .arg(data.join("kg/triples.jsonl"))
        .arg("--data")
        .arg(data.join("synth/disamb_train.tsv"))
        .arg("--out")
        .arg(&ntd_path)
        .status()
        .expect("train-ntd runs");
    assert!(status.success(), "train-ntd exited with {status}");

    let output = kanchor_bin()
        .args(["anchor", "--quiet", "--explain"])
        .arg("--entities")
        .arg(data.join("kg/entities.jsonl"))
        .arg("--triples")
        .arg(data.join("kg/triples.jsonl"))
        .arg("--ntd")
        .arg(&ntd_path)
        .args(["--text", "How to recover WeChat friend if she has deleted me?"])
        .output()
        .expect("anchor runs");
    assert!(output.status.success(), "anchor exited with {}", output.status);
    let json: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("one JSON object on stdout");

    let triples = json["triples"].as_array().unwrap();
    let accepted: Vec<(u64, &str, u64)> = triples
        .iter()
        .map(|t| {
            (
                t["head"].as_u64().unwrap(),
                t["relation"].as_str().unwrap(),
                t["tail"].as_u64().unwrap(),
            )
        })
        .collect();
    // friend=2, WeChat=1, delete=30, recover=31
    assert_eq!(
        accepted,
        vec![(2, "has_operation", 31), (2, "component_of", 1)],
        "accepted anchors: {accepted:?}"
    );

    // the reasoning gate demoted the app-headed operation candidates
    let candidates = json["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 5, "candidate count");
    for cand in candidates {
        let head = cand["head"].as_u64().unwrap();
        let relation = cand["relation"].as_str().unwrap();
        let kr = cand["kr_pass"].as_bool().unwrap();
        if head == 1 && relation == "has_operation" {
            assert!(!kr, "app-headed op candidate passed the gate: {cand}");
            assert_eq!(cand["score"].as_f64().unwrap(), 0.0);
        } else {
            assert!(kr, "unexpected gate demotion: {cand}");
        }
    }
    pass("criterion 8 canonical case: exactly the two true anchors accepted, container candidates gated");
}
