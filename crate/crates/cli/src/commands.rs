//! Subcommand implementations.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use kanchor::anchoring::{
    AnchorCache, AnchorConfig, AnchorJson, Anchorer, NtdModel, RbWeights, TokenizeMode,
    TripleCandidate,
};
use kanchor::kg::{bootstrap_triples, load_kg, save_kg, KnowledgeGraph, Pattern};
use kanchor::matchers::{AnchorView, MatcherModel};
use kanchor::synth::{gen_disamb, gen_matching, toy_kg, DisambGenConfig, MatchGenConfig};
use kanchor::train::{
    evaluate_accuracy, load_disamb_tsv, load_match_tsv, run_ablation, save_disamb_tsv,
    save_match_tsv, train_matcher, train_ntd as train_ntd_impl, NtdTrainConfig,
};

use crate::config::load_train_config;
use crate::{CliError, KgArgs};

fn log(quiet: bool, message: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", message.as_ref());
    }
}

fn load_graph(kg: &KgArgs) -> Result<KnowledgeGraph, CliError> {
    Ok(load_kg(&kg.entities, &kg.triples)?)
}

fn load_ntd(path: Option<&Path>, quiet: bool) -> Result<Option<NtdModel>, CliError> {
    match path {
        Some(p) => Ok(Some(NtdModel::load(p).map_err(CliError::from)?)),
        None => {
            log(
                quiet,
                "warning: no --ntd model given; falling back to rules + knowledge reasoning",
            );
            Ok(None)
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

// ---- build-kg ---------------------------------------------------------------

pub fn build_kg(
    kg_args: &KgArgs,
    corpus: Option<&Path>,
    patterns: Option<&Path>,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    let kg = load_graph(kg_args)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;

    if let (Some(corpus_path), Some(patterns_path)) = (corpus, patterns) {
        let corpus = read_lines(corpus_path)?;
        let pattern_rows = read_lines(patterns_path)?;
        let mut parsed = Vec::new();
        for (i, line) in pattern_rows.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let pattern: Pattern = serde_json::from_str(line).map_err(|e| {
                CliError::data(format!("{}:{}: {e}", patterns_path.display(), i + 1))
            })?;
            parsed.push(pattern);
        }
        let ranked = bootstrap_triples(&corpus, &parsed, &kg);
        let boot_path = out_dir.join("bootstrapped_triples.jsonl");
        let mut out = fs::File::create(&boot_path)
            .map_err(|e| CliError::data(format!("{}: {e}", boot_path.display())))?;
        for (triple, count) in &ranked {
            let row = serde_json::json!({
                "head": triple.head.0,
                "relation": triple.relation,
                "tail": triple.tail.0,
                "count": count,
            });
            writeln!(out, "{row}").map_err(|e| CliError::data(e.to_string()))?;
        }
        log(quiet, format!("bootstrapped {} candidate triples -> {}", ranked.len(), boot_path.display()));
    }

    save_kg(&kg, &out_dir.join("entities.jsonl"), &out_dir.join("triples.jsonl"))?;
    let stats = kg.stats();
    let stats_path = out_dir.join("stats.json");
    fs::write(
        &stats_path,
        serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
    )
    .map_err(|e| CliError::data(format!("{}: {e}", stats_path.display())))?;
    println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
    Ok(())
}

// ---- anchor ------------------------------------------------------------------

#[derive(Serialize)]
struct ExplainedCandidate {
    head: u32,
    head_surface: String,
    relation: kanchor::kg::RelationKind,
    tail: u32,
    tail_surface: String,
    rb: f64,
    ntd: f64,
    kr_pass: bool,
    score: f64,
    accepted: bool,
}

#[derive(Serialize)]
struct ExplainedAnchor {
    #[serde(flatten)]
    anchors: AnchorJson,
    candidates: Vec<ExplainedCandidate>,
}

fn explain_row(cand: &TripleCandidate, threshold: f64) -> ExplainedCandidate {
    ExplainedCandidate {
        head: cand.head.entity.0,
        head_surface: cand.head.surface.clone(),
        relation: cand.relation,
        tail: cand.tail.entity.0,
        tail_surface: cand.tail.surface.clone(),
        rb: cand.rb_score,
        ntd: cand.ntd_score,
        kr_pass: cand.kr_pass,
        score: cand.final_score,
        accepted: cand.final_score >= threshold,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn anchor(
    kg_args: &KgArgs,
    ntd_path: Option<&Path>,
    threshold: f64,
    mode: &str,
    rb_weights: Option<&Path>,
    text: Option<&str>,
    input: Option<&Path>,
    explain: bool,
    quiet: bool,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::usage(format!("--threshold must be in [0,1], got {threshold}")));
    }
    let mode: TokenizeMode = mode.parse().map_err(CliError::usage)?;
    let kg = load_graph(kg_args)?;
    let ntd = load_ntd(ntd_path, quiet)?;
    let mut cfg = AnchorConfig { mode, threshold, ..AnchorConfig::default() };
    if let Some(path) = rb_weights {
        let body = fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        cfg.rb_weights = serde_json::from_str::<RbWeights>(&body)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    let anchorer = Anchorer::new(&kg, ntd.as_ref(), cfg);

    let lines: Vec<String> = match (text, input) {
        (Some(t), None) => vec![t.to_string()],
        (None, Some(path)) => read_lines(path)?,
        (None, None) => return Err(CliError::usage("anchor needs --text or --input")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in &lines {
        let (set, all) = anchorer.anchor_explained(line);
        let anchors = AnchorJson::from(&set);
        let json = if explain {
            let explained = ExplainedAnchor {
                anchors,
                candidates: all.iter().map(|c| explain_row(c, threshold)).collect(),
            };
            serde_json::to_string(&explained).expect("anchor json")
        } else {
            serde_json::to_string(&anchors).expect("anchor json")
        };
        writeln!(out, "{json}").map_err(|e| CliError::data(e.to_string()))?;
    }
    Ok(())
}

// ---- train -------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn train(
    kg_args: &KgArgs,
    config_path: &Path,
    data: &Path,
    ntd_path: Option<&Path>,
    out: &Path,
    anchor_cache: Option<&Path>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let mut config = load_train_config(config_path)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.verbose = !quiet;
    let kg = load_graph(kg_args)?;
    let ntd = load_ntd(ntd_path, quiet)?;
    let examples = load_match_tsv(data)?;
    log(quiet, format!("training {} on {} examples", config.arch, examples.len()));

    let mut cache = match anchor_cache {
        Some(path) if path.exists() => AnchorCache::load(path)?,
        _ => AnchorCache::new(),
    };
    let trained = train_matcher(
        &config,
        &examples,
        &kg,
        ntd.as_ref(),
        &AnchorConfig::default(),
        Some(&mut cache),
    )?;
    if let Some(path) = anchor_cache {
        cache.save(path)?;
    }
    trained.model.save(out).map_err(CliError::from)?;
    log(
        quiet,
        format!(
            "best epoch {} (valid accuracy {:.4}); held-out test accuracy {:.4}; checkpoint -> {}",
            trained.best_epoch,
            trained.best_valid_accuracy,
            trained.test_accuracy,
            out.display()
        ),
    );
    println!("{:.4}", trained.test_accuracy);
    Ok(())
}

// ---- train-ntd ----------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn train_ntd(
    kg_args: &KgArgs,
    data: &Path,
    out: &Path,
    epochs: usize,
    lr: f64,
    dim: usize,
    buckets: usize,
    holdout: bool,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let kg = load_graph(kg_args)?;
    let examples = load_disamb_tsv(data)?;
    let config = NtdTrainConfig {
        epochs,
        lr,
        dim,
        buckets,
        holdout,
        seed: seed_override.unwrap_or(1),
        verbose: !quiet,
        ..NtdTrainConfig::default()
    };
    let report = train_ntd_impl(&examples, &kg, &AnchorConfig::default(), &config)?;
    if report.skipped > 0 {
        log(quiet, format!("warning: {} rows had no matching candidate", report.skipped));
    }
    report.model.save(out).map_err(CliError::from)?;
    log(
        quiet,
        format!(
            "ntd best epoch {}: train accuracy {:.4}, valid accuracy {:.4} -> {}",
            report.best_epoch, report.train_accuracy, report.valid_accuracy, out.display()
        ),
    );
    println!("{:.4}", report.valid_accuracy);
    Ok(())
}

// ---- eval ---------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn eval(
    kg_args: &KgArgs,
    checkpoint: Option<&Path>,
    data: &Path,
    ntd_path: Option<&Path>,
    runs: usize,
    config_path: Option<&Path>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let kg = load_graph(kg_args)?;
    let ntd = load_ntd(ntd_path, quiet)?;
    let examples = load_match_tsv(data)?;

    match (checkpoint, config_path) {
        (Some(ckpt), _) if runs <= 1 => {
            let model = MatcherModel::load(ckpt).map_err(CliError::from)?;
            let accuracy =
                evaluate_accuracy(&model, &examples, &kg, ntd.as_ref(), &AnchorConfig::default())?;
            println!("{accuracy:.4}");
            Ok(())
        }
        (_, Some(config_path)) => {
            // train/evaluate cycles across consecutive seeds
            let mut config = load_train_config(config_path)?;
            if let Some(seed) = seed_override {
                config.seed = seed;
            }
            config.verbose = false;
            let base_seed = config.seed;
            let mut accs = Vec::with_capacity(runs.max(1));
            for i in 0..runs.max(1) {
                let run_config =
                    kanchor::train::TrainConfig { seed: base_seed + i as u64, ..config.clone() };
                let trained = train_matcher(
                    &run_config,
                    &examples,
                    &kg,
                    ntd.as_ref(),
                    &AnchorConfig::default(),
                    None,
                )?;
                log(
                    quiet,
                    format!("run {} (seed {}): test accuracy {:.4}", i + 1, run_config.seed, trained.test_accuracy),
                );
                accs.push(trained.test_accuracy);
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            println!("{mean:.4}");
            Ok(())
        }
        (Some(_), None) => Err(CliError::usage(
            "--runs > 1 retrains per seed and therefore needs --config",
        )),
        (None, None) => Err(CliError::usage("eval needs --checkpoint or --config")),
    }
}

// ---- ablate --------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn ablate(
    kg_args: &KgArgs,
    config_path: &Path,
    data: &Path,
    ntd_path: Option<&Path>,
    seeds: &str,
    out: Option<&Path>,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let mut config = load_train_config(config_path)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.verbose = false;
    let seeds: Vec<u64> = seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| CliError::usage(format!("--seeds: \"{s}\" is not an integer")))
        })
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(CliError::usage("--seeds must name at least one seed"));
    }
    let kg = load_graph(kg_args)?;
    let ntd = load_ntd(ntd_path, quiet)?;
    let examples = load_match_tsv(data)?;
    log(
        quiet,
        format!("ablation grid over {} examples, seeds {seeds:?}", examples.len()),
    );
    let report = run_ablation(
        &config,
        &examples,
        &kg,
        ntd.as_ref(),
        &AnchorConfig::default(),
        &seeds,
    )?;
    for row in &report.rows {
        log(
            quiet,
            format!(
                "{}: mean {:.4}, per-seed {:?}",
                row.name,
                row.mean_accuracy,
                row.per_seed
                    .iter()
                    .map(|(s, a)| format!("{s}:{a:.4}"))
                    .collect::<Vec<_>>()
            ),
        );
    }
    let tsv = report.to_tsv();
    print!("{tsv}");
    if let Some(path) = out {
        fs::write(path, &tsv).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

// ---- match REPL ------------------------------------------------------------------

pub fn match_repl(
    kg_args: &KgArgs,
    checkpoint: &Path,
    ntd_path: Option<&Path>,
    index: &Path,
    k: usize,
    quiet: bool,
) -> Result<(), CliError> {
    let kg = load_graph(kg_args)?;
    let ntd = load_ntd(ntd_path, quiet)?;
    let model = MatcherModel::load(checkpoint).map_err(CliError::from)?;
    let titles: Vec<String> = read_lines(index)?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split('\t').next().unwrap_or_default().to_string())
        .collect();
    if titles.is_empty() {
        return Err(CliError::data(format!("{}: no titles in index", index.display())));
    }
    let anchorer = Anchorer::new(&kg, ntd.as_ref(), AnchorConfig::default());
    let title_anchors: Vec<AnchorView> = titles
        .iter()
        .map(|t| AnchorView::from(&anchorer.anchor(t)))
        .collect();
    log(quiet, format!("indexed {} titles; enter a query (ctrl-d to quit)", titles.len()));

    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    let prompt = |out: &mut std::io::Stdout| {
        let _ = write!(out, "query> ");
        let _ = out.flush();
    };
    prompt(&mut out);
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| CliError::data(e.to_string()))?;
        let query = line.trim();
        if query.is_empty() {
            prompt(&mut out);
            continue;
        }
        let q_set = anchorer.anchor(query);
        let q_view = AnchorView::from(&q_set);
        let mut scored = Vec::with_capacity(titles.len());
        for (title, t_view) in titles.iter().zip(&title_anchors) {
            let (q_enc, d_enc) = model.encode(query, title, &q_view, t_view);
            match model.predict(&q_enc, &d_enc) {
                Ok(pred) => scored.push((pred, title)),
                Err(e) => {
                    eprintln!("error scoring {title:?}: {e}");
                }
            }
        }
        // rank by P(similar), ties by P(related)
        scored.sort_by(|a, b| {
            (b.0.probs[2], b.0.probs[1])
                .partial_cmp(&(a.0.probs[2], a.0.probs[1]))
                .expect("finite probabilities")
        });
        let anchors_desc: Vec<String> = q_set
            .triples
            .iter()
            .map(|c| {
                format!("({}, {}, {})", c.head.surface, c.relation, c.tail.surface)
            })
            .collect();
        let _ = writeln!(
            out,
            "anchors: [{}]  entities: [{}]",
            anchors_desc.join(", "),
            q_set
                .entities
                .iter()
                .map(|m| m.surface.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        );
        for (rank, (pred, title)) in scored.iter().take(k.max(1)).enumerate() {
            let label = kanchor::train::MatchLabel::from_index(pred.label)
                .map(|l| l.name())
                .unwrap_or("?");
            let _ = writeln!(
                out,
                "{:>2}. [{label:<9} s={:.3} r={:.3} u={:.3}] {title}",
                rank + 1,
                pred.probs[2],
                pred.probs[1],
                pred.probs[0],
            );
        }
        prompt(&mut out);
    }
    let _ = writeln!(out);
    Ok(())
}

// ---- synth ----------------------------------------------------------------------

pub fn synth(
    out_dir: &Path,
    what: &str,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<(), CliError> {
    let kg_dir = out_dir.join("kg");
    let synth_dir = out_dir.join("synth");
    for dir in [&kg_dir, &synth_dir] {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    let kg = toy_kg();
    let all = what == "all";
    if all || what == "kg" {
        save_kg(&kg, &kg_dir.join("entities.jsonl"), &kg_dir.join("triples.jsonl"))?;
        log(quiet, format!("toy graph -> {}", kg_dir.display()));
    }
    if all || what == "disamb" {
        let mut config = DisambGenConfig::default();
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        let (train, eval) = gen_disamb(&kg, &config);
        save_disamb_tsv(&train, &synth_dir.join("disamb_train.tsv"))?;
        save_disamb_tsv(&eval, &synth_dir.join("disamb_eval.tsv"))?;
        log(
            quiet,
            format!("disambiguation: {} train rows, {} eval rows -> {}", train.len(), eval.len(), synth_dir.display()),
        );
    }
    if all || what == "matching" {
        let mut config = MatchGenConfig::default();
        if let Some(seed) = seed_override {
            config.seed = seed;
        }
        let examples = gen_matching(&kg, &config);
        save_match_tsv(&examples, &synth_dir.join("match.tsv"))?;
        log(quiet, format!("matching: {} examples -> {}", examples.len(), synth_dir.display()));
    }
    if !all && !["kg", "disamb", "matching"].contains(&what) {
        return Err(CliError::usage(format!(
            "--what must be all, kg, disamb or matching, got \"{what}\""
        )));
    }
    Ok(())
}
