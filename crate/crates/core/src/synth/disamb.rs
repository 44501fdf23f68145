//! Synthetic disambiguation corpus. Queries put the true operation in a
//! leading request frame ("how to <op> ...") and distractor operations in a
//! trailing context clause, the shape ambiguous support questions actually
//! take. Labels come from construction; rows are emitted for the candidates
//! the real pipeline finds, so every row is resolvable at training time.

use kanchor_tensor::{fnv1a64, Rng};

use super::kg::{container_pairs, objects_with_ops, op_bases, op_pasts, surface_pool};
use crate::anchoring::{
    extract_with_dict, generate_triple_candidates, tokenize, AnchorConfig, FmmDict,
};
use crate::kg::{EntityId, KnowledgeGraph, RelationKind};
use crate::train::DisambExample;

#[derive(Debug, Clone)]
pub struct DisambGenConfig {
    pub seed: u64,
    pub train_queries: usize,
    pub eval_queries: usize,
}

impl Default for DisambGenConfig {
    fn default() -> Self {
        DisambGenConfig { seed: 7, train_queries: 700, eval_queries: 520 }
    }
}

const OPENERS: &[&str] = &[
    "how to",
    "how can i",
    "how do i",
    "what should i do to",
    "is there a way to",
    "can i",
    "how would i",
    "what is the way to",
    "i want to",
    "i need to",
    "help me",
    "show me how to",
];

const DETERMINERS: &[&str] = &["my", "the", "a", ""];

const FILLERS: &[&str] = &["", "please", "quickly", "on my phone", "somehow", "today", "easily", "again"];

fn context_clause_for(rng: &mut Rng, op: u32) -> String {
    let past = pick_past(rng, op);
    context_clause(rng, past)
}

fn context_clause(rng: &mut Rng, past: &str) -> String {
    match rng.below(8) {
        0 => format!("if i {past} it by mistake"),
        1 => format!("after i {past} it"),
        2 => format!("because someone {past} it"),
        3 => format!("when it got {past} yesterday"),
        4 => format!("since i {past} it last week"),
        5 => format!("that got {past} somehow"),
        6 => format!("when i accidentally {past} it"),
        _ => format!("if she has {past} me"),
    }
}

fn phrase(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

fn pick<'a>(rng: &mut Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.below(pool.len())]
}

fn pick_base(rng: &mut Rng, op: u32) -> &'static str {
    let pool = op_bases(op);
    pool[rng.below(pool.len())]
}

fn pick_past(rng: &mut Rng, op: u32) -> &'static str {
    let pool = op_pasts(op);
    pool[rng.below(pool.len())]
}

enum QueryKind {
    /// True op up front, distractor op of the same object in a trailing
    /// clause, far from the object.
    Distractor,
    /// Container mentioned right before the object; the container also
    /// supports the operation, so only part-of reasoning separates them.
    Container,
    /// Distractor op close behind the object, where span distances tie and
    /// rules have nothing to grab.
    NearTie,
    /// Single unambiguous candidate (train only).
    Single,
    /// Negated intent: the operation is mentioned but denied, so the
    /// candidate must score below threshold (train only).
    Negated,
}

struct Generated {
    query: String,
    true_head: EntityId,
    true_tail: EntityId,
}

fn gen_query(
    kind: &QueryKind,
    rng: &mut Rng,
    objects: &[(u32, Vec<u32>)],
    containers: &[(u32, u32, Vec<u32>)],
) -> Generated {
    match kind {
        QueryKind::Distractor => {
            let (obj, ops) = &objects[rng.below(objects.len())];
            let a = ops[rng.below(ops.len())];
            let mut b = ops[rng.below(ops.len())];
            while b == a {
                b = ops[rng.below(ops.len())];
            }
            let opener = pick(rng, OPENERS);
            let det = pick(rng, DETERMINERS);
            let obj_s = pick(rng, &surface_pool(*obj));
            let clause = context_clause_for(rng, b);
            Generated {
                query: phrase(&[opener, pick_base(rng, a), det, obj_s, &clause]),
                true_head: EntityId(*obj),
                true_tail: EntityId(a),
            }
        }
        QueryKind::Container => {
            let (part, whole, shared) = &containers[rng.below(containers.len())];
            let op = shared[rng.below(shared.len())];
            let opener = pick(rng, OPENERS);
            let whole_s = pick(rng, &surface_pool(*whole));
            let part_s = pick(rng, &surface_pool(*part));
            let filler = pick(rng, FILLERS);
            let op_s = pick_base(rng, op);
            // container before or after the component, half and half
            let query = if rng.below(2) == 0 {
                phrase(&[opener, op_s, whole_s, part_s, filler])
            } else {
                let prep = ["on", "in", "from"][rng.below(3)];
                let det = pick(rng, DETERMINERS);
                phrase(&[opener, op_s, det, part_s, prep, whole_s, filler])
            };
            Generated {
                query,
                true_head: EntityId(*part),
                true_tail: EntityId(op),
            }
        }
        QueryKind::NearTie => {
            let (obj, ops) = &objects[rng.below(objects.len())];
            let a = ops[rng.below(ops.len())];
            let mut b = ops[rng.below(ops.len())];
            while b == a {
                b = ops[rng.below(ops.len())];
            }
            let opener = pick(rng, OPENERS);
            let det = pick(rng, DETERMINERS);
            let obj_s = pick(rng, &surface_pool(*obj));
            let tail = format!("that i {} {}", pick_past(rng, b), pick(rng, FILLERS));
            Generated {
                query: phrase(&[opener, pick_base(rng, a), det, obj_s, tail.trim()]),
                true_head: EntityId(*obj),
                true_tail: EntityId(a),
            }
        }
        QueryKind::Single => {
            let (obj, ops) = &objects[rng.below(objects.len())];
            let a = ops[rng.below(ops.len())];
            let opener = pick(rng, OPENERS);
            let det = pick(rng, DETERMINERS);
            let obj_s = pick(rng, &surface_pool(*obj));
            let filler = pick(rng, FILLERS);
            Generated {
                query: phrase(&[opener, pick_base(rng, a), det, obj_s, filler]),
                true_head: EntityId(*obj),
                true_tail: EntityId(a),
            }
        }
        QueryKind::Negated => {
            let (obj, ops) = &objects[rng.below(objects.len())];
            let a = ops[rng.below(ops.len())];
            let det = pick(rng, DETERMINERS);
            let obj_s = pick(rng, &surface_pool(*obj));
            let a_s = pick_base(rng, a);
            let query = match rng.below(5) {
                0 => phrase(&["i cannot", a_s, det, obj_s, "anymore"]),
                1 => phrase(&["why can i not", a_s, det, obj_s]),
                2 => phrase(&["i could not", a_s, det, obj_s, "yesterday"]),
                3 => phrase(&["it is not possible to", a_s, det, obj_s]),
                _ => phrase(&["unable to", a_s, det, obj_s, "somehow"]),
            };
            // no true triple: every candidate row will carry label 0
            Generated { query, true_head: EntityId(0), true_tail: EntityId(0) }
        }
    }
}

fn rows_for_query(
    gen: &Generated,
    kg: &KnowledgeGraph,
    dict: &FmmDict,
    cfg: &AnchorConfig,
    require_ambiguous: bool,
) -> Option<Vec<DisambExample>> {
    let tokens = tokenize(&gen.query, cfg.mode);
    let mentions = extract_with_dict(&tokens, dict, kg);
    let cands = generate_triple_candidates(&mentions, kg);
    // EntityId(0) marks an all-negative (negated-intent) query
    let negated = gen.true_head == EntityId(0);
    let true_head = kg.normalize_entity(gen.true_head).ok();
    let true_tail = kg.normalize_entity(gen.true_tail).ok();
    let mut rows = Vec::new();
    let mut saw_positive = false;
    for cand in &cands {
        if cand.relation != RelationKind::HasOperation {
            continue;
        }
        let label = !negated
            && Some(cand.head.entity) == true_head
            && Some(cand.tail.entity) == true_tail;
        saw_positive |= label;
        rows.push(DisambExample {
            query: gen.query.clone(),
            head_surface: cand.head.surface.clone(),
            relation: cand.relation,
            tail_surface: cand.tail.surface.clone(),
            label,
        });
    }
    if rows.is_empty() || (!saw_positive && !negated) || (require_ambiguous && rows.len() < 2) {
        return None;
    }
    Some(rows)
}

fn gen_rows(
    kg: &KnowledgeGraph,
    rng: &mut Rng,
    count: usize,
    kinds: &[(QueryKind, f64)],
    require_ambiguous: bool,
    cfg: &AnchorConfig,
) -> Vec<DisambExample> {
    let dict = FmmDict::build(kg, cfg.mode);
    let objects = objects_with_ops(kg, 2);
    let containers = container_pairs(kg);
    let mut out = Vec::new();
    let mut made = 0;
    while made < count {
        let mut r = rng.next_f64();
        let kind = kinds
            .iter()
            .find(|(_, w)| {
                r -= w;
                r < 0.0
            })
            .map(|(k, _)| k)
            .unwrap_or(&kinds[0].0);
        let gen = gen_query(kind, rng, &objects, &containers);
        if let Some(rows) = rows_for_query(&gen, kg, &dict, cfg, require_ambiguous) {
            out.extend(rows);
            made += 1;
        }
    }
    out
}

/// Generate the committed train and eval splits from disjoint query streams.
/// Eval queries follow the ambiguity filter (at least two has_operation
/// candidates); training queries may also be single-candidate.
pub fn gen_disamb(
    kg: &KnowledgeGraph,
    config: &DisambGenConfig,
) -> (Vec<DisambExample>, Vec<DisambExample>) {
    let cfg = AnchorConfig::default();
    let mut train_rng = Rng::new(config.seed ^ fnv1a64(b"disamb-train"));
    let train = gen_rows(
        kg,
        &mut train_rng,
        config.train_queries,
        &[
            (QueryKind::Distractor, 0.28),
            (QueryKind::Container, 0.22),
            (QueryKind::NearTie, 0.22),
            (QueryKind::Single, 0.12),
            (QueryKind::Negated, 0.16),
        ],
        false,
        &cfg,
    );
    let mut eval_rng = Rng::new(config.seed ^ fnv1a64(b"disamb-eval"));
    let eval = gen_rows(
        kg,
        &mut eval_rng,
        config.eval_queries,
        &[
            (QueryKind::Distractor, 0.35),
            (QueryKind::Container, 0.30),
            (QueryKind::NearTie, 0.35),
        ],
        true,
        &cfg,
    );
    (train, eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::toy_kg;

    #[test]
    fn generates_deterministic_labelled_rows() {
        let kg = toy_kg();
        let config = DisambGenConfig { seed: 3, train_queries: 40, eval_queries: 30 };
        let (train_a, eval_a) = gen_disamb(&kg, &config);
        let (train_b, eval_b) = gen_disamb(&kg, &config);
        assert_eq!(train_a, train_b);
        assert_eq!(eval_a, eval_b);
        assert!(train_a.len() >= 40);
        assert!(eval_a.len() >= 60, "ambiguous queries emit >=2 rows");
        assert!(train_a.iter().any(|r| r.label));
        assert!(train_a.iter().any(|r| !r.label));
    }

    #[test]
    fn eval_queries_have_at_least_two_candidates() {
        let kg = toy_kg();
        let config = DisambGenConfig { seed: 5, train_queries: 10, eval_queries: 40 };
        let (_, eval) = gen_disamb(&kg, &config);
        let mut counts = std::collections::BTreeMap::new();
        for row in &eval {
            *counts.entry(row.query.clone()).or_insert(0usize) += 1;
        }
        assert!(counts.values().all(|&c| c >= 2));
    }

    #[test]
    fn every_query_has_at_most_one_positive() {
        // how-to queries carry exactly one true candidate; negated-intent
        // training queries carry none
        let kg = toy_kg();
        let config = DisambGenConfig { seed: 9, train_queries: 60, eval_queries: 20 };
        let (train, eval) = gen_disamb(&kg, &config);
        let mut train_positives = std::collections::BTreeMap::new();
        for row in &train {
            *train_positives.entry(row.query.clone()).or_insert(0usize) += row.label as usize;
        }
        assert!(train_positives.values().all(|&c| c <= 1));
        assert!(train_positives.values().any(|&c| c == 0), "negated queries present");
        let mut eval_positives = std::collections::BTreeMap::new();
        for row in &eval {
            *eval_positives.entry(row.query.clone()).or_insert(0usize) += row.label as usize;
        }
        assert!(eval_positives.values().all(|&c| c == 1), "{eval_positives:?}");
    }
}
