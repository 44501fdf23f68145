//! Synthetic matching corpus with known channel structure. Labels follow
//! the anchor semantics: same normalized (object, operation) core means
//! similar, same object with a different operation means related, different
//! objects mean unrelated. Four case families control which channel can see
//! the signal:
//!
//! - plain: shared surfaces, every channel informative;
//! - synonym-swapped: sides use different surfaces of the same normalized
//!   entities, blinding the token channel;
//! - order-flipped: both operations appear on both sides with the request
//!   frame deciding, so token and entity bags tie and only triples separate;
//! - entity-only: no operations at all, so the triple channel is empty and
//!   the entity channel carries the swap signal.

use kanchor_tensor::{fnv1a64, Rng};

use super::kg::{
    container_pairs, objects_with_ops, op_bases, op_pasts, surface_pool, SYNONYM_SWAPS,
};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::train::{MatchExample, MatchLabel};

#[derive(Debug, Clone)]
pub struct MatchGenConfig {
    pub seed: u64,
    /// Number of case instances; each emits two or three labelled pairs.
    pub cases: usize,
}

impl Default for MatchGenConfig {
    fn default() -> Self {
        MatchGenConfig { seed: 11, cases: 820 }
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
const DETERMINERS: &[&str] = &["my", "the", "a", "this", ""];
const FILLERS: &[&str] = &["", "please", "quickly", "on my phone", "right now", "today", "for good", "easily", "again", "on android"];
const ENTITY_FRAMES: &[&str] = &[
    "problem with {} today",
    "questions about {}",
    "{} is not working",
    "help with {} settings",
    "trouble with {}",
    "where is {}",
    "{} looks broken",
    "need support for {}",
];

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

fn phrase(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

fn context_clause_for(rng: &mut Rng, op: u32) -> String {
    let past = pick_past(rng, op);
    context_clause(rng, past)
}

fn context_clause(rng: &mut Rng, past: &str) -> String {
    match rng.below(8) {
        0 => format!("after i {past} it"),
        1 => format!("if i {past} it by mistake"),
        2 => format!("because it was {past} yesterday"),
        3 => format!("since i {past} it last week"),
        4 => format!("that got {past} somehow"),
        5 => format!("after it was {past} by my kid"),
        6 => format!("when i accidentally {past} it"),
        _ => format!("that i {past} before"),
    }
}

/// Surfaces of an entity including its synonym partner's surfaces.
fn swapped_pool(id: u32) -> Vec<&'static str> {
    let mut pool = surface_pool(id);
    for (a, b) in SYNONYM_SWAPS {
        if *a == id {
            pool.extend(surface_pool(*b));
        } else if *b == id {
            pool.extend(surface_pool(*a));
        }
    }
    pool
}

fn has_swap(id: u32) -> bool {
    SYNONYM_SWAPS.iter().any(|(a, b)| *a == id || *b == id)
}

struct World {
    objects: Vec<(u32, Vec<u32>)>,
    containers: Vec<(u32, u32, Vec<u32>)>,
    /// Objects usable by the synonym-swap family: the object or at least one
    /// of its operations has a synonym partner.
    swappable: Vec<(u32, Vec<u32>)>,
}

impl World {
    fn build(kg: &KnowledgeGraph) -> World {
        let objects = objects_with_ops(kg, 2);
        let swappable = objects
            .iter()
            .filter(|(obj, ops)| has_swap(*obj) || ops.iter().any(|op| has_swap(*op)))
            .cloned()
            .collect();
        World { objects, containers: container_pairs(kg), swappable }
    }

    fn other_object(&self, kg: &KnowledgeGraph, not: u32, rng: &mut Rng) -> (u32, Vec<u32>) {
        let not_rep = kg.normalize_entity(EntityId(not)).expect("synth entity");
        loop {
            let (obj, ops) = &self.objects[rng.below(self.objects.len())];
            if kg.normalize_entity(EntityId(*obj)).expect("synth entity") != not_rep {
                return (*obj, ops.clone());
            }
        }
    }
}

fn request(rng: &mut Rng, op: u32, obj_surface: &str, filler: bool) -> String {
    let opener = pick(rng, OPENERS);
    let det = pick(rng, DETERMINERS);
    let tail = if filler { pick(rng, FILLERS) } else { "" };
    phrase(&[opener, pick_base(rng, op), det, obj_surface, tail])
}

fn two_ops(rng: &mut Rng, ops: &[u32]) -> (u32, u32) {
    let a = ops[rng.below(ops.len())];
    let mut b = ops[rng.below(ops.len())];
    while b == a {
        b = ops[rng.below(ops.len())];
    }
    (a, b)
}

fn push(out: &mut Vec<MatchExample>, query: &str, title: String, label: MatchLabel) {
    out.push(MatchExample { query: query.to_string(), title, label });
}

fn gen_plain(world: &World, kg: &KnowledgeGraph, rng: &mut Rng, out: &mut Vec<MatchExample>) {
    let (obj, ops) = &world.objects[rng.below(world.objects.len())];
    let (a, b) = two_ops(rng, ops);
    let s_obj = pick(rng, &surface_pool(*obj));
    // a third of the plain cases lead with a container mention on the query
    // side, the shape the part-of gate resolves
    let query = if rng.below(3) == 0 {
        if let Some((part, whole, shared)) = world
            .containers
            .iter()
            .find(|(p, _, shared)| p == obj && shared.contains(&a))
            .or(None)
        {
            let whole_s = pick(rng, &surface_pool(*whole));
            let part_s = pick(rng, &surface_pool(*part));
            let shared_op = shared[rng.below(shared.len())];
            let clause = context_clause_for(rng, shared_op);
            let opener = pick(rng, OPENERS);
            phrase(&[opener, pick_base(rng, a), whole_s, part_s, &clause])
        } else {
            request(rng, a, s_obj, true)
        }
    } else {
        request(rng, a, s_obj, true)
    };
    push(out, &query, request(rng, a, s_obj, true), MatchLabel::Similar);
    push(out, &query, request(rng, b, s_obj, true), MatchLabel::Related);
    let (o2, ops2) = world.other_object(kg, *obj, rng);
    let s2 = pick(rng, &surface_pool(o2));
    let c = ops2[rng.below(ops2.len())];
    push(out, &query, request(rng, c, s2, true), MatchLabel::Unrelated);
}

fn gen_synonym_swapped(
    world: &World,
    kg: &KnowledgeGraph,
    rng: &mut Rng,
    out: &mut Vec<MatchExample>,
) {
    let (obj, ops) = &world.swappable[rng.below(world.swappable.len())];
    // prefer an operation with a synonym partner so the op surface can swap
    let swappable_ops: Vec<u32> = ops.iter().copied().filter(|op| has_swap(*op)).collect();
    let a = if swappable_ops.is_empty() {
        ops[rng.below(ops.len())]
    } else {
        swappable_ops[rng.below(swappable_ops.len())]
    };
    let mut b = ops[rng.below(ops.len())];
    while b == a {
        b = ops[rng.below(ops.len())];
    }
    let q_obj = pick(rng, &swapped_pool(*obj));
    let t_obj = pick(rng, &swapped_pool(*obj));
    let q_op = pick(rng, &swapped_pool(a));
    let t_op = pick(rng, &swapped_pool(a));

    let mk = |rng: &mut Rng, op_s: &str, obj_s: &str| {
        let opener = pick(rng, OPENERS);
        let det = pick(rng, DETERMINERS);
        let filler = pick(rng, FILLERS);
        phrase(&[opener, op_s, det, obj_s, filler])
    };
    let query = mk(rng, q_op, q_obj);
    push(out, &query, mk(rng, t_op, t_obj), MatchLabel::Similar);
    let rel_obj = pick(rng, &swapped_pool(*obj));
    let b_surface = pick_base(rng, b);
    push(out, &query, mk(rng, b_surface, rel_obj), MatchLabel::Related);
    let (o2, ops2) = world.other_object(kg, *obj, rng);
    let s2 = pick(rng, &swapped_pool(o2));
    let c = ops2[rng.below(ops2.len())];
    let c_surface = pick(rng, &swapped_pool(c));
    push(out, &query, mk(rng, c_surface, s2), MatchLabel::Unrelated);
}

fn gen_order_flipped(
    world: &World,
    kg: &KnowledgeGraph,
    rng: &mut Rng,
    out: &mut Vec<MatchExample>,
) {
    let (obj, ops) = &world.objects[rng.below(world.objects.len())];
    let (a, b) = two_ops(rng, ops);
    let s_obj = pick(rng, &surface_pool(*obj));
    let mk = |rng: &mut Rng, front: u32, back: u32| {
        let opener = pick(rng, OPENERS);
        let det = pick(rng, DETERMINERS);
        let clause = context_clause_for(rng, back);
        phrase(&[opener, pick_base(rng, front), det, s_obj, &clause])
    };
    let query = mk(rng, a, b);
    push(out, &query, mk(rng, a, b), MatchLabel::Similar);
    push(out, &query, mk(rng, b, a), MatchLabel::Related);
    let (o2, ops2) = world.other_object(kg, *obj, rng);
    let (c, d) = two_ops(rng, &ops2);
    let s2 = pick(rng, &surface_pool(o2));
    let opener = pick(rng, OPENERS);
    let det = pick(rng, DETERMINERS);
    let clause = context_clause_for(rng, d);
    push(
        out,
        &query,
        phrase(&[opener, pick_base(rng, c), det, s2, &clause]),
        MatchLabel::Unrelated,
    );
}

/// The query names the container right before its component; the true core
/// sits on the component, and an unrelated title re-uses the very same
/// operation on the container. Tokens and entities overlap heavily on the
/// wrong side, so the part-of gate inside the triple channel is the only
/// clean separator.
fn gen_container_contrast(
    world: &World,
    kg: &KnowledgeGraph,
    rng: &mut Rng,
    out: &mut Vec<MatchExample>,
) {
    // avoid the app-level container: it heads so many part-of edges that its
    // surface alone would leak the label to the token channel
    let deep: Vec<&(u32, u32, Vec<u32>)> = world
        .containers
        .iter()
        .filter(|(_, whole, _)| *whole != 1)
        .collect();
    let (part, whole, shared) = deep[rng.below(deep.len())];
    let a = shared[rng.below(shared.len())];
    // two in five instances carry the core on the container itself, so a
    // whole-headed title is not a label giveaway
    if rng.below(5) < 2 {
        let whole_ops: Vec<u32> = world
            .objects
            .iter()
            .find(|(o, _)| o == whole)
            .map(|(_, ops)| ops.clone())
            .unwrap_or_default();
        let whole_s = pick(rng, &surface_pool(*whole));
        let query = request(rng, a, whole_s, true);
        let whole_s2 = pick(rng, &surface_pool(*whole));
        push(out, &query, request(rng, a, whole_s2, true), MatchLabel::Similar);
        if let Some(&b) = whole_ops.iter().find(|&&op| op != a) {
            let whole_s3 = pick(rng, &surface_pool(*whole));
            push(out, &query, request(rng, b, whole_s3, true), MatchLabel::Related);
        }
        let part_s = pick(rng, &surface_pool(*part));
        push(out, &query, request(rng, a, part_s, true), MatchLabel::Unrelated);
        return;
    }
    let part_ops: Vec<u32> = world
        .objects
        .iter()
        .find(|(o, _)| o == part)
        .map(|(_, ops)| ops.clone())
        .unwrap_or_default();
    let whole_s = pick(rng, &surface_pool(*whole));
    let part_s = pick(rng, &surface_pool(*part));
    let opener = pick(rng, OPENERS);
    let filler = pick(rng, FILLERS);
    let a_surface = pick_base(rng, a);
    // both compound orders, so mention position alone cannot reveal which
    // side of the part-of edge carries the core
    let query = if rng.below(2) == 0 {
        phrase(&[opener, a_surface, whole_s, part_s, filler])
    } else {
        let prep = ["on", "in", "from"][rng.below(3)];
        let det = pick(rng, DETERMINERS);
        phrase(&[opener, a_surface, det, part_s, prep, whole_s, filler])
    };

    let part_s2 = pick(rng, &surface_pool(*part));
    push(out, &query, request(rng, a, part_s2, true), MatchLabel::Similar);
    if let Some(&b) = part_ops.iter().find(|&&op| op != a) {
        let part_s3 = pick(rng, &surface_pool(*part));
        push(out, &query, request(rng, b, part_s3, true), MatchLabel::Related);
    }
    // half the unrelated titles keep the container surface in play so the
    // mere presence of a whole-object token stays uninformative
    if rng.below(2) == 0 {
        let whole_s2 = pick(rng, &surface_pool(*whole));
        push(out, &query, request(rng, a, whole_s2, true), MatchLabel::Unrelated);
    } else {
        let (o2, ops2) = world.other_object(kg, *part, rng);
        let c = ops2[rng.below(ops2.len())];
        let s2 = pick(rng, &surface_pool(o2));
        push(out, &query, request(rng, c, s2, true), MatchLabel::Unrelated);
    }
}

fn gen_entity_only(
    world: &World,
    kg: &KnowledgeGraph,
    rng: &mut Rng,
    out: &mut Vec<MatchExample>,
) {
    let swap_objects: Vec<u32> = world
        .objects
        .iter()
        .map(|(o, _)| *o)
        .filter(|o| has_swap(*o))
        .collect();
    let obj = if swap_objects.is_empty() || rng.below(3) == 0 {
        world.objects[rng.below(world.objects.len())].0
    } else {
        swap_objects[rng.below(swap_objects.len())]
    };
    let mk = |rng: &mut Rng, surface: &str| {
        let frame = pick(rng, ENTITY_FRAMES);
        let det = pick(rng, DETERMINERS);
        let filled = phrase(&[det, surface]);
        frame.replace("{}", &filled)
    };
    let q_surface = pick(rng, &swapped_pool(obj));
    let query = mk(rng, q_surface);
    let sim_surface = pick(rng, &swapped_pool(obj));
    let sim = mk(rng, sim_surface);
    push(out, &query, sim, MatchLabel::Similar);
    let (o2, _) = world.other_object(kg, obj, rng);
    let unr_surface = pick(rng, &swapped_pool(o2));
    let unr = mk(rng, unr_surface);
    push(out, &query, unr, MatchLabel::Unrelated);
}

const NEGATED_FRAMES: &[&str] = &[
    "i cannot {op} {rest} anymore",
    "why can i not {op} {rest}",
    "i could not {op} {rest} yesterday",
    "it is not possible to {op} {rest}",
    "unable to {op} {rest} somehow",
];

/// How-to queries paired against trouble reports that mention the same
/// object and operation but deny the operation. Entity sequences on both
/// sides are identical, so only the triple channel (whose anchors vanish on
/// the negated side) can tell the intents apart.
fn gen_negated_intent(
    world: &World,
    rng: &mut Rng,
    out: &mut Vec<MatchExample>,
) {
    let (obj, ops) = &world.objects[rng.below(world.objects.len())];
    let (a, b) = two_ops(rng, ops);
    let s_obj = pick(rng, &surface_pool(*obj));
    let query = request(rng, a, s_obj, true);
    push(out, &query, request(rng, a, s_obj, true), MatchLabel::Similar);
    push(out, &query, request(rng, b, s_obj, true), MatchLabel::Related);
    let negated = {
        let frame = pick(rng, NEGATED_FRAMES);
        let det = pick(rng, DETERMINERS);
        let a_s = pick_base(rng, a);
        let rest = phrase(&[det, s_obj]);
        frame.replace("{op}", a_s).replace("{rest}", &rest)
    };
    push(out, &query, negated, MatchLabel::Unrelated);
}

/// Single-family generation, used by diagnostics and calibration.
pub fn gen_matching_family(
    kg: &KnowledgeGraph,
    seed: u64,
    cases: usize,
    family: &str,
) -> Vec<MatchExample> {
    let world = World::build(kg);
    let mut rng = Rng::new(seed ^ fnv1a64(b"matching-family"));
    let mut out = Vec::new();
    for _ in 0..cases {
        match family {
            "plain" => gen_plain(&world, kg, &mut rng, &mut out),
            "synonym" => gen_synonym_swapped(&world, kg, &mut rng, &mut out),
            "order" => gen_order_flipped(&world, kg, &mut rng, &mut out),
            "container" => gen_container_contrast(&world, kg, &mut rng, &mut out),
            "entity" => gen_entity_only(&world, kg, &mut rng, &mut out),
            "negated" => gen_negated_intent(&world, &mut rng, &mut out),
            other => panic!("unknown family {other}"),
        }
    }
    out
}

/// Generate the committed matching dataset. Case families are interleaved
/// so any prefix stays balanced across labels and families.
pub fn gen_matching(kg: &KnowledgeGraph, config: &MatchGenConfig) -> Vec<MatchExample> {
    let world = World::build(kg);
    let mut rng = Rng::new(config.seed ^ fnv1a64(b"matching"));
    let mut out = Vec::with_capacity(config.cases * 3);
    for _ in 0..config.cases {
        let r = rng.next_f64();
        if r < 0.24 {
            gen_plain(&world, kg, &mut rng, &mut out);
        } else if r < 0.40 {
            gen_synonym_swapped(&world, kg, &mut rng, &mut out);
        } else if r < 0.70 {
            gen_order_flipped(&world, kg, &mut rng, &mut out);
        } else if r < 0.88 {
            gen_container_contrast(&world, kg, &mut rng, &mut out);
        } else if r < 0.99 {
            gen_negated_intent(&world, &mut rng, &mut out);
        } else {
            gen_entity_only(&world, kg, &mut rng, &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::toy_kg;

    #[test]
    fn deterministic_and_label_balanced() {
        let kg = toy_kg();
        let config = MatchGenConfig { seed: 2, cases: 120 };
        let a = gen_matching(&kg, &config);
        let b = gen_matching(&kg, &config);
        assert_eq!(a, b);
        assert!(a.len() >= 280);
        let count = |label: MatchLabel| a.iter().filter(|e| e.label == label).count();
        let (unr, rel, sim) = (
            count(MatchLabel::Unrelated),
            count(MatchLabel::Related),
            count(MatchLabel::Similar),
        );
        assert!(sim >= rel && unr >= rel, "sim {sim} rel {rel} unr {unr}");
        assert!(rel > a.len() / 5, "related underrepresented: {rel}/{}", a.len());
    }

    #[test]
    fn prefix_is_balanced_for_overfit_runs() {
        let kg = toy_kg();
        let config = MatchGenConfig::default();
        let all = gen_matching(&kg, &config);
        let prefix = &all[..200];
        for label in MatchLabel::ALL {
            let n = prefix.iter().filter(|e| e.label == label).count();
            assert!(n >= 30, "label {label} has only {n} of 200");
        }
    }

    #[test]
    fn texts_are_nonempty_and_tab_free() {
        let kg = toy_kg();
        let all = gen_matching(&kg, &MatchGenConfig { seed: 4, cases: 60 });
        for ex in &all {
            assert!(!ex.query.is_empty() && !ex.title.is_empty());
            assert!(!ex.query.contains('\t') && !ex.title.contains('\t'));
            assert!(!ex.query.contains("  "), "double space in {:?}", ex.query);
        }
    }
}
