//! Property tests for the graph store against independent oracles.

use std::collections::{BTreeMap, BTreeSet};

use kanchor::kg::{load_kg, save_kg, Entity, EntityId, KnowledgeGraph, RelationKind, Triple};
use kanchor_tensor::Rng;

fn random_entities(n: usize) -> Vec<Entity> {
    (0..n as u32)
        .map(|i| Entity::new(i + 1, &format!("e{}", i + 1), &[], "t"))
        .collect()
}

/// Union-find oracle with explicit smallest-member representative.
fn closure_oracle(n: usize, edges: &[(u32, u32)]) -> BTreeMap<u32, u32> {
    let mut groups: Vec<BTreeSet<u32>> = (1..=n as u32).map(|i| BTreeSet::from([i])).collect();
    for &(a, b) in edges {
        let ga = groups.iter().position(|g| g.contains(&a)).unwrap();
        let gb = groups.iter().position(|g| g.contains(&b)).unwrap();
        if ga != gb {
            let merged: BTreeSet<u32> = groups[ga].union(&groups[gb]).copied().collect();
            let (hi, lo) = (ga.max(gb), ga.min(gb));
            groups.remove(hi);
            groups.remove(lo);
            groups.push(merged);
        }
    }
    let mut rep = BTreeMap::new();
    for group in groups {
        let min = *group.iter().next().unwrap();
        for member in group {
            rep.insert(member, min);
        }
    }
    rep
}

#[test]
fn normalization_matches_union_find_oracle() {
    let mut rng = Rng::new(101);
    for trial in 0..50 {
        let n = 3 + rng.below(15);
        let n_edges = rng.below(n * 2);
        let edges: Vec<(u32, u32)> = (0..n_edges)
            .map(|_| {
                (
                    rng.below(n) as u32 + 1,
                    rng.below(n) as u32 + 1,
                )
            })
            .filter(|(a, b)| a != b)
            .collect();
        let mut seen = BTreeSet::new();
        let triples: Vec<Triple> = edges
            .iter()
            .filter(|e| seen.insert(**e))
            .map(|&(a, b)| Triple::new(a, RelationKind::Synonym, b))
            .collect();
        let deduped: Vec<(u32, u32)> = triples.iter().map(|t| (t.head.0, t.tail.0)).collect();
        let kg = KnowledgeGraph::from_parts(random_entities(n), triples).unwrap();
        let oracle = closure_oracle(n, &deduped);
        for i in 1..=n as u32 {
            let got = kg.normalize_entity(EntityId(i)).unwrap();
            assert_eq!(got.0, oracle[&i], "trial {trial}, entity {i}");
            // idempotence
            assert_eq!(kg.normalize_entity(got).unwrap(), got);
        }
        // constant on each closure
        for &(a, b) in &deduped {
            assert_eq!(
                kg.normalize_entity(EntityId(a)).unwrap(),
                kg.normalize_entity(EntityId(b)).unwrap()
            );
        }
    }
}

/// Reachability by boolean matrix powers, the slow way.
fn reachability_oracle(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n + 1]; n + 1];
    for &(a, b) in edges {
        reach[a as usize][b as usize] = true;
    }
    // repeated squaring-style closure: iterate until fixpoint
    loop {
        let mut changed = false;
        for i in 1..=n {
            for j in 1..=n {
                if !reach[i][j] {
                    let via = (1..=n).any(|k| reach[i][k] && reach[k][j]);
                    if via {
                        reach[i][j] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return reach;
        }
    }
}

#[test]
fn ancestors_match_matrix_power_oracle() {
    let mut rng = Rng::new(77);
    let mut tested = 0;
    while tested < 40 {
        let n = 3 + rng.below(17); // <= 20 nodes
        let n_edges = rng.below(n * 2);
        let mut seen = BTreeSet::new();
        let edges: Vec<(u32, u32)> = (0..n_edges)
            .map(|_| (rng.below(n) as u32 + 1, rng.below(n) as u32 + 1))
            .filter(|(a, b)| a != b && seen.insert((*a, *b)))
            .collect();
        let triples: Vec<Triple> = edges
            .iter()
            .map(|&(a, b)| Triple::new(a, RelationKind::ComponentOf, b))
            .collect();
        // only acyclic inputs load; cyclic ones exercise the rejection path
        match KnowledgeGraph::from_parts(random_entities(n), triples) {
            Ok(kg) => {
                let reach = reachability_oracle(n, &edges);
                for i in 1..=n as u32 {
                    let got = kg.component_ancestors(EntityId(i)).unwrap();
                    let expect: BTreeSet<EntityId> = (1..=n as u32)
                        .filter(|&j| reach[i as usize][j as usize] && j != i)
                        .map(EntityId)
                        .collect();
                    assert_eq!(got, expect, "node {i}, edges {edges:?}");
                }
                tested += 1;
            }
            Err(err) => {
                assert!(
                    matches!(err, kanchor::KgError::ComponentCycle { .. }),
                    "only cycles may fail: {err}"
                );
                // the oracle must agree something is cyclic
                let reach = reachability_oracle(n, &edges);
                assert!(
                    (1..=n).any(|i| reach[i][i]),
                    "load rejected an acyclic graph: {edges:?}"
                );
            }
        }
    }
}

#[test]
fn injected_cycles_are_always_rejected() {
    let mut rng = Rng::new(31);
    for _ in 0..30 {
        let n = 4 + rng.below(12);
        // random tree edges (acyclic) plus one injected cycle
        let mut edges: Vec<(u32, u32)> = (2..=n as u32)
            .map(|i| (i, rng.below((i - 1) as usize) as u32 + 1))
            .collect();
        // build a directed cycle among 3 random distinct nodes
        let mut cyc: Vec<u32> = (1..=n as u32).collect();
        rng.shuffle(&mut cyc);
        let (a, b, c) = (cyc[0], cyc[1], cyc[2]);
        edges.push((a, b));
        edges.push((b, c));
        edges.push((c, a));
        let mut seen = BTreeSet::new();
        let triples: Vec<Triple> = edges
            .iter()
            .filter(|e| seen.insert(**e))
            .map(|&(x, y)| Triple::new(x, RelationKind::ComponentOf, y))
            .collect();
        let err = KnowledgeGraph::from_parts(random_entities(n), triples).unwrap_err();
        assert!(matches!(err, kanchor::KgError::ComponentCycle { .. }), "{err}");
    }
}

#[test]
fn random_graphs_round_trip_through_files() {
    let mut rng = Rng::new(5);
    let dir = std::env::temp_dir().join(format!("kanchor-kg-rt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for trial in 0..10 {
        let n = 4 + rng.below(10);
        let mut entities = random_entities(n);
        for (i, entity) in entities.iter_mut().enumerate() {
            if rng.below(2) == 0 {
                entity.aliases.push(format!("alias{i}x"));
            }
        }
        let mut triples = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..rng.below(2 * n) {
            let head = rng.below(n) as u32 + 1;
            let tail = rng.below(n) as u32 + 1;
            if head == tail {
                continue;
            }
            let relation = [RelationKind::HasOperation, RelationKind::Synonym][rng.below(2)];
            if seen.insert((head, relation, tail)) {
                triples.push(Triple {
                    head: EntityId(head),
                    relation,
                    tail: EntityId(tail),
                    confidence: (rng.below(10) as f64 + 1.0) / 10.0,
                });
            }
        }
        let kg = KnowledgeGraph::from_parts(entities, triples).unwrap();
        let e_path = dir.join(format!("e{trial}.jsonl"));
        let t_path = dir.join(format!("t{trial}.jsonl"));
        save_kg(&kg, &e_path, &t_path).unwrap();
        let reloaded = load_kg(&e_path, &t_path).unwrap();
        assert_eq!(kg, reloaded, "trial {trial}");
    }
    std::fs::remove_dir_all(dir).ok();
}
