//! Domain knowledge graph: entities with surface aliases, four typed
//! relations, triples, and the derived indexes the anchoring pipeline
//! queries (alias lookup, synonym closures, part-of reachability).

mod bootstrap;
mod load;

pub use bootstrap::{bootstrap_triples, Pattern};
pub use load::{load_kg, save_kg};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::KgError;

/// Identifier of an entity as given in the entity file.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four relation types the graph stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    HasOperation,
    ComponentOf,
    Synonym,
    HypernymHyponym,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::HasOperation,
        RelationKind::ComponentOf,
        RelationKind::Synonym,
        RelationKind::HypernymHyponym,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RelationKind::HasOperation => "has_operation",
            RelationKind::ComponentOf => "component_of",
            RelationKind::Synonym => "synonym",
            RelationKind::HypernymHyponym => "hypernym_hyponym",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "has_operation" => Ok(RelationKind::HasOperation),
            "component_of" => Ok(RelationKind::ComponentOf),
            "synonym" => Ok(RelationKind::Synonym),
            "hypernym_hyponym" => Ok(RelationKind::HypernymHyponym),
            other => Err(format!(
                "unknown relation \"{other}\" (expected has_operation, component_of, synonym or hypernym_hyponym)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub entity_type: String,
}

impl Entity {
    pub fn new(id: u32, name: &str, aliases: &[&str], entity_type: &str) -> Self {
        let mut all: Vec<String> = vec![name.to_string()];
        for a in aliases {
            if !all.iter().any(|x| x == a) {
                all.push(a.to_string());
            }
        }
        Entity {
            id: EntityId(id),
            canonical_name: name.to_string(),
            aliases: all,
            entity_type: entity_type.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationKind,
    pub tail: EntityId,
    pub confidence: f64,
}

impl Triple {
    pub fn new(head: u32, relation: RelationKind, tail: u32) -> Self {
        Triple {
            head: EntityId(head),
            relation,
            tail: EntityId(tail),
            confidence: 1.0,
        }
    }

    pub fn key(&self) -> (EntityId, RelationKind, EntityId) {
        (self.head, self.relation, self.tail)
    }
}

/// Fully indexed, immutable-after-construction knowledge graph. Safe to
/// share across threads once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    /// Canonically sorted by (head, relation, tail).
    triples: Vec<Triple>,
    /// Case-folded surface string -> owning entity.
    alias_index: HashMap<String, EntityId>,
    /// Synonym-closure representative (smallest id in the closure).
    synonym_rep: BTreeMap<EntityId, EntityId>,
    /// component_of edges between closure representatives: part -> whole.
    component_adjacency: BTreeMap<EntityId, BTreeSet<EntityId>>,
    /// Triple set with head and tail normalized, for candidate checks.
    normalized_triples: BTreeSet<(EntityId, RelationKind, EntityId)>,
}

/// Per-relation counts plus entity totals, serialized by `build-kg`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KgStats {
    pub entities: usize,
    pub normalized_entities: usize,
    pub triples: usize,
    pub relations: BTreeMap<String, usize>,
}

impl KnowledgeGraph {
    /// Index a graph from in-memory parts; line numbers in errors are the
    /// 1-based positions within each slice.
    pub fn from_parts(entities: Vec<Entity>, triples: Vec<Triple>) -> Result<Self, KgError> {
        let ents = entities.into_iter().enumerate().map(|(i, e)| (e, i + 1)).collect();
        let tris = triples.into_iter().enumerate().map(|(i, t)| (t, i + 1)).collect();
        Self::index("<memory:entities>", ents, "<memory:triples>", tris)
    }

    pub(crate) fn index(
        entities_file: &str,
        entities: Vec<(Entity, usize)>,
        triples_file: &str,
        triples: Vec<(Triple, usize)>,
    ) -> Result<Self, KgError> {
        let mut entity_map: BTreeMap<EntityId, Entity> = BTreeMap::new();
        let mut entity_line: BTreeMap<EntityId, usize> = BTreeMap::new();
        for (mut entity, line) in entities {
            if entity.canonical_name.is_empty() {
                return Err(KgError::EmptyName {
                    file: entities_file.to_string(),
                    line,
                    id: entity.id.0,
                });
            }
            if entity_map.contains_key(&entity.id) {
                return Err(KgError::DuplicateEntityId {
                    file: entities_file.to_string(),
                    line,
                    id: entity.id.0,
                });
            }
            // canonical name always belongs to the alias list
            if !entity.aliases.iter().any(|a| *a == entity.canonical_name) {
                entity.aliases.insert(0, entity.canonical_name.clone());
            }
            entity_line.insert(entity.id, line);
            entity_map.insert(entity.id, entity);
        }

        let mut alias_index: HashMap<String, EntityId> = HashMap::new();
        for (id, entity) in &entity_map {
            for alias in &entity.aliases {
                let key = alias.to_lowercase();
                match alias_index.get(&key) {
                    None => {
                        alias_index.insert(key, *id);
                    }
                    Some(&owner) if owner == *id => {}
                    Some(&owner) => {
                        return Err(KgError::AliasConflict {
                            file: entities_file.to_string(),
                            line: entity_line[id],
                            alias: alias.clone(),
                            first: owner.0,
                            second: id.0,
                        });
                    }
                }
            }
        }

        let mut seen: BTreeSet<(EntityId, RelationKind, EntityId)> = BTreeSet::new();
        for (triple, line) in &triples {
            for end in [triple.head, triple.tail] {
                if !entity_map.contains_key(&end) {
                    return Err(KgError::UnknownEntity {
                        file: triples_file.to_string(),
                        line: *line,
                        id: end.0,
                    });
                }
            }
            if !(0.0..=1.0).contains(&triple.confidence) {
                return Err(KgError::BadConfidence {
                    file: triples_file.to_string(),
                    line: *line,
                    value: triple.confidence,
                });
            }
            if !seen.insert(triple.key()) {
                return Err(KgError::DuplicateTriple {
                    file: triples_file.to_string(),
                    line: *line,
                    head: triple.head.0,
                    relation: triple.relation.to_string(),
                    tail: triple.tail.0,
                });
            }
        }

        let synonym_rep = synonym_closures(&entity_map, &triples);

        // component_of edges over closure representatives
        let mut component_adjacency: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
        for (triple, _) in &triples {
            if triple.relation == RelationKind::ComponentOf {
                let from = synonym_rep[&triple.head];
                let to = synonym_rep[&triple.tail];
                component_adjacency.entry(from).or_default().insert(to);
            }
        }
        if let Some((head, tail)) = find_component_cycle_edge(&component_adjacency) {
            let line = triples
                .iter()
                .find(|(t, _)| {
                    t.relation == RelationKind::ComponentOf
                        && synonym_rep[&t.head] == head
                        && synonym_rep[&t.tail] == tail
                })
                .map(|(_, l)| *l)
                .unwrap_or(0);
            return Err(KgError::ComponentCycle {
                file: triples_file.to_string(),
                line,
                head: head.0,
                tail: tail.0,
            });
        }

        let normalized_triples = triples
            .iter()
            .map(|(t, _)| (synonym_rep[&t.head], t.relation, synonym_rep[&t.tail]))
            .collect();

        let mut sorted_triples: Vec<Triple> = triples.into_iter().map(|(t, _)| t).collect();
        sorted_triples.sort_by_key(Triple::key);

        Ok(KnowledgeGraph {
            entities: entity_map,
            triples: sorted_triples,
            alias_index,
            synonym_rep,
            component_adjacency,
            normalized_triples,
        })
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: EntityId) -> Result<&Entity, KgError> {
        self.entities.get(&id).ok_or(KgError::UnknownId(id.0))
    }

    pub fn contains_entity(&self, id: EntityId) -> bool {
        self.entities.contains_key(&id)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Exact, case-folded alias lookup.
    pub fn resolve_alias(&self, surface: &str) -> Option<EntityId> {
        self.alias_index.get(&surface.to_lowercase()).copied()
    }

    /// Synonym-closure representative: the smallest entity id reachable over
    /// synonym edges. Idempotent.
    pub fn normalize_entity(&self, id: EntityId) -> Result<EntityId, KgError> {
        self.synonym_rep
            .get(&id)
            .copied()
            .ok_or(KgError::UnknownId(id.0))
    }

    /// Transitive closure over component_of edges starting from the entity's
    /// closure representative, excluding the start itself. Results are
    /// closure representatives.
    pub fn component_ancestors(&self, id: EntityId) -> Result<BTreeSet<EntityId>, KgError> {
        let start = self.normalize_entity(id)?;
        let mut out = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if let Some(next) = self.component_adjacency.get(&node) {
                for &parent in next {
                    if parent != start && out.insert(parent) {
                        queue.push_back(parent);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Does the graph contain (head, relation, tail) up to synonym
    /// normalization of both endpoints?
    pub fn has_triple_normalized(
        &self,
        head: EntityId,
        relation: RelationKind,
        tail: EntityId,
    ) -> bool {
        match (self.synonym_rep.get(&head), self.synonym_rep.get(&tail)) {
            (Some(&h), Some(&t)) => self.normalized_triples.contains(&(h, relation, t)),
            _ => false,
        }
    }

    pub fn stats(&self) -> KgStats {
        let reps: BTreeSet<EntityId> = self.synonym_rep.values().copied().collect();
        let mut relations: BTreeMap<String, usize> = BTreeMap::new();
        for kind in RelationKind::ALL {
            relations.insert(kind.to_string(), 0);
        }
        for t in &self.triples {
            *relations.entry(t.relation.to_string()).or_default() += 1;
        }
        KgStats {
            entities: self.entities.len(),
            normalized_entities: reps.len(),
            triples: self.triples.len(),
            relations,
        }
    }
}

/// Union-find over synonym edges; the representative of each closure is its
/// smallest entity id, which makes normalization order-independent.
fn synonym_closures(
    entities: &BTreeMap<EntityId, Entity>,
    triples: &[(Triple, usize)],
) -> BTreeMap<EntityId, EntityId> {
    let ids: Vec<EntityId> = entities.keys().copied().collect();
    let index: BTreeMap<EntityId, usize> = ids.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();

    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for (t, _) in triples {
        if t.relation == RelationKind::Synonym {
            let (a, b) = (index[&t.head], index[&t.tail]);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }

    let mut smallest: BTreeMap<usize, EntityId> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        let entry = smallest.entry(root).or_insert(id);
        if id < *entry {
            *entry = id;
        }
    }
    ids.iter()
        .enumerate()
        .map(|(i, &id)| (id, smallest[&find(&mut parent, i)]))
        .collect()
}

/// Kahn's algorithm; on a cycle, return one edge that lies inside it.
fn find_component_cycle_edge(
    adjacency: &BTreeMap<EntityId, BTreeSet<EntityId>>,
) -> Option<(EntityId, EntityId)> {
    let mut indegree: BTreeMap<EntityId, usize> = BTreeMap::new();
    for (from, tos) in adjacency {
        indegree.entry(*from).or_insert(0);
        for to in tos {
            *indegree.entry(*to).or_insert(0) += 1;
        }
    }
    let mut queue: VecDeque<EntityId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut remaining = indegree.len();
    while let Some(node) = queue.pop_front() {
        remaining -= 1;
        if let Some(tos) = adjacency.get(&node) {
            for to in tos {
                let d = indegree.get_mut(to).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push_back(*to);
                }
            }
        }
    }
    if remaining == 0 {
        return None;
    }
    // nodes left with positive indegree include cycle members plus their
    // downstream successors; trim until every survivor has an outgoing edge
    // back into the set, which leaves exactly the cyclic core
    let mut core: BTreeSet<EntityId> = indegree
        .iter()
        .filter(|(_, &d)| d > 0)
        .map(|(&n, _)| n)
        .collect();
    loop {
        let removable: Vec<EntityId> = core
            .iter()
            .filter(|n| {
                adjacency
                    .get(n)
                    .is_none_or(|tos| tos.iter().all(|t| !core.contains(t)))
            })
            .copied()
            .collect();
        if removable.is_empty() {
            break;
        }
        for node in removable {
            core.remove(&node);
        }
    }
    // every core node keeps an outgoing core edge, so this walk must revisit
    let start = *core.iter().next()?;
    let mut seen = BTreeSet::new();
    let mut node = start;
    loop {
        seen.insert(node);
        let next = adjacency
            .get(&node)?
            .iter()
            .find(|n| core.contains(n))
            .copied()?;
        if seen.contains(&next) {
            return Some((node, next));
        }
        node = next;
    }
}
