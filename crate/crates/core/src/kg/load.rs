//! JSONL serialization of the knowledge graph.
//!
//! - entities.jsonl: `{"id": int, "name": str, "aliases": [str], "type": str}`
//! - triples.jsonl: `{"head": int, "relation": str, "tail": int, "confidence": float?}`
//!
//! Unknown fields are rejected; omitted confidence defaults to 1.0.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Entity, EntityId, KnowledgeGraph, RelationKind, Triple};
use crate::error::KgError;

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct EntityRow {
    id: u32,
    name: String,
    aliases: Vec<String>,
    #[serde(rename = "type")]
    entity_type: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TripleRow {
    head: u32,
    relation: RelationKind,
    tail: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(T, usize)>, KgError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| KgError::Io {
        file: file.clone(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: T = serde_json::from_str(line).map_err(|e| KgError::Parse {
            file: file.clone(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        rows.push((row, i + 1));
    }
    Ok(rows)
}

/// Load and fully validate a knowledge graph from its two JSONL files.
pub fn load_kg(entities_path: &Path, triples_path: &Path) -> Result<KnowledgeGraph, KgError> {
    let entity_rows: Vec<(EntityRow, usize)> = read_jsonl(entities_path)?;
    let triple_rows: Vec<(TripleRow, usize)> = read_jsonl(triples_path)?;

    let entities = entity_rows
        .into_iter()
        .map(|(row, line)| {
            (
                Entity {
                    id: EntityId(row.id),
                    canonical_name: row.name,
                    aliases: row.aliases,
                    entity_type: row.entity_type,
                },
                line,
            )
        })
        .collect();
    let triples = triple_rows
        .into_iter()
        .map(|(row, line)| {
            (
                Triple {
                    head: EntityId(row.head),
                    relation: row.relation,
                    tail: EntityId(row.tail),
                    confidence: row.confidence.unwrap_or(1.0),
                },
                line,
            )
        })
        .collect();

    KnowledgeGraph::index(
        &entities_path.display().to_string(),
        entities,
        &triples_path.display().to_string(),
        triples,
    )
}

/// Write a graph back out in canonical order (entities by id, triples by
/// (head, relation, tail), confidence always explicit). Loading the result
/// reproduces an identical graph.
pub fn save_kg(
    kg: &KnowledgeGraph,
    entities_path: &Path,
    triples_path: &Path,
) -> Result<(), KgError> {
    let mut ents = Vec::new();
    for entity in kg.entities() {
        let row = EntityRow {
            id: entity.id.0,
            name: entity.canonical_name.clone(),
            aliases: entity.aliases.clone(),
            entity_type: entity.entity_type.clone(),
        };
        ents.push(serde_json::to_string(&row).expect("entity row serializes"));
    }
    write_lines(entities_path, &ents)?;

    let mut tris = Vec::new();
    for triple in kg.triples() {
        let row = TripleRow {
            head: triple.head.0,
            relation: triple.relation,
            tail: triple.tail.0,
            confidence: Some(triple.confidence),
        };
        tris.push(serde_json::to_string(&row).expect("triple row serializes"));
    }
    write_lines(triples_path, &tris)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), KgError> {
    let wrap = |source| KgError::Io {
        file: path.display().to_string(),
        source,
    };
    let mut out = fs::File::create(path).map_err(wrap)?;
    for line in lines {
        writeln!(out, "{line}").map_err(wrap)?;
    }
    Ok(())
}
