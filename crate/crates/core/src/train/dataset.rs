//! TSV dataset files and the deterministic train/valid/test split.

use std::fs;
use std::io::Write;
use std::path::Path;

use kanchor_tensor::{fnv1a64, Rng};

use super::{DisambExample, MatchExample, MatchLabel};
use crate::error::{DataError, TrainError};
use crate::kg::RelationKind;

/// `query \t title \t label(0/1/2)`, UTF-8, no header.
pub fn load_match_tsv(path: &Path) -> Result<Vec<MatchExample>, DataError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        file: file.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| DataError::Malformed { file: file.clone(), line: i + 1, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let label = match fields[2] {
            "0" => MatchLabel::Unrelated,
            "1" => MatchLabel::Related,
            "2" => MatchLabel::Similar,
            other => return Err(bad(format!("label must be 0, 1 or 2, got \"{other}\""))),
        };
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(bad("query and title must be nonempty".to_string()));
        }
        out.push(MatchExample {
            query: fields[0].to_string(),
            title: fields[1].to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn save_match_tsv(examples: &[MatchExample], path: &Path) -> Result<(), DataError> {
    let wrap = |source| DataError::Io { file: path.display().to_string(), source };
    let mut out = fs::File::create(path).map_err(wrap)?;
    for ex in examples {
        writeln!(out, "{}\t{}\t{}", ex.query, ex.title, ex.label.index()).map_err(wrap)?;
    }
    Ok(())
}

/// `query \t head_surface \t relation \t tail_surface \t label(0/1)`.
pub fn load_disamb_tsv(path: &Path) -> Result<Vec<DisambExample>, DataError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        file: file.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| DataError::Malformed { file: file.clone(), line: i + 1, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 tab-separated fields, got {}", fields.len())));
        }
        let relation: RelationKind = fields[2].parse().map_err(bad)?;
        let label = match fields[4] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("label must be 0 or 1, got \"{other}\""))),
        };
        out.push(DisambExample {
            query: fields[0].to_string(),
            head_surface: fields[1].to_string(),
            relation,
            tail_surface: fields[3].to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn save_disamb_tsv(examples: &[DisambExample], path: &Path) -> Result<(), DataError> {
    let wrap = |source| DataError::Io { file: path.display().to_string(), source };
    let mut out = fs::File::create(path).map_err(wrap)?;
    for ex in examples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            ex.query,
            ex.head_surface,
            ex.relation,
            ex.tail_surface,
            ex.label as u8
        )
        .map_err(wrap)?;
    }
    Ok(())
}

/// Deterministic shuffled split: train gets floor(0.8 n), valid floor(0.1 n),
/// test the remainder.
pub fn split_dataset<T: Clone>(
    examples: &[T],
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), TrainError> {
    let n = examples.len();
    if n < 10 {
        return Err(TrainError::TooFewExamples { need: 10, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(seed ^ fnv1a64(b"dataset-split"));
    rng.shuffle(&mut order);
    let n_train = n * 8 / 10;
    let n_valid = n / 10;
    let pick = |range: std::ops::Range<usize>| -> Vec<T> {
        order[range].iter().map(|&i| examples[i].clone()).collect()
    };
    Ok((
        pick(0..n_train),
        pick(n_train..n_train + n_valid),
        pick(n_train + n_valid..n),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_100_is_80_10_10() {
        let data: Vec<usize> = (0..100).collect();
        let (tr, va, te) = split_dataset(&data, 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let data: Vec<usize> = (0..37).collect();
        let a = split_dataset(&data, 99).unwrap();
        let b = split_dataset(&data, 99).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).chain(&a.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, data, "no loss, no duplication");
        let c = split_dataset(&data, 100).unwrap();
        assert_ne!(a.0, c.0, "different seeds shuffle differently");
    }

    #[test]
    fn split_29134_matches_remainder_rule() {
        let data: Vec<u32> = (0..29_134).collect();
        let (tr, va, te) = split_dataset(&data, 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (23_307, 2_913, 2_914));
    }

    #[test]
    fn too_few_examples_is_an_error() {
        let data: Vec<usize> = (0..9).collect();
        assert!(matches!(
            split_dataset(&data, 0),
            Err(TrainError::TooFewExamples { need: 10, got: 9 })
        ));
    }

    #[test]
    fn partition_property_over_sizes() {
        for n in [10usize, 11, 19, 50, 101, 997] {
            let data: Vec<usize> = (0..n).collect();
            let (tr, va, te) = split_dataset(&data, n as u64).unwrap();
            assert_eq!(tr.len(), n * 8 / 10);
            assert_eq!(va.len(), n / 10);
            assert_eq!(tr.len() + va.len() + te.len(), n);
            let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
            all.sort_unstable();
            assert_eq!(all, data);
        }
    }

    #[test]
    fn match_tsv_round_trip_and_errors() {
        let dir = std::env::temp_dir().join(format!("kanchor-tsv-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.tsv");
        let examples = vec![
            MatchExample {
                query: "how to delete a friend".into(),
                title: "deleting friends".into(),
                label: MatchLabel::Similar,
            },
            MatchExample {
                query: "recover chat log".into(),
                title: "export chat log".into(),
                label: MatchLabel::Related,
            },
        ];
        save_match_tsv(&examples, &path).unwrap();
        assert_eq!(load_match_tsv(&path).unwrap(), examples);

        fs::write(&path, "only two\tfields\n").unwrap();
        let err = load_match_tsv(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");

        fs::write(&path, "q\tt\t7\n").unwrap();
        assert!(load_match_tsv(&path).is_err());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn disamb_tsv_round_trip() {
        let dir = std::env::temp_dir().join(format!("kanchor-dtsv-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("disamb.tsv");
        let examples = vec![DisambExample {
            query: "how to recover wechat friend".into(),
            head_surface: "friend".into(),
            relation: RelationKind::HasOperation,
            tail_surface: "recover".into(),
            label: true,
        }];
        save_disamb_tsv(&examples, &path).unwrap();
        assert_eq!(load_disamb_tsv(&path).unwrap(), examples);
        fs::remove_dir_all(dir).ok();
    }
}
