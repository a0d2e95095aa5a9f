//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Forest, Tree};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveKind;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    objective: ObjectiveKind,
    base_score: f64,
    learning_rate: f64,
    feature_count: usize,
    trees: Vec<Tree>,
}

pub fn serialize_model(forest: &Forest) -> Result<String> {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        objective: forest.objective,
        base_score: forest.base_score,
        learning_rate: forest.learning_rate,
        feature_count: forest.feature_count,
        trees: forest.trees.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Parse and structurally validate a model. Errors carry the byte offset of the problem.
pub fn parse_model(text: &str) -> Result<Forest> {
    let file: ModelFile = serde_json::from_str(text)
        .map_err(|e| Error::ModelParse { offset: byte_offset(text, e.line(), e.column()), msg: e.to_string() })?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelParse { offset: 0, msg: format!("unsupported model version {}", file.version) });
    }
    let forest = Forest {
        trees: file.trees,
        base_score: file.base_score,
        learning_rate: file.learning_rate,
        feature_count: file.feature_count,
        objective: file.objective,
    };
    forest.validate().map_err(|e| Error::ModelParse { offset: 0, msg: e.to_string() })?;
    Ok(forest)
}

pub fn save_model(forest: &Forest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serialize_model(forest)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Forest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::Node;

    fn forest() -> Forest {
        let split = Node { feature: 1, threshold: 0.1 + 0.2, left: 1, right: 2, leaf_value: 0.0, is_leaf: false };
        let leaf = |v| Node { feature: 0, threshold: 0.0, left: 0, right: 0, leaf_value: v, is_leaf: true };
        Forest {
            trees: vec![
                Tree { nodes: vec![split, leaf(-1.0 / 3.0), leaf(std::f64::consts::PI)] },
                Tree::single_leaf(1e-300),
            ],
            base_score: 0.0,
            learning_rate: 0.1,
            feature_count: 2,
            objective: ObjectiveKind::LambdaNdcg,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = forest();
        let back = parse_model(&serialize_model(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        let row = [0.0, 0.3];
        assert_eq!(back.predict_row(&row).to_bits(), f.predict_row(&row).to_bits());
    }

    #[test]
    fn truncated_file_reports_offset() {
        let text = serialize_model(&forest()).unwrap();
        let cut = &text[..text.len() / 2];
        match parse_model(cut) {
            Err(Error::ModelParse { offset, .. }) => assert!(offset <= cut.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn structurally_invalid_model_is_rejected() {
        let mut f = forest();
        f.trees[0].nodes[0].right = 1;
        assert!(matches!(parse_model(&serialize_model(&f).unwrap()), Err(Error::ModelParse { .. })));
        let mut f = forest();
        f.trees[0].nodes[0].feature = 5;
        assert!(parse_model(&serialize_model(&f).unwrap()).is_err());
    }

    #[test]
    fn offset_counts_bytes_across_lines() {
        assert_eq!(byte_offset("ab\ncd\nef", 3, 2), 7);
        assert_eq!(byte_offset("ab", 1, 1), 0);
    }
}
