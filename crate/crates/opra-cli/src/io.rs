//! Dataset CSV and policy JSON file formats.
//!
//! Dataset CSV schema: feature columns `f0..f{d-1}`, then `action`
//! (integer), `reward` (float), and optionally `propensity` (float in
//! (0, 1]). Floats are written with shortest round-trip formatting, so a
//! write/read cycle reproduces the dataset exactly.

use std::collections::BTreeMap;
use std::fs;

use opra_core::{Interaction, LoggedDataset, PolicySpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn parse_field<T: core::str::FromStr>(
    path: &str,
    line: usize,
    column: &str,
    raw: &str,
) -> Result<T, CliError> {
    raw.trim().parse().map_err(|_| {
        CliError::config(format!("{path}:{line}: cannot parse {column} from {raw:?}"))
    })
}

/// Read a logged dataset. `reward_bound` and `action_count` are declared by
/// the caller, not inferred; rows are validated against them.
pub fn read_dataset(
    path: &str,
    action_count: usize,
    reward_bound: f64,
) -> Result<LoggedDataset, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{path}: empty file")))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let feature_count = columns.iter().take_while(|c| c.starts_with('f')).count();
    let expected: Vec<String> = (0..feature_count).map(|i| format!("f{i}")).collect();
    let mut layout: Vec<&str> = expected.iter().map(String::as_str).collect();
    layout.push("action");
    layout.push("reward");
    let has_propensity = columns.len() == layout.len() + 1;
    if has_propensity {
        layout.push("propensity");
    }
    if columns != layout {
        return Err(CliError::config(format!(
            "{path}:1: header must be f0..f{{d-1}},action,reward[,propensity], got {header:?}"
        )));
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::config(format!(
                "{path}:{lineno}: expected {} fields, got {}",
                columns.len(),
                fields.len()
            )));
        }
        let mut context = Vec::with_capacity(feature_count);
        for (i, raw) in fields[..feature_count].iter().enumerate() {
            context.push(parse_field(path, lineno, &format!("f{i}"), raw)?);
        }
        let action: usize = parse_field(path, lineno, "action", fields[feature_count])?;
        let reward: f64 = parse_field(path, lineno, "reward", fields[feature_count + 1])?;
        let logged_propensity = if has_propensity && !fields[feature_count + 2].trim().is_empty() {
            Some(parse_field(path, lineno, "propensity", fields[feature_count + 2])?)
        } else {
            None
        };
        rows.push(Interaction {
            context,
            action,
            reward,
            logged_propensity,
        });
    }
    LoggedDataset::new(rows, feature_count, action_count, reward_bound)
        .map_err(|e| CliError::config(format!("{path}: {e}")))
}

/// Write a dataset in the canonical schema.
pub fn write_dataset(path: &str, data: &LoggedDataset) -> Result<(), CliError> {
    let mut out = String::new();
    for i in 0..data.context_dim() {
        out.push_str(&format!("f{i},"));
    }
    let has_propensity = data.rows().iter().any(|r| r.logged_propensity.is_some());
    out.push_str("action,reward");
    if has_propensity {
        out.push_str(",propensity");
    }
    out.push('\n');
    for r in data.rows() {
        for x in &r.context {
            out.push_str(&format!("{x},"));
        }
        out.push_str(&format!("{},{}", r.action, r.reward));
        if has_propensity {
            match r.logged_propensity {
                Some(p) => out.push_str(&format!(",{p}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

/// On-disk policy representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicyFile {
    Tabular {
        action_count: usize,
        table: BTreeMap<String, Vec<f64>>,
    },
    Softmax {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Mixture {
        alpha: f64,
        base: Box<PolicyFile>,
    },
}

impl PolicyFile {
    pub fn to_policy(&self) -> Result<PolicySpec, CliError> {
        match self {
            Self::Tabular { action_count, table } => {
                PolicySpec::tabular(table.clone().into_iter().collect(), *action_count)
            }
            Self::Softmax { weights, bias } => {
                PolicySpec::softmax_linear(weights.clone(), bias.clone())
            }
            Self::Mixture { alpha, base } => PolicySpec::mixture(base.to_policy()?, *alpha),
        }
        .map_err(|e| CliError::config(e.to_string()))
    }

    pub fn from_policy(policy: &PolicySpec) -> Self {
        match policy {
            PolicySpec::Tabular { table, action_count } => Self::Tabular {
                action_count: *action_count,
                table: table.clone().into_iter().collect(),
            },
            PolicySpec::SoftmaxLinear { weights, bias } => Self::Softmax {
                weights: weights.clone(),
                bias: bias.clone(),
            },
            PolicySpec::Mixture { base, alpha } => Self::Mixture {
                alpha: *alpha,
                base: Box::new(Self::from_policy(base)),
            },
        }
    }
}

pub fn read_policy(path: &str) -> Result<PolicySpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: PolicyFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{path}: {e}")))?;
    file.to_policy()
}

pub fn write_policy(path: &str, policy: &PolicySpec) -> Result<(), CliError> {
    let file = PolicyFile::from_policy(policy);
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::config(format!("{path}: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Classification CSV: a header naming each column, one of which is the
/// label (integers 0..K-1); every other column is a numeric feature.
pub fn read_classification(
    path: &str,
    label_column: &str,
) -> Result<(Vec<Vec<f64>>, Vec<usize>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{path}: empty file")))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_idx = columns
        .iter()
        .position(|c| *c == label_column)
        .ok_or_else(|| {
            CliError::config(format!("{path}:1: label column {label_column:?} not found"))
        })?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::config(format!(
                "{path}:{lineno}: expected {} fields, got {}",
                columns.len(),
                fields.len()
            )));
        }
        let mut x = Vec::with_capacity(columns.len() - 1);
        for (i, raw) in fields.iter().enumerate() {
            if i == label_idx {
                labels.push(parse_field(path, lineno, "label", raw)?);
            } else {
                x.push(parse_field(path, lineno, columns[i], raw)?);
            }
        }
        features.push(x);
    }
    if features.is_empty() {
        return Err(CliError::config(format!("{path}: no data rows")));
    }
    Ok((features, labels))
}

/// Piecewise-linear distortion table: `s,g` pairs, one per line, with an
/// optional `s,g` header.
pub fn read_distortion_table(path: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with('s')) {
            continue;
        }
        let lineno = idx + 1;
        let (s, g) = line.split_once(',').ok_or_else(|| {
            CliError::config(format!("{path}:{lineno}: expected s,g pair"))
        })?;
        points.push((
            parse_field(path, lineno, "s", s)?,
            parse_field(path, lineno, "g", g)?,
        ));
    }
    Ok(points)
}

/// FNV-1a 64-bit digest used to fingerprint input files in manifests.
pub fn fnv1a_digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("fnv1a:{hash:016x}")
}

pub fn digest_file(path: &str) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(fnv1a_digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let path = path.to_str().unwrap();
        let rows = vec![
            Interaction {
                context: vec![0.1234567890123456, -7.25],
                action: 1,
                reward: 0.3333333333333333,
                logged_propensity: Some(0.5),
            },
            Interaction {
                context: vec![1e-300, 2.5],
                action: 0,
                reward: 1.0,
                logged_propensity: Some(0.25),
            },
        ];
        let data = LoggedDataset::new(rows, 2, 2, 1.0).unwrap();
        write_dataset(path, &data).unwrap();
        let back = read_dataset(path, 2, 1.0).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn dataset_header_mismatch_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x0,action,reward\n1,0,0.5\n").unwrap();
        let err = read_dataset(path.to_str().unwrap(), 2, 1.0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dataset_parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "f0,action,reward\n0.5,0,0.1\n0.5,oops,0.1\n").unwrap();
        let err = read_dataset(path.to_str().unwrap(), 2, 1.0).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn policy_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let path = path.to_str().unwrap();
        let base = PolicySpec::softmax_linear(vec![vec![0.5, -1.0], vec![0.0, 2.0]], vec![0.1, -0.1])
            .unwrap();
        let policy = PolicySpec::mixture(base, 0.3).unwrap();
        write_policy(path, &policy).unwrap();
        assert_eq!(read_policy(path).unwrap(), policy);
    }

    #[test]
    fn classification_reader_finds_label_anywhere() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "a,label,b\n0.5,1,2.0\n1.5,0,3.0\n").unwrap();
        let (features, labels) = read_classification(path.to_str().unwrap(), "label").unwrap();
        assert_eq!(features, vec![vec![0.5, 2.0], vec![1.5, 3.0]]);
        assert_eq!(labels, vec![1, 0]);
    }

    #[test]
    fn missing_label_column_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "a,b\n0.5,1\n").unwrap();
        let err = read_classification(path.to_str().unwrap(), "label").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("label"));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(fnv1a_digest(b""), "fnv1a:cbf29ce484222325");
        assert_eq!(fnv1a_digest(b"opra"), fnv1a_digest(b"opra"));
        assert_ne!(fnv1a_digest(b"opra"), fnv1a_digest(b"orpa"));
    }
}
