//! Model files and run reports.
//!
//! A model file is JSON with the keys `options`, `k`, `n`, `prior`,
//! `description` and exactly one of `ab` (`{"A": [[..]], "b": [..]}`) or
//! `vertices` (`{"V": [[..]]}`). Matrices are arrays of rows. Large matrices
//! may instead be read from CSV files named by `A_csv`, `b_csv` or `V_csv`,
//! relative to the model file.

pub mod report;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AbPolytope, CountData, DirichletPrior, ItemLayout, VPolytope};
use crate::sampler::ConstraintModel;

pub use report::{RunReport, Table, REPORT_SCHEMA};

/// How the counts were given in the file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountConvention {
    /// All `J` category frequencies.
    Full,
    /// Only the `D` free categories, with totals `n`; the last category of
    /// each item type is implied.
    Free,
    /// No counts (prior analysis).
    None,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAb {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(rename = "A_csv", default, skip_serializing_if = "Option::is_none")]
    pub a_csv: Option<PathBuf>,
    #[serde(rename = "b_csv", default, skip_serializing_if = "Option::is_none")]
    pub b_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVertices {
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Vec<f64>>>,
    #[serde(rename = "V_csv", default, skip_serializing_if = "Option::is_none")]
    pub v_csv: Option<PathBuf>,
}

/// The file as written, before validation.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub options: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ab: Option<RawAb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<RawVertices>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpecConstraint {
    Ab(AbPolytope),
    V(VPolytope),
}

/// A validated model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub description: Option<String>,
    pub layout: ItemLayout,
    pub data: CountData,
    pub convention: CountConvention,
    pub constraint: SpecConstraint,
    pub prior: DirichletPrior,
}

impl ModelSpec {
    pub fn constraint_model(&self) -> Result<ConstraintModel> {
        match &self.constraint {
            SpecConstraint::Ab(p) => ConstraintModel::ab(self.layout.clone(), p.clone()),
            SpecConstraint::V(p) => ConstraintModel::v(self.layout.clone(), p.clone()),
        }
    }

    /// Normalised file form: full counts, inline matrices.
    pub fn to_file(&self) -> ModelSpecFile {
        let has_counts = self.convention != CountConvention::None;
        let (ab, vertices) = match &self.constraint {
            SpecConstraint::Ab(p) => (
                Some(RawAb {
                    a: Some(p.rows().map(|r| r.to_vec()).collect()),
                    b: Some(p.rhs().to_vec()),
                    ..RawAb::default()
                }),
                None,
            ),
            SpecConstraint::V(p) => (
                None,
                Some(RawVertices {
                    v: Some(p.vertices().map(|r| r.to_vec()).collect()),
                    v_csv: None,
                }),
            ),
        };
        ModelSpecFile {
            description: self.description.clone(),
            options: self.layout.options().iter().map(|&j| j as i64).collect(),
            k: has_counts.then(|| self.data.k().iter().map(|&v| v as i64).collect()),
            n: has_counts.then(|| self.data.n().iter().map(|&v| v as i64).collect()),
            ab,
            vertices,
            prior: Some(self.prior.shapes().to_vec()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serialises")
    }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Reads and validates a model file.
pub fn parse_model(path: &Path) -> Result<ModelSpec> {
    let raw = read_model_file(path)?;
    validate(raw, path)
}

/// Reads a model file without validating it.
pub fn read_model_file(path: &Path) -> Result<ModelSpecFile> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(path, e.to_string()))?;
    parse_model_str(&text, path)
}

pub fn parse_model_str(text: &str, path: &Path) -> Result<ModelSpecFile> {
    serde_json::from_str(text).map_err(|e| {
        parse_err(
            path,
            format!("line {}, column {}: {}", e.line(), e.column(), e),
        )
    })
}

/// Reads a numeric CSV matrix; a first row without any number is a header.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if r == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    parse_err(
                        path,
                        format!("line {}, column {}: '{}' is not a number", r + 1, c + 1, field),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn resolve(base: &Path, rel: &Path) -> PathBuf {
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(rel)
    }
}

fn check_matrix(path: &Path, field: &str, rows: &[Vec<f64>], cols: usize) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(parse_err(
                path,
                format!("{}[{}]: expected {} columns, found {}", field, r, cols, row.len()),
            ));
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(path, format!("{}[{}][{}]: entry is not finite", field, r, c)));
        }
    }
    Ok(())
}

fn nonnegative(path: &Path, field: &str, values: &[i64]) -> Result<Vec<u64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            u64::try_from(v)
                .map_err(|_| parse_err(path, format!("{}[{}] = {}: counts must be nonnegative", field, i, v)))
        })
        .collect()
}

/// Applies every cross-dimension check and builds the typed model.
pub fn validate(raw: ModelSpecFile, path: &Path) -> Result<ModelSpec> {
    let options = raw
        .options
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            usize::try_from(j)
                .ok()
                .filter(|&j| j >= 2)
                .ok_or_else(|| parse_err(path, format!("options[{}] = {}: every item type needs at least 2 categories", i, j)))
        })
        .collect::<Result<Vec<usize>>>()?;
    let layout = ItemLayout::new(options).map_err(|e| parse_err(path, format!("options: {}", e)))?;
    let dim = layout.dim();
    let cats = layout.n_categories();

    let (data, convention) = match (&raw.k, &raw.n) {
        (None, None) => (CountData::zeros(&layout), CountConvention::None),
        (None, Some(_)) => return Err(parse_err(path, "n: totals given without counts k")),
        (Some(k), n) => {
            let k = nonnegative(path, "k", k)?;
            let n = n.as_deref().map(|n| nonnegative(path, "n", n)).transpose()?;
            // one total shared by all item types
            let n = n.map(|n| if n.len() == 1 { vec![n[0]; layout.n_items()] } else { n });
            let wrap = |e: Error| parse_err(path, format!("k/n: {}", e));
            if k.len() == cats {
                let data = match &n {
                    Some(n) => CountData::with_totals(&layout, k, n).map_err(wrap)?,
                    None => CountData::new(&layout, k).map_err(wrap)?,
                };
                (data, CountConvention::Full)
            } else if k.len() == dim {
                let n = n.ok_or_else(|| {
                    parse_err(path, "n: totals are required when k lists only the free categories")
                })?;
                (CountData::from_free(&layout, &k, &n).map_err(wrap)?, CountConvention::Free)
            } else {
                return Err(parse_err(
                    path,
                    format!(
                        "k: expected {} (all categories) or {} (free categories) entries, found {}",
                        cats,
                        dim,
                        k.len()
                    ),
                ));
            }
        }
    };

    let constraint = match (raw.ab, raw.vertices) {
        (Some(_), Some(_)) => {
            return Err(parse_err(path, "give exactly one of 'ab' and 'vertices', not both"))
        }
        (None, None) => return Err(parse_err(path, "missing constraint block: 'ab' or 'vertices'")),
        (Some(ab), None) => {
            let a = match (ab.a, ab.a_csv) {
                (Some(a), None) => a,
                (None, Some(p)) => read_matrix_csv(&resolve(path, &p))?,
                _ => return Err(parse_err(path, "ab: give exactly one of 'A' and 'A_csv'")),
            };
            let b = match (ab.b, ab.b_csv) {
                (Some(b), None) => b,
                (None, Some(p)) => {
                    let m = read_matrix_csv(&resolve(path, &p))?;
                    m.into_iter().flatten().collect()
                }
                _ => return Err(parse_err(path, "ab: give exactly one of 'b' and 'b_csv'")),
            };
            check_matrix(path, "ab.A", &a, dim)?;
            if a.len() != b.len() {
                return Err(parse_err(
                    path,
                    format!("ab.b: expected {} entries (rows of A), found {}", a.len(), b.len()),
                ));
            }
            if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                return Err(parse_err(path, format!("ab.b[{}]: entry is not finite", i)));
            }
            SpecConstraint::Ab(
                AbPolytope::new(a, b, dim).map_err(|e| parse_err(path, format!("ab: {}", e)))?,
            )
        }
        (None, Some(v)) => {
            let rows = match (v.v, v.v_csv) {
                (Some(rows), None) => rows,
                (None, Some(p)) => read_matrix_csv(&resolve(path, &p))?,
                _ => return Err(parse_err(path, "vertices: give exactly one of 'V' and 'V_csv'")),
            };
            check_matrix(path, "vertices.V", &rows, dim)?;
            SpecConstraint::V(
                VPolytope::new(rows, &layout)
                    .map_err(|e| parse_err(path, format!("vertices: {}", e)))?,
            )
        }
    };

    let prior = match raw.prior {
        None => DirichletPrior::uniform(&layout),
        Some(p) if p.len() == 1 => DirichletPrior::new(vec![p[0]; cats], &layout)
            .map_err(|e| parse_err(path, format!("prior: {}", e)))?,
        Some(p) => DirichletPrior::new(p, &layout).map_err(|e| parse_err(path, format!("prior: {}", e)))?,
    };

    Ok(ModelSpec {
        description: raw.description,
        layout,
        data,
        convention,
        constraint,
        prior,
    })
}
