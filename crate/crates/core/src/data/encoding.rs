//! Turning raw records into a numeric table: label-encode the symbolic
//! columns, parse the rest, and scale continuous columns by their
//! training-split L2 norm.

use serde::{Deserialize, Serialize};

use super::label::AttackMap;
use super::nslkdd::{RawRecord, CATEGORICAL_FEATURES, FEATURE_COUNT, FEATURE_NAMES};
use super::table::{ColumnKind, ColumnMeta, FeatureTable, LabelEncoding};
use crate::error::{Error, Result};

/// Per-column L2 norms. Discrete columns carry `None`; a zero norm is stored
/// as 1 so that applying it is the identity.
pub fn fit_l2_norms(table: &FeatureTable) -> Result<Vec<Option<f64>>> {
    let d = table.n_cols();
    let mut sq = vec![0.0; d];
    for (i, row) in table.rows().enumerate() {
        for (j, (&v, meta)) in row.iter().zip(table.columns()).enumerate() {
            if meta.kind != ColumnKind::Continuous {
                continue;
            }
            if !v.is_finite() {
                return Err(Error::InvalidValue {
                    row: i,
                    column: j,
                    message: format!("non-finite value {v}"),
                });
            }
            sq[j] += v * v;
        }
    }
    Ok(table
        .columns()
        .iter()
        .zip(sq)
        .map(|(meta, s)| match meta.kind {
            ColumnKind::Discrete => None,
            ColumnKind::Continuous => {
                let n = s.sqrt();
                Some(if n > 0.0 { n } else { 1.0 })
            }
        })
        .collect())
}

/// Divides every continuous cell by its column norm and records the norm in
/// the column metadata.
pub fn apply_l2_norms(norms: &[Option<f64>], table: &FeatureTable) -> Result<FeatureTable> {
    if norms.len() != table.n_cols() {
        return Err(Error::Shape(format!(
            "{} norms for {} columns",
            norms.len(),
            table.n_cols()
        )));
    }
    let mut out = table.clone();
    for (meta, norm) in out.columns_mut().iter_mut().zip(norms) {
        if meta.kind == ColumnKind::Continuous {
            meta.l2_norm = *norm;
        }
    }
    let d = table.n_cols();
    for i in 0..table.n_rows() {
        for (j, norm) in norms.iter().enumerate() {
            if let (Some(n), ColumnKind::Continuous) = (norm, table.columns()[j].kind) {
                let v = out.cell(i, j) / n;
                out.set_cell(i, j, v);
            }
        }
    }
    debug_assert_eq!(out.n_cols(), d);
    Ok(out)
}

/// Fitted record-to-table transform: encodings and norms learned from the
/// training split, reused verbatim for every test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    columns: Vec<ColumnMeta>,
    attack_map: AttackMap,
}

impl Preprocessor {
    pub fn fit(train: &[RawRecord], attack_map: AttackMap) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let columns = FEATURE_NAMES
            .iter()
            .enumerate()
            .map(|(j, name)| {
                if CATEGORICAL_FEATURES.contains(&j) {
                    let enc = LabelEncoding::fit(train.iter().map(|r| r.features[j].as_str()));
                    ColumnMeta::discrete(*name, enc)
                } else {
                    ColumnMeta::continuous(*name)
                }
            })
            .collect();
        let mut pre = Preprocessor {
            columns,
            attack_map,
        };
        let raw = pre.encode(train)?;
        let norms = fit_l2_norms(&raw)?;
        for (meta, n) in pre.columns.iter_mut().zip(norms) {
            meta.l2_norm = n;
        }
        Ok(pre)
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn attack_map(&self) -> &AttackMap {
        &self.attack_map
    }

    /// Encodes and normalizes a split.
    pub fn transform(&self, records: &[RawRecord]) -> Result<FeatureTable> {
        let raw = self.encode(records)?;
        let norms: Vec<Option<f64>> = self.columns.iter().map(|c| c.l2_norm).collect();
        apply_l2_norms(&norms, &raw)
    }

    /// Label-encodes and parses without scaling.
    pub fn encode(&self, records: &[RawRecord]) -> Result<FeatureTable> {
        let mut labels = Vec::with_capacity(records.len());
        let mut data = Vec::with_capacity(records.len() * FEATURE_COUNT);
        for (i, r) in records.iter().enumerate() {
            labels.push(self.attack_map.map(&r.attack_name)?);
            for (j, (field, meta)) in r.features.iter().zip(&self.columns).enumerate() {
                let v = match &meta.encoding {
                    Some(enc) => enc.encode(field) as f64,
                    None => {
                        let v: f64 = field.trim().parse().map_err(|_| Error::InvalidValue {
                            row: i,
                            column: j,
                            message: format!("cannot parse {field:?} as a number"),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::InvalidValue {
                                row: i,
                                column: j,
                                message: format!("non-finite value {v}"),
                            });
                        }
                        v
                    }
                };
                data.push(v);
            }
        }
        let cols = self
            .columns
            .iter()
            .map(|c| ColumnMeta {
                l2_norm: None,
                ..c.clone()
            })
            .collect();
        FeatureTable::from_flat(cols, data, labels)
    }
}
