use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::gmm::{fit_column_gmm_with, ColumnGmm, GmmConfig, ModeNormalized};

/// How one column of the GAN table is encoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnCodec {
    /// Mode-specific normalization; decoded values are clipped to the
    /// observed `[min, max]`.
    Continuous {
        name: String,
        gmm: ColumnGmm,
        min: f64,
        max: f64,
    },
    /// One-hot over the distinct cell values, sorted ascending.
    Discrete { name: String, categories: Vec<f64> },
}

impl ColumnCodec {
    pub fn name(&self) -> &str {
        match self {
            ColumnCodec::Continuous { name, .. } | ColumnCodec::Discrete { name, .. } => name,
        }
    }

    /// Category index of an exact cell value.
    pub fn category_of(&self, value: f64) -> Option<usize> {
        match self {
            ColumnCodec::Discrete { categories, .. } => {
                categories.binary_search_by(|c| c.total_cmp(&value)).ok()
            }
            ColumnCodec::Continuous { .. } => None,
        }
    }
}

/// Codecs for every feature column plus the class label, which is always
/// the last column and always discrete.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codecs {
    pub columns: Vec<ColumnCodec>,
}

impl Codecs {
    pub fn label_column(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("codecs serialize");
        crate::hash::sha256_hex(&json)
    }
}

/// Feature cells followed by the label index, the row shape the GAN sees.
pub fn gan_row(table: &FeatureTable, i: usize) -> Vec<f64> {
    let mut row = table.row(i).to_vec();
    row.push(table.labels()[i].index() as f64);
    row
}

/// Fits one codec per column. Continuous columns get a Gaussian mixture,
/// fitted in parallel with per-column seeds.
pub fn fit_codecs(table: &FeatureTable, config: &GmmConfig, seed: u64) -> Result<Codecs> {
    if table.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = table.n_cols();
    let columns: Vec<Result<ColumnCodec>> = (0..=d)
        .into_par_iter()
        .map(|j| {
            let (name, values, discrete) = if j == d {
                let labels = table.labels().iter().map(|l| l.index() as f64).collect();
                ("label".to_string(), labels, true)
            } else {
                let meta = &table.columns()[j];
                (meta.name.clone(), table.column(j), meta.is_discrete())
            };
            if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidValue {
                    row: bad,
                    column: j,
                    message: "non-finite value".into(),
                });
            }
            if discrete {
                let mut categories = values;
                categories.sort_by(f64::total_cmp);
                categories.dedup();
                Ok(ColumnCodec::Discrete { name, categories })
            } else {
                let column_seed = seed ^ (j as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
                let (gmm, _) = fit_column_gmm_with(&values, config, column_seed)?;
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(ColumnCodec::Continuous {
                    name,
                    gmm,
                    min,
                    max,
                })
            }
        })
        .collect();
    Ok(Codecs {
        columns: columns.into_iter().collect::<Result<_>>()?,
    })
}

/// Where one column lives inside the transformed vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Span {
    /// Alpha slot at `start`, then `n_modes` one-hot slots.
    Continuous {
        column: usize,
        start: usize,
        n_modes: usize,
    },
    Discrete {
        column: usize,
        start: usize,
        n_categories: usize,
        cond_start: usize,
    },
}

impl Span {
    pub fn column(&self) -> usize {
        match *self {
            Span::Continuous { column, .. } | Span::Discrete { column, .. } => column,
        }
    }

    pub fn start(&self) -> usize {
        match *self {
            Span::Continuous { start, .. } | Span::Discrete { start, .. } => start,
        }
    }

    pub fn width(&self) -> usize {
        match *self {
            Span::Continuous { n_modes, .. } => 1 + n_modes,
            Span::Discrete { n_categories, .. } => n_categories,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLayout {
    pub spans: Vec<Span>,
    pub width: usize,
    pub cond_width: usize,
}

impl RowLayout {
    /// Discrete spans in column order.
    pub fn discrete_spans(&self) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(|s| matches!(s, Span::Discrete { .. }))
    }

    pub fn span_of(&self, column: usize) -> Option<&Span> {
        self.spans.get(column).filter(|s| s.column() == column)
    }
}

pub fn build_layout(codecs: &Codecs) -> Result<RowLayout> {
    let mut spans = Vec::with_capacity(codecs.columns.len());
    let (mut width, mut cond_width) = (0, 0);
    for (column, codec) in codecs.columns.iter().enumerate() {
        let span = match codec {
            ColumnCodec::Continuous { gmm, .. } => Span::Continuous {
                column,
                start: width,
                n_modes: gmm.n_modes(),
            },
            ColumnCodec::Discrete { categories, name } => {
                if categories.is_empty() {
                    return Err(Error::State(format!("column {name:?} has no fitted categories")));
                }
                let s = Span::Discrete {
                    column,
                    start: width,
                    n_categories: categories.len(),
                    cond_start: cond_width,
                };
                cond_width += categories.len();
                s
            }
        };
        width += span.width();
        spans.push(span);
    }
    Ok(RowLayout {
        spans,
        width,
        cond_width,
    })
}

/// How a continuous cell picks its mode when transformed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    /// Drawn from the posterior responsibilities (training).
    Sample,
    /// Highest responsibility, first index on ties.
    MostLikely,
}

/// Compact per-column encoding: `(alpha, mode)` or `(category, 0)`.
pub(crate) fn encode_cells(
    codecs: &Codecs,
    row: &[f64],
    choice: ModeChoice,
    rng: &mut impl Rng,
) -> Result<Vec<(f64, usize)>> {
    if row.len() != codecs.columns.len() {
        return Err(Error::Shape(format!(
            "row has {} cells, codecs cover {}",
            row.len(),
            codecs.columns.len()
        )));
    }
    row.iter()
        .zip(&codecs.columns)
        .enumerate()
        .map(|(j, (&v, codec))| {
            if !v.is_finite() {
                return Err(Error::Input(format!("column {j}: non-finite value {v}")));
            }
            match codec {
                ColumnCodec::Continuous { gmm, .. } => {
                    let n = match choice {
                        ModeChoice::Sample => gmm.normalize(v, rng),
                        ModeChoice::MostLikely => {
                            gmm.normalize_with_mode(v, argmax_first(&gmm.mode_probabilities(v)))
                        }
                    };
                    Ok((n.alpha, n.mode))
                }
                ColumnCodec::Discrete { name, .. } => codec
                    .category_of(v)
                    .map(|k| (k as f64, 0))
                    .ok_or_else(|| Error::Input(format!("value {v} is not a category of {name:?}"))),
            }
        })
        .collect()
}

pub(crate) fn expand_cells(layout: &RowLayout, cells: &[(f64, usize)], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (span, &(a, m)) in layout.spans.iter().zip(cells) {
        match *span {
            Span::Continuous { start, .. } => {
                out[start] = a;
                out[start + 1 + m] = 1.0;
            }
            Span::Discrete { start, .. } => out[start + a as usize] = 1.0,
        }
    }
}

/// Maps a GAN-table row (features then label index) to its transformed
/// vector, sampling each continuous cell's mode.
pub fn transform_row(
    codecs: &Codecs,
    layout: &RowLayout,
    row: &[f64],
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    transform_row_with(codecs, layout, row, ModeChoice::Sample, rng)
}

pub fn transform_row_with(
    codecs: &Codecs,
    layout: &RowLayout,
    row: &[f64],
    choice: ModeChoice,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let cells = encode_cells(codecs, row, choice, rng)?;
    let mut out = vec![0.0; layout.width];
    expand_cells(layout, &cells, &mut out);
    Ok(out)
}

/// Inverse of [`transform_row`]. One-hot spans are hardened by argmax
/// (first index on ties); alpha is clipped to `[-1, 1]`.
pub fn inverse_transform_row(codecs: &Codecs, layout: &RowLayout, vector: &[f64]) -> Result<Vec<f64>> {
    if vector.len() != layout.width {
        return Err(Error::Shape(format!(
            "vector width {} but layout width {}",
            vector.len(),
            layout.width
        )));
    }
    if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite entry at slot {i}")));
    }
    layout
        .spans
        .iter()
        .zip(&codecs.columns)
        .map(|(span, codec)| match (*span, codec) {
            (Span::Continuous { start, n_modes, .. }, ColumnCodec::Continuous { gmm, min, max, .. }) => {
                let mode = argmax_first(&vector[start + 1..start + 1 + n_modes]);
                let alpha = vector[start].clamp(-1.0, 1.0);
                Ok(gmm.denormalize(ModeNormalized { alpha, mode })?.clamp(*min, *max))
            }
            (Span::Discrete { start, n_categories, .. }, ColumnCodec::Discrete { categories, .. }) => {
                Ok(categories[argmax_first(&vector[start..start + n_categories])])
            }
            _ => Err(Error::State("layout does not match codecs".into())),
        })
        .collect()
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cont(modes: Vec<(f64, f64, f64)>) -> ColumnCodec {
        let modes = modes
            .into_iter()
            .map(|(weight, mean, std)| Mode { weight, mean, std })
            .collect();
        ColumnCodec::Continuous {
            name: "x".into(),
            gmm: ColumnGmm::from_modes(modes, 10).unwrap(),
            min: f64::NEG_INFINITY,
            max: f64::INFINITY,
        }
    }

    fn disc(k: usize) -> ColumnCodec {
        ColumnCodec::Discrete {
            name: "c".into(),
            categories: (0..k).map(|c| c as f64).collect(),
        }
    }

    #[test]
    fn span_arithmetic() {
        let one = Codecs {
            columns: vec![cont(vec![(0.2, -5.0, 1.0), (0.5, 0.0, 1.0), (0.3, 5.0, 1.0)])],
        };
        assert_eq!(build_layout(&one).unwrap().width, 4);
        let two = Codecs {
            columns: vec![disc(3), disc(2)],
        };
        let l = build_layout(&two).unwrap();
        assert_eq!((l.width, l.cond_width), (5, 5));
        assert!(matches!(l.spans[1], Span::Discrete { start: 3, cond_start: 3, .. }));
    }

    #[test]
    fn empty_category_list_is_unfitted() {
        let c = Codecs {
            columns: vec![ColumnCodec::Discrete {
                name: "c".into(),
                categories: vec![],
            }],
        };
        assert!(matches!(build_layout(&c), Err(Error::State(_))));
    }

    #[test]
    fn discrete_rows_are_concatenated_one_hots() {
        let c = Codecs {
            columns: vec![disc(3), disc(2)],
        };
        let l = build_layout(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = transform_row(&c, &l, &[2.0, 0.0], &mut rng).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            transform_row(&c, &l, &[3.0, 0.0], &mut rng),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn mean_of_single_mode_has_zero_alpha() {
        let c = Codecs {
            columns: vec![cont(vec![(1.0, 3.0, 2.0)])],
        };
        let l = build_layout(&c).unwrap();
        let v = transform_row(&c, &l, &[3.0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
    }

    #[test]
    fn inverse_ties_and_alpha_zero() {
        let c = Codecs {
            columns: vec![cont(vec![(0.5, -2.0, 1.0), (0.5, 7.0, 1.0)]), disc(3)],
        };
        let l = build_layout(&c).unwrap();
        let row = inverse_transform_row(&c, &l, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(row, vec![7.0, 0.0]);
        let bad = inverse_transform_row(&c, &l, &[f64::NAN, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(bad, Err(Error::Input(_))));
    }
}
