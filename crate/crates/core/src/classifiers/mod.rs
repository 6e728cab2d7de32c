//! The seven benchmark classifiers behind one fit / predict contract.

mod bayes;
mod forest;
mod neural;
mod svm;
mod tree;

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bayes::MultinomialNb;
pub use forest::{ForestParams, RandomForest};
pub use neural::{NeuralClassifier, NeuralKind, NeuralParams};
pub use svm::{svm_objective, train_binary as train_binary_svm, LinearSvm, SvmParams};
pub use tree::{gini_impurity, DecisionTree, Node, TrainView, TreeParams};

use crate::data::{ClassLabel, FeatureTable};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    pub alpha: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { alpha: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Dt(DtParams),
    Rf(#[serde(default)] RfParams),
    Nb(NbParams),
    Svm(#[serde(default)] SvmSpecParams),
    Fnn(NeuralParams),
    Lstm(NeuralParams),
    Cnn(NeuralParams),
}

/// Forest parameters as they appear in configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub trees: usize,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub max_features: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        let f = ForestParams::default();
        RfParams {
            trees: f.trees,
            bootstrap: f.bootstrap,
            max_depth: f.max_depth,
            max_features: f.max_features,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSpecParams {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SvmSpecParams {
    fn default() -> Self {
        let s = SvmParams::default();
        SvmSpecParams {
            c: s.c,
            epochs: s.epochs,
            learning_rate: s.learning_rate,
        }
    }
}

impl ClassifierSpec {
    /// All seven kinds with default hyperparameters.
    pub fn defaults() -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::Dt(DtParams::default()),
            ClassifierSpec::Rf(RfParams::default()),
            ClassifierSpec::Nb(NbParams::default()),
            ClassifierSpec::Svm(SvmSpecParams::default()),
            ClassifierSpec::Fnn(NeuralParams::default()),
            ClassifierSpec::Lstm(NeuralParams::default()),
            ClassifierSpec::Cnn(NeuralParams::default()),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Dt(_) => "DT",
            ClassifierSpec::Rf(_) => "RF",
            ClassifierSpec::Nb(_) => "NB",
            ClassifierSpec::Svm(_) => "SVM",
            ClassifierSpec::Fnn(_) => "FNN",
            ClassifierSpec::Lstm(_) => "LSTM",
            ClassifierSpec::Cnn(_) => "CNN",
        }
    }
}

#[derive(Clone, Debug)]
enum Fitted {
    Tree(DecisionTree),
    Forest(RandomForest),
    Bayes(MultinomialNb),
    Svm(LinearSvm),
    Neural(NeuralClassifier),
}

/// A fitted classifier over the five traffic classes.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    name: String,
    n_features: usize,
    seen: Vec<bool>,
    tie_priority: Vec<usize>,
    fitted: Fitted,
}

fn label_indices(table: &FeatureTable) -> Vec<usize> {
    table.labels().iter().map(|l| l.index()).collect()
}

pub fn fit(spec: &ClassifierSpec, table: &FeatureTable, seed: u64) -> Result<TrainedModel> {
    if table.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let y = label_indices(table);
    let view = TrainView {
        x: table.data(),
        d: table.n_cols(),
        y: &y,
        n_classes: ClassLabel::COUNT,
    };
    let mut seen = vec![false; ClassLabel::COUNT];
    y.iter().for_each(|&c| seen[c] = true);
    let mut tie_priority: Vec<usize> = (0..ClassLabel::COUNT).collect();
    let fitted = match spec {
        ClassifierSpec::Dt(p) => {
            let params = TreeParams {
                max_depth: p.max_depth,
                min_samples_split: p.min_samples_split,
                max_features: None,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Fitted::Tree(DecisionTree::fit(view, (0..y.len()).collect(), &params, &mut rng)?)
        }
        ClassifierSpec::Rf(p) => {
            let params = ForestParams {
                trees: p.trees,
                bootstrap: p.bootstrap,
                max_depth: p.max_depth,
                max_features: p.max_features,
            };
            if params.trees == 0 {
                return Err(Error::Config("random forest needs at least one tree".into()));
            }
            Fitted::Forest(RandomForest::fit(view, &params, seed)?)
        }
        ClassifierSpec::Nb(p) => Fitted::Bayes(MultinomialNb::fit(view, p.alpha)?),
        ClassifierSpec::Svm(p) => {
            let params = SvmParams {
                c: p.c,
                epochs: p.epochs,
                learning_rate: p.learning_rate,
            };
            let svm = LinearSvm::fit(view, &params, seed)?;
            tie_priority = svm.tie_priority();
            Fitted::Svm(svm)
        }
        ClassifierSpec::Fnn(p) => Fitted::Neural(NeuralClassifier::fit(NeuralKind::Fnn, view, p, seed)?),
        ClassifierSpec::Lstm(p) => Fitted::Neural(NeuralClassifier::fit(NeuralKind::Lstm, view, p, seed)?),
        ClassifierSpec::Cnn(p) => Fitted::Neural(NeuralClassifier::fit(NeuralKind::Cnn, view, p, seed)?),
    };
    Ok(TrainedModel {
        name: spec.name().to_string(),
        n_features: table.n_cols(),
        seen,
        tie_priority,
        fitted,
    })
}

impl TrainedModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Classes present in the training data.
    pub fn classes(&self) -> Vec<ClassLabel> {
        ClassLabel::ALL
            .iter()
            .copied()
            .filter(|c| self.seen[c.index()])
            .collect()
    }

    pub fn tree(&self) -> Option<&DecisionTree> {
        match &self.fitted {
            Fitted::Tree(t) => Some(t),
            _ => None,
        }
    }

    pub fn forest(&self) -> Option<&RandomForest> {
        match &self.fitted {
            Fitted::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn svm(&self) -> Option<&LinearSvm> {
        match &self.fitted {
            Fitted::Svm(s) => Some(s),
            _ => None,
        }
    }

    pub fn neural(&self) -> Option<&NeuralClassifier> {
        match &self.fitted {
            Fitted::Neural(n) => Some(n),
            _ => None,
        }
    }

    /// Per-class scores in class order Normal, DoS, Probe, U2R, R2L. Classes
    /// absent from training always score 0.
    pub fn predict_scores(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        self.scores_flat(table.data(), table.n_cols())
    }

    pub fn scores_flat(&self, x: &[f64], d: usize) -> Result<Vec<Vec<f64>>> {
        if d != self.n_features {
            return Err(Error::Shape(format!(
                "model trained on {} features, input has {d}",
                self.n_features
            )));
        }
        let n = x.len().checked_div(d).unwrap_or(0);
        let rows = (0..n).map(|i| &x[i * d..(i + 1) * d]);
        let mut out: Vec<Vec<f64>> = match &self.fitted {
            Fitted::Tree(t) => rows.map(|r| t.scores_row(r)).collect(),
            Fitted::Forest(f) => rows.map(|r| f.scores_row(r)).collect(),
            Fitted::Bayes(b) => rows.map(|r| b.scores_row(r)).collect(),
            Fitted::Svm(s) => rows.map(|r| s.scores_row(r)).collect(),
            Fitted::Neural(m) => m.scores(x, d)?,
        };
        for row in &mut out {
            let mut masked = false;
            for (v, &s) in row.iter_mut().zip(&self.seen) {
                if !s && *v != 0.0 {
                    *v = 0.0;
                    masked = true;
                }
            }
            if masked {
                let sum: f64 = row.iter().sum();
                if sum > 0.0 {
                    row.iter_mut().for_each(|v| *v /= sum);
                }
            }
        }
        Ok(out)
    }

    /// Highest score wins; ties follow the model's tie priority.
    pub fn label_from_scores(&self, scores: &[f64]) -> ClassLabel {
        let mut best = self.tie_priority[0];
        for &c in &self.tie_priority[1..] {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        // a seen class always outranks an unseen one with an equal score
        if !self.seen[best] {
            best = self
                .tie_priority
                .iter()
                .copied()
                .filter(|&c| self.seen[c])
                .fold(None, |acc: Option<usize>, c| match acc {
                    Some(a) if scores[a] >= scores[c] => Some(a),
                    _ => Some(c),
                })
                .expect("at least one class seen");
        }
        ClassLabel::from_index(best).expect("class index in range")
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<ClassLabel>> {
        Ok(self
            .predict_scores(table)?
            .iter()
            .map(|s| self.label_from_scores(s))
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
enum SavedState {
    Tree(DecisionTree),
    Forest(RandomForest),
    Bayes(MultinomialNb),
    Svm(LinearSvm),
    Neural { neural_kind: NeuralKind, history: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct SavedHeader {
    format: String,
    name: String,
    n_features: usize,
    seen: Vec<bool>,
    tie_priority: Vec<usize>,
    fitted: SavedState,
}

const MODEL_FORMAT: &str = "tabsynth-model-1";

impl TrainedModel {
    /// One JSON header line; neural models append an ndiff checkpoint.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let fitted = match &self.fitted {
            Fitted::Tree(t) => SavedState::Tree(t.clone()),
            Fitted::Forest(f) => SavedState::Forest(f.clone()),
            Fitted::Bayes(b) => SavedState::Bayes(b.clone()),
            Fitted::Svm(s) => SavedState::Svm(s.clone()),
            Fitted::Neural(n) => SavedState::Neural {
                neural_kind: n.kind,
                history: n.history.clone(),
            },
        };
        let header = SavedHeader {
            format: MODEL_FORMAT.into(),
            name: self.name.clone(),
            n_features: self.n_features,
            seen: self.seen.clone(),
            tie_priority: self.tie_priority.clone(),
            fitted,
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        if let Fitted::Neural(n) = &self.fitted {
            ndiff::write_checkpoint(w, &[("net", &n.model)], &serde_json::Value::Null)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: SavedHeader = serde_json::from_str(&line)?;
        if header.format != MODEL_FORMAT {
            return Err(Error::Input(format!("unsupported model format {:?}", header.format)));
        }
        let fitted = match header.fitted {
            SavedState::Tree(t) => Fitted::Tree(t),
            SavedState::Forest(f) => Fitted::Forest(f),
            SavedState::Bayes(b) => Fitted::Bayes(b),
            SavedState::Svm(s) => Fitted::Svm(s),
            SavedState::Neural { neural_kind, history } => {
                let mut rest = Vec::new();
                r.read_to_end(&mut rest)?;
                let mut ck = ndiff::read_checkpoint(&mut &rest[..])?;
                Fitted::Neural(NeuralClassifier {
                    kind: neural_kind,
                    model: ck.take("net")?,
                    history,
                })
            }
        };
        Ok(TrainedModel {
            name: header.name,
            n_features: header.n_features,
            seen: header.seen,
            tie_priority: header.tie_priority,
            fitted,
        })
    }
}
