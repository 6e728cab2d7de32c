use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::ClassLabel;
use crate::error::{Error, Result};

/// Square count grid, rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_grid(grid: &[Vec<u64>]) -> Result<Self> {
        let n = grid.len();
        if grid.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("confusion grid must be square".into()));
        }
        Ok(ConfusionMatrix {
            n_classes: n,
            counts: grid.concat(),
        })
    }

    /// Confusion over class indices `0..n_classes`.
    pub fn from_indices(n_classes: usize, truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Input(format!(
                "{} true labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut m = Self::zeros(n_classes);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Input(format!("class index out of range: ({t}, {p})")));
            }
            m.counts[t * n_classes + p] += 1;
        }
        Ok(m)
    }

    pub fn from_labels(truth: &[ClassLabel], pred: &[ClassLabel]) -> Result<Self> {
        let t: Vec<usize> = truth.iter().map(|l| l.index()).collect();
        let p: Vec<usize> = pred.iter().map(|l| l.index()).collect();
        Self::from_indices(ClassLabel::COUNT, &t, &p)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, pred)).sum()
    }

    /// One-vs-rest `(tp, fp, fn, tn)` for class `c`.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.get(c, c);
        let fp = self.col_sum(c) - tp;
        let fne = self.row_sum(c) - tp;
        (tp, fp, fne, self.total() - tp - fp - fne)
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    /// CSV grid with a header of class names; the first cell of each row
    /// names the true class.
    pub fn write_csv<W: Write>(&self, w: &mut W, names: &[&str]) -> Result<()> {
        if names.len() != self.n_classes {
            return Err(Error::Shape("one name per class required".into()));
        }
        writeln!(w, "true\\pred,{}", names.join(","))?;
        for (name, row) in names.iter().zip(self.rows()) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let m = ConfusionMatrix::from_indices(3, &y, &y).unwrap();
        assert_eq!(m.trace(), 5);
        assert_eq!(m.total(), 5);
    }

    #[test]
    fn single_off_diagonal() {
        let m = ConfusionMatrix::from_indices(2, &[0], &[1]).unwrap();
        assert_eq!(m.rows(), vec![vec![0, 1], vec![0, 0]]);
        assert_eq!(m.one_vs_rest(0), (0, 0, 1, 0));
        assert_eq!(m.one_vs_rest(1), (0, 1, 0, 0));
    }

    #[test]
    fn length_mismatch() {
        assert!(ConfusionMatrix::from_indices(2, &[0, 1], &[1]).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = ConfusionMatrix::from_grid(&[vec![8, 2], vec![3, 7]]).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out, &["A", "B"]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "true\\pred,A,B\nA,8,2\nB,3,7\n");
    }
}
