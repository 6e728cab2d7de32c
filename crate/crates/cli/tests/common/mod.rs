//! Fixture experiments over synthetic records in the raw split format.

#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tabsynth::data::{synthetic_records, write_records};

pub const TRAIN_COUNTS: [usize; 5] = [200, 150, 80, 12, 30];
pub const TEST_COUNTS: [usize; 5] = [80, 60, 30, 8, 20];

pub fn write_split(path: &Path, counts: [usize; 5], seed: u64) {
    let mut w = BufWriter::new(File::create(path).unwrap());
    write_records(&mut w, &synthetic_records(counts, seed)).unwrap();
    w.flush().unwrap();
}

/// A small, fast experiment: two cheap classifiers and a tiny GAN.
pub fn config_text(extra: &str) -> String {
    format!(
        r#"seed = 7
profile = "desk"
{extra}
[data]
train = "train.txt"

[[data.test]]
name = "KDDTest+"
path = "test.txt"

[desk]
fraction = 0.5
ctgan_epochs = 2

[ctgan]
batch_size = 64
noise_dim = 8
hidden = 16

[[classifier]]
kind = "dt"

[[classifier]]
kind = "nb"
"#
    )
}

/// Writes the two splits and a config into `dir`; returns the config path.
pub fn fixture(dir: &Path, extra: &str) -> PathBuf {
    write_split(&dir.join("train.txt"), TRAIN_COUNTS, 1);
    write_split(&dir.join("test.txt"), TEST_COUNTS, 2);
    let cfg = dir.join("experiment.toml");
    std::fs::write(&cfg, config_text(extra)).unwrap();
    cfg
}
