use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five traffic classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Normal,
    DoS,
    Probe,
    U2R,
    R2L,
}

impl ClassLabel {
    /// Fixed class order used for indices, score columns and reports.
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Normal,
        ClassLabel::DoS,
        ClassLabel::Probe,
        ClassLabel::U2R,
        ClassLabel::R2L,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "Normal",
            ClassLabel::DoS => "DoS",
            ClassLabel::Probe => "Probe",
            ClassLabel::U2R => "U2R",
            ClassLabel::R2L => "R2L",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

const SHIPPED_MAP: &str = include_str!("../../data/attack_map.txt");

/// Attack name → traffic class table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackMap {
    entries: BTreeMap<String, ClassLabel>,
}

impl AttackMap {
    /// Parses `attack_name,category` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, cat) = line.split_once(',').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `attack_name,category`, got {line:?}"),
            })?;
            let label: ClassLabel = cat.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("unknown category {cat:?}"),
            })?;
            let name = name.trim().to_ascii_lowercase();
            if entries.insert(name.clone(), label).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate attack name {name:?}"),
                });
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(AttackMap { entries })
    }

    /// The table shipped with the crate.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_MAP).expect("shipped attack map is well formed")
    }

    pub fn map(&self, attack_name: &str) -> Result<ClassLabel> {
        let key = attack_name.trim().trim_end_matches('.').to_ascii_lowercase();
        self.entries
            .get(&key)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(attack_name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ClassLabel)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
