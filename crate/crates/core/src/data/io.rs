//! Canonical dataset file: a header of `name:kind` cells with the label
//! column last, then one numeric row per line. Values are written with the
//! shortest representation that parses back to the same bits.

use std::io::{BufRead, BufReader, Read, Write};

use super::label::ClassLabel;
use super::table::{ColumnKind, ColumnMeta, FeatureTable};
use crate::error::{Error, Result};

const LABEL_HEADER: &str = "label:label";

pub fn write_dataset<W: Write>(w: &mut W, table: &FeatureTable) -> Result<()> {
    let mut header: Vec<String> = table
        .columns()
        .iter()
        .map(|c| {
            let kind = match c.kind {
                ColumnKind::Discrete => "discrete",
                ColumnKind::Continuous => "continuous",
            };
            format!("{}:{kind}", c.name)
        })
        .collect();
    header.push(LABEL_HEADER.into());
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for (row, label) in table.rows().zip(table.labels()) {
        line.clear();
        for v in row {
            // Display for f64 is shortest round-trip
            line.push_str(&format!("{v},"));
        }
        line.push_str(label.name());
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a canonical dataset. Column metadata carries names and kinds only;
/// encodings and norms live in the codec file.
pub fn read_dataset<R: Read>(r: R) -> Result<FeatureTable> {
    let mut lines = BufReader::new(r).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyDataset),
    };
    let cells: Vec<&str> = header.trim_end().split(',').collect();
    if cells.last() != Some(&LABEL_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "last header cell must be `label:label`".into(),
        });
    }
    let mut columns = Vec::new();
    for c in &cells[..cells.len() - 1] {
        let (name, kind) = c.rsplit_once(':').ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("header cell {c:?} lacks a kind"),
        })?;
        let kind = match kind {
            "discrete" => ColumnKind::Discrete,
            "continuous" => ColumnKind::Continuous,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unknown column kind {other:?}"),
                })
            }
        };
        columns.push(ColumnMeta {
            name: name.to_string(),
            kind,
            encoding: None,
            l2_norm: None,
        });
    }
    let d = columns.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} fields, found {}", d + 1, fields.len()),
            });
        }
        for f in &fields[..d] {
            data.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad number {f:?}"),
            })?);
        }
        labels.push(fields[d].parse::<ClassLabel>().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad class label {:?}", fields[d]),
        })?);
    }
    FeatureTable::from_flat(columns, data, labels)
}
