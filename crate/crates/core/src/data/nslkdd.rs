//! NSL-KDD text records: 41 comma-separated features, the attack name and a
//! difficulty score, no header.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 41;
pub const FIELD_COUNT: usize = FEATURE_COUNT + 2;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

/// Indices of the symbolic columns (protocol, service, flag).
pub const CATEGORICAL_FEATURES: [usize; 3] = [1, 2, 3];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub features: Vec<String>,
    pub attack_name: String,
    /// Parsed and kept for round-tripping; unused downstream.
    pub difficulty: i64,
}

pub fn parse_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, i + 1)?);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

fn parse_line(line: &str, lineno: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != FIELD_COUNT {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected {FIELD_COUNT} fields, found {}", fields.len()),
        });
    }
    let attack_name = fields[FEATURE_COUNT].to_string();
    if attack_name.is_empty() {
        return Err(Error::Parse {
            line: lineno,
            message: "empty attack name".into(),
        });
    }
    let difficulty = fields[FEATURE_COUNT + 1].parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("bad difficulty {:?}", fields[FEATURE_COUNT + 1]),
    })?;
    Ok(RawRecord {
        features: fields[..FEATURE_COUNT].iter().map(|s| s.to_string()).collect(),
        attack_name,
        difficulty,
    })
}

pub fn write_records<W: Write>(w: &mut W, records: &[RawRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{},{},{}", r.features.join(","), r.attack_name, r.difficulty)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(attack: &str) -> String {
        let mut f: Vec<String> = (0..FEATURE_COUNT).map(|i| format!("{i}")).collect();
        f[1] = "tcp".into();
        f[2] = "http".into();
        f[3] = "SF".into();
        format!("{},{attack},20", f.join(","))
    }

    #[test]
    fn parses_well_formed_lines() {
        let text = format!("{}\n\n{}\n", line("normal"), line("neptune"));
        let recs = parse_records(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].attack_name, "neptune");
        assert_eq!(recs[0].features[2], "http");
        assert_eq!(recs[0].difficulty, 20);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let text = format!("{}\n0,tcp,normal,20\n", line("normal"));
        match parse_records(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_stream() {
        assert!(matches!(parse_records(&b""[..]), Err(Error::EmptyDataset)));
        assert!(matches!(parse_records(&b"\n\n"[..]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn names_cover_every_feature() {
        assert_eq!(FEATURE_NAMES.len(), 41);
        assert_eq!(FEATURE_NAMES[CATEGORICAL_FEATURES[0]], "protocol_type");
        assert_eq!(FEATURE_NAMES[CATEGORICAL_FEATURES[2]], "flag");
    }
}
