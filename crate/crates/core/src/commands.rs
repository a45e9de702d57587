//! Recorded operator command streams (CSV) with zero-order-hold sampling.
//!
//! Columns, SI units and radians:
//! `t, v_u, theta_u, lhand_{x,y,z,r11..r33}, rhand_{x,y,z,r11..r33},
//! head_{r11..r33}`. Rotations are row-major.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::retarget::OperatorCommand;
use crate::spatial::{Rotation3, Transform};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("header: {0}")]
    Header(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

const ROT: [&str; 9] = ["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"];

/// The 36 column names in file order.
pub fn header() -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into(), "v_u".into(), "theta_u".into()];
    for hand in ["lhand", "rhand"] {
        for c in ["x", "y", "z"].iter().chain(ROT.iter()) {
            h.push(format!("{hand}_{c}"));
        }
    }
    for c in ROT {
        h.push(format!("head_{c}"));
    }
    h
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandStream {
    records: Vec<OperatorCommand>,
}

impl CommandStream {
    /// Timestamps must be non-decreasing.
    pub fn new(records: Vec<OperatorCommand>) -> Result<Self, CommandError> {
        for (i, w) in records.windows(2).enumerate() {
            if w[1].time < w[0].time {
                return Err(CommandError::Row {
                    row: i + 2,
                    message: format!("timestamp {} is before previous {}", w[1].time, w[0].time),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[OperatorCommand] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Latest record with `time ≤ t` (zero-order hold), if any.
    pub fn sample(&self, t: f64) -> Option<&OperatorCommand> {
        let i = self.records.partition_point(|r| r.time <= t);
        i.checked_sub(1).map(|k| &self.records[k])
    }
}

fn pose_fields(t: &Transform) -> impl Iterator<Item = f64> + '_ {
    t.translation.iter().copied().chain(t.rotation.to_row_array())
}

/// Write a stream with full float precision.
pub fn write_command_stream<W: Write>(stream: &CommandStream, out: W) -> Result<(), CommandError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for r in &stream.records {
        let vals: Vec<String> = [r.time, r.v_u, r.theta_u]
            .into_iter()
            .chain(pose_fields(&r.left_hand))
            .chain(pose_fields(&r.right_hand))
            .chain(r.head.to_row_array())
            .map(|v| format!("{v:.16e}"))
            .collect();
        w.write_record(&vals)?;
    }
    w.flush().map_err(|source| CommandError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

/// Parse a command CSV. Row numbers in errors count the header as row 1.
pub fn parse_command_stream<R: Read>(input: R) -> Result<CommandStream, CommandError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut rows = rdr.records();
    let Some(first) = rows.next() else {
        return Ok(CommandStream::default());
    };
    let first = first?;
    let expected = header();
    if first.len() != expected.len() || first.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(CommandError::Header(format!("expected columns {}", expected.join(","))));
    }
    let mut records = Vec::new();
    for (i, rec) in rows.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CommandError::Row { row, message: e.to_string() })?;
        if rec.len() != expected.len() {
            return Err(CommandError::Row { row, message: format!("expected {} fields, got {}", expected.len(), rec.len()) });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (field, name) in rec.iter().zip(&expected) {
            let v: f64 = field
                .parse()
                .map_err(|_| CommandError::Row { row, message: format!("column `{name}`: cannot parse `{field}`") })?;
            if !v.is_finite() {
                return Err(CommandError::Row { row, message: format!("column `{name}` is not finite") });
            }
            vals.push(v);
        }
        let rot = |s: &[f64], what: &str| {
            Rotation3::from_row_slice(s).map_err(|e| CommandError::Row { row, message: format!("{what}: {e}") })
        };
        let pose = |s: &[f64], what: &str| -> Result<Transform, CommandError> {
            Ok(Transform::new(rot(&s[3..12], what)?, Vector3::new(s[0], s[1], s[2])))
        };
        let cmd = OperatorCommand {
            time: vals[0],
            v_u: vals[1],
            theta_u: vals[2],
            left_hand: pose(&vals[3..15], "left hand")?,
            right_hand: pose(&vals[15..27], "right hand")?,
            head: rot(&vals[27..36], "head")?,
        };
        cmd.validate().map_err(|e| CommandError::Row { row, message: e.to_string() })?;
        if let Some(prev) = records.last().map(|r: &OperatorCommand| r.time) {
            if cmd.time < prev {
                return Err(CommandError::Row { row, message: format!("timestamp {} is before previous {prev}", cmd.time) });
            }
        }
        records.push(cmd);
    }
    Ok(CommandStream { records })
}

pub fn read_command_file(path: &Path) -> Result<CommandStream, CommandError> {
    let f = std::fs::File::open(path).map_err(|source| CommandError::Io { path: path.display().to_string(), source })?;
    parse_command_stream(std::io::BufReader::new(f))
}
