//! Per-tick telemetry and its CSV form.
//!
//! Every row starts with the schema version; floats are printed with 17
//! significant digits so identical runs give identical bytes.

use std::io::{Read, Write};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::GaitPhase;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema version mismatch: expected {expected}, found `{found}` (row {row})")]
    Version { expected: u32, found: String, row: usize },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub tick: u64,
    pub time: f64,
    pub phase: GaitPhase,
    pub xi: Vector2<f64>,
    pub xi_ref: Vector2<f64>,
    pub zmp_ref: Vector2<f64>,
    /// ZMP applied to the plant (after saturation and delay).
    pub zmp: Vector2<f64>,
    pub zmp_inside: bool,
    /// Pendulum CoM.
    pub com: Vector2<f64>,
    pub com_ref: Vector2<f64>,
    pub com_vel_star: Vector2<f64>,
    /// CoM of the kinematic robot.
    pub com_kin: Vector3<f64>,
    /// Horizontal distance between the kinematic and pendulum CoM.
    pub com_gap: f64,
    /// Left then right, `p − p*`.
    pub hand_pos_err: [Vector3<f64>; 2],
    pub hand_rot_err: [Vector3<f64>; 2],
    pub base_x: f64,
    pub base_y: f64,
    /// Torso yaw used as the robot heading.
    pub heading: f64,
    pub qp_objective: f64,
    pub qp_residual: f64,
    pub velocity_scale: f64,
    pub joints: Vec<f64>,
}

fn xy(p: &str) -> [String; 2] {
    [format!("{p}_x"), format!("{p}_y")]
}

fn xyz(p: &str) -> [String; 3] {
    [format!("{p}_x"), format!("{p}_y"), format!("{p}_z")]
}

/// Column names for a model with the given joints.
pub fn header(joint_names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = vec!["schema_version".into(), "tick".into(), "t".into(), "phase".into()];
    for p in ["xi", "xi_ref", "zmp_ref", "zmp"] {
        h.extend(xy(p));
    }
    h.push("zmp_inside".into());
    for p in ["com", "com_ref", "com_vel_star"] {
        h.extend(xy(p));
    }
    h.extend(xyz("com_kin"));
    h.push("com_gap".into());
    for p in ["lhand_pos_err", "lhand_rot_err", "rhand_pos_err", "rhand_rot_err"] {
        h.extend(xyz(p));
    }
    for c in ["base_x", "base_y", "heading", "qp_objective", "qp_residual", "velocity_scale"] {
        h.push(c.into());
    }
    h.extend(joint_names.iter().map(|j| format!("q_{j}")));
    h
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

impl TelemetryRecord {
    pub fn fields(&self) -> Vec<String> {
        let mut out = vec![SCHEMA_VERSION.to_string(), self.tick.to_string(), f(self.time), self.phase.label().into()];
        for v in [&self.xi, &self.xi_ref, &self.zmp_ref, &self.zmp] {
            out.extend(v.iter().map(|x| f(*x)));
        }
        out.push(u8::from(self.zmp_inside).to_string());
        for v in [&self.com, &self.com_ref, &self.com_vel_star] {
            out.extend(v.iter().map(|x| f(*x)));
        }
        out.extend(self.com_kin.iter().map(|x| f(*x)));
        out.push(f(self.com_gap));
        for v in [&self.hand_pos_err[0], &self.hand_rot_err[0], &self.hand_pos_err[1], &self.hand_rot_err[1]] {
            out.extend(v.iter().map(|x| f(*x)));
        }
        for v in [self.base_x, self.base_y, self.heading, self.qp_objective, self.qp_residual, self.velocity_scale] {
            out.push(f(v));
        }
        out.extend(self.joints.iter().map(|x| f(*x)));
        out
    }
}

/// Streams records to CSV in tick order.
pub struct TelemetryWriter<W: Write> {
    inner: csv::Writer<W>,
    columns: usize,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(out: W, joint_names: &[String]) -> Result<Self, TelemetryError> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let h = header(joint_names);
        inner.write_record(&h)?;
        Ok(Self { inner, columns: h.len() })
    }

    pub fn write(&mut self, rec: &TelemetryRecord) -> Result<(), TelemetryError> {
        let fields = rec.fields();
        debug_assert_eq!(fields.len(), self.columns);
        self.inner.write_record(&fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, TelemetryError> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| TelemetryError::Io(e.into_error()))
    }
}

/// Parsed telemetry file.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TelemetryTable {
    pub fn parse<R: Read>(input: R) -> Result<Self, TelemetryError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        let columns: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if columns.first().map(String::as_str) != Some("schema_version") {
            return Err(TelemetryError::Version {
                expected: SCHEMA_VERSION,
                found: columns.first().cloned().unwrap_or_default(),
                row: 1,
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let v = rec.get(0).unwrap_or("");
            if v != SCHEMA_VERSION.to_string() {
                return Err(TelemetryError::Version { expected: SCHEMA_VERSION, found: v.into(), row: i + 2 });
            }
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, TelemetryError> {
        let i = self
            .index(name)
            .ok_or_else(|| TelemetryError::Row { row: 1, message: format!("no column `{name}`") })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i].parse().map_err(|_| TelemetryError::Row {
                    row: r + 2,
                    message: format!("column `{name}`: `{}` is not a number", row[i]),
                })
            })
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}
