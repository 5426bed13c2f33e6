//! JSON formats for instances, certificates and result records.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sparsecs_core::sos::SosCertificate;
use sparsecs_core::ProblemInstance;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent shape: {0}")]
    Shape(String),
    #[error("invalid instance: {0}")]
    Instance(#[from] sparsecs_core::Error),
}

/// Writes every float with 17 significant digits so values round-trip.
#[derive(Debug, Clone, Copy, Default)]
pub struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_precise<T: Serialize + ?Sized>(value: &T) -> Result<String, DataError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    /// Defaults to `sqrt(n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance) -> Self {
        let a = inst.a();
        Self {
            m: inst.m(),
            n: inst.n(),
            epsilon: inst.epsilon(),
            gamma: Some(inst.gamma()),
            weights: Some(inst.weights().iter().copied().collect()),
            a: (0..a.nrows()).map(|r| a.row(r).iter().copied().collect()).collect(),
            b: inst.b().iter().copied().collect(),
        }
    }

    pub fn to_instance(&self) -> Result<ProblemInstance, DataError> {
        if self.a.len() != self.m {
            return Err(DataError::Shape(format!("A has {} rows, m = {}", self.a.len(), self.m)));
        }
        if let Some(r) = self.a.iter().position(|row| row.len() != self.n) {
            return Err(DataError::Shape(format!(
                "row {r} of A has {} entries, n = {}",
                self.a[r].len(),
                self.n
            )));
        }
        let a = DMatrix::from_fn(self.m, self.n, |r, c| self.a[r][c]);
        let b = DVector::from_vec(self.b.clone());
        let gamma = self.gamma.unwrap_or_else(|| (self.n as f64).sqrt());
        let w = match &self.weights {
            Some(w) => DVector::from_vec(w.clone()),
            None => DVector::from_element(self.n, 1.0),
        };
        Ok(ProblemInstance::new(a, b, self.epsilon, gamma, w)?)
    }
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let file: InstanceFile = serde_json::from_str(&text)?;
    file.to_instance()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = to_json_precise(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| DataError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_instance(path: &Path, inst: &ProblemInstance) -> Result<(), DataError> {
    write_json(path, &InstanceFile::from_instance(inst))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema_version: u32,
    pub n: usize,
    pub lambda: f64,
    pub tau: f64,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    /// Dense, row-major, side `2n + 1`, basis `(x, z, 1)`.
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
}

impl CertificateFile {
    pub fn from_certificate(c: &SosCertificate) -> Self {
        let d = c.s.nrows();
        Self {
            schema_version: SCHEMA_VERSION,
            n: c.t.len(),
            lambda: c.lambda,
            tau: c.tau,
            t: c.t.iter().copied().collect(),
            r: c.r.iter().copied().collect(),
            s: (0..d).map(|i| c.s.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn to_certificate(&self) -> Result<SosCertificate, DataError> {
        let d = self.s.len();
        if self.s.iter().any(|row| row.len() != d) {
            return Err(DataError::Shape("S is not square".into()));
        }
        Ok(SosCertificate {
            lambda: self.lambda,
            s: DMatrix::from_fn(d, d, |i, j| self.s[i][j]),
            tau: self.tau,
            t: DVector::from_vec(self.t.clone()),
            r: DVector::from_vec(self.r.clone()),
        })
    }
}

pub fn read_certificate(path: &Path) -> Result<SosCertificate, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let file: CertificateFile = serde_json::from_str(&text)?;
    file.to_certificate()
}
