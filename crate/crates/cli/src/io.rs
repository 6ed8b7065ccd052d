//! File formats: headed CSV tables, state files with a JSON sidecar,
//! operator triplets, and the in-memory output bundle.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use qwave_core::{QuantumRegisterState, RegisterLayout, SparseOperator};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};

/// Files produced by a command, written only once everything succeeded.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output types serialize");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest round-trip representation in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Builds a CSV document from a header and rows of already formatted fields.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a numeric CSV table whose header must equal `header` (or, with
/// `prefix_only`, start with it). Returns the header and the rows.
pub fn read_table(path: &Path, header: &[&str], prefix_only: bool) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let ctx = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::validation(&ctx, e))?;
    let found: Vec<String> =
        reader.headers().map_err(|e| CliError::validation(&ctx, e))?.iter().map(str::to_owned).collect();
    let matches = if prefix_only {
        found.len() > header.len() && found.iter().zip(header).all(|(a, b)| a == b)
    } else {
        found.len() == header.len() && found.iter().zip(header).all(|(a, b)| a == b)
    };
    if !matches {
        let want = if prefix_only { format!("{},...", header.join(",")) } else { header.join(",") };
        return Err(CliError::validation(&ctx, format!("expected header `{want}`, found `{}`", found.join(","))));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::validation(&ctx, e))?;
        let row = record
            .iter()
            .map(|field| field.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::validation(&ctx, format!("row {}: expected finite numbers", line + 1)))?;
        if row.len() != found.len() {
            return Err(CliError::validation(&ctx, format!("row {}: wrong field count", line + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::validation(&ctx, "no data rows"));
    }
    Ok((found, rows))
}

/// `row,col,value` lines of a sparse operator.
pub fn triplet_csv(op: &SparseOperator) -> Vec<u8> {
    csv_bytes(
        &["row", "col", "value"],
        op.triplets().iter().map(|&(r, c, v)| vec![r.to_string(), c.to_string(), fmt_f64(v)]),
    )
}

/// Sidecar of a state CSV: everything needed to rebuild the register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSidecar {
    pub scale: f64,
    pub physical: usize,
    pub stacks: usize,
    pub auxiliary: bool,
    pub num_qubits: u32,
}

/// `index,real,imag` rows of the normalized amplitudes plus the sidecar.
pub fn state_files(state: &QuantumRegisterState) -> (Vec<u8>, StateSidecar) {
    let csv = csv_bytes(
        &["index", "real", "imag"],
        state.amplitudes().iter().enumerate().map(|(i, z)| vec![i.to_string(), fmt_f64(z.re), fmt_f64(z.im)]),
    );
    let layout = state.layout();
    let sidecar = StateSidecar {
        scale: state.scale(),
        physical: layout.physical,
        stacks: layout.stacks,
        auxiliary: layout.auxiliary,
        num_qubits: state.num_qubits(),
    };
    (csv, sidecar)
}

/// Sidecar path for a state CSV: same stem, `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn read_state(path: &Path) -> CliResult<QuantumRegisterState> {
    let side_path = sidecar_path(path);
    let ctx = side_path.display().to_string();
    let text = fs::read_to_string(&side_path).map_err(|e| CliError::validation(&ctx, e))?;
    let side: StateSidecar = serde_json::from_str(&text).map_err(|e| CliError::validation(&ctx, e))?;
    let layout = RegisterLayout::new(side.physical, side.stacks, side.auxiliary).context(&ctx)?;
    if layout.num_qubits() != side.num_qubits {
        return Err(CliError::validation(&ctx, format!("layout has {} qubits, sidecar says {}", layout.num_qubits(), side.num_qubits)));
    }
    let (_, rows) = read_table(path, &["index", "real", "imag"], false)?;
    let ctx = path.display().to_string();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.len()];
    let mut seen = vec![false; layout.len()];
    for row in rows {
        let index = as_index(row[0]).filter(|&i| i < layout.len()).ok_or_else(|| {
            CliError::validation(&ctx, format!("index {} outside the register of length {}", row[0], layout.len()))
        })?;
        if std::mem::replace(&mut seen[index], true) {
            return Err(CliError::validation(&ctx, format!("index {index} appears twice")));
        }
        amplitudes[index] = Complex64::new(row[1], row[2]);
    }
    QuantumRegisterState::from_parts(amplitudes, side.scale, layout).context(ctx)
}

/// Exact non-negative integer value of a parsed float.
pub fn as_index(v: f64) -> Option<usize> {
    (v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64).then_some(v as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_round_trips_through_files() {
        let blocks = vec![
            (0..5).map(|k| Complex64::new(k as f64 * 0.3 - 0.4, 0.1 * k as f64)).collect::<Vec<_>>(),
            (0..5).map(|k| Complex64::new(1.0 / (k as f64 + 1.0), 0.0)).collect(),
        ];
        let state = QuantumRegisterState::stack(&blocks, 5).unwrap();
        let dir = std::env::temp_dir().join(format!("qwave-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let (csv, side) = state_files(&state);
        let path = dir.join("state.csv");
        fs::write(&path, csv).unwrap();
        fs::write(sidecar_path(&path), serde_json::to_vec(&side).unwrap()).unwrap();
        let back = read_state(&path).unwrap();
        fs::remove_dir_all(&dir).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, -1.5, 1e-300, 0.1 + 0.2, f64::MAX] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
