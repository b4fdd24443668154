//! On-disk artifacts: CSV tables, JSON metadata and the trajectory layout.
//!
//! CSVs are comma separated with LF endings, one `#` comment line naming the
//! scenario and seed, a header row, and floats written with 17 significant
//! digits so that a write/read round trip is exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elliptic::{EllipticSolution, EquationTag};
use crate::flow::{FlowState, RunMeta, SummaryRow, Trajectory};

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },
}

impl ArtifactError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, message: impl ToString) -> Self {
        Self::Parse { path: path.to_path_buf(), message: message.to_string() }
    }
}

/// JSON has no NaN or infinities; non-finite values are written as null and
/// read back as NaN.
pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Identifies the run that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub scenario: String,
    pub rng_seed: u64,
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn write_csv(path: &Path, stamp: &Stamp, table: &Table) -> Result<(), ArtifactError> {
    let mut buf = format!("# scenario={} rng_seed={}\n", stamp.scenario, stamp.rng_seed).into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(&table.header).map_err(|e| ArtifactError::parse(path, e))?;
        for row in &table.rows {
            w.write_record(row.iter().map(|&x| format_float(x))).map_err(|e| ArtifactError::parse(path, e))?;
        }
        w.flush().map_err(|e| ArtifactError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| ArtifactError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Table, ArtifactError> {
    let bytes = fs::read(path).map_err(|e| ArtifactError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes.as_slice());
    let header: Vec<String> =
        r.headers().map_err(|e| ArtifactError::parse(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ArtifactError::parse(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ArtifactError::parse(path, format!("row {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn require_columns(path: &Path, table: &Table, names: &[&str]) -> Result<Vec<Vec<f64>>, ArtifactError> {
    names
        .iter()
        .map(|n| table.column(n).ok_or_else(|| ArtifactError::parse(path, format!("missing column {n}"))))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ArtifactError::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| ArtifactError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(|e| ArtifactError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::parse(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<(), ArtifactError> {
    fs::create_dir_all(path).map_err(|e| ArtifactError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub t: f64,
    pub step_index: usize,
    pub file: String,
}

/// Contents of a trajectory's `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub n_dim: usize,
    pub k_radius: f64,
    pub run: RunMeta,
    pub checkpoints: Vec<CheckpointEntry>,
}

/// `checkpoint_k{k}.csv` for t = 2^k, otherwise `initial` or `final`.
pub fn checkpoint_file(t: f64, is_last: bool) -> String {
    if t == 0.0 {
        "checkpoint_initial.csv".into()
    } else if t >= 1.0 && t.log2().fract() == 0.0 {
        format!("checkpoint_k{}.csv", t.log2() as i64)
    } else if is_last {
        "checkpoint_final.csv".into()
    } else {
        format!("checkpoint_t{}.csv", format_float(t))
    }
}

pub const SUMMARY_HEADER: [&str; 6] = ["t", "max_u", "max_u_tilde", "min_Rt", "harnack_K", "max_R"];

pub fn write_trajectory(dir: &Path, traj: &Trajectory, stamp: &Stamp) -> Result<(), ArtifactError> {
    ensure_dir(dir)?;
    let mut summary = Table::new(&SUMMARY_HEADER);
    summary.rows = traj
        .summary
        .iter()
        .map(|r| vec![r.t, r.max_u, r.max_u_tilde, r.min_rt, r.harnack_k, r.max_r])
        .collect();
    write_csv(&dir.join("summary.csv"), stamp, &summary)?;
    let exponent = -(traj.n_dim as f64 - 2.0) / 4.0;
    let mut entries = Vec::with_capacity(traj.checkpoints.len());
    for (i, cp) in traj.checkpoints.iter().enumerate() {
        let file = checkpoint_file(cp.t, i + 1 == traj.checkpoints.len());
        let mut table = Table::new(&["r", "u", "u_tilde"]);
        let scale = if cp.t > 0.0 { cp.t.powf(exponent) } else { f64::NAN };
        table.rows = traj.radii.iter().zip(&cp.u).map(|(&r, &u)| vec![r, u, u * scale]).collect();
        write_csv(&dir.join(&file), stamp, &table)?;
        entries.push(CheckpointEntry { t: cp.t, step_index: cp.step_index, file });
    }
    let meta = TrajectoryMeta {
        stamp: stamp.clone(),
        n_dim: traj.n_dim,
        k_radius: traj.k_radius,
        run: traj.meta.clone(),
        checkpoints: entries,
    };
    write_json(&dir.join("meta.json"), &meta)
}

pub fn read_trajectory_meta(dir: &Path) -> Result<TrajectoryMeta, ArtifactError> {
    read_json(&dir.join("meta.json"))
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory, ArtifactError> {
    let meta = read_trajectory_meta(dir)?;
    let path = dir.join("summary.csv");
    let table = read_csv(&path)?;
    let cols = require_columns(&path, &table, &SUMMARY_HEADER)?;
    let summary = (0..table.rows.len())
        .map(|i| SummaryRow {
            t: cols[0][i],
            max_u: cols[1][i],
            max_u_tilde: cols[2][i],
            min_rt: cols[3][i],
            harnack_k: cols[4][i],
            max_r: cols[5][i],
        })
        .collect();
    let mut radii: Option<Vec<f64>> = None;
    let mut checkpoints = Vec::with_capacity(meta.checkpoints.len());
    for entry in &meta.checkpoints {
        let path = dir.join(&entry.file);
        let table = read_csv(&path)?;
        let mut cols = require_columns(&path, &table, &["r", "u"])?;
        let u = cols.pop().unwrap();
        let r = cols.pop().unwrap();
        match &radii {
            None => radii = Some(r),
            Some(prev) if *prev != r => return Err(ArtifactError::parse(&path, "radii differ from first checkpoint")),
            Some(_) => {}
        }
        checkpoints.push(FlowState { t: entry.t, u, step_index: entry.step_index });
    }
    let radii = radii.ok_or_else(|| ArtifactError::parse(&dir.join("meta.json"), "no checkpoints listed"))?;
    Ok(Trajectory { n_dim: meta.n_dim, radii, k_radius: meta.k_radius, summary, checkpoints, meta: meta.run })
}

/// Solution metadata stored next to its `(r, value)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub equation_tag: EquationTag,
    #[serde(with = "finite_or_null")]
    pub residual_sup: f64,
    #[serde(with = "finite_or_null")]
    pub decay_exponent: f64,
    pub newton_iters: usize,
}

pub fn tag_name(tag: EquationTag) -> &'static str {
    match tag {
        EquationTag::SteadyNeg => "steady_neg",
        EquationTag::HarmonicDecay => "harmonic_decay",
        EquationTag::CompactifiedU0 => "compactified_u0",
        EquationTag::PrescribeRho => "prescribe_rho",
    }
}

pub fn solution_paths(dir: &Path, tag: EquationTag) -> (PathBuf, PathBuf) {
    let base = format!("elliptic_{}", tag_name(tag));
    (dir.join(format!("{base}.csv")), dir.join(format!("{base}.json")))
}

pub fn write_solution(dir: &Path, radii: &[f64], sol: &EllipticSolution, stamp: &Stamp) -> Result<(), ArtifactError> {
    ensure_dir(dir)?;
    let (csv_path, json_path) = solution_paths(dir, sol.equation_tag);
    let mut table = Table::new(&["r", "value"]);
    table.rows = radii.iter().zip(&sol.values).map(|(&r, &v)| vec![r, v]).collect();
    write_csv(&csv_path, stamp, &table)?;
    let meta = SolutionMeta {
        stamp: stamp.clone(),
        equation_tag: sol.equation_tag,
        residual_sup: sol.residual_sup,
        decay_exponent: sol.decay_exponent,
        newton_iters: sol.newton_iters,
    };
    write_json(&json_path, &meta)
}

/// Reads a solution back; returns the radii alongside it.
pub fn read_solution(dir: &Path, tag: EquationTag) -> Result<(Vec<f64>, EllipticSolution), ArtifactError> {
    let (csv_path, json_path) = solution_paths(dir, tag);
    let meta: SolutionMeta = read_json(&json_path)?;
    let table = read_csv(&csv_path)?;
    let mut cols = require_columns(&csv_path, &table, &["r", "value"])?;
    let values = cols.pop().unwrap();
    let radii = cols.pop().unwrap();
    Ok((
        radii,
        EllipticSolution {
            values,
            residual_sup: meta.residual_sup,
            decay_exponent: meta.decay_exponent,
            newton_iters: meta.newton_iters,
            equation_tag: meta.equation_tag,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{make_background, CatalogEntry};
    use crate::flow::{run, FlowControls};
    use crate::grid::build_grid;
    use proptest::prelude::*;

    fn stamp() -> Stamp {
        Stamp { scenario: "unit".into(), rng_seed: 7 }
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let mut t = Table::new(&["x", "y"]);
        t.rows = vec![vec![1.0, -0.5], vec![1e-300, 3.0]];
        write_csv(&path, &stamp(), &t).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# scenario=unit rng_seed=7");
        assert_eq!(lines[1], "x,y");
        assert_eq!(lines[2], "1.0000000000000000e0,-5.0000000000000000e-1");
        assert_eq!(read_csv(&path).unwrap(), t);
    }

    #[test]
    fn corrupted_csv_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,y\n1.0,abc\n").unwrap();
        let err = read_csv(&path).unwrap_err();
        assert!(matches!(err, ArtifactError::Parse { .. }));
        assert!(err.to_string().contains("bad.csv"), "{err}");
        fs::write(&path, "x,y\n1.0\n").unwrap();
        assert!(read_csv(&path).unwrap_err().to_string().contains("bad.csv"));
    }

    #[test]
    fn trajectory_round_trip() {
        let g = build_grid(3, 256, 40.0, 1.05).unwrap();
        let bg = make_background(&g, &CatalogEntry::CurvatureWell { amplitude: 1.0, width: 3.0 }, 5.0).unwrap();
        let tr = run(&bg, 5.0, &FlowControls::default(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trajectory(dir.path(), &tr, &stamp()).unwrap();
        assert!(dir.path().join("checkpoint_k2.csv").exists());
        assert!(dir.path().join("checkpoint_final.csv").exists());
        assert_eq!(read_trajectory(dir.path()).unwrap(), tr);
        assert_eq!(read_trajectory_meta(dir.path()).unwrap().stamp, stamp());
    }

    #[test]
    fn solution_round_trip() {
        let sol = EllipticSolution {
            values: vec![1.5, 1.25, 1.0],
            residual_sup: 1e-12,
            decay_exponent: 0.97,
            newton_iters: 4,
            equation_tag: EquationTag::PrescribeRho,
        };
        let dir = tempfile::tempdir().unwrap();
        write_solution(dir.path(), &[0.0, 1.0, 2.0], &sol, &stamp()).unwrap();
        let (r, back) = read_solution(dir.path(), EquationTag::PrescribeRho).unwrap();
        assert_eq!(r, vec![0.0, 1.0, 2.0]);
        assert_eq!(back, sol);
        assert!(read_solution(dir.path(), EquationTag::SteadyNeg).is_err());
    }
}
