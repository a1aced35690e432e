//! File formats. Every writer re-reads what it wrote and compares, so a file
//! that does not round-trip is reported as a schema failure.
//!
//! Floats are written with Rust's `Display`, the shortest representation that
//! parses back to the same `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{ConvergenceRow, HeatmapSlice, PosteriorSummary, Roc};
use crate::error::{Error, Result};
use crate::lattice::{LatticeGraph, VoxelCoord};
use crate::model::{Dataset, DesignMatrix, PriorKind};
use crate::sampler::{ChainStatus, ChainTrace, StateSnapshot, SweepRecord};

fn schema(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_path_buf(), message: message.into() }
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn parse_f64(path: &Path, field: &str, row: usize, column: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| schema(path, format!("row {row}, column {column}: `{field}` is not a number")))
}

fn parse_usize(path: &Path, field: &str, row: usize, column: usize) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| schema(path, format!("row {row}, column {column}: `{field}` is not an integer")))
}

/// Reads a numeric table; a first row that is not entirely numeric is a header.
pub fn read_numeric_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (k, rec) in reader(path, false)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if k == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = rows.len() + 1;
        let values = rec
            .iter()
            .enumerate()
            .map(|(c, f)| parse_f64(path, f, row, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "{}: row {row} has {} fields, expected {w}",
                    path.display(),
                    values.len()
                )))
            }
            _ => {}
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Single-column CSV, optional header.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let rows = read_numeric_table(path)?;
    if rows.first().is_some_and(|r| r.len() != 1) {
        return Err(schema(path, "expected a single column"));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn write_vector(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record([header]).map_err(err)?;
    for v in values {
        w.write_record([v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    if !same_values(&read_vector(path)?, values) {
        return Err(schema(path, "vector does not round-trip"));
    }
    Ok(())
}

fn same_values(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
}

/// Dense CSV, one row per subject, optional header.
pub fn read_design_csv(path: &Path) -> Result<DesignMatrix<f64>> {
    let rows = read_numeric_table(path)?;
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    DesignMatrix::from_row_major(n, p, &flat)
}

pub fn write_design_csv(path: &Path, x: &DesignMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    let header: Vec<String> = (1..=x.n_cols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(err)?;
    for i in 0..x.n_rows() {
        w.write_record((0..x.n_cols()).map(|j| x.get(i, j).to_string())).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    if read_design_csv(path)? != *x {
        return Err(schema(path, "design matrix does not round-trip"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    RowMajor,
    ColumnMajor,
}

/// Sidecar of a binary design matrix of little-endian f64 values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarySidecar {
    pub n: usize,
    pub p: usize,
    pub layout: Layout,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn f64_le(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
}

pub fn read_design_bin(path: &Path) -> Result<DesignMatrix<f64>> {
    let side: BinarySidecar = read_json(&sidecar_path(path))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != side.n * side.p * 8 {
        return Err(Error::DimensionMismatch(format!(
            "{}: {} bytes for a {}x{} matrix",
            path.display(),
            bytes.len(),
            side.n,
            side.p
        )));
    }
    let values = f64_le(&bytes);
    match side.layout {
        Layout::ColumnMajor => DesignMatrix::from_column_major(side.n, side.p, values),
        Layout::RowMajor => DesignMatrix::from_row_major(side.n, side.p, &values),
    }
}

pub fn write_design_bin(path: &Path, x: &DesignMatrix<f64>) -> Result<()> {
    let bytes: Vec<u8> = x.as_column_major().iter().flat_map(|v| v.to_le_bytes()).collect();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = BinarySidecar { n: x.n_rows(), p: x.n_cols(), layout: Layout::ColumnMajor };
    write_json(&sidecar_path(path), &side)?;
    if read_design_bin(path)? != *x {
        return Err(schema(path, "binary design does not round-trip"));
    }
    Ok(())
}

/// Reads `.bin` (with sidecar) or CSV by extension.
pub fn read_design(path: &Path) -> Result<DesignMatrix<f64>> {
    if path.extension().is_some_and(|e| e == "bin") {
        read_design_bin(path)
    } else {
        read_design_csv(path)
    }
}

/// Coordinate CSV with header `j,d1,d2[,d3]`; j runs 1..p in column order.
pub fn read_coords(path: &Path) -> Result<LatticeGraph> {
    let mut rdr = reader(path, true)?;
    let header: Vec<String> = rdr.headers().map_err(|e| Error::csv(path, e))?.iter().map(String::from).collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["j", "d1", "d2"] => 2,
        ["j", "d1", "d2", "d3"] => 3,
        _ => return Err(schema(path, format!("expected header j,d1,d2[,d3], found {}", header.join(",")))),
    };
    let mut coords = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = k + 1;
        if rec.len() != dim + 1 {
            return Err(schema(path, format!("row {row} has {} fields", rec.len())));
        }
        let j = parse_usize(path, &rec[0], row, 1)?;
        if j != row {
            return Err(schema(path, format!("row {row} has j = {j}; voxels must be listed in column order")));
        }
        let d: Vec<u32> = (1..=dim)
            .map(|c| parse_usize(path, &rec[c], row, c + 1).map(|v| v as u32))
            .collect::<Result<_>>()?;
        coords.push(if dim == 3 { VoxelCoord::new(d[0], d[1], d[2]) } else { VoxelCoord::planar(d[0], d[1]) });
    }
    LatticeGraph::from_coords(dim, coords)
}

pub fn write_coords(path: &Path, graph: &LatticeGraph) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    if graph.dim() == 3 {
        w.write_record(["j", "d1", "d2", "d3"]).map_err(err)?;
    } else {
        w.write_record(["j", "d1", "d2"]).map_err(err)?;
    }
    for (j, c) in graph.coords().iter().enumerate() {
        let mut rec = vec![(j + 1).to_string(), c.d1.to_string(), c.d2.to_string()];
        if graph.dim() == 3 {
            rec.push(c.d3.to_string());
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    if read_coords(path)?.coords() != graph.coords() {
        return Err(schema(path, "coordinates do not round-trip"));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub y: PathBuf,
    pub x: PathBuf,
    pub coords: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

/// Loads and validates a dataset. Without coordinates the voxels are laid
/// on a 1×p strip, which only the i.i.d. priors accept.
pub fn load_dataset(paths: &DatasetPaths, need_coords: bool) -> Result<Dataset<f64>> {
    let y = read_vector(&paths.y)?;
    let x = read_design(&paths.x)?;
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "Y has {} rows but X has {}",
            y.len(),
            x.n_rows()
        )));
    }
    let graph = match &paths.coords {
        Some(path) => read_coords(path)?,
        None if need_coords => return Err(Error::MissingCoordinates),
        None => LatticeGraph::grid(&[x.n_cols().max(1), 1])?,
    };
    if graph.len() != x.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns but the coordinate file lists {} voxels",
            x.n_cols(),
            graph.len()
        )));
    }
    let truth = paths.truth.as_deref().map(read_vector).transpose()?;
    Dataset::new(y, x, graph, truth)
}

/// Writes `y.csv`, `x.bin` (+ sidecar), `coords.csv` and, when present, `truth.csv`.
pub fn write_dataset(dir: &Path, data: &Dataset<f64>) -> Result<DatasetPaths> {
    let paths = DatasetPaths {
        y: dir.join("y.csv"),
        x: dir.join("x.bin"),
        coords: Some(dir.join("coords.csv")),
        truth: data.truth.as_ref().map(|_| dir.join("truth.csv")),
    };
    write_vector(&paths.y, "y", &data.y)?;
    write_design_bin(&paths.x, &data.x)?;
    write_coords(paths.coords.as_deref().expect("set above"), &data.graph)?;
    if let (Some(path), Some(truth)) = (&paths.truth, &data.truth) {
        write_vector(path, "eta", truth)?;
    }
    Ok(paths)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain_id: usize,
    pub seed: u64,
    pub stream: u64,
    pub prior: PriorKind,
    pub iterations_run: usize,
    pub burn_in: usize,
    pub kept: usize,
    pub batch_size: usize,
    pub status: ChainStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatesSidecar {
    pub count: usize,
    pub p: usize,
    /// Per-record layout, little-endian throughout.
    pub record: String,
}

const STATE_RECORD: &str = "iteration: u64, gamma: u8[p], eta: f64[p]";

pub fn chain_dir(root: &Path, chain_id: usize) -> PathBuf {
    root.join(format!("chain_{chain_id}"))
}

/// Writes one chain's trace directory and verifies it reads back identically.
/// Wall-clock timing is left to the run manifest so that trace files depend
/// only on the seed.
pub fn write_trace(dir: &Path, trace: &ChainTrace<f64>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = ChainMeta {
        chain_id: trace.chain_id,
        seed: trace.seed,
        stream: trace.chain_id as u64,
        prior: trace.prior,
        iterations_run: trace.iterations_run,
        burn_in: trace.burn_in,
        kept: trace.kept,
        batch_size: trace.batch_size,
        status: trace.status.clone(),
    };
    write_json(&dir.join("chain.json"), &meta)?;

    let path = dir.join("inclusion_counts.csv");
    let mut w = writer(&path)?;
    let err = |p: &Path, e| Error::csv(p, e);
    w.write_record(["j", "count", "sweeps", "eta_sum"]).map_err(|e| err(&path, e))?;
    for (j, (&c, e)) in trace.inclusion_counts.iter().zip(&trace.eta_sum).enumerate() {
        w.write_record([(j + 1).to_string(), c.to_string(), trace.kept.to_string(), e.to_string()])
            .map_err(|e| err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("scalars.csv");
    let mut w = writer(&path)?;
    w.write_record(["iteration", "r2", "model_size", "n_clusters", "sigma2"]).map_err(|e| err(&path, e))?;
    for s in &trace.scalars {
        w.write_record([
            s.iteration.to_string(),
            s.r2.to_string(),
            s.model_size.to_string(),
            s.n_clusters.to_string(),
            s.sigma2.to_string(),
        ])
        .map_err(|e| err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("batches.csv");
    let mut w = writer(&path)?;
    w.write_record(["batch", "j", "count"]).map_err(|e| err(&path, e))?;
    for (b, counts) in trace.inclusion_batches.iter().enumerate() {
        for (j, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            w.write_record([(b + 1).to_string(), (j + 1).to_string(), c.to_string()]).map_err(|e| err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    if !trace.states.is_empty() {
        let p = trace.inclusion_counts.len();
        let mut bytes = Vec::with_capacity(trace.states.len() * (8 + 9 * p));
        for s in &trace.states {
            bytes.extend_from_slice(&(s.iteration as u64).to_le_bytes());
            bytes.extend(s.gamma.iter().map(|&g| g as u8));
            bytes.extend(s.eta.iter().flat_map(|v| v.to_le_bytes()));
        }
        let path = dir.join("states.bin");
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let side = StatesSidecar { count: trace.states.len(), p, record: STATE_RECORD.into() };
        write_json(&sidecar_path(&path), &side)?;
    }

    let back = read_trace(dir)?;
    if !same_trace(&back, trace) {
        return Err(schema(dir, "trace does not round-trip"));
    }
    Ok(())
}

fn same_trace(a: &ChainTrace<f64>, b: &ChainTrace<f64>) -> bool {
    let scalars = |t: &ChainTrace<f64>| -> Vec<(usize, u64, usize, usize, u64)> {
        t.scalars
            .iter()
            .map(|s| (s.iteration, s.r2.to_bits(), s.model_size, s.n_clusters, s.sigma2.to_bits()))
            .collect()
    };
    a.chain_id == b.chain_id
        && a.kept == b.kept
        && a.status == b.status
        && a.inclusion_counts == b.inclusion_counts
        && same_values(&a.eta_sum, &b.eta_sum)
        && (scalars(a) == scalars(b) || a.scalars.iter().any(|s| s.r2.is_nan()))
        && a.inclusion_batches == b.inclusion_batches
        && a.states == b.states
}

pub fn read_trace(dir: &Path) -> Result<ChainTrace<f64>> {
    let meta: ChainMeta = read_json(&dir.join("chain.json"))?;

    let path = dir.join("inclusion_counts.csv");
    let mut counts = Vec::new();
    let mut eta_sum = Vec::new();
    for (k, rec) in reader(&path, true)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let row = k + 1;
        if rec.len() != 4 || parse_usize(&path, &rec[0], row, 1)? != row {
            return Err(schema(&path, format!("malformed row {row}")));
        }
        counts.push(parse_usize(&path, &rec[1], row, 2)? as u64);
        if parse_usize(&path, &rec[2], row, 3)? != meta.kept {
            return Err(schema(&path, format!("row {row}: sweeps disagree with chain.json")));
        }
        eta_sum.push(parse_f64(&path, &rec[3], row, 4)?);
    }
    let p = counts.len();

    let path = dir.join("scalars.csv");
    let mut scalars = Vec::new();
    for (k, rec) in reader(&path, true)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let row = k + 1;
        if rec.len() != 5 {
            return Err(schema(&path, format!("row {row} has {} fields", rec.len())));
        }
        scalars.push(SweepRecord {
            iteration: parse_usize(&path, &rec[0], row, 1)?,
            r2: parse_f64(&path, &rec[1], row, 2)?,
            model_size: parse_usize(&path, &rec[2], row, 3)?,
            n_clusters: parse_usize(&path, &rec[3], row, 4)?,
            sigma2: parse_f64(&path, &rec[4], row, 5)?,
        });
    }

    let path = dir.join("batches.csv");
    let mut batches: Vec<Vec<u32>> = Vec::new();
    let n_batches = meta.kept.checked_div(meta.batch_size).unwrap_or(0);
    batches.resize(n_batches, vec![0; p]);
    for (k, rec) in reader(&path, true)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let row = k + 1;
        let b = parse_usize(&path, &rec[0], row, 1)?;
        let j = parse_usize(&path, &rec[1], row, 2)?;
        if b == 0 || b > n_batches || j == 0 || j > p {
            return Err(schema(&path, format!("row {row}: batch {b}, voxel {j} out of range")));
        }
        batches[b - 1][j - 1] = parse_usize(&path, &rec[2], row, 3)? as u32;
    }

    let path = dir.join("states.bin");
    let mut states = Vec::new();
    if path.exists() {
        let side: StatesSidecar = read_json(&sidecar_path(&path))?;
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let rec = 8 + 9 * side.p;
        if side.p != p || bytes.len() != side.count * rec {
            return Err(schema(&path, "size disagrees with the sidecar"));
        }
        for chunk in bytes.chunks_exact(rec) {
            let iteration = u64::from_le_bytes(chunk[..8].try_into().expect("8 bytes")) as usize;
            let gamma = chunk[8..8 + p].iter().map(|&g| g != 0).collect();
            let eta = f64_le(&chunk[8 + p..]);
            states.push(StateSnapshot { iteration, gamma, eta });
        }
    }

    Ok(ChainTrace {
        chain_id: meta.chain_id,
        seed: meta.seed,
        prior: meta.prior,
        iterations_run: meta.iterations_run,
        burn_in: meta.burn_in,
        kept: meta.kept,
        inclusion_counts: counts,
        eta_sum,
        scalars,
        batch_size: meta.batch_size,
        inclusion_batches: batches,
        states,
        status: meta.status,
        elapsed: Duration::ZERO,
    })
}

/// Reads every `chain_*` directory under `root`, ordered by chain id.
pub fn read_traces(root: &Path) -> Result<Vec<ChainTrace<f64>>> {
    let mut dirs: Vec<(usize, PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("chain_").and_then(|k| k.parse().ok()).map(|k| (k, e.path()))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::EmptyTraces);
    }
    dirs.iter().map(|(_, d)| read_trace(d)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub j: usize,
    pub coord: VoxelCoord,
    pub inclusion_prob: f64,
    pub eta_hat: f64,
    pub rank: usize,
}

pub fn write_summary(path: &Path, summary: &PosteriorSummary<f64>, graph: &LatticeGraph) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["j", "d1", "d2", "d3", "inclusion_prob", "eta_hat", "rank"]).map_err(err)?;
    for j in 0..graph.len() {
        let c = graph.coord(j);
        w.write_record([
            (j + 1).to_string(),
            c.d1.to_string(),
            c.d2.to_string(),
            c.d3.to_string(),
            summary.inclusion_prob[j].to_string(),
            summary.eta_hat[j].to_string(),
            summary.rank[j].to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    let back = read_summary(path)?;
    let ok = back.len() == graph.len()
        && back.iter().enumerate().all(|(j, r)| {
            r.coord == graph.coord(j)
                && r.inclusion_prob.to_bits() == summary.inclusion_prob[j].to_bits()
                && r.eta_hat.to_bits() == summary.eta_hat[j].to_bits()
                && r.rank == summary.rank[j]
        });
    if !ok {
        return Err(schema(path, "summary does not round-trip"));
    }
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for (k, rec) in reader(path, true)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = k + 1;
        if rec.len() != 7 {
            return Err(schema(path, format!("row {row} has {} fields", rec.len())));
        }
        let d = |c: usize| parse_usize(path, &rec[c], row, c + 1).map(|v| v as u32);
        rows.push(SummaryRow {
            j: parse_usize(path, &rec[0], row, 1)?,
            coord: VoxelCoord::new(d(1)?, d(2)?, d(3)?),
            inclusion_prob: parse_f64(path, &rec[4], row, 5)?,
            eta_hat: parse_f64(path, &rec[5], row, 6)?,
            rank: parse_usize(path, &rec[6], row, 7)?,
        });
    }
    Ok(rows)
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["statistic", "r_hat"]).map_err(err)?;
    for r in rows {
        w.write_record([r.statistic.clone(), r.r_hat.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    let mut back = Vec::new();
    for (k, rec) in reader(path, true)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        back.push((rec[0].to_string(), parse_f64(path, &rec[1], k + 1, 2)?));
    }
    let ok = back.len() == rows.len()
        && back.iter().zip(rows).all(|(b, r)| b.0 == r.statistic && same_values(&[b.1], &[r.r_hat]));
    if !ok {
        return Err(schema(path, "convergence table does not round-trip"));
    }
    Ok(())
}

pub fn write_roc(path: &Path, roc: &Roc<f64>) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["fpr", "tpr"]).map_err(err)?;
    for (f, t) in &roc.points {
        w.write_record([f.to_string(), t.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    let back = read_numeric_table(path)?;
    let ok = back.len() == roc.points.len()
        && back.iter().zip(&roc.points).all(|(b, p)| b[0].to_bits() == p.0.to_bits() && b[1].to_bits() == p.1.to_bits());
    if !ok {
        return Err(schema(path, "ROC table does not round-trip"));
    }
    Ok(())
}

/// Grid CSV: header `row\col,1..cols`, one line per row, empty cells off-mask.
pub fn write_heatmap(path: &Path, slice: &HeatmapSlice) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    let mut header = vec![format!("d{}\\d{}", slice.row_axis, slice.col_axis)];
    header.extend((1..=slice.cols).map(|c| c.to_string()));
    w.write_record(&header).map_err(err)?;
    for r in 0..slice.rows {
        let mut rec = vec![(r + 1).to_string()];
        rec.extend((0..slice.cols).map(|c| slice.cells[r * slice.cols + c].map_or(String::new(), |v| v.to_string())));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    let mut cells = Vec::new();
    for (k, rec) in reader(path, true)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for c in 1..rec.len() {
            cells.push(if rec[c].is_empty() { None } else { Some(parse_usize(path, &rec[c], k + 1, c + 1)?) });
        }
    }
    if cells != slice.cells {
        return Err(schema(path, "heatmap does not round-trip"));
    }
    Ok(())
}

/// Writes a small UTF-8 text file through a buffered writer.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DpConfig, IsingParams};
    use crate::sampler::{run_chain, SamplerConfig};
    use crate::simgen::{generate_scenario, Scenario, ScenarioSpec};

    fn small() -> Dataset<f64> {
        let spec = ScenarioSpec { n: 12, ..ScenarioSpec::scaled(Scenario::One, 3) };
        generate_scenario(&spec, &mut crate::sampler::chain_rng(1, 0)).unwrap().data
    }

    #[test]
    fn dataset_round_trip_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let data = small();
        let paths = write_dataset(dir.path(), &data).unwrap();
        let back = load_dataset(&paths, true).unwrap();
        assert_eq!(back.x, data.x);
        assert_eq!(back.y, data.y);
        assert_eq!(back.truth, data.truth);
        assert_eq!(back.graph.coords(), data.graph.coords());
        let csv_path = dir.path().join("x.csv");
        write_design_csv(&csv_path, &data.x).unwrap();
        assert_eq!(read_design(&csv_path).unwrap(), data.x);
    }

    #[test]
    fn length_mismatch_and_missing_coords() {
        let dir = tempfile::tempdir().unwrap();
        let data = small();
        let mut paths = write_dataset(dir.path(), &data).unwrap();
        write_vector(&dir.path().join("short.csv"), "y", &data.y[..5]).unwrap();
        let short = DatasetPaths { y: dir.path().join("short.csv"), ..paths.clone() };
        assert!(matches!(load_dataset(&short, true), Err(Error::DimensionMismatch(_))));
        paths.coords = None;
        assert!(matches!(load_dataset(&paths, true), Err(Error::MissingCoordinates)));
        assert_eq!(load_dataset(&paths, false).unwrap().p(), 27);
    }

    #[test]
    fn nan_cell_reported_by_position() {
        let dir = tempfile::tempdir().unwrap();
        let x = dir.path().join("x.csv");
        let mut text = String::from("a,b,c\n");
        for i in 1..=4 {
            text += &if i == 3 { "1,NaN,2\n".to_string() } else { format!("{i},1,2\n") };
        }
        fs::write(&x, text).unwrap();
        fs::write(dir.path().join("y.csv"), "1\n2\n3\n4\n").unwrap();
        let paths = DatasetPaths { y: dir.path().join("y.csv"), x, coords: None, truth: None };
        let err = load_dataset(&paths, false).unwrap_err();
        assert!(err.to_string().contains("row 3, column 2"), "{err}");
    }

    #[test]
    fn trace_round_trip_with_states() {
        let dir = tempfile::tempdir().unwrap();
        let data = small();
        let config = SamplerConfig {
            iterations: 40,
            burn_in: 10,
            ising: IsingParams { a: -1.0, b: 0.2 },
            dp: DpConfig { h: 4, ..DpConfig::default() },
            record_states: true,
            thin: 3,
            inclusion_batches: 6,
            ..SamplerConfig::default()
        };
        let trace = run_chain(&data, &config, 2).unwrap();
        let d = chain_dir(dir.path(), 2);
        write_trace(&d, &trace).unwrap();
        let back = read_trace(&d).unwrap();
        assert!(same_trace(&back, &trace));
        assert_eq!(back.states.len(), 10);
        assert_eq!(read_traces(dir.path()).unwrap().len(), 1);
    }

    #[test]
    fn bad_coordinate_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "voxel,x,y\n1,1,1\n").unwrap();
        assert!(matches!(read_coords(&path), Err(Error::Schema { .. })));
        fs::write(&path, "j,d1,d2\n1,1,1\n3,2,1\n").unwrap();
        assert!(matches!(read_coords(&path), Err(Error::Schema { .. })));
    }

    #[test]
    fn shortest_float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(v.to_string().parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(0.1f64.to_string(), "0.1");
    }
}
