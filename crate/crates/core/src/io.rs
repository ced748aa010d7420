//! On-disk formats: headerless CSV matrices, packed little-endian binary,
//! JSON dataset manifests and surface sets.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{CurveSet, Grid};
use crate::model::FunctionalModel;

pub const SCHEMA_VERSION: u32 = 1;

/// Reads a headerless numeric CSV; rows are samples.
pub fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Format(format!("{}: row {}: '{s}' is not a number", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

/// Writes a matrix as headerless CSV with shortest round-trip formatting.
pub fn write_csv_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut line = String::new();
    for r in 0..m.nrows() {
        line.clear();
        for c in 0..m.ncols() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&m[(r, c)].to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `count` matrices of `rows x cols`, packed row-major as little-endian f64.
pub fn read_binary_matrices(path: &Path, count: usize, rows: usize, cols: usize) -> Result<Vec<DMatrix<f64>>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let expected = count * rows * cols * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(values
        .chunks(rows * cols)
        .take(count)
        .map(|chunk| DMatrix::from_row_slice(rows, cols, chunk))
        .collect())
}

/// Packs matrices row-major as little-endian f64.
pub fn write_binary_matrices(path: &Path, matrices: &[&DMatrix<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for m in matrices {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                w.write_all(&m[(r, c)].to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    /// One curve per sample.
    #[default]
    Functional,
    /// One scalar per sample.
    Scalar,
}

/// Sidecar describing a dataset on disk. Paths are relative to the
/// manifest's directory.
///
/// With `csv`, `features` lists one `n x m` file per feature. With `binary`
/// it holds a single file packing the `p` feature matrices in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub grid_start: f64,
    pub grid_end: f64,
    pub feature_names: Vec<String>,
    pub format: DataFormat,
    pub response_kind: ResponseKind,
    pub response: String,
    pub features: Vec<String>,
}

impl DatasetManifest {
    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.m, self.grid_start, self.grid_end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        if self.feature_names.len() != self.p {
            return Err(Error::Format(format!(
                "{} feature names for p = {}",
                self.feature_names.len(),
                self.p
            )));
        }
        let files = match self.format {
            DataFormat::Csv => self.p,
            DataFormat::Binary => 1,
        };
        if self.features.len() != files {
            return Err(Error::Format(format!(
                "{} feature files listed, expected {files}",
                self.features.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Curves(CurveSet),
    Scalar(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub grid: Grid,
    pub response: Response,
    pub features: Vec<CurveSet>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn check_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, manifest says {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Loads the dataset described by the manifest at `path`, or by `manifest.json`
/// inside `path` when it is a directory.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let path = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
    let manifest: DatasetManifest = read_json(&path)?;
    manifest.validate()?;
    let dir = base_dir(&path);
    let grid = manifest.grid()?;
    let (n, m, p) = (manifest.n, manifest.m, manifest.p);
    let resp_cols = match manifest.response_kind {
        ResponseKind::Functional => m,
        ResponseKind::Scalar => 1,
    };
    let (resp, feats) = match manifest.format {
        DataFormat::Csv => {
            let resp = read_csv_matrix(&dir.join(&manifest.response))?;
            let feats = manifest
                .features
                .iter()
                .map(|f| read_csv_matrix(&dir.join(f)))
                .collect::<Result<Vec<_>>>()?;
            (resp, feats)
        }
        DataFormat::Binary => {
            let resp = read_binary_matrices(&dir.join(&manifest.response), 1, n, resp_cols)?.remove(0);
            let feats = read_binary_matrices(&dir.join(&manifest.features[0]), p, n, m)?;
            (resp, feats)
        }
    };
    check_shape("response", &resp, n, resp_cols)?;
    let features = feats
        .into_iter()
        .enumerate()
        .map(|(j, f)| {
            check_shape(&format!("feature {j}"), &f, n, m)?;
            CurveSet::new(f, grid.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let response = match manifest.response_kind {
        ResponseKind::Functional => Response::Curves(CurveSet::new(resp, grid.clone())?),
        ResponseKind::Scalar => Response::Scalar(resp.iter().copied().collect()),
    };
    Ok(Dataset {
        manifest,
        grid,
        response,
        features,
    })
}

/// Writes a dataset under `dir` and returns the path of its manifest.
pub fn write_dataset(
    dir: &Path,
    response: &Response,
    features: &[CurveSet],
    names: &[String],
    format: DataFormat,
) -> Result<PathBuf> {
    let grid = features
        .first()
        .map(|f| f.grid().clone())
        .ok_or_else(|| Error::DimensionMismatch("no features to write".into()))?;
    if names.len() != features.len() {
        return Err(Error::DimensionMismatch("one name per feature is required".into()));
    }
    fs::create_dir_all(dir)?;
    let (resp_matrix, kind) = match response {
        Response::Curves(c) => (c.values().clone(), ResponseKind::Functional),
        Response::Scalar(v) => (DMatrix::from_column_slice(v.len(), 1, v), ResponseKind::Scalar),
    };
    let (response_file, feature_files) = match format {
        DataFormat::Csv => {
            fs::create_dir_all(dir.join("features"))?;
            write_csv_matrix(&dir.join("response.csv"), &resp_matrix)?;
            let files: Vec<String> = names.iter().map(|n| format!("features/{n}.csv")).collect();
            for (f, file) in features.iter().zip(&files) {
                write_csv_matrix(&dir.join(file), f.values())?;
            }
            ("response.csv".to_string(), files)
        }
        DataFormat::Binary => {
            write_binary_matrices(&dir.join("response.bin"), &[&resp_matrix])?;
            let refs: Vec<&DMatrix<f64>> = features.iter().map(|f| f.values()).collect();
            write_binary_matrices(&dir.join("features.bin"), &refs)?;
            ("response.bin".to_string(), vec!["features.bin".to_string()])
        }
    };
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        n: resp_matrix.nrows(),
        m: grid.len(),
        p: features.len(),
        grid_start: grid.start(),
        grid_end: grid.end(),
        feature_names: names.to_vec(),
        format,
        response_kind: kind,
        response: response_file,
        features: feature_files,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Index of a set of coefficient surfaces stored as `blocks/<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSet {
    pub schema_version: u32,
    pub p: usize,
    pub m: usize,
    pub grid_start: f64,
    pub grid_end: f64,
    /// Indices of the nonzero surfaces, increasing.
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    pub files: Vec<String>,
    pub intercept: Option<String>,
}

/// Writes the model's surfaces (rows `s`, columns `t`) and intercept under
/// `dir` with `surfaces.json` as index. `names` labels all `p` features.
pub fn write_surfaces(dir: &Path, model: &FunctionalModel, names: &[String]) -> Result<PathBuf> {
    if names.len() != model.p() {
        return Err(Error::DimensionMismatch("one name per feature is required".into()));
    }
    fs::create_dir_all(dir.join("blocks"))?;
    let mut files = Vec::new();
    for (&j, s) in model.selected().iter().zip(model.surfaces()) {
        let file = format!("blocks/{}.csv", names[j]);
        write_csv_matrix(&dir.join(&file), s)?;
        files.push(file);
    }
    let icpt = DMatrix::from_row_slice(1, model.intercept().len(), model.intercept());
    write_csv_matrix(&dir.join("intercept.csv"), &icpt)?;
    let grid = model.grid();
    let set = SurfaceSet {
        schema_version: SCHEMA_VERSION,
        p: model.p(),
        m: grid.len(),
        grid_start: grid.start(),
        grid_end: grid.end(),
        selected: model.selected().to_vec(),
        names: model.selected().iter().map(|&j| names[j].clone()).collect(),
        files,
        intercept: Some("intercept.csv".into()),
    };
    let path = dir.join("surfaces.json");
    write_json(&path, &set)?;
    Ok(path)
}

/// Reads a surface set written by [`write_surfaces`]; a missing intercept is zero.
pub fn read_surfaces(dir: &Path) -> Result<FunctionalModel> {
    let set: SurfaceSet = read_json(&dir.join("surfaces.json"))?;
    if set.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported schema version {}", set.schema_version)));
    }
    if set.files.len() != set.selected.len() {
        return Err(Error::Format("surface files do not match the selection".into()));
    }
    let grid = Grid::uniform(set.m, set.grid_start, set.grid_end)?;
    let surfaces = set
        .files
        .iter()
        .map(|f| {
            let s = read_csv_matrix(&dir.join(f))?;
            check_shape(f, &s, set.m, set.m)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let intercept = match &set.intercept {
        Some(f) => {
            let v = read_csv_matrix(&dir.join(f))?;
            check_shape(f, &v, 1, set.m)?;
            v.iter().copied().collect()
        }
        None => vec![0.0; set.m],
    };
    FunctionalModel::new(grid, set.p, set.selected, surfaces, intercept)
}

/// Reads any JSON document written by this crate.
pub fn read_json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    read_json(path)
}
