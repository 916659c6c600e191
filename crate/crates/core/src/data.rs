//! Offline datasets and monotone trajectories drawn from them.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `n` offline `(x, z)` pairs with `n ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    values: Vec<f64>,
    name: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, inputs: Array2<f64>, values: Vec<f64>) -> Result<Self> {
        check_dim("dataset values", inputs.nrows(), values.len())?;
        if values.len() < 2 {
            return Err(Error::Config(format!(
                "dataset needs at least 2 rows, got {}",
                values.len()
            )));
        }
        if inputs.ncols() == 0 {
            return Err(Error::Config("dataset inputs have zero columns".into()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "value",
                stage: "dataset row",
                index,
            });
        }
        if let Some(index) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "input",
                stage: "dataset row",
                index: index / inputs.ncols(),
            });
        }
        Ok(Self {
            inputs,
            values,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs
            .row(i)
            .to_slice()
            .expect("dataset inputs are stored in standard layout")
    }

    /// Row indices ordered by value ascending, ties by index.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        order
    }

    /// Indices of the `k` largest values, best first.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut order = self.rank_order();
        order.reverse();
        order.truncate(k);
        order
    }

    /// Writes the `x0,…,x{d-1},z` CSV format read by [`load_dataset`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for j in 0..d {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("z\n");
        for (row, z) in self.inputs.rows().into_iter().zip(&self.values) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{z}\n"));
        }
        out
    }
}

fn parse_csv(name: &str, text: &str, expected_dim: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Ingest {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if header.len() < 2 {
        return Err(Error::Ingest {
            line: 1,
            reason: "header needs at least one input column and `z`".into(),
        });
    }
    let d = header.len() - 1;
    if let Some(expected) = expected_dim {
        if expected != d {
            return Err(Error::Ingest {
                line: 1,
                reason: format!("header has {d} input columns, expected {expected}"),
            });
        }
    }
    for (j, col) in header.iter().enumerate() {
        let want = if j < d { format!("x{j}") } else { "z".to_string() };
        if col != want {
            return Err(Error::Ingest {
                line: 1,
                reason: format!("column {j} is `{col}`, expected `{want}`"),
            });
        }
    }

    let mut flat = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Ingest {
                line,
                reason: format!("column {j}: `{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    line,
                    reason: format!("column {j}: non-finite value `{cell}`"),
                });
            }
            if j < d {
                flat.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if values.len() < 2 {
        return Err(Error::Ingest {
            line: values.len() as u64 + 1,
            reason: format!("dataset needs at least 2 rows, got {}", values.len()),
        });
    }
    let inputs = Array2::from_shape_vec((values.len(), d), flat)
        .expect("every accepted record has d inputs");
    Dataset::new(name, inputs, values)
}

/// Reads a CSV whose header is `x0,…,x{d-1},z`.
pub fn load_dataset(path: impl AsRef<Path>, d: usize) -> Result<Dataset> {
    read(path.as_ref(), Some(d))
}

/// Like [`load_dataset`] but takes the dimension from the header.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read(path.as_ref(), None)
}

fn read(path: &Path, d: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&name, &text, d)
}

pub fn dataset_from_csv_str(name: &str, text: &str, d: Option<usize>) -> Result<Dataset> {
    parse_csv(name, text, d)
}

/// Maps values through `(z - lo) / (hi - lo)`; inputs are untouched.
pub fn normalize_values(ds: &Dataset, lo: f64, hi: f64) -> Result<Dataset> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!(
            "normalization needs finite hi > lo, got lo={lo}, hi={hi}"
        )));
    }
    let span = hi - lo;
    let values = ds.values.iter().map(|z| (z - lo) / span).collect();
    Dataset::new(ds.name.clone(), ds.inputs.clone(), values)
}

/// Splits the rows into `bins` percentile slices of the value ranking.
///
/// Slice `k` holds consecutive ranks; when `bins` does not divide `n` the
/// earlier slices take one extra row each. Ties are broken by row index.
pub fn bin_by_percentile(ds: &Dataset, bins: usize) -> Result<Vec<Vec<usize>>> {
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    let n = ds.len();
    if bins > n {
        return Err(Error::Config(format!(
            "cannot split {n} rows into {bins} non-empty bins"
        )));
    }
    let order = ds.rank_order();
    let (base, extra) = (n / bins, n % bins);
    let mut out = Vec::with_capacity(bins);
    let mut start = 0;
    for k in 0..bins {
        let size = base + usize::from(k < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

/// Dataset rows with non-decreasing values, one per percentile bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub indices: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub traj_len: usize,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn count(&self) -> usize {
        self.trajectories.len()
    }
}

/// Precomputed bins for repeated trajectory sampling from one dataset.
#[derive(Clone, Debug)]
pub struct TrajectorySampler<'a> {
    ds: &'a Dataset,
    bins: Vec<Vec<usize>>,
}

impl<'a> TrajectorySampler<'a> {
    pub fn new(ds: &'a Dataset, traj_len: usize) -> Result<Self> {
        Ok(Self {
            ds,
            bins: bin_by_percentile(ds, traj_len)?,
        })
    }

    pub fn traj_len(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[Vec<usize>] {
        &self.bins
    }

    /// One uniformly chosen row from each bin, lowest bin first.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let indices: Vec<usize> = self
            .bins
            .iter()
            .map(|bin| bin[rng.random_range(0..bin.len())])
            .collect();
        let points = indices.iter().map(|&i| self.ds.input(i).to_vec()).collect();
        let values = indices.iter().map(|&i| self.ds.values[i]).collect();
        Trajectory {
            indices,
            points,
            values,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> TrajectorySet {
        TrajectorySet {
            traj_len: self.traj_len(),
            trajectories: (0..count).map(|_| self.sample_one(rng)).collect(),
        }
    }
}

/// Samples `count` monotone trajectories of length `traj_len`.
pub fn sample_trajectories(
    ds: &Dataset,
    traj_len: usize,
    count: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    if count == 0 {
        return Err(Error::Config("trajectory count must be at least 1".into()));
    }
    let sampler = TrajectorySampler::new(ds, traj_len)?;
    Ok(sampler.sample(count, &mut crate::seed::rng(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(values: &[f64]) -> Dataset {
        let inputs = Array2::from_shape_fn((values.len(), 1), |(i, _)| i as f64);
        Dataset::new("t", inputs, values.to_vec()).unwrap()
    }

    #[test]
    fn parses_minimal_csv() {
        let d = dataset_from_csv_str("t", "x0,z\n0,1\n1,2", Some(1)).unwrap();
        assert_eq!(d.inputs(), &array![[0.0], [1.0]]);
        assert_eq!(d.values(), &[1.0, 2.0]);
    }

    #[test]
    fn nan_cell_reports_line() {
        let err = dataset_from_csv_str("t", "x0,z\n0,1\n1,NaN\n2,3\n", Some(1)).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn ragged_and_garbage_rows_report_line() {
        let err = dataset_from_csv_str("t", "x0,x1,z\n0,1,2\n1,2\n", Some(2)).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 3, .. }), "{err:?}");
        let err = dataset_from_csv_str("t", "x0,z\n0,1\nabc,2\n", Some(1)).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn too_few_rows_rejected() {
        assert!(matches!(
            dataset_from_csv_str("t", "x0,z\n0,1\n", Some(1)),
            Err(Error::Ingest { .. })
        ));
    }

    #[test]
    fn wrong_dimension_rejected() {
        assert!(dataset_from_csv_str("t", "x0,z\n0,1\n1,2", Some(2)).is_err());
        assert!(dataset_from_csv_str("t", "a,z\n0,1\n1,2", None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let inputs = array![[0.1, -2.5e-7], [1e10, 3.0], [-0.0, 1.0 / 3.0]];
        let d = Dataset::new("r", inputs, vec![0.2, -1.0, 7.0]).unwrap();
        let back = dataset_from_csv_str("r", &d.to_csv(), Some(2)).unwrap();
        assert_eq!(back.inputs(), d.inputs());
        assert_eq!(back.values(), d.values());
    }

    #[test]
    fn bins_split_by_rank() {
        let bins = bin_by_percentile(&ds(&[0.1, 0.5, 0.3, 0.9]), 2).unwrap();
        assert_eq!(bins, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn tied_values_split_by_index() {
        let bins = bin_by_percentile(&ds(&[1.0; 4]), 2).unwrap();
        assert_eq!(bins, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn remainder_goes_to_early_bins() {
        let bins = bin_by_percentile(&ds(&[5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 9.0]), 3).unwrap();
        let sizes: Vec<usize> = bins.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn bin_errors() {
        let d = ds(&[1.0, 2.0, 3.0]);
        assert!(bin_by_percentile(&d, 4).is_err());
        assert!(bin_by_percentile(&d, 1).is_err());
    }

    #[test]
    fn two_bin_trajectories_pick_low_then_high() {
        let d = ds(&[0.1, 0.5, 0.3, 0.9]);
        let set = sample_trajectories(&d, 2, 50, 4).unwrap();
        for t in &set.trajectories {
            assert!([0.1, 0.3].contains(&t.values[0]));
            assert!([0.5, 0.9].contains(&t.values[1]));
            assert!(t.is_monotone());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = ds(&[0.4, 0.1, 0.8, 0.2, 0.6, 0.3]);
        let a = sample_trajectories(&d, 3, 3, 99).unwrap();
        let b = sample_trajectories(&d, 3, 3, 99).unwrap();
        assert_eq!(a, b);
        assert!(sample_trajectories(&d, 3, 0, 99).is_err());
    }

    #[test]
    fn normalization() {
        let d = ds(&[2.0, 4.0]);
        assert_eq!(normalize_values(&d, 2.0, 4.0).unwrap().values(), &[0.0, 1.0]);
        let unit = ds(&[0.0, 0.25, 1.0]);
        assert_eq!(normalize_values(&unit, 0.0, 1.0).unwrap().values(), unit.values());
        assert!(normalize_values(&d, 1.0, 1.0).is_err());
        assert!(normalize_values(&d, 2.0, 1.0).is_err());
    }

    #[test]
    fn trajectory_set_serializes() {
        let d = ds(&[0.1, 0.5, 0.3, 0.9]);
        let set = sample_trajectories(&d, 2, 2, 1).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: TrajectorySet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
}
