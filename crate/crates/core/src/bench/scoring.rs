//! Percentile scoring of search results and mean normalized rank.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::search::SearchTrace;

use super::oracle::Oracle;

pub const DEFAULT_PERCENTILES: [f64; 2] = [50.0, 100.0];

/// Nearest-rank percentile of an ascending slice: the element at rank
/// `max(1, ⌈P/100 · N⌉)`.
pub fn nearest_rank(sorted: &[f64], percentile: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::Config(format!("percentile must be in [0, 100], got {percentile}")));
    }
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileEntry {
    pub percentile: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileReport {
    pub oracle: String,
    pub normalized: bool,
    /// Ascending oracle scores of the final iterates.
    pub scores: Vec<f64>,
    pub entries: Vec<PercentileEntry>,
}

impl PercentileReport {
    pub fn get(&self, percentile: f64) -> Option<f64> {
        self.entries.iter().find(|e| e.percentile == percentile).map(|e| e.score)
    }
}

/// Oracle value at each trace's final iterate, normalized when the oracle has
/// a reference range.
pub fn percentile_scores(traces: &[SearchTrace], oracle: &Oracle, percentiles: &[f64]) -> Result<PercentileReport> {
    if traces.is_empty() {
        return Err(Error::Empty("search traces"));
    }
    let mut scores = traces
        .iter()
        .map(|t| {
            crate::error::check_dim("final iterate", oracle.dim, t.last().len())?;
            Ok(oracle.normalize(oracle.value(t.last())))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            quantity: "score",
            stage: "search trace",
            index: i,
        });
    }
    scores.sort_by(f64::total_cmp);
    let entries = percentiles
        .iter()
        .map(|&p| {
            Ok(PercentileEntry {
                percentile: p,
                score: nearest_rank(&scores, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PercentileReport {
        oracle: oracle.name.clone(),
        normalized: oracle.reference_min.is_some() && oracle.reference_max.is_some(),
        scores,
        entries,
    })
}

/// Algorithms × tasks score matrix; larger is better.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    algorithms: Vec<String>,
    tasks: Vec<String>,
    scores: Array2<f64>,
}

impl RankTable {
    pub fn new(algorithms: Vec<String>, tasks: Vec<String>, scores: Array2<f64>) -> Result<Self> {
        if algorithms.is_empty() || tasks.is_empty() {
            return Err(Error::Empty("rank table"));
        }
        crate::error::check_dim("rank table rows", algorithms.len(), scores.nrows())?;
        crate::error::check_dim("rank table columns", tasks.len(), scores.ncols())?;
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "score",
                stage: "rank table cell",
                index: i,
            });
        }
        Ok(Self {
            algorithms,
            tasks,
            scores,
        })
    }

    /// Header `algorithm,<task>...`, then one row per algorithm.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Ingest {
            line: 1,
            reason: e.to_string(),
        })?;
        let tasks: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut algorithms = Vec::new();
        let mut values = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let record = record.map_err(|e| Error::Ingest {
                line,
                reason: e.to_string(),
            })?;
            if record.len() != tasks.len() + 1 {
                return Err(Error::Ingest {
                    line,
                    reason: format!("expected {} fields, found {}", tasks.len() + 1, record.len()),
                });
            }
            algorithms.push(record[0].to_string());
            for field in record.iter().skip(1) {
                values.push(field.parse::<f64>().map_err(|e| Error::Ingest {
                    line,
                    reason: format!("`{field}`: {e}"),
                })?);
            }
        }
        let scores = Array2::from_shape_vec((algorithms.len(), tasks.len()), values)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(algorithms, tasks, scores)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    /// `1 + #{algorithms strictly better}` on each task.
    pub fn ranks(&self, algorithm: &str) -> Result<Vec<usize>> {
        let row = self
            .algorithms
            .iter()
            .position(|a| a == algorithm)
            .ok_or_else(|| Error::UnknownAlgorithm(algorithm.to_string()))?;
        Ok(self
            .scores
            .columns()
            .into_iter()
            .map(|col| 1 + col.iter().filter(|&&s| s > col[row]).count())
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnrResult {
    pub algorithm: String,
    pub ranks: Vec<usize>,
    pub mnr: f64,
}

/// Mean over tasks of `rank / #algorithms`.
pub fn mnr(table: &RankTable, target: &str) -> Result<MnrResult> {
    let ranks = table.ranks(target)?;
    let n = table.algorithms.len() as f64;
    let mnr = ranks.iter().map(|&r| r as f64 / n).sum::<f64>() / ranks.len() as f64;
    Ok(MnrResult {
        algorithm: target.to_string(),
        ranks,
        mnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_convention() {
        assert_eq!(nearest_rank(&[0.0, 1.0], 50.0).unwrap(), 0.0);
        assert_eq!(nearest_rank(&[0.0, 1.0], 100.0).unwrap(), 1.0);
        assert_eq!(nearest_rank(&[0.0, 1.0], 0.0).unwrap(), 0.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0], 50.0).unwrap(), 2.0);
        assert!(nearest_rank(&[], 50.0).is_err());
        assert!(nearest_rank(&[1.0], 101.0).is_err());
    }

    #[test]
    fn ties_share_best_rank() {
        let t = RankTable::from_csv_str("algorithm,t\nA,1.0\nB,2.0\nC,2.0\n").unwrap();
        assert_eq!(t.ranks("B").unwrap(), vec![1]);
        assert_eq!(t.ranks("C").unwrap(), vec![1]);
        assert_eq!(t.ranks("A").unwrap(), vec![3]);
    }

    #[test]
    fn first_everywhere() {
        let mut text = String::from("algorithm,t1,t2\n");
        for i in 0..10 {
            text.push_str(&format!("A{i},{i},{i}\n"));
        }
        let t = RankTable::from_csv_str(&text).unwrap();
        assert!((mnr(&t, "A9").unwrap().mnr - 0.1).abs() < 1e-15);
        assert!(matches!(mnr(&t, "Z"), Err(Error::UnknownAlgorithm(_))));
    }

    #[test]
    fn malformed_tables() {
        assert!(RankTable::from_csv_str("algorithm,t\nA,x\n").is_err());
        assert!(RankTable::from_csv_str("algorithm,t\nA,1,2\n").is_err());
        assert!(RankTable::from_csv_str("algorithm,t\n").is_err());
    }
}
