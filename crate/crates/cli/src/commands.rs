use std::path::{Path, PathBuf};

use gradmatch::bench::{
    builtin_oracle, check_bound_thm1, check_condition_thm1b, gen_offline_dataset, mnr, ood_gradient_error,
    percentile_scores, Oracle, PerturbedObjective, RankTable,
};
use gradmatch::data::read_dataset;
use gradmatch::search::batch_search;
use gradmatch::seed::{derive_seed, hex_digest, rng};
use gradmatch::training::{train, TrainError};
use gradmatch::{ArchitectureSpec, Dataset, Objective, SurrogateModel};
use rand::seq::index::sample;
use serde_json::{json, Map, Value};

use crate::config::{ModelSource, RunConfig, StartStrategy};
use crate::error::CliError;
use crate::output::{csv_table, read_json, OutDir, MANIFEST};

pub const DATASET_FILE: &str = "dataset.csv";
pub const MODEL_FILE: &str = "model.bin";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const PERCENTILES_FILE: &str = "percentiles.json";
pub const OOD_REPORT: &str = "ood_report.json";
pub const THM1_REPORT: &str = "bound_thm1.json";
pub const THM1B_REPORT: &str = "bound_thm1b.json";
pub const MNR_REPORT: &str = "mnr.json";
pub const REPORT_FILE: &str = "report.json";

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::input(format!("config key `{key}` is required for this command")))
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn gen_data(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let oracle = builtin_oracle(&cfg.data.oracle)?;
    let ds = gen_offline_dataset(&oracle, cfg.data.n, cfg.data.distribution, derive_seed(cfg.seed, "data"))?;
    ds.save(out.path(DATASET_FILE))?;
    Ok(format!("wrote {} points from `{}` to {}", ds.len(), oracle.name, DATASET_FILE))
}

fn without_wall_time(report: &gradmatch::TrainReport) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(report).map_err(|e| CliError::input(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.remove("wall_time_secs");
    }
    Ok(v)
}

fn write_train_outputs(out: &OutDir, report: &gradmatch::TrainReport) -> Result<(), CliError> {
    out.write_json(TRAIN_REPORT, &without_wall_time(report)?)?;
    out.write_json(TIMING_FILE, &json!({ "wall_time_secs": report.wall_time_secs }))?;
    let rows: Vec<Vec<String>> = (0..report.loss_total.len())
        .map(|e| {
            vec![
                e.to_string(),
                f(report.loss_total[e]),
                f(report.loss_gradient[e]),
                f(report.loss_regression[e]),
            ]
        })
        .collect();
    out.write_text("loss.csv", &csv_table(&["epoch", "total", "gradient", "regression"], &rows))
}

pub fn train_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let ds = read_dataset(required(&cfg.train.dataset, "train.dataset")?)?;
    let arch = ArchitectureSpec {
        input_dim: ds.dim(),
        hidden_layers: cfg.train.architecture.hidden_layers.clone(),
        activation: cfg.train.architecture.activation,
    };
    let mut options = cfg.train.options.clone();
    options.seed = derive_seed(cfg.seed, "train");
    match train(&ds, &arch, &options) {
        Ok((model, report)) => {
            model.save(out.path(MODEL_FILE))?;
            write_train_outputs(out, &report)?;
            Ok(format!(
                "trained {:?} surrogate for {} epochs, final loss {}",
                options.mode,
                options.epochs,
                report.loss_total.last().map_or("n/a".into(), |l| f(*l))
            ))
        }
        Err(TrainError::Diverged { epoch, detail, partial }) => {
            write_train_outputs(out, &partial)?;
            Err(CliError::Numeric(format!("training aborted at epoch {epoch}: {detail}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn select_starts(cfg: &RunConfig, ds: &Dataset) -> Result<Vec<usize>, CliError> {
    let k = cfg.search.starts.count;
    if k == 0 || k > ds.len() {
        return Err(CliError::input(format!(
            "search.starts.count must be in 1..={}, got {k}",
            ds.len()
        )));
    }
    Ok(match cfg.search.starts.strategy {
        StartStrategy::TopK => ds.top_k(k),
        StartStrategy::RandomK => {
            let mut r = rng(derive_seed(derive_seed(cfg.seed, "search"), "starts"));
            sample(&mut r, ds.len(), k).into_vec()
        }
    })
}

pub fn search_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let ds = read_dataset(required(&cfg.search.dataset, "search.dataset")?)?;
    let model = SurrogateModel::load_for_dim(required(&cfg.search.model, "search.model")?, ds.dim())?;
    let oracle = builtin_oracle(&cfg.search.oracle)?;
    if oracle.dim != ds.dim() {
        return Err(CliError::input(format!(
            "oracle `{}` has dimension {}, dataset has {}",
            oracle.name,
            oracle.dim,
            ds.dim()
        )));
    }
    let idx = select_starts(cfg, &ds)?;
    let starts: Vec<Vec<f64>> = idx.iter().map(|&i| ds.input(i).to_vec()).collect();
    let results = batch_search(&model, &starts, &cfg.search.options)?;

    let mut traces = Vec::new();
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for (k, (res, &i)) in results.iter().zip(&idx).enumerate() {
        match res {
            Ok(t) => {
                let score = oracle.normalize(oracle.value(t.last()));
                let mut row = vec![k.to_string(), i.to_string(), "ok".into()];
                row.extend(t.last().iter().map(|v| f(*v)));
                row.push(f(*t.values.last().expect("non-empty trace")));
                row.push(f(score));
                rows.push(row);
                entries.push(json!({ "start_index": i, "status": "ok", "iterates": t.iterates, "values": t.values }));
                traces.push(t.clone());
            }
            Err(e) => {
                let mut row = vec![k.to_string(), i.to_string(), "error".into()];
                row.extend(std::iter::repeat_n(String::new(), ds.dim() + 2));
                rows.push(row);
                entries.push(json!({ "start_index": i, "status": "error", "error": e.to_string() }));
            }
        }
    }
    out.write_json("traces.json", &entries)?;
    let mut header: Vec<String> = vec!["trace".into(), "start_index".into(), "status".into()];
    header.extend((0..ds.dim()).map(|j| format!("x{j}")));
    header.push("surrogate_value".into());
    header.push("score".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_text("final_designs.csv", &csv_table(&header, &rows))?;

    if traces.is_empty() {
        return Err(CliError::Numeric("every search start failed".into()));
    }
    let report = percentile_scores(&traces, &oracle, &cfg.search.percentiles)?;
    out.write_json(
        PERCENTILES_FILE,
        &json!({
            "oracle": report.oracle,
            "normalized": report.normalized,
            "starts": starts.len(),
            "failed": starts.len() - traces.len(),
            "entries": report.entries,
        }),
    )?;
    let prow: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| vec![f(e.percentile), f(e.score)])
        .collect();
    out.write_text("percentiles.csv", &csv_table(&["percentile", "score"], &prow))?;
    let summary: Vec<String> = report
        .entries
        .iter()
        .map(|e| format!("p{}={:.4}", e.percentile, e.score))
        .collect();
    Ok(format!("searched from {} starts: {}", starts.len(), summary.join(" ")))
}

pub fn ood_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let sec = &cfg.bench.ood;
    let oracle = builtin_oracle(&sec.oracle)?;
    let model = SurrogateModel::load_for_dim(required(&sec.model, "bench.ood.model")?, oracle.dim)?;
    let seed = derive_seed(derive_seed(cfg.seed, "bench"), "ood");
    let report = ood_gradient_error(&model, &oracle, &sec.alphas, sec.n_test, seed)?;
    out.write_json(OOD_REPORT, &report)?;
    let mut summary = Vec::new();
    for c in &report.curves {
        let rows: Vec<Vec<String>> = c
            .errors
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), f(*e)])
            .collect();
        out.write_text(&format!("ood_curve_alpha_{}.csv", c.alpha), &csv_table(&["rank", "error"], &rows))?;
        summary.push(vec![f(c.alpha), f(c.mean), f(c.median)]);
    }
    out.write_text("ood_summary.csv", &csv_table(&["alpha", "mean", "median"], &summary))?;
    Ok(format!("wrote {} OOD curves of {} points", report.curves.len(), report.n_test))
}

fn bound_model(source: &ModelSource, oracle: &Oracle) -> Result<Box<dyn Objective>, CliError> {
    Ok(match source {
        ModelSource::Oracle => Box::new(oracle.clone()),
        ModelSource::File { path } => Box::new(SurrogateModel::load_for_dim(path, oracle.dim)?),
        ModelSource::Perturbed {
            epsilon,
            frequency,
            phase,
        } => Box::new(PerturbedObjective::new(oracle.clone(), *epsilon, frequency.clone(), *phase)?),
    })
}

fn verdict(v: gradmatch::bench::Verdict) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn bound_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let sec = &cfg.bench.bound;
    let oracle = builtin_oracle(&sec.oracle)?;
    let model = bound_model(&sec.model, &oracle)?;
    let mut options = sec.options.clone();
    options.seed = derive_seed(derive_seed(cfg.seed, "bench"), "bound");
    let thm1 = check_bound_thm1(&oracle, model.as_ref(), &options)?;
    let thm1b = check_condition_thm1b(&oracle, model.as_ref(), &options)?;
    out.write_json(THM1_REPORT, &thm1)?;
    out.write_json(THM1B_REPORT, &thm1b)?;

    let rows: Vec<Vec<String>> = thm1
        .rows
        .iter()
        .map(|r| {
            vec![
                r.search_steps.to_string(),
                f(r.learning_rate),
                f(r.lhs),
                f(r.rhs),
                f(r.max_gradient_gap),
                verdict(r.verdict),
                f(r.remark_rhs),
                verdict(r.remark_verdict),
            ]
        })
        .collect();
    out.write_text(
        "bound_thm1.csv",
        &csv_table(
            &["m", "learning_rate", "lhs", "rhs", "max_gradient_gap", "verdict", "remark_rhs", "remark_verdict"],
            &rows,
        ),
    )?;
    let rows: Vec<Vec<String>> = thm1b
        .rows
        .iter()
        .map(|r| {
            vec![
                r.search_steps.to_string(),
                f(r.learning_rate),
                f(r.a),
                f(r.lipschitz_surrogate),
                f(r.max_value_gap),
                f(r.max_gradient_gap),
                f(r.rhs_thm1),
                f(r.rhs_stated),
                f(r.rhs_derived),
                r.threshold.map(f).unwrap_or_default(),
                verdict(r.condition),
            ]
        })
        .collect();
    out.write_text(
        "bound_thm1b.csv",
        &csv_table(
            &[
                "m",
                "learning_rate",
                "a",
                "lipschitz_surrogate",
                "max_value_gap",
                "max_gradient_gap",
                "rhs_thm1",
                "rhs_stated",
                "rhs_derived",
                "threshold",
                "condition",
            ],
            &rows,
        ),
    )?;
    let verdicts: Vec<String> = thm1
        .rows
        .iter()
        .map(|r| format!("m={} {}", r.search_steps, verdict(r.verdict)))
        .collect();
    Ok(format!("bound check on `{}`: {}", oracle.name, verdicts.join(", ")))
}

pub fn mnr_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    let sec = &cfg.bench.mnr;
    let table = RankTable::load(required(&sec.table, "bench.mnr.table")?)?;
    let target = mnr(&table, &sec.algorithm)?;
    let all = table
        .algorithms()
        .iter()
        .map(|a| mnr(&table, a))
        .collect::<gradmatch::Result<Vec<_>>>()?;
    out.write_json(MNR_REPORT, &json!({ "target": target, "tasks": table.tasks(), "all": all }))?;
    let rows: Vec<Vec<String>> = all
        .iter()
        .map(|r| {
            let ranks: Vec<String> = r.ranks.iter().map(usize::to_string).collect();
            vec![r.algorithm.clone(), f(r.mnr), ranks.join(" ")]
        })
        .collect();
    out.write_text("mnr.csv", &csv_table(&["algorithm", "mnr", "ranks"], &rows))?;
    Ok(format!("{} MNR = {:.3} (ranks {:?})", target.algorithm, target.mnr, target.ranks))
}

fn run_summary(dir: &Path) -> Result<Value, CliError> {
    let manifest = read_json(&dir.join(MANIFEST))?;
    let command = manifest["command"].as_str().unwrap_or_default().to_string();
    if manifest["status"] != "ok" {
        return Err(CliError::input(format!("run in {} did not complete", dir.display())));
    }
    let mut s = Map::new();
    match command.as_str() {
        "gen-data" => {
            let bytes = std::fs::read(dir.join(DATASET_FILE))
                .map_err(|e| CliError::input(format!("cannot read dataset in {}: {e}", dir.display())))?;
            let ds = read_dataset(dir.join(DATASET_FILE))?;
            s.insert("rows".into(), json!(ds.len()));
            s.insert("dim".into(), json!(ds.dim()));
            s.insert("sha256".into(), json!(hex_digest(&bytes)));
        }
        "train" => {
            let r = read_json(&dir.join(TRAIN_REPORT))?;
            s.insert("mode".into(), r["mode"].clone());
            s.insert("epochs".into(), json!(r["loss_total"].as_array().map_or(0, Vec::len)));
            s.insert("final_loss".into(), r["loss_total"].as_array().and_then(|a| a.last().cloned()).unwrap_or(Value::Null));
            s.insert("params_checksum".into(), r["params_checksum"].clone());
        }
        "search" => {
            let r = read_json(&dir.join(PERCENTILES_FILE))?;
            s.insert("starts".into(), r["starts"].clone());
            s.insert("failed".into(), r["failed"].clone());
            s.insert("percentiles".into(), r["entries"].clone());
        }
        "ood-eval" => {
            let r = read_json(&dir.join(OOD_REPORT))?;
            let medians: Vec<Value> = r["curves"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|c| json!({ "alpha": c["alpha"], "mean": c["mean"], "median": c["median"] }))
                .collect();
            s.insert("curves".into(), json!(medians));
        }
        "bound-check" => {
            let r = read_json(&dir.join(THM1_REPORT))?;
            let rows: Vec<Value> = r["rows"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|row| json!({ "m": row["search_steps"], "lhs": row["lhs"], "rhs": row["rhs"], "verdict": row["verdict"] }))
                .collect();
            s.insert("thm1".into(), json!(rows));
        }
        "mnr" => {
            let r = read_json(&dir.join(MNR_REPORT))?;
            s.insert("target".into(), r["target"].clone());
        }
        other => return Err(CliError::input(format!("cannot summarize `{other}` run in {}", dir.display()))),
    }
    Ok(json!({ "command": command, "summary": s }))
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&format!("{prefix}.{k}"), v, rows);
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, rows);
            }
        }
        Value::String(s) => rows.push(vec![prefix.to_string(), s.clone()]),
        other => rows.push(vec![prefix.to_string(), other.to_string()]),
    }
}

/// Summaries of earlier runs, free of paths and timings.
pub fn report_cmd(cfg: &RunConfig, out: &OutDir) -> Result<String, CliError> {
    if cfg.report.runs.is_empty() {
        return Err(CliError::input("config key `report.runs` must list at least one run directory"));
    }
    let runs = cfg
        .report
        .runs
        .iter()
        .map(|d| run_summary(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let cmd = r["command"].as_str().unwrap_or_default();
        flatten(&format!("{i}:{cmd}"), &r["summary"], &mut rows);
    }
    out.write_json(REPORT_FILE, &json!({ "runs": runs }))?;
    out.write_text("report.csv", &csv_table(&["key", "value"], &rows))?;
    Ok(format!("summarized {} runs", runs.len()))
}
