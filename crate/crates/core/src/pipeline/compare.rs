//! The `compare` command: box summaries per model and the spread of period means across models.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::PipelineError;
use crate::metrics::Metric;
use crate::stats::box_summary;

pub const COMPARISON_FILE: &str = "comparison.csv";

struct RunTable {
    label: String,
    model: String,
    scenarios: Vec<String>,
    alphas: Vec<f64>,
    /// (scenario, alpha index) → annual K1..K4
    values: BTreeMap<(String, usize), Vec<[f64; 4]>>,
}

fn read_run(dir: &Path) -> Result<RunTable, PipelineError> {
    let path = dir.join("metrics_annual.csv");
    let bad = |msg: String| PipelineError::Config(format!("{}: {msg}", path.display()));
    let file = File::open(&path).map_err(|e| PipelineError::io(&path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let expected = ["model", "scenario", "alpha", "year", "K1", "K2", "K3", "K4"];
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(expected) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut table = RunTable {
        label: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string()),
        model: String::new(),
        scenarios: Vec::new(),
        alphas: Vec::new(),
        values: BTreeMap::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| record[i].parse::<f64>().map_err(|e| bad(format!("field {:?}: {e}", &record[i])));
        if table.model.is_empty() {
            table.model = record[0].to_string();
        }
        let scenario = record[1].to_string();
        if !table.scenarios.contains(&scenario) {
            table.scenarios.push(scenario.clone());
        }
        let alpha = num(2)?;
        let a = match table.alphas.iter().position(|&x| x == alpha) {
            Some(a) => a,
            None => {
                table.alphas.push(alpha);
                table.alphas.len() - 1
            }
        };
        let k = [num(4)?, num(5)?, num(6)?, num(7)?];
        table.values.entry((scenario, a)).or_default().push(k);
    }
    if table.values.is_empty() {
        return Err(bad("no metric rows".into()));
    }
    Ok(table)
}

/// Writes [`COMPARISON_FILE`] into `out` and returns its row count.
///
/// Rows are ordered by metric, scenario, alpha and run. The period mean is
/// the mean of all annual values of the run; the cross-model spread is the
/// range of period means over runs.
pub fn cmd_compare(runs: &[PathBuf], out: &Path) -> Result<usize, PipelineError> {
    if runs.len() < 2 {
        return Err(PipelineError::Config(format!("compare needs at least 2 run directories, got {}", runs.len())));
    }
    let tables = runs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
    let first = &tables[0];
    for t in &tables[1..] {
        if t.alphas != first.alphas {
            return Err(PipelineError::GridMismatch(format!(
                "{} uses alphas {:?}, {} uses {:?}",
                first.label, first.alphas, t.label, t.alphas
            )));
        }
        if t.scenarios != first.scenarios {
            return Err(PipelineError::GridMismatch(format!(
                "{} covers scenarios {:?}, {} covers {:?}",
                first.label, first.scenarios, t.label, t.scenarios
            )));
        }
    }
    fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let path = out.join(COMPARISON_FILE);
    let io = |e| PipelineError::io(&path, e);
    let mut w = BufWriter::new(File::create(&path).map_err(io)?);
    writeln!(w, "metric,scenario,alpha,model,run,min,q1,median,q3,max,period_mean,cross_model_spread").map_err(io)?;
    let mut rows = 0;
    for (j, metric) in Metric::ALL.iter().enumerate() {
        for scenario in &first.scenarios {
            for (a, alpha) in first.alphas.iter().enumerate() {
                let key = (scenario.clone(), a);
                let per_run: Vec<Vec<f64>> = tables
                    .iter()
                    .map(|t| t.values.get(&key).map(|v| v.iter().map(|k| k[j]).collect()).unwrap_or_default())
                    .collect();
                if let Some(i) = per_run.iter().position(Vec::is_empty) {
                    return Err(PipelineError::GridMismatch(format!("{} has no rows for {scenario} at alpha {alpha}", tables[i].label)));
                }
                let means: Vec<f64> = per_run.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
                let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - means.iter().cloned().fold(f64::INFINITY, f64::min);
                for ((t, v), m) in tables.iter().zip(&per_run).zip(&means) {
                    let b = box_summary(v).expect("non-empty");
                    writeln!(
                        w,
                        "{},{scenario},{alpha},{},{},{},{},{},{},{},{m},{spread}",
                        metric.key(),
                        t.model,
                        t.label,
                        b.min,
                        b.q1,
                        b.median,
                        b.q3,
                        b.max
                    )
                    .map_err(io)?;
                    rows += 1;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(rows)
}
