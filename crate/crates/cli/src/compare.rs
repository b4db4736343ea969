//! Aggregates summaries into `compare.csv`: mean and sample std of final regret per algorithm and environment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::output::{fmt_num, write_file};
use crate::CliError;

pub const COMPARE_HEADER: &str =
    "source,algo,env,seeds,mean_final_regret,std_final_regret,diff_vs_first,mean_regret_x,std_regret_x,mean_regret_y,std_regret_y";

/// The summary fields `compare` consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algo: String,
    pub env: String,
    pub seed: u64,
    pub final_regret: f64,
    pub regret_x: Option<f64>,
    pub regret_y: Option<f64>,
}

pub fn parse_summary(text: &str, origin: &str) -> Result<Vec<SummaryRow>, CliError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| CliError::Usage(format!("{origin}: empty summary")))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Usage(format!("{origin}: summary lacks column '{name}'")))
    };
    let (ia, ie, is, ir) = (col("algo")?, col("env")?, col("seed")?, col("final_regret")?);
    let ix = header.iter().position(|h| *h == "regret_x");
    let iy = header.iter().position(|h| *h == "regret_y");
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(CliError::Usage(format!("{origin}: line {} has {} fields, expected {}", n + 2, f.len(), header.len())));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            f[i].parse().map_err(|_| CliError::Usage(format!("{origin}: line {}: bad number '{}'", n + 2, f[i])))
        };
        let maybe = |i: Option<usize>| -> Result<Option<f64>, CliError> {
            match i {
                Some(i) if !f[i].is_empty() => num(i).map(Some),
                _ => Ok(None),
            }
        };
        rows.push(SummaryRow {
            algo: f[ia].to_string(),
            env: f[ie].to_string(),
            seed: f[is].parse().map_err(|_| CliError::Usage(format!("{origin}: line {}: bad seed", n + 2)))?,
            final_regret: num(ir)?,
            regret_x: maybe(ix)?,
            regret_y: maybe(iy)?,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub source: String,
    pub algo: String,
    pub env: String,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    /// Mean minus the mean of the same (algo, env) group in the first summary.
    pub diff_vs_first: Option<f64>,
    pub regret_x: Option<(f64, f64)>,
    pub regret_y: Option<(f64, f64)>,
}

fn stats(rows: &[&SummaryRow], pick: impl Fn(&SummaryRow) -> Option<f64>) -> Option<(f64, f64)> {
    let xs: Option<Vec<f64>> = rows.iter().map(|r| pick(r)).collect();
    xs.filter(|v| !v.is_empty()).map(|v| mean_std(&v))
}

/// Groups each summary by (algo, env), preserving first-appearance order.
pub fn aggregate(summaries: &[(String, Vec<SummaryRow>)]) -> Vec<CompareRow> {
    let mut out = Vec::new();
    let mut first_means: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (k, (source, rows)) in summaries.iter().enumerate() {
        let mut order: Vec<(String, String)> = Vec::new();
        for r in rows {
            let key = (r.algo.clone(), r.env.clone());
            if !order.contains(&key) {
                order.push(key);
            }
        }
        for key in order {
            let group: Vec<&SummaryRow> = rows.iter().filter(|r| r.algo == key.0 && r.env == key.1).collect();
            let regrets: Vec<f64> = group.iter().map(|r| r.final_regret).collect();
            let (mean, std) = mean_std(&regrets);
            if k == 0 {
                first_means.insert(key.clone(), mean);
            }
            out.push(CompareRow {
                source: source.clone(),
                diff_vs_first: first_means.get(&key).map(|m| mean - m),
                algo: key.0,
                env: key.1,
                seeds: group.len(),
                mean,
                std,
                regret_x: stats(&group, |r| r.regret_x),
                regret_y: stats(&group, |r| r.regret_y),
            });
        }
    }
    out
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let pair = |p: Option<(f64, f64)>| match p {
        Some((m, s)) => format!("{},{}", fmt_num(m), fmt_num(s)),
        None => ",".to_string(),
    };
    let mut s = String::from(COMPARE_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.source,
            r.algo,
            r.env,
            r.seeds,
            fmt_num(r.mean),
            fmt_num(r.std),
            r.diff_vs_first.map(fmt_num).unwrap_or_default(),
            pair(r.regret_x),
            pair(r.regret_y)
        )
        .expect("writing to a String");
    }
    s
}

/// Reads every summary and writes `compare.csv` into `out`.
pub fn compare(paths: &[PathBuf], out: &Path) -> Result<Vec<CompareRow>, CliError> {
    if paths.is_empty() {
        return Err(CliError::MissingInput("compare needs at least one summary".into()));
    }
    let mut summaries = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::MissingInput(format!("{}: {e}", p.display())))?;
        let label = p.display().to_string();
        summaries.push((label.clone(), parse_summary(&text, &label)?));
    }
    let rows = aggregate(&summaries);
    write_file(out, "compare.csv", &compare_csv(&rows))?;
    Ok(rows)
}
