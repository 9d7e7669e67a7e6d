use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::stats::{mean_std, Verdict, Wdl};
use super::{compare_methods, ExperimentPlan, Method, RunRecord};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    TextTable,
    CurveData,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "text-table" | "text" => Ok(ReportFormat::TextTable),
            "curve-data" | "curve" => Ok(ReportFormat::CurveData),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

/// One row per run record.
pub fn csv_report(results: &[RunRecord]) -> String {
    let mut out =
        String::from("class,dim,instance_seed,method,optimizer,budget,run_seed,best_objective,fes_init,fes_total\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.class,
            r.dim,
            r.instance_seed,
            r.method.init,
            r.method.optimizer,
            r.budget,
            r.run_seed,
            r.best_objective,
            r.fes_init,
            r.fes_total
        );
    }
    out
}

fn methods_in(results: &[RunRecord]) -> Vec<Method> {
    let mut m: Vec<Method> = Vec::new();
    for r in results {
        if !m.contains(&r.method) {
            m.push(r.method);
        }
    }
    m
}

/// Mean (std) per instance and method. Every method after `baseline` is marked
/// `+`, `=` or `-` against it, and a W-D-L summary row closes the table.
pub fn text_table(results: &[RunRecord], baseline: Method, alpha: f64) -> Result<String> {
    let methods = methods_in(results);
    let budget = results.first().map_or(0, |r| r.budget);
    let others: Vec<Method> = methods.iter().copied().filter(|m| *m != baseline).collect();
    let mut comparisons = Vec::new();
    for &m in &others {
        comparisons.push(compare_methods(results, baseline, m, budget, alpha)?);
    }
    let mut out = format!("{:<16}", "instance");
    let _ = write!(out, "{:>24}", baseline.to_string());
    for m in &others {
        let _ = write!(out, "{:>26}", m.to_string());
    }
    out.push('\n');
    let base_rows = compare_methods(results, baseline, baseline, budget, alpha)?;
    let mut totals = vec![Wdl::default(); others.len()];
    for (row, (key, base)) in base_rows.iter().enumerate() {
        let _ = write!(out, "{:<16}{:>24}", format!("{}-d{}-s{}", key.0, key.1, key.2), format!("{:.3} ({:.3})", base.mean_b, base.std_b));
        for (j, comp) in comparisons.iter().enumerate() {
            let c = &comp[row].1;
            let mark = match c.verdict {
                Verdict::Win => '+',
                Verdict::Draw => '=',
                Verdict::Loss => '-',
            };
            totals[j].add(c.verdict);
            let _ = write!(out, "{:>26}", format!("{:.3} ({:.3}){mark}", c.mean_a, c.std_a));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<16}{:>24}", "W-D-L", "");
    for t in &totals {
        let _ = write!(out, "{:>26}", t.to_string());
    }
    out.push('\n');
    Ok(out)
}

/// Per budget point: instances where the challenger's mean is higher (`avg_up`)
/// and wins minus losses (`goal_diff`).
pub fn curve_data(results: &[RunRecord], baseline: Method, challenger: Method, points: &[usize], alpha: f64) -> Result<String> {
    let mut out = String::from("budget,avg_up,wins,draws,losses,goal_diff\n");
    for &b in points {
        let cells = compare_methods(results, baseline, challenger, b, alpha)?;
        let mut w = Wdl::default();
        let mut up = 0;
        for (_, c) in &cells {
            w.add(c.verdict);
            up += usize::from(c.mean_a > c.mean_b);
        }
        let _ = writeln!(out, "{b},{up},{},{},{},{}", w.wins, w.draws, w.losses, w.goal_diff());
    }
    Ok(out)
}

/// Writes the report into `dir`; curve and table reports compare every method
/// with the plan's first method.
pub fn emit_report(results: &[RunRecord], plan: &ExperimentPlan, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let baseline = *plan.methods.first().ok_or_else(|| Error::invalid("plan has no methods"))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let p = dir.join("results.csv");
            fs::write(&p, csv_report(results))?;
            written.push(p);
        }
        ReportFormat::TextTable => {
            let p = dir.join("table.txt");
            fs::write(&p, text_table(results, baseline, plan.alpha)?)?;
            written.push(p);
        }
        ReportFormat::CurveData => {
            for &m in plan.methods.iter().skip(1) {
                let p = dir.join(format!("curve_{}.csv", m.to_string().replace('+', "_")));
                fs::write(&p, curve_data(results, baseline, m, &plan.budget_points(), plan.alpha)?)?;
                written.push(p);
            }
        }
    }
    let mut summary = String::from("method,mean_best,std_best,runs\n");
    for m in methods_in(results) {
        let v: Vec<f64> = results.iter().filter(|r| r.method == m).map(|r| r.best_objective).collect();
        let (mean, std) = mean_std(&v);
        let _ = writeln!(summary, "{m},{mean},{std},{}", v.len());
    }
    let p = dir.join("summary.csv");
    fs::write(&p, summary)?;
    written.push(p);
    Ok(written)
}
