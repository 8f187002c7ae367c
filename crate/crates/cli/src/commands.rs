use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use qauth_core::adversary::StrategyParams;
use qauth_core::analysis::{
    analytic_optimum, bounds_rows, delta_grid, figure3_curves, fmt_sig9, optimize_grid, pr_win_closed_form,
    table1_rows,
};
use qauth_core::transcript::{audit_transcript, AuditReport, Transcript};
use serde::Serialize;

use crate::CliError;

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<usize, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    let n = rows.len();
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(n)
}

/// `delta,per_round,after_m_rounds` on an evenly spaced grid. Returns the row count.
pub fn analyze_figure3(points: usize, m: u32, out: &Path) -> Result<usize, CliError> {
    let rows = figure3_curves(&delta_grid(points)?, m)?
        .into_iter()
        .map(|r| vec![fmt_sig9(r.delta), fmt_sig9(r.per_round), fmt_sig9(r.after_m_rounds)])
        .collect();
    write_csv(out, &["delta", "per_round", "after_m_rounds"], rows)
}

pub fn analyze_table1(m: u32, delta: f64, out: &Path) -> Result<usize, CliError> {
    let rows = table1_rows(m, delta)?
        .into_iter()
        .map(|r| {
            vec![
                r.protocol,
                r.rounds.to_string(),
                opt(r.delta),
                opt(r.per_round_bound),
                opt(r.m_round_bound),
                r.literature.unwrap_or_default(),
                r.recomputed.to_string(),
            ]
        })
        .collect();
    write_csv(
        out,
        &["protocol", "rounds", "delta", "per_round_bound", "m_round_bound", "literature", "recomputed"],
        rows,
    )
}

/// Default sweep: 101 evenly spaced values over `[0, 1/4]`.
pub fn default_epsilons() -> Vec<f64> {
    (0..=100).map(|i| 0.25 * i as f64 / 100.0).collect()
}

pub fn analyze_bounds(epsilons: &[f64], m: u32, out: &Path) -> Result<usize, CliError> {
    let rows = bounds_rows(epsilons, m)?
        .into_iter()
        .map(|r| {
            vec![
                fmt_sig9(r.epsilon),
                fmt_sig9(r.mu),
                fmt_sig9(r.per_round_guess_bound),
                r.guess_bound_vacuous.to_string(),
                fmt_sig9(r.per_round_min_entropy_bound),
                fmt_sig9(r.noisy_forgery_bound),
            ]
        })
        .collect();
    write_csv(
        out,
        &[
            "epsilon",
            "mu",
            "per_round_guess_bound",
            "guess_bound_vacuous",
            "per_round_min_entropy_bound",
            "noisy_forgery_bound",
        ],
        rows,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub delta: f64,
    pub grid_resolution: f64,
    pub evaluations: u64,
    pub best_params: StrategyParams,
    pub best_value: f64,
    pub closed_form: f64,
    pub value_gap: f64,
    pub analytic_rx: f64,
    pub analytic_rz: f64,
}

pub fn optimize(delta: f64, resolution: f64) -> Result<OptimizeReport, CliError> {
    let r = optimize_grid(delta, resolution)?;
    let closed_form = pr_win_closed_form(delta)?;
    let (analytic_rx, analytic_rz) = analytic_optimum(delta)?;
    Ok(OptimizeReport {
        delta,
        grid_resolution: r.grid_resolution,
        evaluations: r.evaluations,
        best_params: r.best_params,
        best_value: r.best_value,
        closed_form,
        value_gap: closed_form - r.best_value,
        analytic_rx,
        analytic_rz,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayReport {
    pub rounds: usize,
    pub failed_rounds: usize,
    /// Failing round count per invariant name, including zero counts.
    pub failures_by_check: BTreeMap<String, usize>,
    pub reports: Vec<AuditReport>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.failed_rounds == 0
    }

    pub fn print(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (name, failures) in &self.failures_by_check {
            let status = if *failures == 0 { "pass" } else { "FAIL" };
            writeln!(out, "{status} {name}: {failures}/{} rounds failing", self.rounds)?;
        }
        for r in self.reports.iter().filter(|r| !r.passed()) {
            for c in r.checks.iter().filter(|c| !c.passed) {
                writeln!(out, "  round {}: {} ({})", r.round_id, c.name, c.detail)?;
            }
        }
        writeln!(out, "{} of {} rounds pass every invariant", self.rounds - self.failed_rounds, self.rounds)
    }
}

pub fn replay(path: &Path) -> Result<ReplayReport, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let rounds = Transcript::read_all(BufReader::new(file)).map_err(|e| CliError::Input {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let reports: Vec<AuditReport> = rounds.iter().map(audit_transcript).collect();
    let mut failures_by_check = BTreeMap::new();
    for r in &reports {
        for c in &r.checks {
            *failures_by_check.entry(c.name.to_string()).or_insert(0) += usize::from(!c.passed);
        }
    }
    Ok(ReplayReport {
        rounds: reports.len(),
        failed_rounds: reports.iter().filter(|r| !r.passed()).count(),
        failures_by_check,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure3_has_requested_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        assert_eq!(analyze_figure3(101, 32, &p).unwrap(), 101);
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("delta,per_round,after_m_rounds"));
        assert_eq!(lines.next(), Some("0,0.500000000,2.32830644e-10"));
        assert_eq!(text.lines().last(), Some("0.500000000,1.00000000,1.00000000"));
    }

    #[test]
    fn table1_has_four_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        assert_eq!(analyze_table1(16, 0.25, &p).unwrap(), 4);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("online,16,0.250000000,0.697642354,0.00314865748"));
    }

    #[test]
    fn bounds_column_is_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        analyze_bounds(&default_epsilons(), 10, &p).unwrap();
        let mut rdr = csv::Reader::from_path(&p).unwrap();
        // mu itself turns over at eps = 1/9, but by then it exceeds 1 and the
        // forgery bound is already pinned at 1.
        let bound: Vec<f64> = rdr.records().map(|r| r.unwrap()[5].parse().unwrap()).collect();
        assert_eq!(bound.len(), 101);
        assert!(bound.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bounds_reject_large_epsilon() {
        let dir = tempfile::tempdir().unwrap();
        assert!(analyze_bounds(&[0.3], 10, &dir.path().join("b.csv")).is_err());
    }

    #[test]
    fn optimize_reports_gap() {
        let r = optimize(0.0, 0.01).unwrap();
        assert!((r.best_value - 0.5).abs() < 1e-9);
        assert!(optimize(0.25, 0.1).is_err());
    }
}
