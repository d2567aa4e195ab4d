use std::path::Path;

use crate::dynamics::{ComparisonReport, TrajectoryRecord};
use crate::equilibria::BranchSample;
use crate::error::Result;
use crate::grid::GridFunction;
use crate::spectral::EigenResult;

use super::TrichotomyReport;

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A table with a header row.
pub trait CsvRecord {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn names(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Writes `record` to `path` as UTF-8 CSV with a header row.
pub fn emit_csv(record: &(impl CsvRecord + ?Sized), path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(record.header())?;
    for row in record.rows() {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

impl CsvRecord for TrajectoryRecord {
    fn header(&self) -> Vec<String> {
        names(&["t", "sup_norm", "grad_p_seminorm", "energy", "dt"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.samples
            .iter()
            .map(|s| vec![num(s.t), num(s.sup_norm), num(s.grad_p_seminorm), num(s.energy), num(s.dt)])
            .collect()
    }
}

impl CsvRecord for [BranchSample] {
    fn header(&self) -> Vec<String> {
        names(&["lambda", "seminorm", "supnorm", "residual", "iterations"])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|s| {
                vec![
                    num(s.lambda),
                    num(s.seminorm),
                    num(s.sup_norm),
                    num(s.residual),
                    s.iterations.to_string(),
                ]
            })
            .collect()
    }
}

impl CsvRecord for TrichotomyReport {
    fn header(&self) -> Vec<String> {
        names(&[
            "regime",
            "lambda",
            "outcome",
            "final_t",
            "sup_norm",
            "grad_p_seminorm",
            "t_estimate",
            "equilibrium_distance",
            "status",
            "lambda_min",
            "lambda_max",
        ])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let t = &self.thresholds;
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.regime.label().to_string(),
                    opt(r.lambda),
                    r.outcome.map(|o| o.label()).unwrap_or("not_applicable").to_string(),
                    opt(r.lambda.map(|_| r.final_time)),
                    opt(r.lambda.map(|_| r.final_sup_norm)),
                    opt(r.lambda.map(|_| r.final_seminorm)),
                    opt(r.t_estimate()),
                    opt(r.equilibrium_distance),
                    r.status().to_string(),
                    num(t.lambda_min),
                    num(t.lambda_max),
                ]
            })
            .collect()
    }
}

impl CsvRecord for ComparisonReport {
    fn header(&self) -> Vec<String> {
        names(&[
            "max_violation",
            "min_v",
            "v_outcome",
            "w_outcome",
            "v_blowup_time",
            "w_blowup_time",
            "v_not_later",
            "steps",
        ])
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            num(self.max_violation),
            num(self.min_v),
            self.v_outcome.label().to_string(),
            self.w_outcome.label().to_string(),
            opt(self.v_blowup_time),
            opt(self.w_blowup_time),
            self.v_not_later.to_string(),
            self.steps.to_string(),
        ]]
    }
}

/// Nodal values with their coordinates.
pub struct Profile<'a>(pub &'a GridFunction, pub &'a str);

impl CsvRecord for Profile<'_> {
    fn header(&self) -> Vec<String> {
        let mut h = names(if self.0.grid().dim() == 1 { &["x"] } else { &["x", "y"] });
        h.push(self.1.to_string());
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let grid = self.0.grid();
        let dim = grid.dim();
        self.0
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let x = grid.coords(k);
                let mut row: Vec<String> = x[..dim].iter().map(|&c| num(c)).collect();
                row.push(num(v));
                row
            })
            .collect()
    }
}

/// The principal eigenfunction of an [`EigenResult`].
pub struct EigenProfile<'a>(pub &'a EigenResult);

impl CsvRecord for EigenProfile<'_> {
    fn header(&self) -> Vec<String> {
        Profile(&self.0.psi0, "psi").header()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        Profile(&self.0.psi0, "psi").rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_rows_follow_the_header() {
        let samples: Vec<BranchSample> = (0..24)
            .map(|k| BranchSample {
                lambda: k as f64,
                seminorm: 0.1,
                sup_norm: 0.2,
                residual: 1e-12,
                iterations: k,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        emit_csv(&samples[..], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 25);
        assert_eq!(text.lines().next().unwrap(), "lambda,seminorm,supnorm,residual,iterations");
    }

    #[test]
    fn digits_survive_formatting() {
        for x in [0.1, 1.0 / 3.0, 28.288764, 1e-300, f64::MAX] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
