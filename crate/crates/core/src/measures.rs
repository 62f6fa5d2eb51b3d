//! Scalar performance measures of a set of runs.
//!
//! `N` runs, `N_s` successful ones with mean cost `T_s`, success rate
//! `p_s = N_s / N`. Infinite values are plain `f64::INFINITY`, which orders
//! above every finite measure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::RunResult;
use crate::optima::ScoreSchedule;
pub use crate::util::fmt_measure;

fn require_runs(results: &[RunResult]) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Precondition("no runs to measure".into()));
    }
    Ok(())
}

fn successes(results: &[RunResult]) -> impl Iterator<Item = &RunResult> {
    results.iter().filter(|r| r.success)
}

fn total_cost(results: &[RunResult]) -> f64 {
    results.iter().map(|r| r.t as f64).sum()
}

pub fn success_rate(results: &[RunResult]) -> Result<f64> {
    require_runs(results)?;
    Ok(successes(results).count() as f64 / results.len() as f64)
}

/// Mean cost of the successful runs, if any.
pub fn mean_success_cost(results: &[RunResult]) -> Option<f64> {
    let (n, sum) = successes(results).fold((0usize, 0.0), |(n, s), r| (n + 1, s + r.t as f64));
    (n > 0).then(|| sum / n as f64)
}

/// Expected running time: all charged evaluations per success.
pub fn ert(results: &[RunResult]) -> f64 {
    let ns = successes(results).count();
    if ns == 0 {
        f64::INFINITY
    } else {
        total_cost(results) / ns as f64
    }
}

fn check_failures_cost(results: &[RunResult], t_max: usize) -> Result<()> {
    if let Some(r) = results.iter().find(|r| !r.success && r.t != t_max) {
        return Err(Error::Precondition(format!(
            "run {} failed after {} evaluations, not the full budget {t_max}",
            r.run_index, r.t
        )));
    }
    Ok(())
}

/// `T_s + T_max (1 - p_s) / p_s`; needs every failure to cost `t_max`.
pub fn ert_alternative(results: &[RunResult], t_max: usize) -> Result<f64> {
    let ps = success_rate(results)?;
    check_failures_cost(results, t_max)?;
    match mean_success_cost(results) {
        None => Ok(f64::INFINITY),
        Some(ts) => Ok(ts + t_max as f64 * (1.0 - ps) / ps),
    }
}

/// Sum of band scores earned by the returned heights.
pub fn total_score(results: &[RunResult], schedule: &ScoreSchedule) -> f64 {
    results.iter().map(|r| schedule.score(r.returned_height)).sum()
}

/// Generalised ERT: all charged evaluations per score point.
pub fn gert(results: &[RunResult], schedule: &ScoreSchedule) -> f64 {
    let score = total_score(results, schedule);
    if score == 0.0 {
        f64::INFINITY
    } else {
        total_cost(results) / score
    }
}

pub fn avg_returned_height(results: &[RunResult]) -> Result<f64> {
    require_runs(results)?;
    Ok(results.iter().map(|r| r.returned_height).sum::<f64>() / results.len() as f64)
}

/// Success performance `T_s / p_s`.
pub fn sp(results: &[RunResult]) -> Result<f64> {
    let ps = success_rate(results)?;
    Ok(mean_success_cost(results).map_or(f64::INFINITY, |ts| ts / ps))
}

/// Penalised average runtime: failures count `k * t_max`.
pub fn par(results: &[RunResult], k: f64, t_max: usize) -> Result<f64> {
    require_runs(results)?;
    let failures = results.iter().filter(|r| !r.success).count() as f64;
    let success_cost: f64 = successes(results).map(|r| r.t as f64).sum();
    Ok((k * failures * t_max as f64 + success_cost) / results.len() as f64)
}

/// Dominated hypervolume `p_s (t_max - T_s)`.
pub fn hv(results: &[RunResult], t_max: usize) -> Result<f64> {
    let ps = success_rate(results)?;
    Ok(mean_success_cost(results).map_or(0.0, |ts| ps * (t_max as f64 - ts)))
}

/// All measures of one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub n: usize,
    pub n_s: usize,
    pub p_s: f64,
    pub t_s: Option<f64>,
    pub ert: f64,
    pub gert: f64,
    pub avg_returned_height: f64,
    pub sp: f64,
    pub par2: f64,
    pub par10: f64,
    pub hv: f64,
}

impl MeasureReport {
    pub fn compute(results: &[RunResult], schedule: &ScoreSchedule, t_max: usize) -> Result<Self> {
        Ok(Self {
            n: results.len(),
            n_s: successes(results).count(),
            p_s: success_rate(results)?,
            t_s: mean_success_cost(results),
            ert: ert(results),
            gert: gert(results, schedule),
            avg_returned_height: avg_returned_height(results)?,
            sp: sp(results)?,
            par2: par(results, 2.0, t_max)?,
            par10: par(results, 10.0, t_max)?,
            hv: hv(results, t_max)?,
        })
    }

    pub const CSV_HEADER: &'static str = "n,n_s,p_s,t_s,ert,gert,avg_returned_height,sp,par2,par10,hv";

    pub fn to_csv_row(&self) -> String {
        [
            self.n.to_string(),
            self.n_s.to_string(),
            fmt_measure(self.p_s),
            self.t_s.map_or(String::new(), fmt_measure),
            fmt_measure(self.ert),
            fmt_measure(self.gert),
            fmt_measure(self.avg_returned_height),
            fmt_measure(self.sp),
            fmt_measure(self.par2),
            fmt_measure(self.par10),
            fmt_measure(self.hv),
        ]
        .join(",")
    }

    /// JSON object; infinities are written as the string `"inf"`.
    pub fn to_json(&self) -> String {
        let num = |v: f64| {
            if v.is_finite() {
                serde_json::json!(v)
            } else {
                serde_json::json!(fmt_measure(v))
            }
        };
        let value = serde_json::json!({
            "n": self.n,
            "n_s": self.n_s,
            "p_s": num(self.p_s),
            "t_s": self.t_s.map(num),
            "ert": num(self.ert),
            "gert": num(self.gert),
            "avg_returned_height": num(self.avg_returned_height),
            "sp": num(self.sp),
            "par2": num(self.par2),
            "par10": num(self.par10),
            "hv": num(self.hv),
        });
        serde_json::to_string_pretty(&value).expect("JSON of plain values")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs(ts: &[usize], ok: &[bool]) -> Vec<RunResult> {
        ts.iter()
            .zip(ok)
            .enumerate()
            .map(|(i, (&t, &s))| RunResult {
                run_index: i as u64,
                t,
                returned_height: if s { 1341.0 } else { 1000.0 },
                success: s,
            })
            .collect()
    }

    #[test]
    fn worked_example() {
        let r = runs(&[100, 200, 50_000, 300], &[true, true, false, true]);
        assert!((ert(&r) - 50_600.0 / 3.0).abs() < 1e-9);
        assert!((ert(&r) - 16_866.67).abs() < 0.01);
        assert!((ert_alternative(&r, 50_000).unwrap() - ert(&r)).abs() < 1e-9);
        assert!((sp(&r).unwrap() - 200.0 / 0.75).abs() < 1e-9);
        assert_eq!(par(&r, 2.0, 50_000).unwrap(), 25_150.0);
        assert_eq!(hv(&r, 50_000).unwrap(), 37_350.0);
    }

    #[test]
    fn collapse_when_all_succeed() {
        let r = runs(&[100, 100, 100], &[true; 3]);
        assert_eq!(success_rate(&r).unwrap(), 1.0);
        assert_eq!(sp(&r).unwrap(), 100.0);
        assert_eq!(par(&r, 2.0, 1000).unwrap(), 100.0);
        assert_eq!(hv(&r, 1000).unwrap(), 900.0);
        assert_eq!(ert_alternative(&r, 1000).unwrap(), 100.0);
    }

    #[test]
    fn no_success_is_infinite() {
        let r = runs(&[50, 50], &[false, false]);
        assert_eq!(ert(&r), f64::INFINITY);
        assert_eq!(sp(&r).unwrap(), f64::INFINITY);
        assert_eq!(hv(&r, 50).unwrap(), 0.0);
        assert_eq!(ert_alternative(&r, 50).unwrap(), f64::INFINITY);
        assert_eq!(success_rate(&r).unwrap(), 0.0);
    }

    #[test]
    fn single_success() {
        let r = runs(&[500], &[true]);
        assert_eq!(ert(&r), 500.0);
    }

    #[test]
    fn alternative_form_rejects_cheap_failures() {
        let r = runs(&[100, 20], &[true, false]);
        assert!(ert_alternative(&r, 50).is_err());
    }

    #[test]
    fn empty_input_errors() {
        assert!(success_rate(&[]).is_err());
        assert!(avg_returned_height(&[]).is_err());
    }

    #[test]
    fn averages() {
        let mut r = runs(&[1, 1], &[false, false]);
        r[0].returned_height = 1000.0;
        r[1].returned_height = 1200.0;
        assert_eq!(avg_returned_height(&r).unwrap(), 1100.0);
        assert_eq!(avg_returned_height(&r[..1]).unwrap(), 1000.0);
    }

    #[test]
    fn indicator_gert_is_ert() {
        let r = runs(&[100, 200, 50_000, 300], &[true, true, false, true]);
        assert_eq!(gert(&r, &ScoreSchedule::indicator(1340.0)), ert(&r));
    }

    #[test]
    fn par_one_is_mean_cost() {
        let r = runs(&[100, 200, 1000, 300], &[true, true, false, true]);
        assert_eq!(par(&r, 1.0, 1000).unwrap(), 1600.0 / 4.0);
    }

    #[test]
    fn report_serialises_infinity() {
        let r = runs(&[50, 50], &[false, false]);
        let rep = MeasureReport::compute(&r, &ScoreSchedule::indicator(1340.0), 50).unwrap();
        assert!(rep.to_csv_row().contains("inf"));
        assert!(rep.to_json().contains("\"ert\": \"inf\""));
        assert_eq!(rep.t_s, None);
    }
}
