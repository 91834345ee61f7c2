//! CSV output. Column order is fixed; floats are written in Rust's
//! shortest round-trip form, so identical runs give identical bytes.
//!
//! | file | columns |
//! |------|---------|
//! | `td.csv` | iteration, reward, target_y, greedy_value, step_seconds |
//! | `eval.csv` | iteration, mc_return_mean, mc_return_stderr, rmse, clip_rate |
//! | `xi.csv` | sigma, xi, xi_over_sigma_alpha |
//! | `diagnostics.csv` | scenario, steps, coverage, top_right_share, clip_rate |
//! | `histogram_*.csv` | one row per first-coordinate bin, one column per second-coordinate bin |
//!
//! `step_seconds` is empty unless timing was requested; `rmse` is empty when
//! no reference table was available.

use std::io::Write;

use crate::error::Result;
use crate::eval::{EvalReport, Histogram};
use crate::learner::TdRecord;

pub const TD_COLUMNS: [&str; 5] = ["iteration", "reward", "target_y", "greedy_value", "step_seconds"];
pub const EVAL_COLUMNS: [&str; 5] = ["iteration", "mc_return_mean", "mc_return_stderr", "rmse", "clip_rate"];
pub const XI_COLUMNS: [&str; 3] = ["sigma", "xi", "xi_over_sigma_alpha"];
pub const DIAGNOSTICS_COLUMNS: [&str; 5] = ["scenario", "steps", "coverage", "top_right_share", "clip_rate"];

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct TdWriter<W: Write> {
    inner: csv::Writer<W>,
    record_timing: bool,
}

impl<W: Write> TdWriter<W> {
    pub fn new(sink: W, record_timing: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(TD_COLUMNS)?;
        Ok(Self { inner, record_timing })
    }

    pub fn write(&mut self, r: &TdRecord) -> Result<()> {
        let secs = if self.record_timing {
            num(r.wall_clock_step.as_secs_f64())
        } else {
            String::new()
        };
        self.inner.write_record([
            r.iteration.to_string(),
            num(r.reward),
            num(r.target_y),
            num(r.greedy_value),
            secs,
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub struct EvalWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EvalWriter<W> {
    pub fn new(sink: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(EVAL_COLUMNS)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &EvalReport) -> Result<()> {
        self.inner.write_record([
            r.iteration.to_string(),
            num(r.mc_return_mean),
            num(r.mc_return_stderr),
            r.rmse_vs_reference.map(num).unwrap_or_default(),
            num(r.clip_rate),
        ])?;
        self.inner.flush()?;
        Ok(())
    }
}

/// One row of a bandwidth sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiRow {
    pub sigma: f64,
    pub xi: f64,
    pub xi_over_sigma_alpha: f64,
}

pub fn write_xi<W: Write>(sink: W, rows: &[XiRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(XI_COLUMNS)?;
    for r in rows {
        w.write_record([num(r.sigma), num(r.xi), num(r.xi_over_sigma_alpha)])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary of one behavior-policy rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub scenario: String,
    pub steps: usize,
    pub coverage: f64,
    pub top_right_share: f64,
    pub clip_rate: f64,
}

pub fn write_diagnostics<W: Write>(sink: W, rows: &[ScenarioRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(DIAGNOSTICS_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.steps.to_string(),
            num(r.coverage),
            num(r.top_right_share),
            num(r.clip_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(sink: W, h: &Histogram) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    for row in h.rows() {
        w.write_record(row.iter().map(u64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
