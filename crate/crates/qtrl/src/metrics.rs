//! CSV export of training histories and speedup reports.
//!
//! Metrics schema v1 (columns fixed; the header row is the version): one row
//! per (round, agent) with that agent's return, then one aggregate row per
//! round with agent = `mean` carrying the mean return, moving average,
//! gradient norm and wall-clock. Sequential runs write wall_ms = 0 so
//! identical seeds give byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::sync::TrainingHistory;

pub const METRICS_HEADER: &str = "round,agent,return,moving_avg,grad_norm,wall_ms";
pub const SPEEDUP_HEADER: &str = "agents,rounds_to_target,centric_rounds,speedup,paper_reference";

/// Marker for undefined entries (target never reached).
pub const UNDEFINED: &str = "NA";

pub fn render_metrics_csv(history: &TrainingHistory) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for record in &history.rounds {
        for (agent, ret) in record.agent_returns.iter().enumerate() {
            out.push_str(&format!("{},{agent},{ret},,,\n", record.round));
        }
        out.push_str(&format!(
            "{},mean,{},{},{},{}\n",
            record.round, record.mean_return, record.moving_avg, record.grad_norm, record.wall_ms
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, history: &TrainingHistory) -> Result<()> {
    write_text(path, &render_metrics_csv(history))
}

/// One row of the speedup report.
#[derive(Debug, Clone)]
pub struct SpeedupRow {
    pub agents: usize,
    pub rounds_to_target: Option<usize>,
    pub centric_rounds: Option<usize>,
    pub speedup: Option<f64>,
    pub paper_reference: Option<f64>,
}

fn opt<T: std::fmt::Display>(value: &Option<T>) -> String {
    match value {
        Some(v) => v.to_string(),
        None => UNDEFINED.to_string(),
    }
}

pub fn render_speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from(SPEEDUP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.agents,
            opt(&row.rounds_to_target),
            opt(&row.centric_rounds),
            opt(&row.speedup),
            opt(&row.paper_reference),
        ));
    }
    out
}

pub fn render_speedup_table(rows: &[SpeedupRow]) -> String {
    let mut out = String::new();
    out.push_str("agents  rounds-to-target  measured-speedup  paper-reference\n");
    for row in rows {
        let speedup = row
            .speedup
            .map(|s| format!("x{s:.2}"))
            .unwrap_or_else(|| UNDEFINED.to_string());
        let reference = row
            .paper_reference
            .map(|r| format!("x{r:.2}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<7} {:<17} {:<17} {}\n",
            row.agents,
            opt(&row.rounds_to_target),
            speedup,
            reference
        ));
    }
    out
}

pub fn write_speedup_csv(path: &Path, rows: &[SpeedupRow]) -> Result<()> {
    write_text(path, &render_speedup_csv(rows))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
