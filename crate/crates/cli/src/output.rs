//! CSV emission. Floats are written with 17 significant digits so every
//! value round-trips exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use tfmhd_core::harness::{ConvergenceRow, LemmaRateRow};
use tfmhd_core::DiagRecord;

pub const DIAG_COLUMNS: [&str; 13] = [
    "step",
    "t",
    "energy",
    "cross_helicity",
    "g_energy_u",
    "g_energy_b",
    "f_damp_u",
    "f_damp_b",
    "energy_identity_residual",
    "helicity_identity_residual",
    "div_u",
    "div_b",
    "picard_iters",
];

pub const RATE_COLUMNS: [&str; 9] = [
    "dt", "err_u_h1", "rate_u_h1", "err_b_h1", "rate_b_h1", "err_u_l2", "rate_u_l2", "err_b_l2", "rate_b_l2",
];

pub const LEMMA_COLUMNS: [&str; 4] = ["kind", "dt", "quantity", "slope"];

/// First field of the row appended when a run stops early.
pub const TRUNCATION_MARKER: &str = "#truncated";

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

/// A CSV file that is flushed after every row, so a failed run leaves
/// everything produced so far on disk.
pub struct CsvSink {
    writer: csv::Writer<File>,
    width: usize,
}

impl CsvSink {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        writer.write_record(header)?;
        writer.flush()?;
        Ok(CsvSink { writer, width: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn truncate(&mut self) -> Result<()> {
        let mut fields = vec![String::new(); self.width];
        fields[0] = TRUNCATION_MARKER.to_string();
        self.row(&fields)
    }
}

pub fn diag_fields(r: &DiagRecord) -> Vec<String> {
    vec![
        r.step.to_string(),
        float(r.t),
        float(r.energy),
        float(r.cross_helicity),
        float(r.g_energy_u),
        float(r.g_energy_b),
        float(r.f_damp_u),
        float(r.f_damp_b),
        float(r.energy_identity_residual),
        float(r.helicity_identity_residual),
        float(r.div_u),
        float(r.div_b),
        r.picard_iters.to_string(),
    ]
}

pub fn rate_fields(r: &ConvergenceRow) -> Vec<String> {
    vec![
        float(r.dt),
        float(r.err_u_h1),
        opt(r.rate_u_h1),
        float(r.err_b_h1),
        opt(r.rate_b_h1),
        float(r.err_u_l2),
        opt(r.rate_u_l2),
        float(r.err_b_l2),
        opt(r.rate_b_l2),
    ]
}

pub fn lemma_fields(r: &LemmaRateRow) -> Vec<String> {
    vec![r.kind.name().to_string(), float(r.dt), float(r.quantity), opt(r.slope)]
}

/// Human-readable convergence table for the terminal.
pub fn print_rates(out: &mut impl Write, rows: &[ConvergenceRow]) -> std::io::Result<()> {
    let rate = |r: Option<f64>| r.map(|v| format!("{v:6.3}")).unwrap_or_else(|| "     -".into());
    writeln!(out, "{:>10} {:>12} {:>6} {:>12} {:>6}", "dt", "err_u_h1", "rate", "err_b_h1", "rate")?;
    for r in rows {
        writeln!(
            out,
            "{:>10.6} {:>12.4e} {} {:>12.4e} {}",
            r.dt,
            r.err_u_h1,
            rate(r.rate_u_h1),
            r.err_b_h1,
            rate(r.rate_b_h1)
        )?;
    }
    Ok(())
}
