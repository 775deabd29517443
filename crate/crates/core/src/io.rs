//! Text interchange formats: run CSVs, trace CSVs, probe tables, and settle
//! profiles. All files are UTF-8 with comma separators and `.` decimals;
//! floats print in shortest round-trip form so identical runs produce
//! byte-identical files.

use crate::error::{Error, Result};
use crate::evolution::{DivergenceReport, FitnessReport, RunRecord};
use crate::snn::Genome;
use crate::softbody::SettleReport;

/// Run CSV: `generation,best_fitness,g0,...,g{n-1}`, one row per generation.
pub fn write_run_csv(records: &[RunRecord], genome_width: usize) -> String {
    let mut out = String::from("generation,best_fitness");
    for i in 0..genome_width {
        out.push_str(&format!(",g{i}"));
    }
    out.push('\n');
    for record in records {
        out.push_str(&format!("{},{}", record.generation, record.best_fitness));
        for v in record.best_genome.values() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// One parsed run-CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub generation: u64,
    pub best_fitness: f64,
    pub genome: Vec<f64>,
}

/// Parses a run CSV produced by [`write_run_csv`].
pub fn parse_run_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedRunCsv("empty file".into()))?;
    if !header.starts_with("generation,best_fitness") {
        return Err(Error::MalformedRunCsv(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (number, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::MalformedRunCsv(format!(
                "row {} has {} fields",
                number + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::MalformedRunCsv(format!("row {}: {e}", number + 2)))
        };
        let generation = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::MalformedRunCsv(format!("row {}: {e}", number + 2)))?;
        let best_fitness = parse(fields[1])?;
        let genome = fields[2..]
            .iter()
            .map(|f| parse(f))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(RunRow {
            generation,
            best_fitness,
            genome,
        });
    }
    if rows.is_empty() {
        return Err(Error::MalformedRunCsv("no data rows".into()));
    }
    Ok(rows)
}

/// Trace CSV: `tick,actuator,action,d_tl,d_br`, one row per actuator per
/// control tick.
pub fn write_trace_csv(report: &FitnessReport) -> String {
    let mut out = String::from("tick,actuator,action,d_tl,d_br\n");
    for (tick, (action, telemetry)) in report
        .action_trace
        .iter()
        .zip(&report.telemetry_trace)
        .enumerate()
    {
        for (actuator, (&value, &(d_tl, d_br))) in action.values().iter().zip(telemetry).enumerate()
        {
            out.push_str(&format!("{tick},{actuator},{value},{d_tl},{d_br}\n"));
        }
    }
    out
}

/// Probe CSV: `actuator,overridden,divergence,first_divergence_tick`.
pub fn write_probe_csv(report: &DivergenceReport) -> String {
    let mut out = String::from("actuator,overridden,divergence,first_divergence_tick\n");
    for d in &report.per_actuator {
        let first = d
            .first_divergence_tick
            .map(|t| t.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{first}\n",
            d.actuator, d.overridden, d.divergence
        ));
    }
    out
}

/// Settle CSV: `tick,separation`, one row per physics step of the square-wave
/// drive.
pub fn write_settle_csv(report: &SettleReport) -> String {
    let mut out = String::from("tick,separation\n");
    for &(tick, separation) in &report.rows {
        out.push_str(&format!("{tick},{separation}\n"));
    }
    out
}

/// Reads a genome from the one-row CSV interchange format, ignoring blank
/// trailing lines.
pub fn parse_genome_file(text: &str) -> Result<Genome> {
    let row = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::MalformedGenome("empty genome file".into()))?;
    Genome::from_csv_row(row)
}
