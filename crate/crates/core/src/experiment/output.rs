//! CSV and JSON artifacts.
//!
//! | file | columns |
//! |------|---------|
//! | `<out>.csv` | `policy,step,mean_regret,ci_half_width,reps` |
//! | `<out>.reps.csv` | `policy,rep,step,cumulative_regret` |
//! | `<out>.meta.json` | [`Metadata`] |
//! | bound curves | `curve_id,alpha,x,value` |
//! | divergence queries | `alpha,method,value` |
//!
//! Steps are 1-based. Floats use `{:.16e}` so values round-trip exactly, and
//! lines end in `\n` on every platform.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, Terminator, WriterBuilder};

use crate::divergence::DivergenceRow;
use crate::error::{Error, Result};
use crate::theory::BoundPoint;

use super::runner::{ExperimentResult, Metadata, PolicyRuns, RegretCurve};

pub const REGRET_HEADER: [&str; 5] = ["policy", "step", "mean_regret", "ci_half_width", "reps"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["policy", "rep", "step", "cumulative_regret"];
pub const BOUND_HEADER: [&str; 4] = ["curve_id", "alpha", "x", "value"];
pub const DIVERGENCE_HEADER: [&str; 3] = ["alpha", "method", "value"];

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(w)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}"))),
    }
}

fn invalid(message: String) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, message))
}

fn parse<T: std::str::FromStr>(field: &str, column: &str, line: u64) -> Result<T> {
    field
        .parse()
        .map_err(|_| invalid(format!("line {line}: cannot parse {column} `{field}`")))
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(invalid(format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

pub fn write_regret_csv<W: Write>(out: W, curves: &[RegretCurve]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(REGRET_HEADER).map_err(csv_error)?;
    for curve in curves {
        let reps = curve.reps.to_string();
        for (t, (m, ci)) in curve.mean.iter().zip(&curve.ci_half_width).enumerate() {
            w.write_record([
                curve.policy.as_str(),
                &(t + 1).to_string(),
                &format_float(*m),
                &format_float(*ci),
                &reps,
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a regret table back into curves, in order of first appearance.
pub fn read_regret_csv<R: Read>(input: R) -> Result<Vec<RegretCurve>> {
    let mut reader = ReaderBuilder::new().from_reader(input);
    check_header(&mut reader, &REGRET_HEADER)?;
    let mut curves: Vec<RegretCurve> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let policy = &record[0];
        let step: usize = parse(&record[1], "step", line)?;
        let curve = match curves.iter_mut().position(|c| c.policy == policy) {
            Some(i) => &mut curves[i],
            None => {
                curves.push(RegretCurve {
                    policy: policy.to_string(),
                    mean: Vec::new(),
                    ci_half_width: Vec::new(),
                    reps: parse(&record[4], "reps", line)?,
                });
                curves.last_mut().unwrap()
            }
        };
        if step != curve.mean.len() + 1 {
            return Err(invalid(format!("line {line}: steps of `{policy}` are not consecutive")));
        }
        curve.mean.push(parse(&record[2], "mean_regret", line)?);
        curve.ci_half_width.push(parse(&record[3], "ci_half_width", line)?);
    }
    Ok(curves)
}

pub fn write_trajectories_csv<W: Write>(out: W, runs: &[PolicyRuns]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_error)?;
    for run in runs {
        for (rep, result) in run.replications.iter().enumerate() {
            let rep = rep.to_string();
            for (t, regret) in result.cumulative_regret.iter().enumerate() {
                w.write_record([run.policy.as_str(), &rep, &(t + 1).to_string(), &format_float(*regret)])
                    .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory dump as `(policy, paths)` pairs.
pub fn read_trajectories_csv<R: Read>(input: R) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut reader = ReaderBuilder::new().from_reader(input);
    check_header(&mut reader, &TRAJECTORY_HEADER)?;
    let mut out: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let policy = &record[0];
        let rep: usize = parse(&record[1], "rep", line)?;
        let step: usize = parse(&record[2], "step", line)?;
        let value: f64 = parse(&record[3], "cumulative_regret", line)?;
        let i = match out.iter().position(|(p, _)| p == policy) {
            Some(i) => i,
            None => {
                out.push((policy.to_string(), Vec::new()));
                out.len() - 1
            }
        };
        let paths = &mut out[i].1;
        if rep == paths.len() {
            paths.push(Vec::new());
        } else if rep + 1 != paths.len() {
            return Err(invalid(format!("line {line}: replications of `{policy}` are not consecutive")));
        }
        let path = paths.last_mut().unwrap();
        if step != path.len() + 1 {
            return Err(invalid(format!("line {line}: steps are not consecutive")));
        }
        path.push(value);
    }
    Ok(out)
}

pub fn write_bound_csv<W: Write>(out: W, points: &[BoundPoint]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(BOUND_HEADER).map_err(csv_error)?;
    for p in points {
        w.write_record([p.curve_id.as_str(), &format_float(p.alpha), &format_float(p.x), &format_float(p.value)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bound_csv<R: Read>(input: R) -> Result<Vec<BoundPoint>> {
    let mut reader = ReaderBuilder::new().from_reader(input);
    check_header(&mut reader, &BOUND_HEADER)?;
    reader
        .records()
        .map(|record| {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            Ok(BoundPoint {
                curve_id: record[0].to_string(),
                alpha: parse(&record[1], "alpha", line)?,
                x: parse(&record[2], "x", line)?,
                value: parse(&record[3], "value", line)?,
            })
        })
        .collect()
}

pub fn write_divergence_csv<W: Write>(out: W, rows: &[DivergenceRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(DIVERGENCE_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([format_float(r.alpha), r.method.clone(), format_float(r.value)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata<W: Write>(mut out: W, metadata: &Metadata) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, metadata)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// `<stem>.<suffix>` next to `output`: `runs/x.csv` gives `runs/x.meta.json`.
pub fn sibling_path(output: &Path, suffix: &str) -> PathBuf {
    output.with_extension(suffix)
}

/// Writes the regret table, metadata and (when requested) the trajectory
/// dump. Returns the paths written.
pub fn write_experiment(output: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut written = vec![output.to_path_buf()];
    write_regret_csv(BufWriter::new(File::create(output)?), &result.curves)?;
    let meta = sibling_path(output, "meta.json");
    write_metadata(BufWriter::new(File::create(&meta)?), &result.metadata)?;
    written.push(meta);
    if result.metadata.dump_trajectories {
        let reps = sibling_path(output, "reps.csv");
        write_trajectories_csv(BufWriter::new(File::create(&reps)?), &result.runs)?;
        written.push(reps);
    }
    Ok(written)
}
