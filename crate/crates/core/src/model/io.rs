//! CSV readers and writers for raw signals and feature tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{BvpSample, FeatureTable, FeatureWindow, GazeSample, Label, Phase};
use crate::error::{Error, Result};

const GAZE_HEADER: [&str; 6] = ["t", "x", "y", "pupil_left", "pupil_right", "valid"];
const BVP_HEADER: [&str; 2] = ["t", "value"];
const FEATURE_PREFIX: [&str; 5] = ["participant", "phase", "window_index", "t_start", "t_end"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Largest backwards timestamp step tolerated (seconds).
    pub jitter_s: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { jitter_s: 1e-3 }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), headers),
        ));
    }
    Ok(())
}

fn parse_required(path: &Path, line: u64, name: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(path, line, format!("column {name}: cannot parse {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("column {name}: non-finite value")));
    }
    Ok(v)
}

fn parse_optional(path: &Path, line: u64, name: &str, field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_required(path, line, name, field).map(Some)
    }
}

fn check_monotone(path: &Path, line: u64, prev: Option<f64>, t: f64, opts: &LoadOptions) -> Result<()> {
    if let Some(p) = prev {
        if t < p - opts.jitter_s {
            return Err(parse_err(
                path,
                line,
                format!("timestamp {t} goes backwards from {p} beyond the {} s jitter", opts.jitter_s),
            ));
        }
    }
    Ok(())
}

fn sort_stable<T>(samples: &mut [T], key: impl Fn(&T) -> f64) {
    samples.sort_by(|a, b| key(a).total_cmp(&key(b)));
}

/// Reads a gaze CSV (`t,x,y,pupil_left,pupil_right,valid`).
pub fn load_gaze(path: &Path, opts: &LoadOptions) -> Result<Vec<GazeSample>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &GAZE_HEADER)?;
    let mut out = Vec::new();
    let mut prev = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != GAZE_HEADER.len() {
            return Err(parse_err(path, line, format!("expected 6 fields, found {}", rec.len())));
        }
        let t = parse_required(path, line, "t", &rec[0])?;
        check_monotone(path, line, prev, t, opts)?;
        prev = Some(prev.map_or(t, |p: f64| p.max(t)));
        let valid = match &rec[5] {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(path, line, format!("column valid: expected 0 or 1, found {other:?}"))),
        };
        out.push(GazeSample {
            t,
            x: parse_optional(path, line, "x", &rec[1])?,
            y: parse_optional(path, line, "y", &rec[2])?,
            pupil_left: parse_optional(path, line, "pupil_left", &rec[3])?,
            pupil_right: parse_optional(path, line, "pupil_right", &rec[4])?,
            valid,
        });
    }
    if out.is_empty() {
        return Err(Error::data(format!("{}: no samples", path.display())));
    }
    sort_stable(&mut out, |s| s.t);
    Ok(out)
}

/// Reads a BVP CSV (`t,value`).
pub fn load_bvp(path: &Path, opts: &LoadOptions) -> Result<Vec<BvpSample>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &BVP_HEADER)?;
    let mut out = Vec::new();
    let mut prev = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != BVP_HEADER.len() {
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let t = parse_required(path, line, "t", &rec[0])?;
        check_monotone(path, line, prev, t, opts)?;
        prev = Some(prev.map_or(t, |p: f64| p.max(t)));
        out.push(BvpSample {
            t,
            value: parse_required(path, line, "value", &rec[1])?,
        });
    }
    if out.is_empty() {
        return Err(Error::data(format!("{}: no samples", path.display())));
    }
    sort_stable(&mut out, |s| s.t);
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_gaze(path: &Path, samples: &[GazeSample]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", GAZE_HEADER.join(",")).map_err(io)?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.t,
            opt(s.x),
            opt(s.y),
            opt(s.pupil_left),
            opt(s.pupil_right),
            u8::from(s.valid)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_bvp(path: &Path, samples: &[BvpSample]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", BVP_HEADER.join(",")).map_err(io)?;
    for s in samples {
        writeln!(w, "{},{}", s.t, s.value).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_feature_csv(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let header: Vec<&str> = FEATURE_PREFIX
        .iter()
        .copied()
        .chain(table.registry().iter().map(String::as_str))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for win in table.windows() {
        write!(
            w,
            "{},{},{},{},{}",
            win.participant_id, win.phase, win.window_index, win.t_start, win.t_end
        )
        .map_err(io)?;
        for v in &win.values {
            write!(w, ",{}", opt(*v)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.len() < FEATURE_PREFIX.len()
        || headers.iter().take(FEATURE_PREFIX.len()).ne(FEATURE_PREFIX.iter().copied())
    {
        return Err(parse_err(
            path,
            1,
            format!("feature table must start with {}", FEATURE_PREFIX.join(",")),
        ));
    }
    let registry: Vec<String> = headers.iter().skip(FEATURE_PREFIX.len()).map(String::from).collect();
    let mut table = FeatureTable::new(registry.clone());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let phase: Phase = rec[1]
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        let window_index: usize = rec[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad window_index {:?}", &rec[2])))?;
        let values = registry
            .iter()
            .enumerate()
            .map(|(i, name)| parse_optional(path, line, name, &rec[FEATURE_PREFIX.len() + i]))
            .collect::<Result<Vec<_>>>()?;
        table
            .push(FeatureWindow {
                participant_id: rec[0].to_string(),
                phase,
                window_index,
                t_start: parse_required(path, line, "t_start", &rec[3])?,
                t_end: parse_required(path, line, "t_end", &rec[4])?,
                values,
            })
            .map_err(|e| parse_err(path, line, e.to_string()))?;
    }
    Ok(table)
}

pub fn write_labels_csv(path: &Path, labels: &[(String, Label)]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "participant,label").map_err(io)?;
    for (id, label) in labels {
        writeln!(w, "{id},{}", label.as_str()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<(String, Label)>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["participant", "label"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let label: Label = rec[1]
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        out.push((rec[0].to_string(), label));
    }
    Ok(out)
}
