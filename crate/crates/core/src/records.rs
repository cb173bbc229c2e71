//! Run-record files: replicated `(y, z)` observations for calibration.
//!
//! ```text
//! wsn-runs v1 grid=32x32 p1=0.9 p2=0.5 pc=0.9 pw=0.01
//! # comment lines are ignored
//! normal 0000...0000 0040...0000
//! event@3,17 0000...1c00 0000...0c00
//! normal - 0000...0000
//! ```
//!
//! The header carries the grid dimensions and, optionally, all four
//! generating parameters. Each following line is one replication: the run
//! kind (`normal` or `event@ROW,COL`), the detection vector `y` (or `-` when
//! not observed) and the response vector `z`. Vectors are hex-packed
//! bitstrings in row-major node order, most significant bit first within each
//! byte, with zero padding in the final byte.

use std::fmt::Write as _;

use thiserror::Error;

use crate::calibration::{CalibrationRun, RunKind};
use crate::detectors::ResponseField;
use crate::hexgrid::{GridError, GridTopology, NodeId};
use crate::probability::SensorParams;
use crate::simulator::DetectionField;

pub const MAGIC: &str = "wsn-runs";
pub const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("empty run-record file")]
    Empty,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecordFile {
    pub rows: usize,
    pub cols: usize,
    pub params: Option<SensorParams>,
    pub runs: Vec<CalibrationRun>,
}

pub fn pack_bits(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        bytes[i / 8] |= 0x80 >> (i % 8);
    }
    hex::encode(bytes)
}

pub fn unpack_bits(text: &str, len: usize) -> Result<Vec<bool>, String> {
    let expected = len.div_ceil(8) * 2;
    if text.len() != expected {
        return Err(format!("bitstring has {} hex digits, expected {expected}", text.len()));
    }
    let bytes = hex::decode(text).map_err(|e| format!("bad hex: {e}"))?;
    let bits: Vec<bool> = (0..bytes.len() * 8)
        .map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)
        .collect();
    if bits[len..].iter().any(|&b| b) {
        return Err("non-zero padding bits".into());
    }
    Ok(bits[..len].to_vec())
}

pub fn write_header(out: &mut String, rows: usize, cols: usize, params: Option<&SensorParams>) {
    let _ = write!(out, "{MAGIC} {VERSION} grid={rows}x{cols}");
    if let Some(p) = params {
        let _ = write!(out, " p1={} p2={} pc={} pw={}", p.p1, p.p2, p.pc, p.pw);
    }
    out.push('\n');
}

pub fn write_run(out: &mut String, run: &CalibrationRun) {
    match run.kind {
        RunKind::Normal => out.push_str("normal"),
        RunKind::Event(n) => {
            let _ = write!(out, "event@{},{}", n.row, n.col);
        }
    }
    out.push(' ');
    match &run.detections {
        Some(y) => out.push_str(&pack_bits(y.bits())),
        None => out.push('-'),
    }
    out.push(' ');
    out.push_str(&pack_bits(run.responses.bits()));
    out.push('\n');
}

impl RunRecordFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_header(&mut out, self.rows, self.cols, self.params.as_ref());
        for run in &self.runs {
            write_run(&mut out, run);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, RecordError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(RecordError::Empty)?;
        let perr = |line: usize, reason: String| RecordError::Parse { line, reason };

        let mut fields = header.split_whitespace();
        if fields.next() != Some(MAGIC) || fields.next() != Some(VERSION) {
            return Err(perr(hline, format!("header must start with '{MAGIC} {VERSION}'")));
        }
        let mut grid = None;
        let mut values = [None; 4];
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| perr(hline, format!("header field '{field}' is not key=value")))?;
            match key {
                "grid" => grid = Some(parse_grid(value).map_err(|e| perr(hline, e))?),
                "p1" | "p2" | "pc" | "pw" => {
                    let slot = ["p1", "p2", "pc", "pw"].iter().position(|k| *k == key).unwrap();
                    values[slot] = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| perr(hline, format!("{key}='{value}' is not a number")))?,
                    );
                }
                _ => return Err(perr(hline, format!("unknown header field '{key}'"))),
            }
        }
        let (rows, cols) = grid.ok_or_else(|| perr(hline, "header lacks grid=RxC".into()))?;
        let params = match values {
            [None, None, None, None] => None,
            [Some(p1), Some(p2), Some(pc), Some(pw)] => {
                Some(SensorParams::new(p1, p2, pc, pw).map_err(|e| perr(hline, e.to_string()))?)
            }
            _ => return Err(perr(hline, "header must give all of p1, p2, pc, pw or none".into())),
        };
        let topology = GridTopology::new(rows, cols)?;

        let mut runs = Vec::new();
        for (line, text) in lines {
            let parts: Vec<&str> = text.split_whitespace().collect();
            let [kind, y, z] = parts[..] else {
                return Err(perr(line, format!("expected 3 fields, found {}", parts.len())));
            };
            let kind = parse_kind(kind, &topology).map_err(|e| perr(line, e))?;
            let detections = match y {
                "-" => None,
                hex => {
                    let bits = unpack_bits(hex, topology.len()).map_err(|e| perr(line, format!("y: {e}")))?;
                    Some(DetectionField::new(bits, &topology).map_err(|e| perr(line, e.to_string()))?)
                }
            };
            let bits = unpack_bits(z, topology.len()).map_err(|e| perr(line, format!("z: {e}")))?;
            let responses = ResponseField::new(bits, &topology).map_err(|e| perr(line, e.to_string()))?;
            runs.push(CalibrationRun {
                kind,
                detections,
                responses,
            });
        }
        Ok(Self {
            rows,
            cols,
            params,
            runs,
        })
    }
}

pub fn parse_grid(value: &str) -> Result<(usize, usize), String> {
    let (r, c) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid '{value}' is not RxC"))?;
    let rows = r.trim().parse().map_err(|_| format!("grid rows '{r}' is not an integer"))?;
    let cols = c.trim().parse().map_err(|_| format!("grid cols '{c}' is not an integer"))?;
    Ok((rows, cols))
}

fn parse_kind(token: &str, topology: &GridTopology) -> Result<RunKind, String> {
    if token == "normal" {
        return Ok(RunKind::Normal);
    }
    let pos = token
        .strip_prefix("event@")
        .ok_or_else(|| format!("run kind '{token}' is neither 'normal' nor 'event@R,C'"))?;
    let (r, c) = pos.split_once(',').ok_or_else(|| format!("event position '{pos}' is not R,C"))?;
    let node = NodeId::new(
        r.parse().map_err(|_| format!("bad row '{r}'"))?,
        c.parse().map_err(|_| format!("bad col '{c}'"))?,
    );
    topology.index_of(node).map_err(|e| e.to_string())?;
    Ok(RunKind::Event(node))
}
