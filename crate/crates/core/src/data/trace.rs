use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{JOINTS, SAMPLE_RATE_HZ};
use crate::error::{ensure_finite, Error, Result};
use crate::io_util::write_atomic;

pub const TRACE_HEADER: [&str; 7] = ["time_ms", "tau1", "vel1", "tau2", "vel2", "label", "stiffness"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    /// N·m
    pub torque: f64,
    /// rad/s
    pub velocity: f64,
}

/// A labeled 1 kHz recording of both joints at one stiffness level.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    torque: [Vec<f64>; JOINTS],
    velocity: [Vec<f64>; JOINTS],
    label: Vec<u8>,
    stiffness_level: u8,
}

impl Trace {
    pub fn new(
        torque: [Vec<f64>; JOINTS],
        velocity: [Vec<f64>; JOINTS],
        label: Vec<u8>,
        stiffness_level: u8,
    ) -> Result<Self> {
        let n = label.len();
        if torque.iter().chain(&velocity).any(|s| s.len() != n) {
            return Err(Error::Format("trace sequences differ in length".into()));
        }
        if let Some(i) = label.iter().position(|&l| l > 1) {
            return Err(Error::Format(format!("label at sample {i} is not binary")));
        }
        if !(2..=4).contains(&stiffness_level) {
            return Err(Error::Format(format!(
                "stiffness level must be 2, 3 or 4, got {stiffness_level}"
            )));
        }
        for s in torque.iter().chain(&velocity) {
            ensure_finite(s, "trace")?;
        }
        Ok(Self {
            torque,
            velocity,
            label,
            stiffness_level,
        })
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE_HZ
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / SAMPLE_RATE_HZ as f64
    }

    pub fn stiffness_level(&self) -> u8 {
        self.stiffness_level
    }

    pub fn labels(&self) -> &[u8] {
        &self.label
    }

    pub fn torque(&self, joint: usize) -> &[f64] {
        &self.torque[joint]
    }

    pub fn velocity(&self, joint: usize) -> &[f64] {
        &self.velocity[joint]
    }

    /// Channel `c` in `τ₁, v₁, τ₂, v₂` order.
    pub fn channel(&self, c: usize) -> &[f64] {
        if c.is_multiple_of(2) {
            &self.torque[c / 2]
        } else {
            &self.velocity[c / 2]
        }
    }

    pub fn sample(&self, joint: usize, t: usize) -> JointSample {
        JointSample {
            torque: self.torque[joint][t],
            velocity: self.velocity[joint][t],
        }
    }
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    write_atomic(path, |w| {
        let mut w = BufWriter::new(w);
        writeln!(w, "{}", TRACE_HEADER.join(","))?;
        for t in 0..trace.len() {
            writeln!(
                w,
                "{t},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                trace.torque[0][t],
                trace.velocity[0][t],
                trace.torque[1][t],
                trace.velocity[1][t],
                trace.label[t],
                trace.stiffness_level
            )?;
        }
        w.flush()
    })
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "empty file, expected header".into())),
    };
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(parse_err(1, format!("header must be `{}`", TRACE_HEADER.join(","))));
    }

    let mut torque = [Vec::new(), Vec::new()];
    let mut velocity = [Vec::new(), Vec::new()];
    let mut label = Vec::new();
    let mut stiffness = None;
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRACE_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", TRACE_HEADER.len(), record.len()),
            ));
        }
        let time: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad time_ms `{}`", &record[0])))?;
        if time != label.len() as u64 {
            return Err(parse_err(
                line,
                format!("time_ms {time} out of sequence (expected {})", label.len()),
            ));
        }
        let real = |i: usize| -> Result<f64> {
            let v: f64 = record[i]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad {} `{}`", TRACE_HEADER[i], &record[i])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite {}", TRACE_HEADER[i])));
            }
            Ok(v)
        };
        torque[0].push(real(1)?);
        velocity[0].push(real(2)?);
        torque[1].push(real(3)?);
        velocity[1].push(real(4)?);
        match record[5].trim() {
            "0" => label.push(0),
            "1" => label.push(1),
            other => return Err(parse_err(line, format!("label must be 0 or 1, got `{other}`"))),
        }
        let level: u8 = record[6]
            .trim()
            .parse()
            .ok()
            .filter(|l| (2..=4).contains(l))
            .ok_or_else(|| parse_err(line, format!("stiffness must be 2, 3 or 4, got `{}`", &record[6])))?;
        match stiffness {
            None => stiffness = Some(level),
            Some(s) if s != level => {
                return Err(parse_err(line, format!("stiffness changed from {s} to {level}")))
            }
            _ => {}
        }
    }
    let stiffness = stiffness.ok_or_else(|| parse_err(2, "trace has no samples".into()))?;
    Trace::new(torque, velocity, label, stiffness)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("t.csv");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn label_two_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "time_ms,tau1,vel1,tau2,vel2,label,stiffness\n0,0,0,0,0,2,4\n");
        match read_trace(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn truncated_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "time_ms,tau1,vel1,tau2,vel2,label,stiffness\n0,0,0,0,0,0,4\n1,0.5,0.1,0",
        );
        match read_trace(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t,a,b\n");
        assert!(matches!(read_trace(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn mixed_stiffness() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "time_ms,tau1,vel1,tau2,vel2,label,stiffness\n0,0,0,0,0,0,4\n1,0,0,0,0,0,3\n",
        );
        assert!(matches!(read_trace(&p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn inconsistent_lengths() {
        let r = Trace::new([vec![0.0; 3], vec![0.0; 2]], [vec![0.0; 3], vec![0.0; 3]], vec![0; 3], 4);
        assert!(matches!(r, Err(Error::Format(_))));
    }
}
