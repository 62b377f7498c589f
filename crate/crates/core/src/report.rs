//! Training traces, the training stopwatch, and the CSV trace format.
//!
//! A trace file holds one or more reports:
//!
//! ```text
//! # heldout_metric=mean_per_frame_is_divergence
//! # report stage=online-r0.7-b1000 seed=3 model=out.isnm config=k=8 epsilon=...
//! stage,samples,seconds,train_obj,heldout_obj
//! online-r0.7-b1000,0,0,,1.25
//! ```
//!
//! Empty cells mean "not measured". Floats are written with Rust's shortest
//! round-trip formatting, so import after export is exact.

use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "stage,samples,seconds,train_obj,heldout_obj";
pub const HELDOUT_METRIC: &str = "mean_per_frame_is_divergence";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Real elapsed time.
    Wall,
    /// A counter advanced by one millisecond per reading; reports become byte-reproducible.
    Virtual,
}

/// Pausable training clock. Readings are strictly increasing.
#[derive(Debug, Clone)]
pub struct Stopwatch {
    mode: ClockMode,
    running_since: Option<Instant>,
    accumulated: Duration,
    ticks: u64,
    last: f64,
}

impl Stopwatch {
    /// A paused stopwatch reading zero.
    pub fn new(mode: ClockMode) -> Self {
        Stopwatch {
            mode,
            running_since: None,
            accumulated: Duration::ZERO,
            ticks: 0,
            last: 0.0,
        }
    }

    pub fn resume(&mut self) {
        if self.running_since.is_none() {
            self.running_since = Some(Instant::now());
        }
    }

    pub fn pause(&mut self) {
        if let Some(start) = self.running_since.take() {
            self.accumulated += start.elapsed();
        }
    }

    pub fn is_running(&self) -> bool {
        self.running_since.is_some()
    }

    /// Seconds of running time so far.
    pub fn seconds(&mut self) -> f64 {
        let raw = match self.mode {
            ClockMode::Wall => {
                let running = self.running_since.map_or(Duration::ZERO, |s| s.elapsed());
                (self.accumulated + running).as_secs_f64()
            }
            ClockMode::Virtual => {
                self.ticks += 1;
                self.ticks as f64 * 1e-3
            }
        };
        let next = if raw > self.last { raw } else { next_up(self.last) };
        self.last = next;
        next
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Epochs for batch training, samples for online training.
    pub samples: u64,
    pub seconds: f64,
    pub train_objective: Option<f64>,
    pub heldout_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub stage: String,
    pub seed: u64,
    pub config: String,
    pub model_path: Option<String>,
    pub points: Vec<TracePoint>,
}

impl TrainReport {
    pub fn new(stage: impl Into<String>, seed: u64, config: impl Into<String>) -> Self {
        TrainReport {
            stage: stage.into(),
            seed,
            config: config.into(),
            model_path: None,
            points: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    /// Last recorded training objective.
    pub fn final_train_objective(&self) -> Option<f64> {
        self.points.iter().rev().find_map(|p| p.train_objective)
    }

    pub fn final_heldout_objective(&self) -> Option<f64> {
        self.points.iter().rev().find_map(|p| p.heldout_objective)
    }

    /// Earliest time at which the held-out objective reached `target` or below.
    pub fn time_to_heldout(&self, target: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.heldout_objective.is_some_and(|h| h <= target))
            .map(|p| p.seconds)
    }

    pub fn time_to_train(&self, target: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.train_objective.is_some_and(|h| h <= target))
            .map(|p| p.seconds)
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn check_token(field: &str, value: &str) -> Result<()> {
    if value.contains([',', '\n', '\r']) || (field != "config" && value.contains(' ')) {
        return Err(Error::MalformedReport(format!("{field} {value:?} contains a separator")));
    }
    Ok(())
}

/// Writes all reports into one CSV trace.
pub fn write_csv<W: Write>(reports: &[TrainReport], mut out: W) -> Result<()> {
    writeln!(out, "# heldout_metric={HELDOUT_METRIC}")?;
    for (i, r) in reports.iter().enumerate() {
        if reports[..i].iter().any(|other| other.stage == r.stage) {
            return Err(Error::MalformedReport(format!("duplicate stage {:?}", r.stage)));
        }
        check_token("stage", &r.stage)?;
        check_token("config", &r.config)?;
        let model = r.model_path.as_deref().unwrap_or("-");
        check_token("model", model)?;
        writeln!(out, "# report stage={} seed={} model={} config={}", r.stage, r.seed, model, r.config)?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        for p in &r.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.stage,
                p.samples,
                p.seconds,
                cell(p.train_objective),
                cell(p.heldout_objective)
            )?;
        }
    }
    Ok(())
}

fn parse_cell(raw: &str, line: usize) -> Result<Option<f64>> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| Error::MalformedReport(format!("line {line}: bad number {raw:?}")))
}

/// Parses a trace written by [`write_csv`]. Rows whose stage has no `# report`
/// header get a report with default metadata.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TrainReport>> {
    let mut reports: Vec<TrainReport> = Vec::new();
    let mut seen_header = false;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if let Some(meta) = line.strip_prefix("# report ") {
            reports.push(parse_meta(meta, lineno)?);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != CSV_HEADER {
                return Err(Error::MalformedReport(format!("line {lineno}: expected header {CSV_HEADER:?}")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::MalformedReport(format!("line {lineno}: expected 5 fields")));
        }
        let samples = fields[1]
            .parse()
            .map_err(|_| Error::MalformedReport(format!("line {lineno}: bad sample count")))?;
        let seconds = parse_cell(fields[2], lineno)?
            .ok_or_else(|| Error::MalformedReport(format!("line {lineno}: missing seconds")))?;
        let point = TracePoint {
            samples,
            seconds,
            train_objective: parse_cell(fields[3], lineno)?,
            heldout_objective: parse_cell(fields[4], lineno)?,
        };
        let stage = fields[0];
        match reports.iter_mut().find(|r| r.stage == stage) {
            Some(r) => r.points.push(point),
            None => {
                let mut r = TrainReport::new(stage, 0, "");
                r.points.push(point);
                reports.push(r);
            }
        }
    }
    if !seen_header {
        return Err(Error::MalformedReport("missing CSV header".into()));
    }
    Ok(reports)
}

fn parse_meta(meta: &str, line: usize) -> Result<TrainReport> {
    let bad = |what: &str| Error::MalformedReport(format!("line {line}: {what}"));
    let (head, config) = meta.split_once(" config=").ok_or_else(|| bad("missing config"))?;
    let mut report = TrainReport::new("", 0, config);
    for token in head.split(' ') {
        let (key, value) = token.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match key {
            "stage" => report.stage = value.to_string(),
            "seed" => report.seed = value.parse().map_err(|_| bad("bad seed"))?,
            "model" => report.model_path = (value != "-").then(|| value.to_string()),
            _ => return Err(bad("unknown key")),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> TrainReport {
        let mut r = TrainReport::new("online-r0.7-b10", 4, "k=3 epsilon=0.000000000001 eta=auto");
        r.model_path = Some("model.isnm".into());
        r.points = vec![
            TracePoint {
                samples: 0,
                seconds: 0.0,
                train_objective: None,
                heldout_objective: Some(1.0 / 3.0),
            },
            TracePoint {
                samples: 10,
                seconds: 0.1 + 0.2,
                train_objective: Some(0.123_456_789_012_345_68),
                heldout_objective: None,
            },
        ];
        r
    }

    #[test]
    fn csv_roundtrip_exact() {
        let reports = vec![sample_report(), TrainReport::new("batch", 1, "k=3")];
        let mut bytes = Vec::new();
        write_csv(&reports, &mut bytes).unwrap();
        let back = read_csv(&bytes[..]).unwrap();
        assert_eq!(back, reports);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\nstage,samples,seconds,train_obj,heldout_obj\n"));
    }

    #[test]
    fn rejects_commas_in_stage() {
        let mut r = sample_report();
        r.stage = "a,b".into();
        assert!(write_csv(&[r], Vec::new()).is_err());
    }

    #[test]
    fn stopwatch_is_strictly_increasing() {
        let mut sw = Stopwatch::new(ClockMode::Wall);
        let mut prev = sw.seconds();
        for _ in 0..1000 {
            let now = sw.seconds();
            assert!(now > prev);
            prev = now;
        }
        sw.resume();
        std::thread::sleep(Duration::from_millis(2));
        sw.pause();
        let paused = sw.seconds();
        assert!(paused >= 0.002);
        std::thread::sleep(Duration::from_millis(5));
        assert!(sw.seconds() < paused + 0.001);
    }

    #[test]
    fn virtual_clock_is_deterministic() {
        let mut a = Stopwatch::new(ClockMode::Virtual);
        let mut b = Stopwatch::new(ClockMode::Virtual);
        for _ in 0..5 {
            assert_eq!(a.seconds().to_bits(), b.seconds().to_bits());
        }
    }

    #[test]
    fn time_to_target() {
        let r = sample_report();
        assert_eq!(r.time_to_heldout(0.5), Some(0.0));
        assert_eq!(r.time_to_train(0.2), Some(0.1 + 0.2));
        assert_eq!(r.time_to_train(0.1), None);
    }
}
