//! Report structures shared by every subcommand, plus the JSON writer
//! that pins float formatting to 17 significant digits so identical
//! runs produce byte-identical artifacts.

use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// The mathematical claim the check verifies, quoted so failures
    /// are traceable to the source statement.
    pub anchor: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    /// 0.0 marks an exact (symbolic) check.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub model: Option<String>,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

impl Report {
    pub fn new(command: &str, model: Option<String>, seed: u64) -> Report {
        Report {
            command: command.to_string(),
            model,
            seed,
            checks: Vec::new(),
            passed: true,
            notes: Vec::new(),
            payload: None,
        }
    }

    pub fn exact(&mut self, name: &str, anchor: &str, ok: bool) {
        self.push(name, anchor, ok, None, 0.0);
    }

    pub fn measured(&mut self, name: &str, anchor: &str, measured: f64, tolerance: f64) {
        let ok = measured.is_finite() && measured <= tolerance;
        self.push(name, anchor, ok, Some(measured), tolerance);
    }

    pub fn push(&mut self, name: &str, anchor: &str, ok: bool, measured: Option<f64>, tolerance: f64) {
        if !ok {
            self.passed = false;
        }
        self.checks.push(Check {
            name: name.to_string(),
            anchor: anchor.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            measured,
            tolerance,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

/// JSON formatter writing every float with 17 significant digits.
struct SigFig17;

impl serde_json::ser::Formatter for SigFig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value as f64))
    }
}

/// 17-significant-digit decimal form, valid as a JSON number.
pub fn fmt_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else {
        // JSON has no non-finite numbers; encode as null.
        "null".to_string()
    }
}

pub fn to_json(value: &impl Serialize) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFig17);
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// One CSV row of floats, 17 significant digits each.
pub fn csv_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(",")
}
