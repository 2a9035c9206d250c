//! CSV output.
//!
//! Every file starts with one `#` line naming the schema, followed by a
//! header row. Infinite values are written as `inf`, missing values as an
//! empty field, booleans as `true`/`false`.

use std::fmt;
use std::io::{self, Write};

use qnetsense::scenario::Protocol;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

pub const LOSS_NOTE: &str = "eta = 10^(-loss_db/10)";

/// Columns shared by `sweep-loss` and `sweep-phase`.
pub const SWEEP_COLUMNS: [&str; 12] = [
    "loss_db",
    "eta",
    "theta",
    "protocol",
    "measurement",
    "p_suc",
    "p",
    "f_c",
    "f_q_bound",
    "ccrb",
    "qcrb",
    "diverged",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Num(x) => write!(f, "{}", format_number(*x)),
            Self::Int(n) => write!(f, "{n}"),
            Self::Text(s) => f.write_str(s),
            Self::Bool(b) => write!(f, "{b}"),
            Self::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Num(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Self::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_owned())
    }
}

pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else if x == 0.0 {
        "0".to_owned()
    } else if !(1e-4..1e7).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Inverse of [`format_number`]: empty is `None`.
pub fn parse_number(s: &str) -> Option<Result<f64, String>> {
    match s.trim() {
        "" => None,
        "inf" => Some(Ok(f64::INFINITY)),
        "-inf" => Some(Ok(f64::NEG_INFINITY)),
        t => Some(t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("bad number `{t}`"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: &'static str,
    pub note: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Self {
            schema,
            note: String::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn metadata(&self) -> String {
        let mut m = format!("# qnetsense {}/{}; {}", self.schema, SCHEMA_VERSION, LOSS_NOTE);
        if !self.note.is_empty() {
            m.push_str("; ");
            m.push_str(&self.note.replace('\n', " "));
        }
        m
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.metadata())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 cells")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("missing `# qnetsense {0}/{SCHEMA_VERSION}` metadata line")]
    Metadata(&'static str),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("csv: {0}")]
    Csv(String),
}

/// One row of a loss or phase sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub loss_db: f64,
    pub eta: f64,
    pub theta: f64,
    pub protocol: Protocol,
    pub measurement: String,
    pub p_suc: f64,
    /// Absent when the pattern never heralds.
    pub p: Option<f64>,
    pub f_c: f64,
    pub f_q_bound: f64,
    pub ccrb: f64,
    pub qcrb: f64,
    pub diverged: bool,
}

pub fn read_sweep(text: &str) -> Result<Vec<SweepRecord>, TableError> {
    let first = text.lines().next().unwrap_or_default();
    if !first.starts_with(&format!("# qnetsense sweep/{SCHEMA_VERSION}")) {
        return Err(TableError::Metadata("sweep"));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| TableError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != SWEEP_COLUMNS {
        return Err(TableError::Header(header));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        let err = |message: String| TableError::Row { row, message };
        let opt = |k: usize| parse_number(&rec[k]).transpose().map_err(err);
        let num = |k: usize| opt(k)?.ok_or_else(|| err(format!("{} is empty", SWEEP_COLUMNS[k])));
        let protocol = match &rec[3] {
            "central-station" => Protocol::CentralStation,
            "direct" => Protocol::Direct,
            other => return Err(err(format!("unknown protocol `{other}`"))),
        };
        let diverged = match &rec[11] {
            "true" => true,
            "false" => false,
            other => return Err(err(format!("bad flag `{other}`"))),
        };
        out.push(SweepRecord {
            loss_db: num(0)?,
            eta: num(1)?,
            theta: num(2)?,
            protocol,
            measurement: rec[4].to_owned(),
            p_suc: num(5)?,
            p: opt(6)?,
            f_c: num(7)?,
            f_q_bound: num(8)?,
            ccrb: num(9)?,
            qcrb: num(10)?,
            diverged,
        });
    }
    Ok(out)
}
