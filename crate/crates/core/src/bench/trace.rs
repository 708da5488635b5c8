//! Convergence trace CSV.
//!
//! Floats are written with 17 significant digits so a trace can be replayed
//! exactly. An undefined relative gap is an empty field.

use std::io::{self, Write};

use crate::metrics::ConvergenceRecord;

pub const HEADER: &str = "iter,elapsed_sec,psi,fw_gap,lb,blb,rel_gap,gamma,reset";

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{HEADER}")?;
        Ok(Self { out })
    }

    /// Writes one row and flushes, so a partial trace survives a later failure.
    pub fn write(&mut self, r: &ConvergenceRecord) -> io::Result<()> {
        let rel_gap = r.rgap.map(|g| format!("{g:.16e}")).unwrap_or_default();
        writeln!(
            self.out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            r.k,
            r.elapsed,
            r.psi,
            r.fw_gap,
            r.lb,
            r.blb,
            rel_gap,
            r.gamma,
            u8::from(r.reset)
        )?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for TraceParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for TraceParseError {}

/// Reads a trace written by [`TraceWriter`].
pub fn parse_trace(text: &str) -> Result<Vec<ConvergenceRecord>, TraceParseError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, message: String| TraceParseError { line, message };
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((_, h)) => return Err(err(1, format!("unexpected header {h:?}"))),
        None => return Err(err(1, "empty trace".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(n, format!("expected 9 fields, found {}", fields.len())));
        }
        let float = |idx: usize| {
            fields[idx]
                .parse::<f64>()
                .map_err(|e| err(n, format!("field {idx}: {e}")))
        };
        let k = fields[0]
            .parse::<usize>()
            .map_err(|e| err(n, format!("iter: {e}")))?;
        let rgap = if fields[6].is_empty() {
            None
        } else {
            Some(float(6)?)
        };
        let reset = match fields[8] {
            "0" => false,
            "1" => true,
            other => return Err(err(n, format!("reset must be 0 or 1, found {other:?}"))),
        };
        out.push(ConvergenceRecord {
            k,
            elapsed: float(1)?,
            psi: float(2)?,
            fw_gap: float(3)?,
            lb: float(4)?,
            blb: float(5)?,
            rgap,
            gamma: float(7)?,
            reset,
        });
    }
    Ok(out)
}
