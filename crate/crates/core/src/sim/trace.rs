use nalgebra::DVector;

use crate::error::{Error, Result};

/// One controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub r: DVector<f64>,
    pub q: DVector<f64>,
    pub dq: DVector<f64>,
    /// Mean plant acceleration over the tick.
    pub ddq: DVector<f64>,
    pub tau: DVector<f64>,
    pub s: DVector<f64>,
    pub hhat: DVector<f64>,
    /// Lumped uncertainty against the nominal model at this tick.
    pub h: DVector<f64>,
    /// Disturbance at the start of the tick.
    pub d: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub n: usize,
    pub period: f64,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn new(n: usize, period: f64) -> Self {
        Self {
            n,
            period,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `q_k − r_k` for joint `i`.
    pub fn error(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.q[i] - r.r[i]).collect()
    }
}

const TRACE_GROUPS: [&str; 7] = ["r", "q", "dq", "tau", "s", "hhat", "d"];
const DIAGNOSTIC_GROUPS: [&str; 2] = ["ddq", "h"];

fn header(groups: &[&str], n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for g in groups {
        h.extend((1..=n).map(|i| format!("{g}_{i}")));
    }
    h
}

fn write_csv(
    trace: &SimTrace,
    groups: &[&str],
    fields: impl Fn(&TraceRow) -> Vec<&DVector<f64>>,
) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Contract(format!("csv: {e}"));
    w.write_record(header(groups, trace.n)).map_err(csv_err)?;
    for row in &trace.rows {
        // `{}` on f64 prints the shortest text that parses back exactly
        let mut rec = vec![format!("{}", row.t)];
        for v in fields(row) {
            rec.extend(v.iter().map(|x| format!("{x}")));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Contract(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// `trace.csv` and `diagnostics.csv` contents.
pub fn trace_csv(trace: &SimTrace) -> Result<(String, String)> {
    let main = write_csv(trace, &TRACE_GROUPS, |r| {
        vec![&r.r, &r.q, &r.dq, &r.tau, &r.s, &r.hhat, &r.d]
    })?;
    let diag = write_csv(trace, &DIAGNOSTIC_GROUPS, |r| vec![&r.ddq, &r.h])?;
    Ok((main, diag))
}

fn read_csv(text: &str, groups: &[&str]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let head = rd
        .headers()
        .map_err(|e| Error::Parse(format!("csv header: {e}")))?
        .clone();
    let cols = head.len();
    if cols < 1 || (cols - 1) % groups.len() != 0 {
        return Err(Error::Parse("unexpected trace column count".into()));
    }
    let n = (cols - 1) / groups.len();
    let expected = header(groups, n);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse("unexpected trace header".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("csv row {}: {e}", line + 2)))?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("csv row {}: {e}", line + 2)))?;
        rows.push(vals);
    }
    Ok((n, rows))
}

/// Rebuilds a trace from the two CSV files.
pub fn parse_trace(trace_text: &str, diagnostics_text: &str, period: f64) -> Result<SimTrace> {
    let (n, main) = read_csv(trace_text, &TRACE_GROUPS)?;
    let (n2, diag) = read_csv(diagnostics_text, &DIAGNOSTIC_GROUPS)?;
    if n != n2 || main.len() != diag.len() {
        return Err(Error::Parse("trace and diagnostics disagree in shape".into()));
    }
    let group = |row: &[f64], g: usize| DVector::from_column_slice(&row[1 + g * n..1 + (g + 1) * n]);
    let mut out = SimTrace::new(n, period);
    for (m, d) in main.iter().zip(&diag) {
        if m[0] != d[0] {
            return Err(Error::Parse("trace and diagnostics disagree in time".into()));
        }
        out.push(TraceRow {
            t: m[0],
            r: group(m, 0),
            q: group(m, 1),
            dq: group(m, 2),
            tau: group(m, 3),
            s: group(m, 4),
            hhat: group(m, 5),
            d: group(m, 6),
            ddq: group(d, 0),
            h: group(d, 1),
        });
    }
    Ok(out)
}
