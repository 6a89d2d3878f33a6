//! Daily multi-column series with a missing-cell mask, and CSV ingestion.

use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Cell spellings read as missing (masked with a warning) rather than rejected.
const MISSING_TOKENS: [&str; 6] = ["", "na", "n/a", "nan", "null", "none"];

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    dates: Vec<NaiveDate>,
    columns: Vec<String>,
    /// Column-major values; masked cells hold NaN.
    values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Replace masked cells by the previous observed value in the column.
    pub forward_fill: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub frame: TimeSeriesFrame,
    pub warnings: Vec<String>,
}

impl TimeSeriesFrame {
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("frame: no value columns"));
        }
        if columns.len() != values.len() {
            return Err(Error::invalid(format!("frame: {} names for {} columns", columns.len(), values.len())));
        }
        for (name, col) in columns.iter().zip(&values) {
            if col.len() != dates.len() {
                return Err(Error::invalid(format!(
                    "frame: column '{name}' has {} values for {} dates",
                    col.len(),
                    dates.len()
                )));
            }
        }
        for (i, name) in columns.iter().enumerate() {
            if columns[..i].contains(name) {
                return Err(Error::invalid(format!("frame: duplicate column '{name}'")));
            }
        }
        for w in dates.windows(2) {
            if w[1] - w[0] != Duration::days(1) {
                return Err(Error::invalid(format!("frame: dates {} and {} are not consecutive days", w[0], w[1])));
            }
        }
        Ok(TimeSeriesFrame { dates, columns, values })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|j| self.values[j].as_slice())
    }

    pub fn column_at(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.values[col][row].is_nan()
    }

    pub fn row_complete(&self, row: usize) -> bool {
        self.values.iter().all(|c| !c[row].is_nan())
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.dates.first()?;
        let k = (date - first).num_days();
        (k >= 0 && (k as usize) < self.len()).then_some(k as usize)
    }

    /// Frame restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<TimeSeriesFrame> {
        let mut values = Vec::with_capacity(names.len());
        for n in names {
            let j = self
                .column_index(n)
                .ok_or_else(|| Error::Mismatch(format!("data has no column '{n}' (columns: {})", self.columns.join(","))))?;
            values.push(self.values[j].clone());
        }
        TimeSeriesFrame::new(self.dates.clone(), names.to_vec(), values)
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeriesFrame {
        TimeSeriesFrame {
            dates: self.dates[start..end].to_vec(),
            columns: self.columns.clone(),
            values: self.values.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            for c in &self.values {
                rec.push(if c[i].is_nan() { String::new() } else { c[i].to_string() });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a CSV with a `date` column (ISO-8601) and numeric value columns.
/// Row numbers in messages count the header as row 1.
pub fn ingest(path: &Path, opts: IngestOptions) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    ingest_reader(file, opts).map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn ingest_reader<R: std::io::Read>(reader: R, opts: IngestOptions) -> Result<Ingested> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers()?.clone();
    let date_col = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| Error::invalid("no 'date' column"))?;
    let names: Vec<String> = headers.iter().enumerate().filter(|(i, _)| *i != date_col).map(|(_, h)| h.to_string()).collect();
    if names.is_empty() {
        return Err(Error::invalid("no value columns besides 'date'"));
    }
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut warnings = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let raw = rec.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw, DATE_FORMAT)
            .map_err(|_| Error::invalid(format!("row {row}: unparseable date '{raw}'")))?;
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(Error::invalid(format!("row {row}: duplicate date {date} (also row {})", row - 1)));
            }
            if date < prev {
                return Err(Error::invalid(format!("row {row}: date {date} is earlier than row {} ({prev})", row - 1)));
            }
            if date - prev != Duration::days(1) {
                return Err(Error::invalid(format!(
                    "row {row}: gap, missing date {} between rows {} and {row}",
                    prev + Duration::days(1),
                    row - 1
                )));
            }
        }
        dates.push(date);
        let mut k = 0;
        for (c, cell) in rec.iter().enumerate() {
            if c == date_col {
                continue;
            }
            let v = if MISSING_TOKENS.contains(&cell.to_ascii_lowercase().as_str()) {
                warnings.push(format!("row {row}, column '{}': value '{cell}' treated as missing", names[k]));
                f64::NAN
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::invalid(format!("row {row}, column '{}': unparseable value '{cell}'", names[k])))?;
                if !v.is_finite() {
                    return Err(Error::invalid(format!("row {row}, column '{}': non-finite value '{cell}'", names[k])));
                }
                v
            };
            values[k].push(v);
            k += 1;
        }
        if k != names.len() {
            return Err(Error::invalid(format!("row {row}: expected {} values, found {k}", names.len())));
        }
    }
    if opts.forward_fill {
        for (name, col) in names.iter().zip(values.iter_mut()) {
            let mut last = None;
            for (i, v) in col.iter_mut().enumerate() {
                if v.is_nan() {
                    if let Some(p) = last {
                        *v = p;
                        warnings.push(format!("row {}, column '{name}': forward-filled", i + 2));
                    }
                } else {
                    last = Some(*v);
                }
            }
        }
    }
    Ok(Ingested { frame: TimeSeriesFrame::new(dates, names, values)?, warnings })
}
