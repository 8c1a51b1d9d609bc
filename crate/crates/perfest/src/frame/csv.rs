//! CSV ingestion and export with RFC-4180 quoting.
//!
//! Column kinds are inferred after parsing: a column is numeric iff every
//! non-missing token is an integer, decimal or scientific-notation literal;
//! any other token forces the whole column categorical. Tokens matching one
//! of the configured NA strings become missing cells.

use std::fs;
use std::path::Path;

use super::{Column, ColumnData, DataFrame, FrameError};

/// Options controlling CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Tokens treated as missing cells (compared after trimming).
    pub na_tokens: Vec<String>,
    /// Whether the first record is a header row.
    pub header_row: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            na_tokens: vec!["NA".to_string(), String::new()],
            header_row: true,
        }
    }
}

/// Splits raw CSV text into records of fields, honouring quotes.
fn parse_records(text: &str) -> Result<Vec<Vec<String>>, FrameError> {
    let mut records = Vec::new();
    let mut record: Vec<String> = Vec::new();
    let mut field = String::new();
    let mut in_quotes = false;
    let mut chars = text.chars().peekable();
    let mut saw_any = false;

    while let Some(c) = chars.next() {
        saw_any = true;
        if in_quotes {
            match c {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        field.push('"');
                    } else {
                        in_quotes = false;
                    }
                }
                _ => field.push(c),
            }
        } else {
            match c {
                '"' => in_quotes = true,
                ',' => {
                    record.push(std::mem::take(&mut field));
                    // Keep empty trailing fields.
                }
                '\r' => {
                    if chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    record.push(std::mem::take(&mut field));
                    records.push(std::mem::take(&mut record));
                }
                '\n' => {
                    record.push(std::mem::take(&mut field));
                    records.push(std::mem::take(&mut record));
                }
                _ => field.push(c),
            }
        }
    }
    if in_quotes {
        return Err(FrameError::Csv {
            row: records.len() + 1,
            message: "unterminated quoted field".into(),
        });
    }
    if !field.is_empty() || !record.is_empty() {
        record.push(field);
        records.push(record);
    }
    if !saw_any {
        return Err(FrameError::Empty);
    }
    // A final empty line produces a spurious single-empty-field record.
    if let Some(last) = records.last() {
        if last.len() == 1 && last[0].is_empty() {
            records.pop();
        }
    }
    if records.is_empty() {
        return Err(FrameError::Empty);
    }
    Ok(records)
}

/// True when the trimmed token is an integer, decimal or scientific literal.
fn is_numeric_token(token: &str) -> bool {
    let t = token.trim();
    let mut chars = t.chars().peekable();
    if matches!(chars.peek(), Some('+') | Some('-')) {
        chars.next();
    }
    let mut int_digits = 0usize;
    while matches!(chars.peek(), Some(c) if c.is_ascii_digit()) {
        chars.next();
        int_digits += 1;
    }
    let mut frac_digits = 0usize;
    if chars.peek() == Some(&'.') {
        chars.next();
        while matches!(chars.peek(), Some(c) if c.is_ascii_digit()) {
            chars.next();
            frac_digits += 1;
        }
    }
    if int_digits + frac_digits == 0 {
        return false;
    }
    if matches!(chars.peek(), Some('e') | Some('E')) {
        chars.next();
        if matches!(chars.peek(), Some('+') | Some('-')) {
            chars.next();
        }
        let mut exp_digits = 0usize;
        while matches!(chars.peek(), Some(c) if c.is_ascii_digit()) {
            chars.next();
            exp_digits += 1;
        }
        if exp_digits == 0 {
            return false;
        }
    }
    chars.next().is_none()
}

/// Reads a CSV file into a data frame; see the module docs for inference.
pub fn read_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<DataFrame, FrameError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string());
    Ok(read_csv_str(&text, opts)?.with_source_name(stem))
}

/// Reads CSV text into a data frame.
pub fn read_csv_str(text: &str, opts: &CsvOptions) -> Result<DataFrame, FrameError> {
    let records = parse_records(text)?;
    let n_cols = records[0].len();
    for (i, r) in records.iter().enumerate() {
        if r.len() != n_cols {
            return Err(FrameError::Csv {
                row: i + 1,
                message: format!("expected {n_cols} fields, found {}", r.len()),
            });
        }
    }
    let (header, body): (Vec<String>, &[Vec<String>]) = if opts.header_row {
        (records[0].clone(), &records[1..])
    } else {
        (
            (1..=n_cols).map(|i| format!("col{i}")).collect(),
            &records[..],
        )
    };

    let is_na = |tok: &str| opts.na_tokens.iter().any(|na| na == tok.trim());

    let mut columns = Vec::with_capacity(n_cols);
    for (ci, name) in header.iter().enumerate() {
        let numeric = body
            .iter()
            .all(|r| is_na(&r[ci]) || is_numeric_token(&r[ci]));
        let col = if numeric {
            let values: Vec<Option<f64>> = body
                .iter()
                .map(|r| {
                    if is_na(&r[ci]) {
                        None
                    } else {
                        Some(r[ci].trim().parse::<f64>().unwrap())
                    }
                })
                .collect();
            Column::numeric(name.clone(), values)?
        } else {
            let labels: Vec<Option<&str>> = body
                .iter()
                .map(|r| if is_na(&r[ci]) { None } else { Some(r[ci].as_str()) })
                .collect();
            Column::categorical(name.clone(), labels)
        };
        columns.push(col);
    }
    DataFrame::new(columns)
}

fn quote_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a frame back to CSV text using `na_token` for missing cells.
pub fn write_csv_str(frame: &DataFrame, na_token: &str) -> String {
    let mut out = String::new();
    let names: Vec<String> = frame
        .columns()
        .iter()
        .map(|c| quote_field(&c.name))
        .collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in 0..frame.n_rows() {
        let mut cells = Vec::with_capacity(frame.n_cols());
        for col in frame.columns() {
            let cell = match &col.data {
                ColumnData::Numeric(v) => match v[row] {
                    Some(x) => format!("{x}"),
                    None => na_token.to_string(),
                },
                ColumnData::Categorical { codes, categories } => match codes[row] {
                    Some(c) => quote_field(&categories[c as usize]),
                    None => na_token.to_string(),
                },
            };
            cells.push(cell);
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes a frame to a CSV file.
pub fn write_csv(
    frame: &DataFrame,
    path: impl AsRef<Path>,
    na_token: &str,
) -> Result<(), FrameError> {
    fs::write(path, write_csv_str(frame, na_token))?;
    Ok(())
}
