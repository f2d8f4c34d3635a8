//! Single-column CSV series input and output.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Parses a single-column series. A first line that is not a number is taken
/// as a header; any later non-numeric line is an error naming its line.
pub fn parse_series(input: impl Read) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut values = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidArgument(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "line {line}: expected one column, found {}",
                record.len()
            )));
        }
        let field = &record[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(Error::InvalidArgument(format!(
                    "line {line}: non-finite value {field:?}"
                )));
            }
            Err(_) if index == 0 => {}
            Err(_) => {
                return Err(Error::InvalidArgument(format!(
                    "line {line}: not a number: {field:?}"
                )));
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(values)
}

/// Reads a series from a file, or from standard input for `-`.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    if path == Path::new("-") {
        return parse_series(io::stdin().lock());
    }
    let file = File::open(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))?;
    parse_series(file)
}

/// Writes one value per line with 17 significant digits.
pub fn format_series(x: &[f64], mut out: impl Write) -> io::Result<()> {
    for v in x {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()
}

/// Writes a series to a file, or to standard output when `path` is `None`.
pub fn write_series(x: &[f64], path: Option<&Path>) -> Result<()> {
    let result = match path {
        Some(p) => File::create(p).and_then(|f| format_series(x, BufWriter::new(f))),
        None => format_series(x, BufWriter::new(io::stdout().lock())),
    };
    result.map_err(|e| Error::InvalidArgument(format!("cannot write series: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        assert_eq!(
            parse_series("x\n1.5\n-2\n".as_bytes()).unwrap(),
            vec![1.5, -2.0]
        );
        assert_eq!(
            parse_series("1.5\n-2\n".as_bytes()).unwrap(),
            vec![1.5, -2.0]
        );
    }

    #[test]
    fn bad_rows_report_their_line() {
        let err = parse_series("value\n1\n2\nabc\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4"), "{err}");
        let err = parse_series("1\n2,3\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_series("1\nNaN\n".as_bytes()).is_err());
        assert!(parse_series("header\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let x = vec![0.1, -1.0 / 3.0, 1e-300, 12345.678901234567];
        let mut buf = Vec::new();
        format_series(&x, &mut buf).unwrap();
        assert_eq!(parse_series(buf.as_slice()).unwrap(), x);
    }
}
