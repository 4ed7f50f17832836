use crate::CliError;
use inarlab::CountSeries;
use std::path::Path;

/// Raw bytes of an input file and the series they encode.
pub struct Input {
    pub bytes: Vec<u8>,
    pub series: CountSeries,
}

pub fn read_series(path: &Path) -> Result<Input, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let series = parse_series(&bytes)?;
    Ok(Input { bytes, series })
}

/// One nonnegative integer per line, optional header `x`, LF or CRLF.
pub fn parse_series(bytes: &[u8]) -> Result<CountSeries, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() != 1 {
            return Err(CliError::Data(format!("line {line}: expected one value, found {}", record.len())));
        }
        let field = &record[0];
        if i == 0 && field == "x" {
            continue;
        }
        let value = field
            .parse::<u64>()
            .map_err(|_| CliError::Data(format!("line {line}: expected a nonnegative integer, found `{field}`")))?;
        values.push(value);
    }
    Ok(CountSeries::new(values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_error(bytes: &[u8]) -> String {
        match parse_series(bytes) {
            Err(CliError::Data(m)) => m,
            other => panic!("expected a data error, got {other:?}"),
        }
    }

    #[test]
    fn header_and_line_endings() {
        assert_eq!(parse_series(b"x\n1\n2\n0\n").unwrap().values(), &[1, 2, 0]);
        assert_eq!(parse_series(b"x\r\n3\r\n4\r\n").unwrap().values(), &[3, 4]);
        assert_eq!(parse_series(b"5\n6").unwrap().values(), &[5, 6]);
    }

    #[test]
    fn bad_values_name_their_line() {
        assert!(data_error(b"x\n1\n-2\n").contains("line 3"));
        assert!(data_error(b"1\n2.5\n").contains("line 2"));
        assert!(data_error(b"1\nabc\n").contains("`abc`"));
        assert!(data_error(b"1,2\n").contains("line 1"));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_series(b"x\n"), Err(CliError::Library(inarlab::InarError::EmptyInput))));
    }
}
