use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{DataError, Dataset, Example};

/// Parses LIBSVM text: `<label> <idx>:<val> ...` with 1-based indices.
///
/// Labels may be `+1`/`1`/`-1`, or `0` which maps to -1. Blank lines and
/// trailing `#` comments are skipped. The dimension is one past the largest
/// 0-based index seen.
pub fn parse_libsvm<R: Read>(input: R) -> Result<Dataset, DataError> {
    let reader = BufReader::new(input);
    let mut examples = Vec::new();
    let mut d = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DataError::Parse { line: line_no, reason: e.to_string() })?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let ex = parse_line(body).map_err(|reason| DataError::Parse { line: line_no, reason })?;
        if let Some(&last) = ex.indices().last() {
            d = d.max(last as usize + 1);
        }
        examples.push(ex);
    }
    Dataset::new(examples, d)
}

pub fn read_libsvm(path: &Path) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)
        .map_err(|e| DataError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_libsvm(file)
}

fn parse_line(body: &str) -> Result<Example, String> {
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().ok_or("missing label")?;
    let raw: f64 = label_tok.parse().map_err(|_| format!("bad label {label_tok:?}"))?;
    let label = if raw == 1.0 {
        1.0
    } else if raw == -1.0 || raw == 0.0 {
        -1.0
    } else {
        return Err(format!("label {label_tok:?} is not one of -1, 0, +1"));
    };
    let mut features = Vec::new();
    for tok in tokens {
        let (i, v) = tok.split_once(':').ok_or_else(|| format!("bad feature token {tok:?}"))?;
        let one_based: u32 = i.parse().map_err(|_| format!("bad feature index {i:?}"))?;
        if one_based == 0 {
            return Err("feature indices are 1-based; found 0".into());
        }
        let value: f64 = v.parse().map_err(|_| format!("bad feature value {v:?}"))?;
        features.push((one_based - 1, value));
    }
    Example::new(label, features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_rows() {
        let ds = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1.0".as_bytes()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 3);
        let e0 = ds.example(0);
        assert_eq!(e0.label(), 1.0);
        assert_eq!(e0.features().collect::<Vec<_>>(), vec![(0, 0.5), (2, 2.0)]);
        assert_eq!(ds.example(1).label(), -1.0);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert_eq!(parse_libsvm("".as_bytes()), Err(DataError::Empty));
        assert_eq!(parse_libsvm("\n\n  \n".as_bytes()), Err(DataError::Empty));
    }

    #[test]
    fn zero_label_maps_to_negative() {
        let ds = parse_libsvm("0 1:1.0".as_bytes()).unwrap();
        assert_eq!(ds.example(0).label(), -1.0);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_libsvm("+1 1:1\n\n+1 x:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err:?}");
        let err = parse_libsvm("+1 2:1 1:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
        let err = parse_libsvm("+1 2:1 2:3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
        assert!(parse_libsvm("2 1:1\n".as_bytes()).is_err());
        assert!(parse_libsvm("+1 0:1\n".as_bytes()).is_err());
        assert!(parse_libsvm("+1 1:nanx\n".as_bytes()).is_err());
    }

    #[test]
    fn skips_comments() {
        let ds = parse_libsvm("# header\n+1 1:1 # trailing\n".as_bytes()).unwrap();
        assert_eq!(ds.n(), 1);
    }
}
