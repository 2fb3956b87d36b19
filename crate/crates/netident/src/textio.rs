//! Helpers for the text file formats: number round-tripping and atomic writes.

use crate::exact::{format_rat, parse_rat, rat_to_f64, Rat};
use std::io;
use std::path::Path;

/// Decimal with 17 significant digits — enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("cannot parse `{s}` as a number"))
}

/// A numeric token from a file: exact `p/q` (or integer) when written that
/// way, plain f64 otherwise. Exact tokens keep both views.
#[derive(Clone, Debug, PartialEq)]
pub struct Number {
    pub value: f64,
    pub exact: Option<Rat>,
}

impl Number {
    pub fn from_f64(value: f64) -> Number {
        Number { value, exact: None }
    }

    pub fn from_rat(r: Rat) -> Number {
        Number { value: rat_to_f64(&r), exact: Some(r) }
    }
}

pub fn parse_number(s: &str) -> Result<Number, String> {
    let t = s.trim();
    let looks_exact = t.contains('/')
        || (!t.is_empty() && t.bytes().all(|b| b.is_ascii_digit() || b == b'-' || b == b'+'));
    if looks_exact {
        let r = parse_rat(t).map_err(|e| e.to_string())?;
        Ok(Number::from_rat(r))
    } else {
        Ok(Number::from_f64(parse_f64(t)?))
    }
}

pub fn fmt_number(n: &Number) -> String {
    match &n.exact {
        Some(r) => format_rat(r),
        None => fmt_f64(n.value),
    }
}

/// Write a whole file through a temporary sibling plus rename, so readers
/// never observe a half-written artifact.
pub fn atomic_write(path: &Path, content: &str) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{base}.tmp~"));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn f64_roundtrip_17_digits() {
        for x in [0.1, -3.0, 1.0 / 3.0, 6.02e23, 5e-324, 0.0] {
            assert_eq!(parse_f64(&fmt_f64(x)).unwrap(), x);
        }
    }

    #[test]
    fn number_parsing() {
        let n = parse_number("3/7").unwrap();
        assert_eq!(n.exact, Some(rat(3, 7)));
        let n = parse_number("-12").unwrap();
        assert_eq!(n.exact, Some(rat(-12, 1)));
        let n = parse_number("0.5").unwrap();
        assert_eq!(n, Number { value: 0.5, exact: None });
        let n = parse_number("1.5e-3").unwrap();
        assert_eq!(n.value, 1.5e-3);
        assert!(parse_number("x").is_err());
        assert!(parse_number("1/0").is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("netident-textio-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.txt");
        atomic_write(&path, "one\n").unwrap();
        atomic_write(&path, "two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
