//! Readers and writers for spectra, tabulated functions and matrices.
//!
//! Every reader rejects NaN/Inf and reports the offending line.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeffs::TabulatedFn;
use crate::error::{Error, Result};
use crate::matrixops::SymMatrix;
use crate::spectrum::Spectrum;

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumJson {
    eta: Vec<f64>,
    #[serde(default)]
    delta: Option<Vec<f64>>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(field: &str, line: usize, name: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{name}: cannot parse {:?} as a number", field.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name}: non-finite value {v}")));
    }
    Ok(v)
}

/// Reads rows of a two-or-more column CSV with a header. Returns
/// `(line number, fields)` for each data row.
fn read_csv_columns(text: &str, columns: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(c))
                .ok_or_else(|| parse_err(1, format!("missing column {c:?}")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let vals = idx
            .iter()
            .zip(columns)
            .map(|(&i, name)| {
                let field = rec
                    .get(i)
                    .ok_or_else(|| parse_err(line, format!("missing field {name:?}")))?;
                parse_f64(field, line, name)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, vals));
    }
    Ok(rows)
}

/// Spectrum from CSV (columns `eta,delta`) or JSON
/// (`{"eta": [...], "delta": [...]}`, `delta` optional), chosen by extension.
pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_spectrum_json(&text)
    } else {
        parse_spectrum_csv(&text)
    }
}

pub fn parse_spectrum_csv(text: &str) -> Result<Spectrum> {
    let rows = read_csv_columns(text, &["eta", "delta"])?;
    if rows.is_empty() {
        return Err(Error::Empty("spectrum"));
    }
    let (etas, deltas) = rows.iter().map(|r| (r.1[0], r.1[1])).unzip();
    Spectrum::new(etas, deltas)
}

pub fn parse_spectrum_json(text: &str) -> Result<Spectrum> {
    let raw: SpectrumJson = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    let n = raw.eta.len();
    let deltas = raw.delta.unwrap_or_else(|| vec![0.0; n]);
    Spectrum::new(raw.eta, deltas)
}

/// Writes `eta,delta` with full round-trip precision.
pub fn write_spectrum_csv(spec: &Spectrum, out: &mut impl Write) -> Result<()> {
    writeln!(out, "eta,delta")?;
    for (e, d) in spec.etas().iter().zip(spec.deltas()) {
        writeln!(out, "{e:.16e},{d:.16e}")?;
    }
    Ok(())
}

/// Tabulated function from a CSV with columns `x,fx`.
pub fn read_tabulated(path: &Path, fprime0: Option<f64>) -> Result<TabulatedFn> {
    parse_tabulated_csv(&fs::read_to_string(path)?, fprime0)
}

pub fn parse_tabulated_csv(text: &str, fprime0: Option<f64>) -> Result<TabulatedFn> {
    let rows = read_csv_columns(text, &["x", "fx"])?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.1[0], r.1[1])).collect();
    TabulatedFn::new(&points, fprime0)
}

/// Symmetric matrix from Matrix Market (`.mtx`, coordinate or array; `symmetric`
/// or `general`) or dense CSV without header.
pub fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx")) {
        parse_matrix_market(&text)
    } else {
        parse_dense_csv(&text)
    }
}

pub fn parse_matrix_market(text: &str) -> Result<SymMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, "expected a %%MatrixMarket matrix banner"));
    }
    let coordinate = match words[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported format {other:?}"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_err(1, format!("unsupported field {:?}", words[3])));
    }
    let symmetric = match words[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(1, format!("unsupported symmetry {other:?}"))),
    };
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| parse_err(size_line, format!("bad size entry {w:?}"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match dims.as_slice() {
        [r, c, ..] => (*r, *c),
        _ => return Err(parse_err(size_line, "size line needs rows and columns")),
    };
    if rows != cols {
        return Err(parse_err(size_line, format!("matrix must be square (got {rows}x{cols})")));
    }
    let n = rows;
    let mut data = vec![0.0; n * n];
    let mut set = vec![false; n * n];
    let mut put = |i: usize, j: usize, v: f64, line: usize| -> Result<()> {
        data[i * n + j] = v;
        set[i * n + j] = true;
        if symmetric && i != j {
            if set[j * n + i] && data[j * n + i] != v {
                return Err(parse_err(line, "conflicting symmetric entries"));
            }
            data[j * n + i] = v;
            set[j * n + i] = true;
        }
        Ok(())
    };
    if coordinate {
        let nnz = *dims.get(2).ok_or_else(|| parse_err(size_line, "coordinate size line needs nnz"))?;
        let mut count = 0;
        for (line, l) in body {
            let w: Vec<&str> = l.split_whitespace().collect();
            if w.len() < 3 {
                return Err(parse_err(line, "expected `row col value`"));
            }
            let idx = |s: &str| -> Result<usize> {
                let k: usize = s.parse().map_err(|_| parse_err(line, format!("bad index {s:?}")))?;
                if k == 0 || k > n {
                    return Err(parse_err(line, format!("index {k} out of range 1..={n}")));
                }
                Ok(k - 1)
            };
            let (i, j) = (idx(w[0])?, idx(w[1])?);
            if symmetric && j > i {
                return Err(parse_err(line, "symmetric storage expects the lower triangle"));
            }
            put(i, j, parse_f64(w[2], line, "value")?, line)?;
            count += 1;
        }
        if count != nnz {
            return Err(parse_err(size_line, format!("expected {nnz} entries, found {count}")));
        }
    } else {
        // column-major; symmetric stores the lower triangle only
        let mut slots = Vec::new();
        for j in 0..n {
            for i in (if symmetric { j } else { 0 })..n {
                slots.push((i, j));
            }
        }
        let mut it = slots.into_iter();
        let mut last = size_line;
        for (line, l) in body {
            last = line;
            for w in l.split_whitespace() {
                let (i, j) = it.next().ok_or_else(|| parse_err(line, "too many entries"))?;
                put(i, j, parse_f64(w, line, "value")?, line)?;
            }
        }
        if it.next().is_some() {
            return Err(parse_err(last, "too few entries"));
        }
    }
    SymMatrix::new(n, data)
}

pub fn parse_dense_csv(text: &str) -> Result<SymMatrix> {
    let mut rows = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() || l.trim_start().starts_with('#') {
            continue;
        }
        let row = l
            .split(',')
            .map(|f| parse_f64(f, i + 1, "entry"))
            .collect::<Result<Vec<_>>>()?;
        rows.push((i + 1, row));
    }
    if rows.is_empty() {
        return Err(Error::Empty("matrix"));
    }
    let n = rows.len();
    if let Some((line, r)) = rows.iter().find(|r| r.1.len() != n) {
        return Err(parse_err(*line, format!("expected {n} columns, found {}", r.len())));
    }
    SymMatrix::from_rows(&rows.into_iter().map(|r| r.1).collect::<Vec<_>>())
}

/// One number per line (optionally a header line `mu`).
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') || (i == 0 && t.parse::<f64>().is_err() && !t.contains(',')
            && t.chars().all(|c| c.is_ascii_alphabetic() || c == '_'))
        {
            continue;
        }
        out.push(parse_f64(t, i + 1, "mu")?);
    }
    if out.is_empty() {
        return Err(Error::Empty("vector"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_csv_roundtrip() {
        let s = Spectrum::new(vec![1.0 / 3.0, -2.5e-7, 7.0], vec![0.1, 0.0, -3.25]).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&s, &mut buf).unwrap();
        let back = parse_spectrum_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn spectrum_csv_requires_delta() {
        assert!(matches!(parse_spectrum_csv("eta\n1\n2\n"), Err(Error::Parse { line: 1, .. })));
        let s = parse_spectrum_csv("# chi-square(2)\ndelta,eta\n0,1\n0,1\n").unwrap();
        assert_eq!(s.etas(), &[1.0, 1.0]);
    }

    #[test]
    fn spectrum_json() {
        let s = parse_spectrum_json(r#"{"eta": [1, 2], "delta": [0.5, 0]}"#).unwrap();
        assert_eq!(s.etas(), &[1.0, 2.0]);
        assert!(parse_spectrum_json(r#"{"eta": [1, 2], "delta": [0.5]}"#).is_err());
    }

    #[test]
    fn rejects_non_finite_with_line() {
        let e = parse_spectrum_csv("eta,delta\n1,0\nNaN,0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = parse_spectrum_csv("eta,delta\n1,0\n2,inf\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = parse_spectrum_csv("eta,delta\n1,0\nabc,0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(matches!(parse_spectrum_csv("delta\n1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn tabulated_csv() {
        let t = parse_tabulated_csv("x,fx\n-1,-1\n0,0\n1,1\n2,2\n", Some(1.0)).unwrap();
        assert!((t.eval(0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matrix_market_coordinate_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1\n2 2 2\n3 3 1e-1\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(2, 2), 0.1);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn matrix_market_array_and_general() {
        let sym = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n3\n5\n";
        let m = parse_matrix_market(sym).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 3.0, 3.0, 5.0]);
        let gen = "%%MatrixMarket matrix array real general\n2 2\n1\n3\n3\n5\n";
        assert_eq!(parse_matrix_market(gen).unwrap(), m);
        let asym = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1\n2 1 2\n";
        assert!(matches!(parse_matrix_market(asym), Err(Error::NotSymmetric { .. })));
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        assert!(matches!(parse_matrix_market(bad), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn dense_csv_and_vector() {
        let m = parse_dense_csv("1,2\n2,1\n").unwrap();
        assert_eq!(m.dim(), 2);
        assert!(parse_dense_csv("1,2\n2\n").is_err());
        assert_eq!(parse_vector("mu\n1\n-2.5\n").unwrap(), vec![1.0, -2.5]);
        assert!(matches!(parse_vector("1\nnan\n"), Err(Error::Parse { line: 2, .. })));
    }
}
