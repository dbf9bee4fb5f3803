//! File writers shared by the commands.
//!
//! Dense-matrix text format (`certificate.txt`): for each matrix a header
//! line `matrix <name> <rows> <cols>` followed by `rows` lines of
//! space-separated entries in row-major order, formatted like C's `%.17g`.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use iqc_observer::Mat;

/// C `%.17g`: 17 significant digits, fixed or exponent notation, trailing
/// zeros removed.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, v))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    }
}

pub fn matrix_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        bail!("ragged matrix rows");
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn write_dense<W: Write>(w: &mut W, name: &str, m: &Mat) -> std::io::Result<()> {
    writeln!(w, "matrix {name} {} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt_g17(*v)).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Parse every matrix of a dense-matrix text file.
#[cfg_attr(not(test), allow(dead_code))]
pub fn read_dense(text: &str) -> Result<Vec<(String, Mat)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let mut out = Vec::new();
    while let Some(header) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [tag, name, r, c] = parts[..] else { bail!("bad matrix header '{header}'") };
        if tag != "matrix" {
            bail!("expected 'matrix' header, got '{header}'");
        }
        let (r, c): (usize, usize) = (r.parse()?, c.parse()?);
        let mut rows = Vec::with_capacity(r);
        for _ in 0..r {
            let line = lines.next().ok_or_else(|| anyhow!("matrix {name}: missing rows"))?;
            let row: Vec<f64> = line.split_whitespace().map(str::parse).collect::<Result<_, _>>()?;
            if row.len() != c {
                bail!("matrix {name}: expected {c} columns, got {}", row.len());
            }
            rows.push(row);
        }
        out.push((name.to_string(), if r == 0 { Mat::zeros(0, c) } else { mat_from_rows(&rows)? }));
    }
    Ok(out)
}

pub fn write_gain_csv(path: &Path, gain: &Mat) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..gain.nrows() {
        w.write_record(gain.row(i).iter().map(|v| fmt_g17(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Load a gain from `result.json` (field `gain`) or a headerless CSV.
pub fn read_gain(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).with_context(|| format!("reading gain from {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let rows: Vec<Vec<f64>> = serde_json::from_value(v.get("gain").cloned().ok_or_else(|| anyhow!("no 'gain' field"))?)
            .map_err(|e| anyhow!("'gain' must be a finite row-major matrix: {e}"))?;
        return mat_from_rows(&rows);
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?);
    }
    mat_from_rows(&rows)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Header line stamped on CSV outputs.
pub fn csv_header(command: &str, config: &serde_json::Value) -> String {
    format!("# iqcobs {} {command} config={}", env!("CARGO_PKG_VERSION"), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(1e17), "1e+17");
        assert_eq!(fmt_g17(0.0001), "0.0001");
    }

    #[test]
    fn dense_round_trip_is_exact() {
        let m = Mat::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, 7.0, std::f64::consts::PI, -0.0]);
        let mut buf = Vec::new();
        write_dense(&mut buf, "P", &m).unwrap();
        write_dense(&mut buf, "E", &Mat::zeros(0, 2)).unwrap();
        let parsed = read_dense(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed[0].0, "P");
        assert_eq!(parsed[0].1, m);
        assert_eq!(parsed[1].1.shape(), (0, 2));
    }
}
