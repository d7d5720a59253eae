//! CSV output of result rows.

use std::io::{self, Write};

use crate::precoding::PrecoderKind;

use super::config::{Metric, Waveform};
use super::experiment::ResultRow;

pub const HEADER: &str = "experiment_id,waveform,precoder,snr_db,metric,value,trials,seed";

/// Decimal rendering with 9 significant digits.
pub fn format_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0.00000000".into() } else { v.to_string() };
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("own formatting");
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Writes the header and `rows` (in the given order), LF-terminated.
pub fn emit_csv<W: Write>(rows: &[ResultRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment_id,
            r.waveform.name(),
            r.precoder.name(),
            format_value(r.snr_db),
            r.metric.name(),
            format_value(r.value),
            r.trials,
            r.seed
        )?;
    }
    Ok(())
}

/// Reads back what [`emit_csv`] wrote.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        other => return Err(format!("bad header: {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| format!("row {}: bad {what} in `{line}`", i + 1);
            if f.len() != 8 {
                return Err(bad("field count"));
            }
            Ok(ResultRow {
                experiment_id: f[0].to_string(),
                waveform: Waveform::parse(f[1]).ok_or_else(|| bad("waveform"))?,
                precoder: PrecoderKind::parse(f[2]).ok_or_else(|| bad("precoder"))?,
                snr_db: f[3].parse().map_err(|_| bad("snr_db"))?,
                metric: Metric::parse(f[4]).ok_or_else(|| bad("metric"))?,
                value: f[5].parse().map_err(|_| bad("value"))?,
                trials: f[6].parse().map_err(|_| bad("trials"))?,
                seed: f[7].parse().map_err(|_| bad("seed"))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64) -> ResultRow {
        ResultRow {
            experiment_id: "x".into(),
            waveform: Waveform::Afdm,
            precoder: PrecoderKind::Zf,
            snr_db: -7.5,
            metric: Metric::Ber,
            value,
            trials: 3,
            seed: 42,
        }
    }

    #[test]
    fn header_only() {
        let mut out = Vec::new();
        emit_csv(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{HEADER}\n"));
    }

    #[test]
    fn one_row() {
        let mut out = Vec::new();
        emit_csv(&[row(0.0786)], &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, format!("{HEADER}\nx,afdm,zf,-7.50000000,ber,0.0786000000,3,42\n"));
        assert_eq!(parse_csv(&s).unwrap(), vec![row(0.0786)]);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_value(1.0 / 3.0), "0.333333333");
        assert_eq!(format_value(209_715_200.0), "209715200");
        assert_eq!(format_value(12_345_678_912.0), "12345678900");
        assert_eq!(format_value(-10.0), "-10.0000000");
        assert_eq!(format_value(0.0), "0.00000000");
        assert_eq!(format_value(9.9999999999), "10.0000000");
    }
}
