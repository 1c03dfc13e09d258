use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BenchmarkRecord;
use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 5] = ["policy", "forecaster", "echelon", "metric", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Latex,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "latex" | "tex" => Ok(TableFormat::Latex),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::invalid("format", format!("`{s}`; expected csv, latex or markdown"))),
        }
    }
}

/// `v` rounded to `digits` significant digits, printed without exponent.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1) as i32;
    let mag = v.abs().log10().floor() as i32;
    let decimals = digits - 1 - mag;
    if decimals >= 0 {
        let s = format!("{:.*}", decimals as usize, v);
        // rounding can carry into a new leading digit (9.9996 -> 10.000)
        let r: f64 = s.parse().unwrap_or(v);
        let mag2 = r.abs().log10().floor() as i32;
        if mag2 > mag && decimals > 0 {
            return format!("{:.*}", (decimals - 1) as usize, r);
        }
        s
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (v / scale).round() * scale)
    }
}

pub fn render_table(records: &[BenchmarkRecord], format: TableFormat, digits: usize) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Empty("record list"));
    }
    let num = |v: f64| format_sig(v, digits);
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
            let err = |e: csv::Error| Error::parse("benchmark csv", e);
            w.write_record(RECORD_HEADER).map_err(err)?;
            for r in records {
                w.write_record([
                    r.policy.as_str(),
                    r.forecaster.as_str(),
                    &r.echelon.to_string(),
                    r.metric.as_str(),
                    &num(r.value),
                ])
                .map_err(err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::parse("benchmark csv", e))?;
            out = String::from_utf8(bytes).expect("csv output is utf-8");
        }
        TableFormat::Latex => {
            out.push_str("\\begin{tabular}{llrlr}\n\\toprule\n");
            out.push_str("Policy & Forecaster & Echelon & Metric & Value \\\\\n\\midrule\n");
            for r in records {
                let _ = writeln!(
                    out,
                    "{} & {} & {} & {} & {} \\\\",
                    tex(&r.policy),
                    tex(&r.forecaster),
                    r.echelon,
                    tex(&r.metric),
                    num(r.value)
                );
            }
            out.push_str("\\bottomrule\n\\end{tabular}\n");
        }
        TableFormat::Markdown => {
            out.push_str("| policy | forecaster | echelon | metric | value |\n");
            out.push_str("|---|---|---:|---|---:|\n");
            for r in records {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    r.policy.replace('|', "\\|"),
                    r.forecaster.replace('|', "\\|"),
                    r.echelon,
                    r.metric,
                    num(r.value)
                );
            }
        }
    }
    Ok(out)
}

fn tex(s: &str) -> String {
    let mut o = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '_' | '&' | '%' | '$' | '#' | '{' | '}' => {
                o.push('\\');
                o.push(c);
            }
            _ => o.push(c),
        }
    }
    o
}

/// Write a table atomically: a sibling temporary file renamed into place.
pub fn export_table(records: &[BenchmarkRecord], format: TableFormat, path: &Path) -> Result<()> {
    let text = render_table(records, format, 4)?;
    crate::io::write_atomic(path, text.as_bytes())
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse("benchmark csv", e))?;
    if headers.iter().ne(RECORD_HEADER) {
        return Err(Error::parse("benchmark csv", format!("header must be {}", RECORD_HEADER.join(","))));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::parse("benchmark csv", e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(value: f64) -> BenchmarkRecord {
        BenchmarkRecord {
            policy: "order_up_to".into(),
            forecaster: "moving_average(window=10)".into(),
            echelon: 4,
            metric: "cum_bwr".into(),
            value,
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(426.912, 4), "426.9");
        assert_eq!(format_sig(0.012345, 4), "0.01235");
        assert_eq!(format_sig(180_345.0, 4), "180300");
        assert_eq!(format_sig(9.99996, 4), "10.00");
        assert_eq!(format_sig(-3.0, 4), "-3.000");
        assert_eq!(format_sig(0.0, 4), "0");
        assert_eq!(format_sig(f64::NAN, 4), "NaN");
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let one = render_table(&[rec(1.0)], TableFormat::Csv, 4).unwrap();
        assert_eq!(one.lines().count(), 2);
        assert_eq!(one.lines().next().unwrap(), "policy,forecaster,echelon,metric,value");

        let recs = vec![rec(426.912), rec(0.012345), rec(f64::NAN)];
        let text = render_table(&recs, TableFormat::Csv, 4).unwrap();
        let back = parse_csv(&text).unwrap();
        assert_eq!(render_table(&back, TableFormat::Csv, 4).unwrap(), text);
        assert!(render_table(&[], TableFormat::Csv, 4).is_err());
    }

    #[test]
    fn latex_and_markdown_rows() {
        let recs = vec![rec(1.0), rec(2.0), rec(3.0)];
        let tex = render_table(&recs, TableFormat::Latex, 4).unwrap();
        assert_eq!(tex.lines().filter(|l| l.starts_with("order\\_up\\_to")).count(), 3);
        assert!(tex.contains("\\toprule") && tex.contains("\\bottomrule"));
        let md = render_table(&recs, TableFormat::Markdown, 4).unwrap();
        assert_eq!(md.lines().count(), 5);
    }
}
