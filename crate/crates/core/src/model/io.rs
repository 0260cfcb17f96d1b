//! File ingestion and export for covariance sequences and symbols.
//!
//! Covariance CSV: header `tau,sigma`, one row per lag, τ ascending from 0.
//! Symbol JSON: `{"family": "white"|"bandlimited"|"ar1"|"lines"|"piecewise", ..., "scale": f}`.

use super::{CovarianceSequence, Line, Symbol, SymbolFamily};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

/// Serialized form of a [`Symbol`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum SymbolRecord {
    White {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Bandlimited {
        #[serde(rename = "W", alias = "half_bandwidth")]
        half_bandwidth: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Ar1 {
        rho: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Lines {
        lines: Vec<LineRecord>,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<Vec<f64>>,
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

/// A line written either as `[θ, p]` or `{"frequency": θ, "power": p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LineRecord {
    Pair(f64, f64),
    Named { frequency: f64, power: f64 },
}

impl From<&Symbol> for SymbolRecord {
    fn from(s: &Symbol) -> Self {
        let scale = s.scale();
        match s.family() {
            SymbolFamily::White => SymbolRecord::White { scale },
            SymbolFamily::BandLimited { half_bandwidth } => SymbolRecord::Bandlimited {
                half_bandwidth: *half_bandwidth,
                scale,
            },
            SymbolFamily::Ar1 { rho } => SymbolRecord::Ar1 { rho: *rho, scale },
            SymbolFamily::Lines(lines) => SymbolRecord::Lines {
                lines: lines
                    .iter()
                    .map(|l| LineRecord::Pair(l.frequency, l.power))
                    .collect(),
                scale,
            },
            SymbolFamily::Piecewise {
                breakpoints,
                coefficients,
            } => SymbolRecord::Piecewise {
                breakpoints: breakpoints.clone(),
                pieces: coefficients.clone(),
                scale,
            },
        }
    }
}

impl TryFrom<SymbolRecord> for Symbol {
    type Error = Error;

    fn try_from(r: SymbolRecord) -> Result<Symbol> {
        let (family, scale) = match r {
            SymbolRecord::White { scale } => (SymbolFamily::White, scale),
            SymbolRecord::Bandlimited { half_bandwidth, scale } => {
                (SymbolFamily::BandLimited { half_bandwidth }, scale)
            }
            SymbolRecord::Ar1 { rho, scale } => (SymbolFamily::Ar1 { rho }, scale),
            SymbolRecord::Lines { lines, scale } => (
                SymbolFamily::Lines(
                    lines
                        .into_iter()
                        .map(|l| match l {
                            LineRecord::Pair(frequency, power) | LineRecord::Named { frequency, power } => {
                                Line { frequency, power }
                            }
                        })
                        .collect(),
                ),
                scale,
            ),
            SymbolRecord::Piecewise {
                breakpoints,
                pieces,
                scale,
            } => (
                SymbolFamily::Piecewise {
                    breakpoints,
                    coefficients: pieces,
                },
                scale,
            ),
        };
        Symbol::new(family, scale)
    }
}

pub fn parse_symbol_json(text: &str) -> Result<Symbol> {
    let record: SymbolRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    Symbol::try_from(record)
}

pub fn symbol_to_json(symbol: &Symbol) -> String {
    serde_json::to_string(&SymbolRecord::from(symbol)).expect("symbol records always serialize")
}

pub fn load_symbol(path: &Path, format: Format) -> Result<Symbol> {
    match format {
        Format::Json => parse_symbol_json(&std::fs::read_to_string(path)?),
        Format::Csv => Err(Error::validation("format", "symbols are only read from JSON")),
    }
}

pub fn load_covariance(path: &Path, format: Format) -> Result<CovarianceSequence> {
    let file = std::fs::File::open(path)?;
    match format {
        Format::Csv => read_covariance_csv(file),
        Format::Json => {
            let mut text = String::new();
            std::io::BufReader::new(file).read_to_string(&mut text)?;
            parse_covariance_json(&text)
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CovarianceRecord {
    sigma: Vec<f64>,
}

fn parse_covariance_json(text: &str) -> Result<CovarianceSequence> {
    let record: CovarianceRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    CovarianceSequence::new(record.sigma)
}

pub fn read_covariance_csv<R: Read>(reader: R) -> Result<CovarianceSequence> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.len() != 2 || &headers[0] != "tau" || &headers[1] != "sigma" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `tau,sigma`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let tau: usize = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("tau `{}` is not a nonnegative integer", &record[0]),
        })?;
        if tau != values.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected tau = {}, found {tau}", values.len()),
            });
        }
        let sigma: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("sigma `{}` is not a number", &record[1]),
        })?;
        if !sigma.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("sigma `{}` is not finite", &record[1]),
            });
        }
        values.push(sigma);
    }
    CovarianceSequence::new(values)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Writes `tau,sigma` rows in shortest round-trip decimal.
pub fn write_covariance_csv<W: Write>(mut out: W, cov: &CovarianceSequence) -> Result<()> {
    writeln!(out, "tau,sigma")?;
    for (tau, v) in cov.values().iter().enumerate() {
        writeln!(out, "{tau},{v:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_identity_ingestion() {
        let cov = read_covariance_csv("tau,sigma\n0,1\n1,0.5\n".as_bytes()).unwrap();
        assert_eq!(cov.values(), &[1.0, 0.5]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match read_covariance_csv("tau,sigma\n0,1\n2,0.5\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_covariance_csv("tau,sigma\n0,1\n1,NaN\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_covariance_csv("lag,value\n0,1\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_covariance_csv("tau,sigma\n0,0\n".as_bytes()),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn csv_writer_round_trips_exactly() {
        let cov = CovarianceSequence::new(vec![1.0, 0.1 + 0.2, 1.0 / 3.0, -2.5e-17]).unwrap();
        let mut buf = Vec::new();
        write_covariance_csv(&mut buf, &cov).unwrap();
        let back = read_covariance_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), cov.values());
    }

    #[test]
    fn json_symbols() {
        let s = parse_symbol_json(r#"{"family":"ar1","rho":0.5}"#).unwrap();
        assert_eq!(s.family(), &SymbolFamily::Ar1 { rho: 0.5 });
        assert_eq!(s.scale(), 1.0);

        assert!(matches!(
            parse_symbol_json(r#"{"family":"ar1","rho":1.5}"#),
            Err(Error::Validation { ref field, .. }) if field == "rho"
        ));

        let s = parse_symbol_json(r#"{"family":"lines","lines":[[0.5,1.0],{"frequency":1.0,"power":2.0}],"scale":3}"#)
            .unwrap();
        assert_eq!(s.scaled_lines().unwrap()[1].power, 6.0);

        let s = parse_symbol_json(r#"{"family":"bandlimited","W":0.785}"#).unwrap();
        assert_eq!(s.family(), &SymbolFamily::BandLimited { half_bandwidth: 0.785 });

        assert!(matches!(parse_symbol_json(r#"{"family":"fractal"}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn symbol_json_round_trip() {
        for s in [
            Symbol::white(),
            Symbol::ar1(-0.3).unwrap(),
            Symbol::band_limited(0.1).unwrap(),
            Symbol::lines(&[(0.2, 1.5), (3.0, 0.25)]).unwrap(),
        ] {
            assert_eq!(parse_symbol_json(&symbol_to_json(&s)).unwrap(), s);
        }
    }

    #[test]
    fn load_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("cov.csv");
        std::fs::write(&csv_path, "tau,sigma\n0,2\n1,1\n").unwrap();
        assert_eq!(Format::from_path(&csv_path), Some(Format::Csv));
        let cov = load_covariance(&csv_path, Format::Csv).unwrap();
        assert_eq!(cov.values(), &[2.0, 1.0]);

        let json_path = dir.path().join("sym.json");
        std::fs::write(&json_path, r#"{"family":"white","scale":2.0}"#).unwrap();
        let s = load_symbol(&json_path, Format::Json).unwrap();
        assert_eq!(s.scale(), 2.0);

        let cov_json = dir.path().join("cov.json");
        std::fs::write(&cov_json, r#"{"sigma":[1.0,0.25]}"#).unwrap();
        assert_eq!(load_covariance(&cov_json, Format::Json).unwrap().values(), &[1.0, 0.25]);

        assert!(matches!(
            load_covariance(&dir.path().join("missing.csv"), Format::Csv),
            Err(Error::Io(_))
        ));
    }
}
