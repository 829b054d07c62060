//! ASCII grid exchange format with land-cover codes as cell values.
//!
//! ```text
//! ncols 40
//! nrows 25
//! cellsize 100.0
//! NODATA_value -1
//! 0 1 2 3 ...
//! ```

use std::fmt::Write;

use thiserror::Error;

use crate::landscape::{LandCode, LandGrid, LandscapeError};

pub const NODATA: i64 = -1;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("header line {line}: {reason}")]
    Header { line: usize, reason: String },
    #[error("missing header key `{0}`")]
    MissingKey(&'static str),
    #[error("cell {index} (row {row}, col {col}): `{token}` is not a land-cover code 0-3")]
    BadCode {
        index: usize,
        row: usize,
        col: usize,
        token: String,
    },
    #[error("body has {got} cells but the header declares {expected} ({} short)", .expected - .got)]
    ShortBody { expected: usize, got: usize },
    #[error("body has {got} cells but the header declares {expected}")]
    LongBody { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] LandscapeError),
}

const KEYS: [&str; 4] = ["ncols", "nrows", "cellsize", "nodata_value"];

pub fn read_grid(text: &str) -> Result<LandGrid, RasterError> {
    let mut lines = text.lines().enumerate();
    let mut header = [None::<&str>; 4];
    for (slot, key) in KEYS.iter().enumerate() {
        let (n, line) = lines.next().ok_or(RasterError::MissingKey(KEYS[slot]))?;
        let mut parts = line.split_whitespace();
        let (k, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) => (k, v),
            _ => {
                return Err(RasterError::Header {
                    line: n + 1,
                    reason: format!("expected `{key} <value>`, got `{line}`"),
                })
            }
        };
        if !k.eq_ignore_ascii_case(key) {
            return Err(RasterError::Header {
                line: n + 1,
                reason: format!("expected key `{key}`, got `{k}`"),
            });
        }
        header[slot] = Some(v);
    }
    let number = |slot: usize| -> Result<f64, RasterError> {
        let v = header[slot].unwrap();
        v.parse::<f64>().map_err(|_| RasterError::Header {
            line: slot + 1,
            reason: format!("`{v}` is not a number"),
        })
    };
    let count = |slot: usize| -> Result<usize, RasterError> {
        let v = header[slot].unwrap();
        v.parse::<usize>().map_err(|_| RasterError::Header {
            line: slot + 1,
            reason: format!("`{v}` is not a non-negative integer"),
        })
    };
    let ncols = count(0)?;
    let nrows = count(1)?;
    let cellsize = number(2)?;
    if !(cellsize > 0.0 && cellsize.is_finite()) {
        return Err(RasterError::Header {
            line: 3,
            reason: format!("cellsize must be positive, got {cellsize}"),
        });
    }
    number(3)?;

    let expected = nrows * ncols;
    let mut codes = Vec::with_capacity(expected);
    for (_, line) in lines {
        for token in line.split_whitespace() {
            let index = codes.len();
            if index >= expected {
                let extra = text.lines().skip(4).flat_map(str::split_whitespace).count();
                return Err(RasterError::LongBody {
                    expected,
                    got: extra,
                });
            }
            let code = token
                .parse::<i64>()
                .ok()
                .and_then(LandCode::from_code)
                .ok_or_else(|| RasterError::BadCode {
                    index,
                    row: index / ncols.max(1),
                    col: index % ncols.max(1),
                    token: token.to_string(),
                })?;
            codes.push(code);
        }
    }
    if codes.len() < expected {
        return Err(RasterError::ShortBody {
            expected,
            got: codes.len(),
        });
    }
    Ok(LandGrid::new(nrows, ncols, cellsize, codes)?)
}

pub fn write_grid(grid: &LandGrid) -> String {
    let mut out = String::with_capacity(grid.len() * 2 + 64);
    writeln!(out, "ncols {}", grid.ncols()).unwrap();
    writeln!(out, "nrows {}", grid.nrows()).unwrap();
    writeln!(out, "cellsize {:?}", grid.cell_size_m()).unwrap();
    writeln!(out, "NODATA_value {NODATA}").unwrap();
    for row in grid.codes().chunks(grid.ncols()) {
        for (i, code) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(char::from(b'0' + *code as u8));
        }
        out.push('\n');
    }
    out
}
