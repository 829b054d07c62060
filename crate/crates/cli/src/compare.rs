//! Column-wise comparison of two CSV files with identical headers.
//!
//! Output, one tab-separated line each:
//!
//! ```text
//! rows     <rows in a> <rows in b>
//! max_abs  <column>    <max |a - b| over shared rows>
//! final    <column>    <b - a on the last row of each file>
//! result   identical|different
//! ```

use std::path::Path;

use crate::{input, Failure};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn load(path: &Path) -> Result<Table, Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(input(path.display()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(input(path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(input(path.display()))?;
        let row = record
            .iter()
            .zip(&header)
            .map(|(field, column)| {
                field.trim().parse::<f64>().map_err(|_| {
                    Failure::Input(format!(
                        "{}: row {}, column {column}: `{field}` is not a number",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Absolute difference that treats equal non-finite values as identical.
fn distance(a: f64, b: f64) -> f64 {
    if a == b || (a.is_nan() && b.is_nan()) {
        0.0
    } else {
        (a - b).abs()
    }
}

pub fn run(a: &Path, b: &Path) -> Result<(), Failure> {
    let ta = load(a)?;
    let tb = load(b)?;
    if ta.header != tb.header {
        return Err(Failure::Input(format!(
            "schema mismatch: `{}` vs `{}`",
            ta.header.join(","),
            tb.header.join(",")
        )));
    }
    println!("rows\t{}\t{}", ta.rows.len(), tb.rows.len());
    let mut identical = ta.rows.len() == tb.rows.len();
    for (j, column) in ta.header.iter().enumerate() {
        let max = ta
            .rows
            .iter()
            .zip(&tb.rows)
            .map(|(ra, rb)| distance(ra[j], rb[j]))
            .fold(0.0, f64::max);
        identical &= max == 0.0;
        println!("max_abs\t{column}\t{max}");
    }
    if let (Some(la), Some(lb)) = (ta.rows.last(), tb.rows.last()) {
        for (j, column) in ta.header.iter().enumerate() {
            let delta = if distance(la[j], lb[j]) == 0.0 {
                0.0
            } else {
                lb[j] - la[j]
            };
            println!("final\t{column}\t{delta}");
        }
    }
    println!(
        "result\t{}",
        if identical { "identical" } else { "different" }
    );
    if identical {
        Ok(())
    } else {
        Err(Failure::Different)
    }
}
