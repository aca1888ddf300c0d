//! Convergence-record CSV: header `order,h,error,conserror`, one row per
//! study point, floats written with 17 significant digits.

use std::io::{Read, Write};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 4] = ["order", "h", "error", "conserror"];

/// One CSV row. NaN marks a missing consistency error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub order: usize,
    pub h: f64,
    pub error: f64,
    pub conserror: f64,
}

/// Scientific notation with 16 digits after the point, which round-trips
/// every finite `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([r.order.to_string(), fmt17(r.h), fmt17(r.error), fmt17(r.conserror)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<Row>> {
    let bad = |m: String| CliError::Config(format!("convergence csv: {m}"));
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let float = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("{:?}: {e}", &rec[i])));
        rows.push(Row {
            order: rec[0].parse().map_err(|e| bad(format!("{:?}: {e}", &rec[0])))?,
            h: float(1)?,
            error: float(2)?,
            conserror: float(3)?,
        });
    }
    Ok(rows)
}
