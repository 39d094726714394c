//! Locale-independent numeric CSV with 17 significant digits, so re-parsing
//! reproduces every stored value exactly.

use std::io::{self, Write};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_header<W: Write + ?Sized>(out: &mut W, cols: &[&str]) -> io::Result<()> {
    writeln!(out, "{}", cols.join(","))
}

pub fn write_row<W: Write + ?Sized>(out: &mut W, row: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
    writeln!(out, "{}", cells.join(","))
}

/// Parses a numeric CSV with a header line into named columns.
pub fn read_columns(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or("empty CSV")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {}: expected {} cells, found {}", i + 1, header.len(), cells.len()));
        }
        for (col, cell) in cols.iter_mut().zip(cells) {
            col.push(cell.trim().parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1))?);
        }
    }
    Ok((header, cols))
}
