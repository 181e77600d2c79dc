//! Comparison tables for multi-method results.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub iterations_to_tol: Option<usize>,
    pub final_cost: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("comparison table needs at least one result")]
    Empty,
}

/// Renders an aligned text table plus its CSV twin, rows sorted by final
/// cost ascending.
pub fn compare_table(rows: &[TableRow]) -> Result<(String, String), TableError> {
    if rows.is_empty() {
        return Err(TableError::Empty);
    }
    let mut sorted: Vec<&TableRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.final_cost.partial_cmp(&b.final_cost).unwrap().then(a.method.cmp(&b.method))
    });

    let name_width = sorted.iter().map(|r| r.method.len()).max().unwrap().max("method".len());
    let mut text = String::new();
    writeln!(
        text,
        "{:<name_width$}  {:>12}  {:>16}  {:>10}",
        "method", "iters_to_tol", "final_cost", "runtime_s"
    )
    .unwrap();
    let mut csv = String::from("method,iterations_to_tol,final_cost,runtime_s\n");
    for r in sorted {
        let iters = r.iterations_to_tol.map_or("-".to_string(), |v| v.to_string());
        writeln!(
            text,
            "{:<name_width$}  {:>12}  {:>16.8}  {:>10.4}",
            r.method, iters, r.final_cost, r.runtime_s
        )
        .unwrap();
        let iters_csv = r.iterations_to_tol.map_or(String::new(), |v| v.to_string());
        writeln!(csv, "{},{},{},{}", r.method, iters_csv, r.final_cost, r.runtime_s).unwrap();
    }
    Ok((text, csv))
}
