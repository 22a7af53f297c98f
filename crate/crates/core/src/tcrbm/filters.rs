use std::io::{Read, Write};

use super::TcRbm;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weights of one hidden unit: `matrix[i][k] = W[i, unit, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter<F> {
    pub unit: usize,
    pub matrix: Vec<Vec<F>>,
}

impl<F: Real> Filter<F> {
    pub fn alphabet(&self) -> usize {
        self.matrix.len()
    }

    pub fn len(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Row {
    unit: usize,
    symbol: usize,
    offset: usize,
    weight: String,
}

/// Writes filters as long-format CSV with columns `unit,symbol,offset,weight`.
/// Weights are printed in shortest round-trip form.
pub fn filters_to_csv<F: Real, W: Write>(filters: &[Filter<F>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for f in filters {
        for (i, row) in f.matrix.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                w.serialize(Row {
                    unit: f.unit,
                    symbol: i,
                    offset: k,
                    weight: x.to_string(),
                })
                .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`filters_to_csv`]. Lines starting with `#` are
/// skipped. Every (unit, symbol, offset) cell of a dense block must appear
/// exactly once.
pub fn filters_from_csv<F: Real, R: Read>(input: R) -> Result<Vec<Filter<F>>> {
    let mut rows = Vec::new();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    for r in reader.deserialize::<Row>() {
        let r = r.map_err(csv_error)?;
        let w = F::from_str_radix(r.weight.trim(), 10)
            .map_err(|_| Error::ModelFormat(format!("bad weight {:?}", r.weight)))?;
        if !w.is_finite() {
            return Err(Error::ModelFormat(format!("non-finite weight {:?}", r.weight)));
        }
        rows.push((r.unit, r.symbol, r.offset, w));
    }
    if rows.is_empty() {
        return Err(Error::ModelFormat("filter CSV has no rows".into()));
    }
    let units = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let alphabet = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let len = rows.iter().map(|r| r.2).max().unwrap() + 1;
    if rows.len() != units * alphabet * len {
        return Err(Error::ModelFormat(format!(
            "filter CSV has {} rows, expected {units} x {alphabet} x {len}",
            rows.len()
        )));
    }
    let mut seen = vec![false; units * alphabet * len];
    let mut filters: Vec<Filter<F>> = (0..units)
        .map(|unit| Filter {
            unit,
            matrix: vec![vec![F::zero(); len]; alphabet],
        })
        .collect();
    for (j, i, k, w) in rows {
        let slot = &mut seen[(j * alphabet + i) * len + k];
        if *slot {
            return Err(Error::ModelFormat(format!(
                "duplicate filter cell unit {j} symbol {i} offset {k}"
            )));
        }
        *slot = true;
        filters[j].matrix[i][k] = w;
    }
    Ok(filters)
}

fn csv_error(e: csv::Error) -> Error {
    Error::ModelFormat(e.to_string())
}

impl<F: Real> TcRbm<F> {
    /// Replaces the weight tensor with the given filters, one per hidden unit.
    pub fn set_filters(&mut self, filters: &[Filter<F>]) -> Result<()> {
        if filters.len() != self.hidden
            || filters
                .iter()
                .any(|f| f.alphabet() != self.alphabet || f.matrix.iter().any(|r| r.len() != self.filter))
        {
            return Err(Error::Shape(format!(
                "filters do not match a model with {} units, alphabet {}, filter {}",
                self.hidden, self.alphabet, self.filter
            )));
        }
        for f in filters {
            for (i, row) in f.matrix.iter().enumerate() {
                for (k, &w) in row.iter().enumerate() {
                    self.set_weight(i, f.unit, k, w);
                }
            }
        }
        Ok(())
    }
}
