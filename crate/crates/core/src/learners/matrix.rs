use crate::error::{Error, Result};
use crate::model::FeatureTable;

/// Dense row-major design matrix; `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} values for {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_infinite()) {
            return Err(Error::invalid("matrix contains infinite values"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged matrix rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Window values of a feature table, missing as `NaN`.
    pub fn from_table(table: &FeatureTable) -> Self {
        let cols = table.registry().len();
        let data = table
            .windows()
            .iter()
            .flat_map(|w| w.values.iter().map(|v| v.unwrap_or(f64::NAN)))
            .collect();
        Self {
            rows: table.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::invalid("cannot stack matrices with different widths"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect(),
            ..self.clone()
        }
    }
}

/// Labelled rows with a participant index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Matrix,
    /// 1 = win, 0 = loss.
    pub y: Vec<u8>,
    pub groups: Vec<usize>,
    pub registry: Vec<String>,
}

impl TrainingSet {
    pub fn new(x: Matrix, y: Vec<u8>, groups: Vec<usize>, registry: Vec<String>) -> Result<Self> {
        if y.len() != x.rows() || groups.len() != x.rows() {
            return Err(Error::invalid("labels, groups and rows differ in length"));
        }
        if registry.len() != x.cols() {
            return Err(Error::invalid("registry width does not match the matrix"));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Self { x, y, groups, registry })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r]).collect(),
            registry: self.registry.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, f64::NAN]]).unwrap();
        assert_eq!(m.get(1, 0), 3.0);
        assert!(m.map(|v| v * 2.0).get(1, 1).is_nan());
        assert_eq!(m.select_rows(&[1, 1]).rows(), 2);
    }
}
