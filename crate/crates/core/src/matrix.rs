use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Borrowed row-major `rows × dim` float32 matrix.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingView<'a> {
    data: &'a [f32],
    rows: usize,
    dim: usize,
}

impl<'a> EmbeddingView<'a> {
    pub fn new(data: &'a [f32], rows: usize, dim: usize) -> Result<Self> {
        let expected = rows.checked_mul(dim).ok_or(CoreError::Shape {
            expected: usize::MAX,
            actual: data.len(),
        })?;
        if data.len() != expected {
            return Err(CoreError::Shape {
                expected,
                actual: data.len(),
            });
        }
        Ok(EmbeddingView { data, rows, dim })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &'a [f32] {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(at) => Err(CoreError::NonFinite {
                row: at / self.dim.max(1),
                col: at % self.dim.max(1),
            }),
        }
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select(&self, rows: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        EmbeddingMatrix {
            data,
            rows: rows.len(),
            dim: self.dim,
        }
    }
}

/// Owned counterpart of [`EmbeddingView`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    rows: usize,
    dim: usize,
}

impl EmbeddingMatrix {
    pub fn new(data: Vec<f32>, rows: usize, dim: usize) -> Result<Self> {
        EmbeddingView::new(&data, rows, dim)?;
        Ok(EmbeddingMatrix { data, rows, dim })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(CoreError::Shape {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingMatrix {
            data,
            rows: rows.len(),
            dim,
        })
    }

    pub fn view(&self) -> EmbeddingView<'_> {
        EmbeddingView {
            data: &self.data,
            rows: self.rows,
            dim: self.dim,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn shape_checked() {
        let data = [0.0f32; 6];
        assert_eq!(EmbeddingView::new(&data, 2, 3).unwrap().row(1).len(), 3);
        assert!(matches!(
            EmbeddingView::new(&data[..5], 2, 3),
            Err(CoreError::Shape { expected: 6, actual: 5 })
        ));
    }

    #[test]
    fn finite_check_reports_position() {
        let data = [0.0, 1.0, 2.0, 3.0, f32::INFINITY, 5.0];
        let v = EmbeddingView::new(&data, 2, 3).unwrap();
        assert_eq!(v.check_finite(), Err(CoreError::NonFinite { row: 1, col: 1 }));
    }

    #[test]
    fn select_rows() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let s = m.view().select(&[2, 0]);
        assert_eq!(s.view().as_slice(), &[5.0, 6.0, 1.0, 2.0]);
    }
}
