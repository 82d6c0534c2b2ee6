//! Dense row-major containers for activations and parameters.

use super::Scalar;

/// (batch, channels, height = time frames, width = mel bins), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<S> {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor4<S> {
    pub fn zeros(b: usize, c: usize, h: usize, w: usize) -> Self {
        Self { b, c, h, w, data: vec![S::ZERO; b * c * h * w] }
    }

    pub fn from_vec(b: usize, c: usize, h: usize, w: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), b * c * h * w, "tensor data length mismatch");
        Self { b, c, h, w, data }
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    /// The (b, c) spatial plane.
    #[inline]
    pub fn plane(&self, b: usize, c: usize) -> &[S] {
        let start = (b * self.c + c) * self.plane_len();
        &self.data[start..start + self.plane_len()]
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> S {
        self.data[((b * self.c + c) * self.h + h) * self.w + w]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, h: usize, w: usize) -> &mut S {
        &mut self.data[((b * self.c + c) * self.h + h) * self.w + w]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// 2-D row-major matrix (rows x cols); rows are batch entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::ZERO; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let mut t = Tensor4::<f32>::zeros(2, 3, 4, 5);
        *t.at_mut(1, 2, 3, 4) = 7.0;
        assert_eq!(t.data[((1 * 3 + 2) * 4 + 3) * 5 + 4], 7.0);
        assert_eq!(t.at(1, 2, 3, 4), 7.0);
        assert_eq!(t.plane(1, 2).len(), 20);
    }

    #[test]
    fn matrix_rows() {
        let m = Matrix::<f64>::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(m.row(1), &[4., 5., 6.]);
        assert_eq!(m.at(0, 2), 3.0);
    }
}
