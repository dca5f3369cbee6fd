//! Dense row-major `f64` arrays.
//!
//! Scalars are rank-0 (`shape == []`), vectors rank-1, matrices rank-2.
//! The invariant `product(shape) == data.len()` holds for every
//! constructed value.

use super::NumericsError;

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NumericsError> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || expected != data.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "Array::new",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Value of a rank-0 array.
    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn same_shape(&self, other: &Array) -> bool {
        self.shape == other.shape
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combination; shapes must already agree.
    pub fn zip_map(&self, other: &Array, f: impl Fn(f64, f64) -> f64) -> Array {
        debug_assert!(self.same_shape(other));
        Array {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Array, scale: f64) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * scale;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Array) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// `[m,k] x [k,n] -> [m,n]`, plain ikj loop.
    pub fn matmul2(&self, other: &Array) -> Array {
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.data[i * k..(i + 1) * k];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Array {
            shape: vec![m, n],
            data: out,
        }
    }

    /// `[m,k] x [k] -> [m]`.
    pub fn matvec(&self, v: &Array) -> Array {
        let (m, k) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i * k..(i + 1) * k]
                .iter()
                .zip(&v.data)
                .map(|(&a, &b)| a * b)
                .sum();
        }
        Array {
            shape: vec![m],
            data: out,
        }
    }

    /// `[k] x [k,n] -> [n]`.
    pub fn vecmat(&self, m: &Array) -> Array {
        let (k, n) = (m.shape[0], m.shape[1]);
        let mut out = vec![0.0; n];
        for p in 0..k {
            let a = self.data[p];
            if a == 0.0 {
                continue;
            }
            let row = &m.data[p * n..(p + 1) * n];
            for (o, &b) in out.iter_mut().zip(row) {
                *o += a * b;
            }
        }
        Array {
            shape: vec![n],
            data: out,
        }
    }

    /// Outer product `[m] x [n] -> [m,n]`.
    pub fn outer(&self, other: &Array) -> Array {
        let (m, n) = (self.len(), other.len());
        let mut out = Vec::with_capacity(m * n);
        for &a in &self.data {
            out.extend(other.data.iter().map(|&b| a * b));
        }
        Array {
            shape: vec![m, n],
            data: out,
        }
    }

    pub fn transposed(&self) -> Array {
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Array {
            shape: vec![n, m],
            data: out,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.shape[1];
        &self.data[i * n..(i + 1) * n]
    }

    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|x| !x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_length_mismatch() {
        assert!(Array::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Array::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn scalar_has_empty_shape() {
        let s = Array::scalar(2.5);
        assert!(s.is_scalar());
        assert_eq!(s.len(), 1);
        assert_eq!(s.scalar_value(), 2.5);
    }

    #[test]
    fn matmul_shapes() {
        let a = Array::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Array::matrix(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let c = a.matmul2(&b);
        assert_eq!(c.shape(), &[2, 2]);
        assert_eq!(c.data(), &[58., 64., 139., 154.]);

        let v = Array::vector(vec![1., 0., -1.]);
        assert_eq!(a.matvec(&v).data(), &[-2., -2.]);

        let u = Array::vector(vec![1., -1.]);
        assert_eq!(u.vecmat(&a).data(), &[-3., -3., -3.]);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = Array::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(a.transposed().transposed(), a);
    }
}
