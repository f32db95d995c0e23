use crate::error::TensorError;
use crate::matrix::CMatrix;
use crate::C64;

/// Rank-3 complex tensor, column-major (first index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor3 {
    dims: (usize, usize, usize),
    data: Vec<C64>,
}

impl CTensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            data: vec![C64::new(0.0, 0.0); dims.0 * dims.1 * dims.2],
        }
    }

    /// Builds a tensor from column-major data, rejecting wrong lengths and non-finite entries.
    pub fn from_vec(dims: (usize, usize, usize), data: Vec<C64>) -> Result<Self, TensorError> {
        let expected = dims.0 * dims.1 * dims.2;
        if data.len() != expected {
            return Err(TensorError::LengthMismatch {
                dims,
                expected,
                got: data.len(),
            });
        }
        if let Some(i) = data
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> C64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Column-major flattening.
    pub fn vectorize(&self) -> Vec<C64> {
        self.data.clone()
    }

    /// Inverse of [`CTensor3::vectorize`].
    pub fn devectorize(dims: (usize, usize, usize), v: &[C64]) -> Result<Self, TensorError> {
        Self::from_vec(dims, v.to_vec())
    }

    /// Slice with the first index fixed, as a `d2 x d3` matrix.
    pub fn slice_first(&self, i: usize) -> CMatrix {
        CMatrix::from_fn(self.dims.1, self.dims.2, |j, k| self.get(i, j, k))
    }

    pub fn set_slice_first(&mut self, i: usize, m: &CMatrix) {
        assert_eq!((m.nrows(), m.ncols()), (self.dims.1, self.dims.2));
        for k in 0..self.dims.2 {
            for j in 0..self.dims.1 {
                self.set(i, j, k, m[(j, k)]);
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|z| z * a).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
