use crate::error::TensorError;
use crate::C64;

/// Real embedding of a complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealIso {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl RealIso {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self, TensorError> {
        if re.len() != im.len() {
            return Err(TensorError::IsoLength {
                re: re.len(),
                im: im.len(),
            });
        }
        Ok(Self { re, im })
    }

    pub fn from_complex(z: &[C64]) -> Self {
        Self {
            re: z.iter().map(|c| c.re).collect(),
            im: z.iter().map(|c| c.im).collect(),
        }
    }

    pub fn to_complex(&self) -> Vec<C64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| C64::new(a, b))
            .collect()
    }

    /// Stacked layout `[re; im]`.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut v = self.re.clone();
        v.extend_from_slice(&self.im);
        v
    }

    pub fn from_stacked(v: &[f64]) -> Result<Self, TensorError> {
        if !v.len().is_multiple_of(2) {
            return Err(TensorError::IsoLength {
                re: v.len() / 2 + 1,
                im: v.len() / 2,
            });
        }
        let n = v.len() / 2;
        Ok(Self {
            re: v[..n].to_vec(),
            im: v[n..].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

/// Stacked real embedding `[Re z; Im z]` of a complex vector.
pub fn stack(z: &[C64]) -> Vec<f64> {
    RealIso::from_complex(z).to_stacked()
}

/// Inverse of [`stack`]. Panics on odd length.
pub fn unstack(v: &[f64]) -> Vec<C64> {
    assert!(
        v.len().is_multiple_of(2),
        "stacked vector must have even length"
    );
    let n = v.len() / 2;
    (0..n).map(|i| C64::new(v[i], v[n + i])).collect()
}

/// Conjugate-Wirtinger score to real gradient: `(∂f/∂Re, ∂f/∂Im) = 2 (Re s, Im s)`.
pub fn complex_to_real_score(s: &[C64]) -> RealIso {
    RealIso {
        re: s.iter().map(|c| 2.0 * c.re).collect(),
        im: s.iter().map(|c| 2.0 * c.im).collect(),
    }
}

/// Real gradient to conjugate-Wirtinger score: `½(∂f/∂Re + i ∂f/∂Im)`.
pub fn real_to_complex_score(g: &RealIso) -> Vec<C64> {
    g.re.iter()
        .zip(&g.im)
        .map(|(&a, &b)| C64::new(0.5 * a, 0.5 * b))
        .collect()
}
