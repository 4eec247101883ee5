//! Coefficient-vector containers for the `(p, y)` unknown of the saddle
//! system.

use rand::Rng;

use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Uniform random coefficients in `[-1, 1)`.
pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// A pair of DG coefficient vectors over one space: adjoint `p`, state `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField {
    pub p: Vec<f64>,
    pub y: Vec<f64>,
}

impl PairField {
    pub fn new(p: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if p.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                actual: y.len(),
            });
        }
        Ok(PairField { p, y })
    }

    pub fn zeros(n: usize) -> Self {
        PairField {
            p: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let p = random_vector(n, rng);
        let y = random_vector(n, rng);
        PairField { p, y }
    }

    /// Length of each component.
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Euclidean dot product of the stacked coefficient vectors.
    pub fn dot(&self, other: &PairField) -> f64 {
        dot(&self.p, &other.p) + dot(&self.y, &other.y)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &PairField) {
        axpy(alpha, &other.p, &mut self.p);
        axpy(alpha, &other.y, &mut self.y);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.p.iter_mut().chain(self.y.iter_mut()).for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> PairField {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn sub(&self, other: &PairField) -> PairField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &PairField) -> PairField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.p
            .iter()
            .chain(&self.y)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Stacked `[p; y]` vector.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        out.extend_from_slice(&self.p);
        out.extend_from_slice(&self.y);
        out
    }

    pub fn from_stacked(v: &[f64]) -> PairField {
        let n = v.len() / 2;
        PairField {
            p: v[..n].to_vec(),
            y: v[n..].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_components_rejected() {
        assert!(PairField::new(vec![0.0; 3], vec![0.0; 4]).is_err());
    }

    #[test]
    fn stacking_round_trip() {
        let x = PairField::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(x.to_stacked(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(PairField::from_stacked(&x.to_stacked()), x);
        assert_eq!(x.dot(&x), 30.0);
        assert_eq!(x.sub(&x), PairField::zeros(2));
    }
}
