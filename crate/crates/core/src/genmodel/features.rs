//! Serializable feature maps used inside encoding functions.
//!
//! All function-valued model pieces are expressed through a small fixed
//! library (polynomials up to degree 3 and sinusoids of linear forms, plus
//! one closed-form sinusoid family over coordinate extrema) so that models
//! round-trip through JSON as plain coefficient tables.

use serde::{Deserialize, Serialize};

use crate::linalg::{vdot, Matrix};
use crate::{Error, Result};

/// Scalar basis applied to a linear form `t = w·x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    /// `t^degree`, degree in 1..=3.
    Poly { degree: u32 },
    Sin,
    Cos,
}

/// One scalar feature `phi(x) = basis(w·x + offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarFeature {
    pub basis: Basis,
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl ScalarFeature {
    pub fn poly(degree: u32, weights: Vec<f64>, offset: f64) -> Self {
        ScalarFeature { basis: Basis::Poly { degree }, weights, offset }
    }

    pub fn sin(weights: Vec<f64>, offset: f64) -> Self {
        ScalarFeature { basis: Basis::Sin, weights, offset }
    }

    pub fn cos(weights: Vec<f64>, offset: f64) -> Self {
        ScalarFeature { basis: Basis::Cos, weights, offset }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let t = vdot(&self.weights, x) + self.offset;
        match self.basis {
            Basis::Poly { degree } => t.powi(degree as i32),
            Basis::Sin => t.sin(),
            Basis::Cos => t.cos(),
        }
    }

    fn validate(&self, d1: usize) -> Result<()> {
        if self.weights.len() != d1 {
            return Err(Error::DimensionMismatch(format!(
                "feature weights length {} but input dimension {d1}",
                self.weights.len()
            )));
        }
        if !self.weights.iter().all(|w| w.is_finite()) || !self.offset.is_finite() {
            return Err(Error::NonFinite("feature coefficients".into()));
        }
        if let Basis::Poly { degree } = self.basis {
            if !(1..=3).contains(&degree) {
                return Err(Error::InvalidArgument(format!("polynomial feature degree {degree}")));
            }
        }
        Ok(())
    }
}

/// Matrix-valued map `F(x) = sum_m phi_m(x) * F_m` with a fixed output shape.
///
/// An empty term list is the zero map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisExpansion {
    pub rows: usize,
    pub cols: usize,
    pub terms: Vec<(ScalarFeature, Matrix)>,
}

impl BasisExpansion {
    pub fn zero(rows: usize, cols: usize) -> Self {
        BasisExpansion { rows, cols, terms: Vec::new() }
    }

    pub fn new(rows: usize, cols: usize, terms: Vec<(ScalarFeature, Matrix)>) -> Result<Self> {
        let e = BasisExpansion { rows, cols, terms };
        e.check_shapes()?;
        Ok(e)
    }

    fn check_shapes(&self) -> Result<()> {
        for (_, m) in &self.terms {
            if m.rows() != self.rows || m.cols() != self.cols {
                return Err(Error::DimensionMismatch(format!(
                    "expansion term {}x{} in a {}x{} map",
                    m.rows(),
                    m.cols(),
                    self.rows,
                    self.cols
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self, d1: usize) -> Result<()> {
        self.check_shapes()?;
        for (f, m) in &self.terms {
            f.validate(d1)?;
            if !m.is_finite() {
                return Err(Error::NonFinite("expansion coefficient matrix".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (f, m) in &self.terms {
            let phi = f.eval(x);
            if phi != 0.0 {
                out = out.add(&m.scale(phi));
            }
        }
        out
    }
}

/// Factor maps `g: R^{d1} -> R^{rows x cols}` for low-rank encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MatrixMap {
    Expansion(BasisExpansion),
    /// `g_ij(x) = max_k(x_k) * sin(2*pi*(i+1)/rows * min_k(x_k) + 2*pi*(j+1)/cols)`
    /// for zero-based storage indices (the formula's indices run from 1).
    MaxMinSinusoid { rows: usize, cols: usize },
}

impl MatrixMap {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixMap::Expansion(e) => (e.rows, e.cols),
            MatrixMap::MaxMinSinusoid { rows, cols } => (*rows, *cols),
        }
    }

    pub fn validate(&self, d1: usize) -> Result<()> {
        match self {
            MatrixMap::Expansion(e) => e.validate(d1),
            MatrixMap::MaxMinSinusoid { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::InvalidArgument("zero-sized sinusoid factor map".into()));
                }
                if d1 == 0 {
                    return Err(Error::InvalidArgument("sinusoid factor map needs d1 >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        match self {
            MatrixMap::Expansion(e) => e.eval(x),
            MatrixMap::MaxMinSinusoid { rows, cols } => {
                let mx = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mn = x.iter().cloned().fold(f64::INFINITY, f64::min);
                let two_pi = 2.0 * std::f64::consts::PI;
                Matrix::from_fn(*rows, *cols, |i, j| {
                    let phase = two_pi * (i + 1) as f64 / *rows as f64 * mn
                        + two_pi * (j + 1) as f64 / *cols as f64;
                    mx * phase.sin()
                })
            }
        }
    }
}
