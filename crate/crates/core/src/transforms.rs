//! Temporal transform matrices: identity, DFT, DCT-II and Haar.
//!
//! All builders use zero-based row (output) index `u` and column (time)
//! index `v`. Every matrix is unitary or orthogonal, so its inverse is the
//! conjugate transpose; construction re-checks `‖M·M⁻¹ − I‖∞`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Tolerance on `‖M·M⁻¹ − I‖∞` accepted at construction.
pub const INVERSE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Identity,
    Dft,
    Dct,
    Haar,
    /// Arbitrary invertible matrix supplied by the caller.
    Custom,
}

impl TransformKind {
    pub const BUILTIN: [TransformKind; 4] =
        [TransformKind::Identity, TransformKind::Dft, TransformKind::Dct, TransformKind::Haar];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Identity => "identity",
            TransformKind::Dft => "dft",
            TransformKind::Dct => "dct",
            TransformKind::Haar => "haar",
            TransformKind::Custom => "custom",
        }
    }

    /// Number of time slots the transform operates on for a series of
    /// length `slots`. Haar needs a power of two; the others use `slots`.
    pub fn working_size(self, slots: usize) -> usize {
        match self {
            TransformKind::Haar => slots.next_power_of_two(),
            _ => slots,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(TransformKind::Identity),
            "dft" => Ok(TransformKind::Dft),
            "dct" => Ok(TransformKind::Dct),
            "haar" => Ok(TransformKind::Haar),
            other => Err(Error::InvalidArgument(format!("unknown transform `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransformMatrix {
    kind: TransformKind,
    m: Matrix,
    m_inv: Matrix,
}

impl TransformMatrix {
    pub fn build(kind: TransformKind, size: usize) -> Result<TransformMatrix> {
        match kind {
            TransformKind::Identity => build_identity(size),
            TransformKind::Dft => build_dft(size),
            TransformKind::Dct => build_dct(size),
            TransformKind::Haar => build_haar(size),
            TransformKind::Custom => {
                Err(Error::InvalidArgument("custom transforms are built with TransformMatrix::custom".into()))
            }
        }
    }

    /// Wrap an arbitrary invertible matrix, computing its inverse.
    pub fn custom(m: Matrix) -> Result<TransformMatrix> {
        let m_inv = m.inverse()?;
        TransformMatrix::checked(TransformKind::Custom, m, m_inv)
    }

    fn checked(kind: TransformKind, m: Matrix, m_inv: Matrix) -> Result<TransformMatrix> {
        let residual = m.matmul(&m_inv)?.sub(&Matrix::identity(m.rows()))?.inf_norm();
        if !(residual <= INVERSE_TOLERANCE) {
            return Err(Error::SingularTransform { residual });
        }
        Ok(TransformMatrix { kind, m, m_inv })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn inverse(&self) -> &Matrix {
        &self.m_inv
    }

    pub fn is_real(&self) -> bool {
        self.m.is_real() && self.m_inv.is_real()
    }
}

fn check_size(size: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::InvalidArgument("transform size must be at least 1".into()));
    }
    Ok(())
}

pub fn build_identity(size: usize) -> Result<TransformMatrix> {
    check_size(size)?;
    TransformMatrix::checked(TransformKind::Identity, Matrix::identity(size), Matrix::identity(size))
}

/// Unitary DFT: `m[u][v] = exp(-2πi·u·v/T) / √T`.
pub fn build_dft(size: usize) -> Result<TransformMatrix> {
    check_size(size)?;
    let scale = 1.0 / (size as f64).sqrt();
    let m = Matrix::from_fn(size, size, |u, v| {
        // reduce u·v mod T first so large products keep full angle precision
        let phase = ((u * v) % size) as f64 / size as f64;
        Complex64::from_polar(scale, -2.0 * PI * phase)
    });
    let m_inv = m.conj_transpose();
    TransformMatrix::checked(TransformKind::Dft, m, m_inv)
}

/// Orthonormal DCT-II: `m[u][v] = α(u)·cos(π·u·(v + ½)/T)`.
pub fn build_dct(size: usize) -> Result<TransformMatrix> {
    check_size(size)?;
    let n = size as f64;
    let m = Matrix::from_fn(size, size, |u, v| {
        let alpha = if u == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        Complex64::new(alpha * (PI / n * u as f64 * (v as f64 + 0.5)).cos(), 0.0)
    });
    let m_inv = m.transpose();
    TransformMatrix::checked(TransformKind::Dct, m, m_inv)
}

/// Haar mother wavelet on half-open intervals: `+1` on `[0, ½)`, `-1` on
/// `[½, 1)`, `0` elsewhere. Evaluated at `w = 2^j·k/T − i` using integers:
/// `num = 2^j·k − i·T` so that `w = num / T`.
fn haar_sign(num: i64, size: i64) -> f64 {
    if num >= 0 && 2 * num < size {
        1.0
    } else if 2 * num >= size && num < size {
        -1.0
    } else {
        0.0
    }
}

/// Orthonormal Haar matrix. Row 0 is the scaling row; row `2^j + i` samples
/// the wavelet at scale `j` and translation `i`, normalized to unit length.
pub fn build_haar(size: usize) -> Result<TransformMatrix> {
    check_size(size)?;
    if !size.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(size));
    }
    let mut values = vec![0.0; size * size];
    let scaling = 1.0 / (size as f64).sqrt();
    values[..size].fill(scaling);
    let levels = size.trailing_zeros();
    for j in 0..levels {
        let width = 1usize << j;
        // each wavelet at scale j is supported on T / 2^j samples
        let norm = (width as f64 / size as f64).sqrt();
        for i in 0..width {
            let row = width + i;
            for k in 0..size {
                let num = (width * k) as i64 - (i * size) as i64;
                values[row * size + k] = haar_sign(num, size as i64) * norm;
            }
        }
    }
    let m = Matrix::from_real(size, size, values)?;
    let m_inv = m.transpose();
    TransformMatrix::checked(TransformKind::Haar, m, m_inv)
}
