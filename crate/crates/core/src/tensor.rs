//! Dense third-order tensors and the M-product algebra built on them.
//!
//! Storage layout: a tensor of dims `(I, J, T)` keeps its frontal slices
//! contiguously, each slice row-major, so entry `(i, j, t)` lives at
//! `t * I * J + i * J + j`. The mode-3 unfolding is the `T x IJ` matrix whose
//! column `i * J + j` is the tube `(i, j, :)`; with this layout the unfolding
//! has exactly the same buffer as the tensor.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::transforms::TransformMatrix;

/// Largest imaginary part tolerated when a complex result is demoted back to
/// real mode.
pub const DEMOTE_TOLERANCE: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarMode {
    Real,
    Complex,
}

impl ScalarMode {
    fn join(self, other: ScalarMode) -> ScalarMode {
        if self == ScalarMode::Real && other == ScalarMode::Real {
            ScalarMode::Real
        } else {
            ScalarMode::Complex
        }
    }
}

/// Tensor axis for the mode-n product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
    Third,
}

impl Axis {
    pub fn from_index(n: usize) -> Result<Axis> {
        match n {
            1 => Ok(Axis::First),
            2 => Ok(Axis::Second),
            3 => Ok(Axis::Third),
            _ => Err(Error::InvalidArgument(format!("axis must be 1, 2 or 3, got {n}"))),
        }
    }

    fn position(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
            Axis::Third => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    mode: ScalarMode,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "matrix dims must be positive");
        Matrix { rows, cols, data: vec![ZERO; rows * cols], mode: ScalarMode::Real }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for k in 0..n {
            m.data[k * n + k] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(rows: usize, cols: usize, values: Vec<f64>) -> Result<Matrix> {
        check_positive("Matrix::from_real", &[rows, cols])?;
        if values.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::from_real",
                format!("{} values", rows * cols),
                format!("{} values", values.len()),
            ));
        }
        Ok(Matrix {
            rows,
            cols,
            data: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            mode: ScalarMode::Real,
        })
    }

    pub fn from_complex(rows: usize, cols: usize, values: Vec<Complex64>) -> Result<Matrix> {
        check_positive("Matrix::from_complex", &[rows, cols])?;
        if values.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::from_complex",
                format!("{} values", rows * cols),
                format!("{} values", values.len()),
            ));
        }
        let mode = if values.iter().all(|v| v.im == 0.0) { ScalarMode::Real } else { ScalarMode::Complex };
        Ok(Matrix { rows, cols, data: values, mode })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Matrix {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Matrix::from_complex(rows, cols, values).expect("dims consistent by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mode(&self) -> ScalarMode {
        self.mode
    }

    pub fn is_real(&self) -> bool {
        self.mode == ScalarMode::Real
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "Matrix::matmul",
                format!("{} rows on the right", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = vec![ZERO; self.rows * other.cols];
        for r in 0..self.rows {
            let orow = &mut out[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix { rows: self.rows, cols: other.cols, data: out, mode: self.mode.join(other.mode) })
    }

    pub fn transpose(&self) -> Matrix {
        let mut m = Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r));
        m.mode = self.mode;
        m
    }

    pub fn conj_transpose(&self) -> Matrix {
        let mut m = Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj());
        m.mode = self.mode;
        m
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows).map(|r| self.row(r).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                "Matrix::sub",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data, mode: self.mode.join(other.mode) })
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::dims("Matrix::inverse", "square matrix", format!("{}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv = Matrix::identity(n).data;
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))
                .expect("non-empty range");
            let p = a[pivot * n + col];
            if p.norm() <= scale * 1e-14 || !p.norm().is_finite() {
                return Err(Error::SingularTransform { residual: p.norm() });
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                    inv.swap(pivot * n + c, col * n + c);
                }
            }
            let pinv = p.inv();
            for c in 0..n {
                a[col * n + c] *= pinv;
                inv[col * n + c] *= pinv;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor == ZERO {
                    continue;
                }
                for c in 0..n {
                    let (ac, ic) = (a[col * n + c], inv[col * n + c]);
                    a[r * n + c] -= factor * ac;
                    inv[r * n + c] -= factor * ic;
                }
            }
        }
        Ok(Matrix { rows: n, cols: n, data: inv, mode: self.mode })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
    mode: ScalarMode,
}

impl Tensor3 {
    /// Real zero tensor. Panics if any dimension is zero.
    pub fn zeros(i: usize, j: usize, t: usize) -> Tensor3 {
        assert!(i > 0 && j > 0 && t > 0, "tensor dims must be positive");
        Tensor3 { dims: [i, j, t], data: vec![ZERO; i * j * t], mode: ScalarMode::Real }
    }

    pub fn from_real(dims: [usize; 3], values: Vec<f64>) -> Result<Tensor3> {
        check_positive("Tensor3::from_real", &dims)?;
        let len = dims.iter().product::<usize>();
        if values.len() != len {
            return Err(Error::dims(
                "Tensor3::from_real",
                format!("{len} values for dims {dims:?}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(Tensor3 { dims, data: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), mode: ScalarMode::Real })
    }

    pub fn from_complex(dims: [usize; 3], values: Vec<Complex64>) -> Result<Tensor3> {
        check_positive("Tensor3::from_complex", &dims)?;
        let len = dims.iter().product::<usize>();
        if values.len() != len {
            return Err(Error::dims(
                "Tensor3::from_complex",
                format!("{len} values for dims {dims:?}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(Tensor3 { dims, data: values, mode: ScalarMode::Complex })
    }

    pub fn from_fn_real(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Tensor3 {
        let [ni, nj, nt] = dims;
        let mut out = Tensor3::zeros(ni, nj, nt);
        for t in 0..nt {
            for i in 0..ni {
                for j in 0..nj {
                    out.data[(t * ni + i) * nj + j] = Complex64::new(f(i, j, t), 0.0);
                }
            }
        }
        out
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn mode(&self) -> ScalarMode {
        self.mode
    }

    pub fn is_real(&self) -> bool {
        self.mode == ScalarMode::Real
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, t: usize) -> usize {
        let [ni, nj, _] = self.dims;
        (t * ni + i) * nj + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, t: usize) -> Complex64 {
        self.data[self.index(i, j, t)]
    }

    #[inline]
    pub fn re(&self, i: usize, j: usize, t: usize) -> f64 {
        self.data[self.index(i, j, t)].re
    }

    pub fn set(&mut self, i: usize, j: usize, t: usize, value: Complex64) {
        let k = self.index(i, j, t);
        self.data[k] = value;
        if value.im != 0.0 {
            self.mode = ScalarMode::Complex;
        }
    }

    pub fn set_re(&mut self, i: usize, j: usize, t: usize, value: f64) {
        let k = self.index(i, j, t);
        self.data[k] = Complex64::new(value, self.data[k].im);
    }

    pub fn slice(&self, t: usize) -> &[Complex64] {
        let s = self.dims[0] * self.dims[1];
        &self.data[t * s..(t + 1) * s]
    }

    /// Real parts in storage order.
    pub fn real_values(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on tensors of different dims");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Take the real part, failing if any imaginary part exceeds `tolerance`.
    pub fn demote_real(mut self, stage: &str, tolerance: f64) -> Result<Tensor3> {
        if !self.all_finite() {
            return Err(Error::NonFinite { stage: stage.to_string() });
        }
        let residue = self.max_imag();
        if residue > tolerance {
            return Err(Error::ImaginaryResidue { stage: stage.to_string(), residue, tolerance });
        }
        for v in &mut self.data {
            v.im = 0.0;
        }
        self.mode = ScalarMode::Real;
        Ok(self)
    }

    /// Real part without any residue check.
    pub fn real_part(&self) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
            mode: ScalarMode::Real,
        }
    }

    pub fn scale(&self, factor: f64) -> Tensor3 {
        Tensor3 { dims: self.dims, data: self.data.iter().map(|v| v * factor).collect(), mode: self.mode }
    }

    /// `self + factor * other`, in place.
    pub fn add_scaled(&mut self, other: &Tensor3, factor: f64) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::dims("Tensor3::add_scaled", format!("{:?}", self.dims), format!("{:?}", other.dims)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
        self.mode = self.mode.join(other.mode);
        Ok(())
    }

    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| Complex64::new(f(v.re), 0.0)).collect(),
            mode: ScalarMode::Real,
        }
    }

    /// Zero-pad (or truncate) along the third axis to `t_new` slices.
    pub fn resize_time(&self, t_new: usize) -> Tensor3 {
        assert!(t_new > 0, "time dimension must be positive");
        let s = self.dims[0] * self.dims[1];
        let keep = t_new.min(self.dims[2]);
        let mut data = vec![ZERO; s * t_new];
        data[..s * keep].copy_from_slice(&self.data[..s * keep]);
        Tensor3 { dims: [self.dims[0], self.dims[1], t_new], data, mode: self.mode }
    }

    /// Per-slice conjugate transpose: `(I, J, T) -> (J, I, T)`.
    pub fn conj_transpose_slices(&self) -> Tensor3 {
        let [ni, nj, nt] = self.dims;
        let mut data = vec![ZERO; self.data.len()];
        for t in 0..nt {
            let base = t * ni * nj;
            for i in 0..ni {
                for j in 0..nj {
                    data[base + j * ni + i] = self.data[base + i * nj + j].conj();
                }
            }
        }
        Tensor3 { dims: [nj, ni, nt], data, mode: self.mode }
    }
}

fn check_positive(op: &'static str, dims: &[usize]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!("{op}: dims must be positive, got {dims:?}")));
    }
    Ok(())
}

/// Mode-n product `x ×ₙ u`: the `n`-th index of `x` is contracted with the
/// columns of `u`, and replaced by the rows of `u`.
pub fn mode_n_product(x: &Tensor3, u: &Matrix, axis: Axis) -> Result<Tensor3> {
    let p = axis.position();
    if u.cols() != x.dims[p] {
        return Err(Error::dims(
            "mode_n_product",
            format!("factor with {} columns (axis {} of {:?})", x.dims[p], p + 1, x.dims),
            format!("{}x{}", u.rows(), u.cols()),
        ));
    }
    if axis == Axis::Third {
        return m_transform(x, u);
    }
    let mut dims = x.dims;
    dims[p] = u.rows();
    let [oi, oj, nt] = dims;
    let mut data = vec![ZERO; oi * oj * nt];
    for t in 0..nt {
        for i in 0..oi {
            for j in 0..oj {
                let mut acc = ZERO;
                for k in 0..x.dims[p] {
                    let xv = match axis {
                        Axis::First => x.get(k, j, t),
                        _ => x.get(i, k, t),
                    };
                    let uv = match axis {
                        Axis::First => u.get(i, k),
                        _ => u.get(j, k),
                    };
                    acc += uv * xv;
                }
                data[(t * oi + i) * oj + j] = acc;
            }
        }
    }
    Ok(Tensor3 { dims, data, mode: x.mode.join(u.mode()) })
}

/// Mode-3 unfolding as a `T x IJ` matrix.
pub fn unfold3(x: &Tensor3) -> Matrix {
    let [ni, nj, nt] = x.dims;
    Matrix { rows: nt, cols: ni * nj, data: x.data.clone(), mode: x.mode }
}

pub fn fold3(m: &Matrix, dims: [usize; 3]) -> Result<Tensor3> {
    check_positive("fold3", &dims)?;
    let [ni, nj, nt] = dims;
    if m.rows() != nt || m.cols() != ni * nj {
        return Err(Error::dims(
            "fold3",
            format!("{}x{} matrix for dims {:?}", nt, ni * nj, dims),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    Ok(Tensor3 { dims, data: m.data.clone(), mode: m.mode() })
}

/// M-transform `x ×₃ m`, i.e. `fold3(m · unfold3(x))`.
pub fn m_transform(x: &Tensor3, m: &Matrix) -> Result<Tensor3> {
    let nt = x.dims[2];
    if m.rows() != nt || m.cols() != nt {
        return Err(Error::dims("m_transform", format!("{nt}x{nt} transform"), format!("{}x{}", m.rows(), m.cols())));
    }
    let s = x.dims[0] * x.dims[1];
    let mut data = vec![ZERO; x.data.len()];
    for t in 0..nt {
        let out = &mut data[t * s..(t + 1) * s];
        for k in 0..nt {
            let w = m.get(t, k);
            if w == ZERO {
                continue;
            }
            for (o, v) in out.iter_mut().zip(x.slice(k)) {
                *o += w * v;
            }
        }
    }
    Ok(Tensor3 { dims: x.dims, data, mode: x.mode.join(m.mode()) })
}

pub fn m_inverse_transform(x: &Tensor3, m: &TransformMatrix) -> Result<Tensor3> {
    m_transform(x, m.inverse())
}

/// Face-wise product: slice `t` of the result is `x[:, :, t] · y[:, :, t]`.
pub fn facewise_product(x: &Tensor3, y: &Tensor3) -> Result<Tensor3> {
    let [ni, nj, nt] = x.dims;
    let [yj, nk, yt] = y.dims;
    if nj != yj || nt != yt {
        return Err(Error::dims("facewise_product", format!("right operand ({nj}, K, {nt})"), format!("{:?}", y.dims)));
    }
    let mut data = vec![ZERO; ni * nk * nt];
    for t in 0..nt {
        let xs = x.slice(t);
        let ys = y.slice(t);
        let out = &mut data[t * ni * nk..(t + 1) * ni * nk];
        for i in 0..ni {
            let orow = &mut out[i * nk..(i + 1) * nk];
            for j in 0..nj {
                let a = xs[i * nj + j];
                // skipping exact zeros keeps sparse adjacency slices cheap
                if a == ZERO {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(&ys[j * nk..(j + 1) * nk]) {
                    *o += a * b;
                }
            }
        }
    }
    Ok(Tensor3 { dims: [ni, nk, nt], data, mode: x.mode.join(y.mode) })
}

/// M-product `((x ×₃ M) ⊗ (y ×₃ M)) ×₃ M⁻¹`. When both operands are real the
/// result is demoted to real mode.
pub fn m_product(x: &Tensor3, y: &Tensor3, m: &TransformMatrix) -> Result<Tensor3> {
    if x.dims[1] != y.dims[0] || x.dims[2] != y.dims[2] {
        return Err(Error::dims(
            "m_product",
            format!("right operand ({}, K, {})", x.dims[1], x.dims[2]),
            format!("{:?}", y.dims),
        ));
    }
    let xh = m_transform(x, m.matrix())?;
    let yh = m_transform(y, m.matrix())?;
    let z = m_inverse_transform(&facewise_product(&xh, &yh)?, m)?;
    if x.is_real() && y.is_real() && !z.is_real() {
        z.demote_real("m_product", DEMOTE_TOLERANCE)
    } else {
        Ok(z)
    }
}
