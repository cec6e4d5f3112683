//! Dense N-way tensors and the multilinear primitives built on them.
//!
//! Storage is first-index-fastest: the entry `(i_0, …, i_{N-1})` of a tensor
//! with extents `(I_0, …, I_{N-1})` lives at `i_0 + I_0·(i_1 + I_1·(i_2 + …))`.
//! Matrices are column-major, so the mode-0 unfolding of a tensor is the same
//! buffer reinterpreted. Mode indices are zero-based throughout the crate.
//!
//! Unfoldings follow the Kolda–Bader column order: in the mode-`n` unfolding
//! the remaining indices are linearized with the lowest mode varying fastest.
//! Under that convention
//!
//! ```text
//! Y = X ×_0 A0 ×_1 A1 … ×_{N-1} A{N-1}
//!   ⇔ Y_(n) = An · X_(n) · (A{N-1} ⊗ … ⊗ A{n+1} ⊗ A{n-1} ⊗ … ⊗ A0)ᵀ
//! ```

use std::fmt;

use crate::error::{Error, Result};

/// Extents of a tensor. Never empty, every extent at least one.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::shape("a shape needs at least one mode"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::shape(format!("extent of mode {pos} is zero in {dims:?}")));
        }
        checked_product(&dims)
            .ok_or_else(|| Error::Capacity(format!("element count of {dims:?} overflows")))?;
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// This shape followed by one more mode of extent `extent`.
    pub fn appended(&self, extent: usize) -> Result<Shape> {
        let mut dims = self.0.clone();
        dims.push(extent);
        Shape::new(dims)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// `(Π_{k<mode} I_k, I_mode, Π_{k>mode} I_k)`.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.0[..mode].iter().product();
        let right = self.0[mode + 1..].iter().product();
        (left, self.0[mode], right)
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join("×"))
    }
}

pub(crate) fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape(format!(
                "{} values supplied for a tensor of shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        Self::new(Shape::new(dims)?, data)
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.numel()];
        DenseTensor { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let data = vec![value; shape.numel()];
        DenseTensor { shape, data }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut index = vec![0usize; shape.order()];
        let mut data = Vec::with_capacity(shape.numel());
        for _ in 0..shape.numel() {
            data.push(f(&index));
            for (k, i) in index.iter_mut().enumerate() {
                *i += 1;
                if *i < shape.dims()[k] {
                    break;
                }
                *i = 0;
            }
        }
        DenseTensor { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.order(), "index order mismatch");
        let mut linear = 0;
        for (k, (&i, &d)) in index.iter().zip(self.dims()).enumerate().rev() {
            assert!(i < d, "index {i} out of bounds for mode {k} of extent {d}");
            linear = linear * d + i;
        }
        linear
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.linear_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let i = self.linear_index(index);
        self.data[i] = value;
    }

    /// Same data, new extents. The element count must not change.
    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(DenseTensor {
            shape,
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "element-wise operation on {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Sums out the trailing mode. An order-1 tensor sums to a 1-vector.
    pub fn sum_last_mode(&self) -> DenseTensor {
        let order = self.order();
        let (inner, last, _) = self.shape.split(order - 1);
        let mut out = vec![0.0; inner];
        for c in 0..last {
            for (o, &x) in out.iter_mut().zip(&self.data[c * inner..(c + 1) * inner]) {
                *o += x;
            }
        }
        let dims = if order == 1 {
            vec![1]
        } else {
            self.dims()[..order - 1].to_vec()
        };
        DenseTensor {
            shape: Shape(dims),
            data: out,
        }
    }

    /// Slice `index` of the trailing mode, as a tensor of the leading modes.
    pub fn last_mode_slice(&self, index: usize) -> DenseTensor {
        let order = self.order();
        let (inner, last, _) = self.shape.split(order - 1);
        assert!(index < last, "slice {index} out of range for extent {last}");
        let dims = if order == 1 {
            vec![1]
        } else {
            self.dims()[..order - 1].to_vec()
        };
        DenseTensor {
            shape: Shape(dims),
            data: self.data[index * inner..(index + 1) * inner].to_vec(),
        }
    }
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

/// Column-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("matrix extents must be positive, got {rows}×{cols}")));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Capacity(format!("{rows}×{cols} matrix overflows")))?;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "{} values supplied for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix extents must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i + n * i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i + rows * j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from a list of rows, the way matrices are written down.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("ragged rows"));
        }
        if r == 0 || c == 0 {
            return Err(Error::shape("empty matrix"));
        }
        Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols);
        self.data[i + self.rows * j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.rows && j < self.cols);
        self.data[i + self.rows * j] = value;
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.data[k + other.rows * j];
                if b == 0.0 {
                    continue;
                }
                let src = &self.data[k * self.rows..(k + 1) * self.rows];
                for (d, &a) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(format!(
                "element-wise product of {}×{} and {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}×{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:.6}", self.get(i, j))).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Element-wise (Hadamard) product for any same-shaped storage.
pub trait Hadamard: Sized {
    fn hadamard(&self, other: &Self) -> Result<Self>;
}

impl Hadamard for DenseTensor {
    fn hadamard(&self, other: &Self) -> Result<Self> {
        DenseTensor::hadamard(self, other)
    }
}

impl Hadamard for Matrix {
    fn hadamard(&self, other: &Self) -> Result<Self> {
        Matrix::hadamard(self, other)
    }
}

pub fn hadamard<T: Hadamard>(a: &T, b: &T) -> Result<T> {
    a.hadamard(b)
}

/// Mode-`mode` unfolding: the mode fibers become the columns.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    t.shape.check_mode(mode)?;
    let (left, extent, right) = t.shape.split(mode);
    let cols = left * right;
    let mut data = vec![0.0; t.len()];
    for r in 0..right {
        for i in 0..extent {
            let src = &t.data[left * (i + extent * r)..][..left];
            for (l, &x) in src.iter().enumerate() {
                data[i + extent * (l + left * r)] = x;
            }
        }
    }
    Ok(Matrix {
        rows: extent,
        cols,
        data,
    })
}

/// Inverse of [`unfold`]: places the columns of `m` back as mode-`mode` fibers of `target`.
pub fn fold(m: &Matrix, mode: usize, target: &Shape) -> Result<DenseTensor> {
    target.check_mode(mode)?;
    let (left, extent, right) = target.split(mode);
    if m.rows != extent || m.cols != left * right {
        return Err(Error::shape(format!(
            "a {}×{} matrix does not fold into mode {mode} of {:?}",
            m.rows, m.cols, target
        )));
    }
    let mut data = vec![0.0; target.numel()];
    for r in 0..right {
        for i in 0..extent {
            let dst = &mut data[left * (i + extent * r)..][..left];
            for (l, d) in dst.iter_mut().enumerate() {
                *d = m.data[i + extent * (l + left * r)];
            }
        }
    }
    Ok(DenseTensor {
        shape: target.clone(),
        data,
    })
}

/// `t ×_mode u`: contracts mode `mode` of `t` against the columns of `u`.
pub fn mode_product(t: &DenseTensor, u: &Matrix, mode: usize) -> Result<DenseTensor> {
    t.shape.check_mode(mode)?;
    let (left, extent, right) = t.shape.split(mode);
    if u.cols != extent {
        return Err(Error::shape(format!(
            "mode-{mode} product of {:?} with a {}×{} matrix",
            t.shape, u.rows, u.cols
        )));
    }
    let out_extent = u.rows;
    let mut dims = t.dims().to_vec();
    dims[mode] = out_extent;
    let shape = Shape::new(dims)?;
    let mut data = vec![0.0; shape.numel()];
    if left == 1 {
        // Mode 0: each column of the unfolding is contiguous.
        for (dst, src) in data.chunks_exact_mut(out_extent).zip(t.data.chunks_exact(extent)) {
            let mut cols = u.data.chunks_exact(out_extent);
            let mut xs = src.chunks_exact(4);
            for x in xs.by_ref() {
                let (c0, c1, c2, c3) = (cols.next().unwrap(), cols.next().unwrap(), cols.next().unwrap(), cols.next().unwrap());
                for j in 0..out_extent {
                    dst[j] += c0[j] * x[0] + c1[j] * x[1] + c2[j] * x[2] + c3[j] * x[3];
                }
            }
            for (&x, c) in xs.remainder().iter().zip(cols) {
                for (d, &w) in dst.iter_mut().zip(c) {
                    *d += w * x;
                }
            }
        }
        return Ok(DenseTensor { shape, data });
    }
    let quads = extent / 4 * 4;
    for r in 0..right {
        let block = &t.data[left * extent * r..][..left * extent];
        for j in 0..out_extent {
            let dst = &mut data[left * (j + out_extent * r)..][..left];
            let w = |i: usize| u.data[j + out_extent * i];
            for i in (0..quads).step_by(4) {
                let (w0, w1, w2, w3) = (w(i), w(i + 1), w(i + 2), w(i + 3));
                let s = &block[left * i..][..4 * left];
                let (s0, rest) = s.split_at(left);
                let (s1, rest) = rest.split_at(left);
                let (s2, s3) = rest.split_at(left);
                for l in 0..left {
                    dst[l] += w0 * s0[l] + w1 * s1[l] + w2 * s2[l] + w3 * s3[l];
                }
            }
            for i in quads..extent {
                let wi = w(i);
                for (d, &x) in dst.iter_mut().zip(&block[left * i..][..left]) {
                    *d += wi * x;
                }
            }
        }
    }
    Ok(DenseTensor { shape, data })
}

/// Applies one matrix per listed mode, in ascending mode order.
pub fn multi_mode_product(t: &DenseTensor, factors: &[(&Matrix, usize)]) -> Result<DenseTensor> {
    let mut sorted: Vec<(&Matrix, usize)> = factors.to_vec();
    sorted.sort_by_key(|&(_, mode)| mode);
    if let Some(w) = sorted.windows(2).find(|w| w[0].1 == w[1].1) {
        return Err(Error::shape(format!("mode {} given more than one factor", w[0].1)));
    }
    let mut out = t.clone();
    for (m, mode) in sorted {
        out = mode_product(&out, m, mode)?;
    }
    Ok(out)
}

/// `A ⊗ B`, entry `(i·K + k, j·L + l) = a_ij · b_kl` for a `K×L` right factor.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .ok_or_else(|| Error::Capacity("Kronecker row count overflows".into()))?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .ok_or_else(|| Error::Capacity("Kronecker column count overflows".into()))?;
    rows.checked_mul(cols)
        .ok_or_else(|| Error::Capacity(format!("a {rows}×{cols} Kronecker product overflows")))?;
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..a.cols {
        for i in 0..a.rows {
            let aij = a.get(i, j);
            for l in 0..b.cols {
                for k in 0..b.rows {
                    out.data[(i * b.rows + k) + rows * (j * b.cols + l)] = aij * b.get(k, l);
                }
            }
        }
    }
    Ok(out)
}

/// `a_(mode) · b_(mode)ᵀ` without materializing either unfolding.
///
/// Both tensors must agree on every mode except `mode`.
pub fn unfolded_gram(a: &DenseTensor, b: &DenseTensor, mode: usize) -> Result<Matrix> {
    a.shape.check_mode(mode)?;
    b.shape.check_mode(mode)?;
    let mismatch = a.order() != b.order()
        || a
            .dims()
            .iter()
            .zip(b.dims())
            .enumerate()
            .any(|(k, (x, y))| k != mode && x != y);
    if mismatch {
        return Err(Error::shape(format!(
            "{:?} and {:?} differ outside mode {mode}",
            a.shape, b.shape
        )));
    }
    let (left, ea, right) = a.shape.split(mode);
    let eb = b.dims()[mode];
    let mut out = Matrix::zeros(ea, eb);
    if left == 1 {
        // Mode 0: a sum of outer products of contiguous columns.
        let mut a4 = a.data.chunks_exact(4 * ea);
        let mut b4 = b.data.chunks_exact(4 * eb);
        for (ac, bc) in a4.by_ref().zip(b4.by_ref()) {
            for (i, dst) in out.data.chunks_exact_mut(ea).enumerate() {
                let (y0, y1, y2, y3) = (bc[i], bc[eb + i], bc[2 * eb + i], bc[3 * eb + i]);
                for (j, d) in dst.iter_mut().enumerate() {
                    *d += ac[j] * y0 + ac[ea + j] * y1 + ac[2 * ea + j] * y2 + ac[3 * ea + j] * y3;
                }
            }
        }
        for (acol, bcol) in a4.remainder().chunks_exact(ea).zip(b4.remainder().chunks_exact(eb)) {
            for (&y, dst) in bcol.iter().zip(out.data.chunks_exact_mut(ea)) {
                for (d, &x) in dst.iter_mut().zip(acol) {
                    *d += x * y;
                }
            }
        }
        return Ok(out);
    }
    for r in 0..right {
        for i in 0..eb {
            let bs = &b.data[left * (i + eb * r)..][..left];
            for j in 0..ea {
                let as_ = &a.data[left * (j + ea * r)..][..left];
                let dot: f64 = as_.iter().zip(bs).map(|(x, y)| x * y).sum();
                out.data[j + ea * i] += dot;
            }
        }
    }
    Ok(out)
}
