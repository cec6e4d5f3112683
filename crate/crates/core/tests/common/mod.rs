//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ftnet::{DenseTensor, Matrix, Shape};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(Shape::new(dims.to_vec()).unwrap(), |_| rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// All multi-indices of `dims`, first index fastest.
pub fn multi_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    (0..total)
        .map(|mut lin| {
            dims.iter()
                .map(|&d| {
                    let i = lin % d;
                    lin /= d;
                    i
                })
                .collect()
        })
        .collect()
}

/// `y[.., j, ..] = Σ_i x[.., i, ..] · u[j, i]` by brute-force enumeration.
pub fn naive_mode_product(x: &DenseTensor, u: &Matrix, mode: usize) -> DenseTensor {
    let mut dims = x.dims().to_vec();
    dims[mode] = u.rows();
    let mut y = DenseTensor::zeros(Shape::new(dims.clone()).unwrap());
    for idx in multi_indices(&dims) {
        let mut src = idx.clone();
        let mut acc = 0.0;
        for i in 0..x.dims()[mode] {
            src[mode] = i;
            acc += x.get(&src) * u.get(idx[mode], i);
        }
        y.set(&idx, acc);
    }
    y
}

/// Mode-`mode` unfolding by index enumeration: column of multi-index `i`
/// is `Σ_{k≠mode} i_k Π_{m<k, m≠mode} I_m`.
pub fn naive_unfold(x: &DenseTensor, mode: usize) -> Matrix {
    let dims = x.dims();
    let cols = x.len() / dims[mode];
    let mut m = Matrix::zeros(dims[mode], cols);
    for idx in multi_indices(dims) {
        let mut col = 0;
        let mut stride = 1;
        for (k, (&i, &d)) in idx.iter().zip(dims).enumerate() {
            if k != mode {
                col += i * stride;
                stride *= d;
            }
        }
        m.set(idx[mode], col, x.get(&idx));
    }
    m
}

pub fn naive_kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows() * b.rows(), a.cols() * b.cols(), |r, c| {
        a.get(r / b.rows(), c / b.cols()) * b.get(r % b.rows(), c % b.cols())
    })
}

/// `A_n · X_(n) · (A_{N-1} ⊗ … ⊗ A_{n+1} ⊗ A_{n-1} ⊗ … ⊗ A_0)ᵀ`.
pub fn kronecker_path(x: &DenseTensor, factors: &[Matrix], n: usize) -> Matrix {
    let mut chain: Option<Matrix> = None;
    for k in (0..factors.len()).rev().filter(|&k| k != n) {
        chain = Some(match chain {
            None => factors[k].clone(),
            Some(c) => naive_kronecker(&c, &factors[k]),
        });
    }
    let left = factors[n].matmul(&naive_unfold(x, n)).unwrap();
    match chain {
        Some(c) => left.matmul(&c.transpose()).unwrap(),
        None => left,
    }
}

pub fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn relative_frobenius(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    frobenius(&diff) / frobenius(b).max(1e-300)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Minimal binary PGM reader written from the Netpbm description:
/// `P5`, whitespace, width, height, maxval, one whitespace byte, pixels.
pub fn parse_pgm(bytes: &[u8]) -> (usize, usize, u32, Vec<u8>) {
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes[pos] == b'#' {
            while bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string());
    }
    pos += 1;
    assert_eq!(fields[0], "P5");
    let w: usize = fields[1].parse().unwrap();
    let h: usize = fields[2].parse().unwrap();
    let maxval: u32 = fields[3].parse().unwrap();
    let pixels = bytes[pos..].to_vec();
    assert_eq!(pixels.len(), w * h, "pixel payload size");
    (w, h, maxval, pixels)
}
