//! Small dense helpers and second-order jets of scalar fields.

use alloc::vec::Vec;

pub type Point = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const PI: f64 = core::f64::consts::PI;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `x^k` by repeated multiplication.
#[inline]
pub fn powi(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, _| acc * x)
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: [f64; 2]) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `n^T m n`.
#[inline]
pub fn quad_form(m: &Mat2, n: [f64; 2]) -> f64 {
    n[0] * (m[0][0] * n[0] + m[0][1] * n[1]) + n[1] * (m[1][0] * n[0] + m[1][1] * n[1])
}

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: Mat2,
}

impl ScalarJet {
    pub const ZERO: ScalarJet = ScalarJet { value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] };

    pub fn constant(value: f64) -> Self {
        ScalarJet { value, ..Self::ZERO }
    }

    /// Jet of the affine function `value + grad . (x - x0)` at `x0`.
    pub fn affine(value: f64, grad: [f64; 2]) -> Self {
        ScalarJet { value, grad, hess: [[0.0; 2]; 2] }
    }

    #[inline]
    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }

    /// Leibniz rule up to second order.
    #[inline]
    pub fn mul(&self, other: &ScalarJet) -> ScalarJet {
        let (a, b) = (self, other);
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = a.value * b.hess[i][j]
                    + a.grad[i] * b.grad[j]
                    + b.grad[i] * a.grad[j]
                    + b.value * a.hess[i][j];
            }
        }
        ScalarJet {
            value: a.value * b.value,
            grad: [a.value * b.grad[0] + b.value * a.grad[0], a.value * b.grad[1] + b.value * a.grad[1]],
            hess,
        }
    }

    #[inline]
    pub fn scale(&self, s: f64) -> ScalarJet {
        ScalarJet {
            value: s * self.value,
            grad: [s * self.grad[0], s * self.grad[1]],
            hess: [
                [s * self.hess[0][0], s * self.hess[0][1]],
                [s * self.hess[1][0], s * self.hess[1][1]],
            ],
        }
    }

    #[inline]
    pub fn add_scaled(&mut self, other: &ScalarJet, s: f64) {
        self.value += s * other.value;
        for i in 0..2 {
            self.grad[i] += s * other.grad[i];
            for j in 0..2 {
                self.hess[i][j] += s * other.hess[i][j];
            }
        }
    }
}

/// A 2-vector field jet, one scalar jet per component.
pub type VectorJet = [ScalarJet; 2];

pub const ZERO_VECTOR_JET: VectorJet = [ScalarJet::ZERO; 2];

#[inline]
pub fn divergence(u: &VectorJet) -> f64 {
    u[0].grad[0] + u[1].grad[1]
}

/// Symmetric gradient `D(u)`.
#[inline]
pub fn strain(u: &VectorJet) -> Mat2 {
    let off = 0.5 * (u[0].grad[1] + u[1].grad[0]);
    [[u[0].grad[0], off], [off, u[1].grad[1]]]
}

#[inline]
pub fn ddot(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
/// Returns `None` if a pivot vanishes.
pub fn dense_solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for k in 0..N {
        let mut piv = k;
        for i in k + 1..N {
            if a[i][k].abs() > a[piv][k].abs() {
                piv = i;
            }
        }
        if a[piv][k] == 0.0 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..N {
            let f = a[i][k] / a[k][k];
            for j in k..N {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; N];
    for k in (0..N).rev() {
        let mut s = b[k];
        for j in k + 1..N {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    Some(x)
}

/// Pairwise (tree) summation; the result depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Column-wise pairwise sum of per-cell contribution rows.
pub fn pairwise_sum_columns<const N: usize>(rows: &[[f64; N]]) -> [f64; N] {
    let mut out = [0.0; N];
    let mut column = Vec::with_capacity(rows.len());
    for (k, slot) in out.iter_mut().enumerate() {
        column.clear();
        column.extend(rows.iter().map(|r| r[k]));
        *slot = pairwise_sum(&column);
    }
    out
}
