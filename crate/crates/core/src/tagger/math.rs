//! Dense row-major kernels used by the encoder.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of a model: `f32` for training and serving,
/// `f64` for gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `out (m x n) += a (m x k) * b (k x n)`
pub fn matmul_acc<F: Real>(a: &[F], b: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `x (m x k) * w (k x n) + bias (n)`
pub fn linear<F: Real>(x: &[F], w: &[F], bias: &[F], m: usize, k: usize, n: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(m * n);
    for _ in 0..m {
        out.extend_from_slice(bias);
    }
    matmul_acc(x, w, m, k, n, &mut out);
    out
}

/// `out (k x n) += a^T * b` for `a (m x k)`, `b (m x n)`.
pub fn matmul_tn_acc<F: Real>(a: &[F], b: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out (m x k) += a * b^T` for `a (m x n)`, `b (k x n)`.
pub fn matmul_nt_acc<F: Real>(a: &[F], b: &[F], m: usize, n: usize, k: usize, out: &mut [F]) {
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = F::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            out[i * k + p] += s;
        }
    }
}

/// Column sums of `x (m x n)` added into `out (n)`.
pub fn col_sum_acc<F: Real>(x: &[F], n: usize, out: &mut [F]) {
    for row in x.chunks_exact(n) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

pub const LN_EPS: f64 = 1e-12;

pub struct LnCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

pub fn layer_norm<F: Real>(x: &[F], gamma: &[F], beta: &[F], n: usize) -> (Vec<F>, LnCache<F>) {
    let rows = x.len() / n;
    let eps = F::lit(LN_EPS);
    let inv_n = F::lit(1.0 / n as f64);
    let mut y = vec![F::zero(); x.len()];
    let mut xhat = vec![F::zero(); x.len()];
    let mut rstd = vec![F::zero(); rows];
    for r in 0..rows {
        let row = &x[r * n..(r + 1) * n];
        let mean = row.iter().copied().sum::<F>() * inv_n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_n;
        let rs = F::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..n {
            let xh = (row[j] - mean) * rs;
            xhat[r * n + j] = xh;
            y[r * n + j] = gamma[j] * xh + beta[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Returns the input gradient; parameter gradients are accumulated.
pub fn layer_norm_backward<F: Real>(
    dy: &[F],
    cache: &LnCache<F>,
    gamma: &[F],
    n: usize,
    dgamma: &mut [F],
    dbeta: &mut [F],
) -> Vec<F> {
    let rows = dy.len() / n;
    let inv_n = F::lit(1.0 / n as f64);
    let mut dx = vec![F::zero(); dy.len()];
    let mut dxhat = vec![F::zero(); n];
    for r in 0..rows {
        let dyr = &dy[r * n..(r + 1) * n];
        let xh = &cache.xhat[r * n..(r + 1) * n];
        let mut mean_d = F::zero();
        let mut mean_dx = F::zero();
        for j in 0..n {
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
            dxhat[j] = dyr[j] * gamma[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xh[j];
        }
        mean_d *= inv_n;
        mean_dx *= inv_n;
        let rs = cache.rstd[r];
        for j in 0..n {
            dx[r * n + j] = rs * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu<F: Real>(x: F) -> F {
    let c = F::lit(GELU_C);
    let a = F::lit(GELU_A);
    let half = F::lit(0.5);
    half * x * (F::one() + (c * (x + a * x * x * x)).tanh())
}

pub fn gelu_grad<F: Real>(x: F) -> F {
    let c = F::lit(GELU_C);
    let a = F::lit(GELU_A);
    let half = F::lit(0.5);
    let three = F::lit(3.0);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * a * x * x)
}

/// In-place softmax over `xs`.
pub fn softmax_in_place<F: Real>(xs: &mut [F]) {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v /= sum;
    }
}
