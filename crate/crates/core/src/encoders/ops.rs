//! Layer primitives with explicit backward passes. Activations are stored
//! row-major as `positions × channels`.

use super::real::{gemm, Real};

/// Output widths at or below this use row-wise dot products instead of GEMM.
const NARROW: usize = 8;

/// `y (rows×out) = x (rows×in) · Wᵀ + b` with `W` stored `out×in`.
pub(crate) fn linear<T: Real>(x: &[T], rows: usize, w: &[T], b: &[T], in_dim: usize, out_dim: usize) -> Vec<T> {
    let mut y = vec![T::zero(); rows * out_dim];
    if out_dim <= NARROW {
        for (yr, xr) in y.chunks_exact_mut(out_dim).zip(x.chunks_exact(in_dim)) {
            matvec_add(w, xr, yr);
        }
    } else {
        gemm(false, true, rows, out_dim, in_dim, x, w, T::zero(), &mut y);
    }
    for row in y.chunks_exact_mut(out_dim) {
        for (v, &bias) in row.iter_mut().zip(b) {
            *v += bias;
        }
    }
    y
}

/// Accumulates `dW += dyᵀ·x` and `db += Σ dy`; returns `dx = dy·W` when asked.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<T: Real>(
    x: &[T],
    dy: &[T],
    rows: usize,
    w: &[T],
    in_dim: usize,
    out_dim: usize,
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    gemm(true, false, out_dim, in_dim, rows, dy, x, T::one(), dw);
    for row in dy.chunks_exact(out_dim) {
        for (g, &d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
    need_dx.then(|| {
        let mut dx = vec![T::zero(); rows * in_dim];
        gemm(false, false, rows, in_dim, out_dim, dy, w, T::zero(), &mut dx);
        dx
    })
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

/// `y += W·x` with `W` stored `rows×x.len()`.
pub(crate) fn matvec_add<T: Real>(w: &[T], x: &[T], y: &mut [T]) {
    let cols = x.len();
    for (yi, row) in y.iter_mut().zip(w.chunks_exact(cols)) {
        *yi += dot(row, x);
    }
}

/// `y += Wᵀ·x` with `W` stored `x.len()×y.len()`.
pub(crate) fn matvec_t_add<T: Real>(w: &[T], x: &[T], y: &mut [T]) {
    let cols = y.len();
    for (&xi, row) in x.iter().zip(w.chunks_exact(cols)) {
        if xi != T::zero() {
            for (yj, &wj) in y.iter_mut().zip(row) {
                *yj += xi * wj;
            }
        }
    }
}

pub(crate) fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries whose ReLU output was not positive.
pub(crate) fn relu_backward_in_place<T: Real>(dy: &mut [T], out: &[T]) {
    for (d, &o) in dy.iter_mut().zip(out) {
        if o <= T::zero() {
            *d = T::zero();
        }
    }
}

/// Norm floor that keeps a zero vector finite.
fn norm_floor<T: Real>() -> T {
    T::of(1e-12)
}

/// Returns `x / max(‖x‖, floor)` and the divisor.
pub(crate) fn l2_normalize<T: Real>(x: &[T]) -> (Vec<T>, T) {
    let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt().max(norm_floor());
    (x.iter().map(|&v| v / norm).collect(), norm)
}

pub(crate) fn l2_normalize_backward<T: Real>(y: &[T], norm: T, dy: &[T]) -> Vec<T> {
    if norm <= norm_floor() {
        return dy.iter().map(|&d| d / norm).collect();
    }
    let dot: T = y.iter().zip(dy).map(|(&a, &b)| a * b).sum();
    y.iter().zip(dy).map(|(&yi, &di)| (di - yi * dot) / norm).collect()
}

/// Window-3, padding-1 columns: `cols[t][c·3 + j] = x[t + j − 1][c]`.
pub(crate) fn im2col_1d<T: Real>(x: &[T], len: usize, channels: usize) -> Vec<T> {
    let width = channels * 3;
    let mut cols = vec![T::zero(); len * width];
    for t in 0..len {
        let row = &mut cols[t * width..(t + 1) * width];
        for j in 0..3 {
            let Some(src) = (t + j).checked_sub(1).filter(|&s| s < len) else {
                continue;
            };
            for c in 0..channels {
                row[c * 3 + j] = x[src * channels + c];
            }
        }
    }
    cols
}

pub(crate) fn col2im_1d<T: Real>(dcols: &[T], len: usize, channels: usize) -> Vec<T> {
    let width = channels * 3;
    let mut dx = vec![T::zero(); len * channels];
    for t in 0..len {
        let row = &dcols[t * width..(t + 1) * width];
        for j in 0..3 {
            let Some(src) = (t + j).checked_sub(1).filter(|&s| s < len) else {
                continue;
            };
            for c in 0..channels {
                dx[src * channels + c] += row[c * 3 + j];
            }
        }
    }
    dx
}

/// Cubic 3-D convolution geometry with a `k³` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Conv3dGeom {
    pub n_in: usize,
    pub c_in: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv3dGeom {
    pub fn n_out(&self) -> usize {
        (self.n_in + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn col_width(&self) -> usize {
        self.c_in * self.kernel.pow(3)
    }

    /// Calls `f(out, tap, src)` for every output cell and every kernel tap
    /// that lands inside the input.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (n, no, k) = (self.n_in, self.n_out(), self.kernel);
        let src = |o: usize, t: usize| (o * self.stride + t).checked_sub(self.pad).filter(|&i| i < n);
        for oz in 0..no {
            for oy in 0..no {
                for ox in 0..no {
                    let out = (oz * no + oy) * no + ox;
                    for kz in 0..k {
                        let Some(iz) = src(oz, kz) else { continue };
                        for ky in 0..k {
                            let Some(iy) = src(oy, ky) else { continue };
                            for kx in 0..k {
                                if let Some(ix) = src(ox, kx) {
                                    f(out, (kz * k + ky) * k + kx, (iz * n + iy) * n + ix);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `cols[out][c·k³ + tap]`.
    pub fn im2col<T: Real>(&self, x: &[T]) -> Vec<T> {
        let (width, taps, c_in) = (self.col_width(), self.kernel.pow(3), self.c_in);
        let mut cols = vec![T::zero(); self.n_out().pow(3) * width];
        if c_in == 1 {
            self.for_each_tap(|out, tap, src| cols[out * width + tap] = x[src]);
        } else {
            self.for_each_tap(|out, tap, src| {
                let row = &mut cols[out * width..(out + 1) * width];
                for (c, &v) in x[src * c_in..(src + 1) * c_in].iter().enumerate() {
                    row[c * taps + tap] = v;
                }
            });
        }
        cols
    }

    pub fn col2im<T: Real>(&self, dcols: &[T]) -> Vec<T> {
        let (width, taps, c_in) = (self.col_width(), self.kernel.pow(3), self.c_in);
        let mut dx = vec![T::zero(); self.n_in.pow(3) * c_in];
        self.for_each_tap(|out, tap, src| {
            let row = &dcols[out * width..(out + 1) * width];
            for (c, d) in dx[src * c_in..(src + 1) * c_in].iter_mut().enumerate() {
                *d += row[c * taps + tap];
            }
        });
        dx
    }
}

/// Stride-1 max pooling over `k³` windows; returns outputs and the winning
/// input index per output entry (first maximum on ties).
pub(crate) fn max_pool_3d<T: Real>(x: &[T], n: usize, channels: usize, k: usize) -> (Vec<T>, Vec<usize>) {
    let m = n + 1 - k;
    let mut out = vec![T::zero(); m.pow(3) * channels];
    let mut arg = vec![0; m.pow(3) * channels];
    for oz in 0..m {
        for oy in 0..m {
            for ox in 0..m {
                let o = (oz * m + oy) * m + ox;
                for c in 0..channels {
                    let mut best: Option<(T, usize)> = None;
                    for kz in 0..k {
                        for ky in 0..k {
                            for kx in 0..k {
                                let i = (((oz + kz) * n + oy + ky) * n + ox + kx) * channels + c;
                                if best.is_none_or(|(b, _)| x[i] > b) {
                                    best = Some((x[i], i));
                                }
                            }
                        }
                    }
                    let (v, i) = best.expect("window is nonempty");
                    out[o * channels + c] = v;
                    arg[o * channels + c] = i;
                }
            }
        }
    }
    (out, arg)
}

pub(crate) fn max_pool_3d_backward<T: Real>(dy: &[T], arg: &[usize], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&d, &i) in dy.iter().zip(arg) {
        dx[i] += d;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_output_sizes_follow_floor_formula() {
        let plan = [(16, 1, 1, 16), (16, 3, 1, 6), (6, 3, 1, 2), (2, 3, 2, 2)];
        for (n_in, stride, pad, expect) in plan {
            let g = Conv3dGeom { n_in, c_in: 1, kernel: 3, stride, pad };
            assert_eq!(g.n_out(), (n_in + 2 * pad - 3) / stride + 1);
            assert_eq!(g.n_out(), expect);
        }
    }

    #[test]
    fn col2im_is_the_adjoint_of_im2col() {
        let g = Conv3dGeom { n_in: 5, c_in: 2, kernel: 3, stride: 2, pad: 1 };
        let x: Vec<f64> = (0..250).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..g.n_out().pow(3) * g.col_width()).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = g.im2col(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&g.col2im(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);

        let x1: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let y1: Vec<f64> = (0..36).map(|i| (i as f64).sqrt()).collect();
        let lhs: f64 = im2col_1d(&x1, 4, 3).iter().zip(&y1).map(|(a, b)| a * b).sum();
        let rhs: f64 = x1.iter().zip(&col2im_1d(&y1, 4, 3)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn matvec_helpers_match_gemm() {
        let w: Vec<f64> = (0..35).map(|i| (i as f64 * 0.41).sin()).collect();
        let x: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let mut y = vec![1.0; 5];
        matvec_add(&w, &x, &mut y);
        let mut expect = vec![1.0; 5];
        crate::encoders::gemm(false, false, 5, 1, 7, &w, &x, 1.0, &mut expect);
        assert!(y.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
        let v: Vec<f64> = (0..5).map(|i| 0.5 * i as f64).collect();
        let mut yt = vec![0.0; 7];
        matvec_t_add(&w, &v, &mut yt);
        let mut expect = vec![0.0; 7];
        crate::encoders::gemm(true, false, 7, 1, 5, &w, &v, 0.0, &mut expect);
        assert!(yt.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_vector_normalizes_to_zero() {
        let (y, _) = l2_normalize(&[0.0f32; 4]);
        assert!(y.iter().all(|&v| v == 0.0));
        let (y, n) = l2_normalize(&[3.0f64, 4.0]);
        assert_eq!((y, n), (vec![0.6, 0.8], 5.0));
    }

    #[test]
    fn pool_picks_first_maximum() {
        let x = [1.0f64, 5.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (y, arg) = max_pool_3d(&x, 2, 1, 2);
        assert_eq!((y, arg), (vec![5.0], vec![1]));
    }
}
