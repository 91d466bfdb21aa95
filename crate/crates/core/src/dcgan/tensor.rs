use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type of the networks.
///
/// Training runs in `f32`; `f64` instances exist for gradient checking.
pub trait Scalar: Float + Debug + Default + Sum + Send + Sync + 'static {
    /// Row-major GEMM with explicit strides: `c = a * b + beta * c`.
    ///
    /// # Safety
    /// Every index reachable through the dimensions and strides must lie
    /// inside the pointed-to buffers, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite constant")
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// `c (m×n) = op(a) (m×k) * op(b) (k×n) + beta * c`, all row-major and
/// contiguous. A transposed operand is stored as its transpose (`k×m`, `n×k`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_trans: bool,
    b: &[T],
    b_trans: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the length checks above cover every index the strides reach,
    // and `c` is a unique borrow so it cannot alias `a` or `b`.
    unsafe {
        T::gemm_raw(m, k, n, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Dense NCHW tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    /// Panics if `data.len()` does not match the shape.
    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor data does not match shape {shape:?}");
        Tensor { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn map(mut self, f: impl Fn(T) -> T) -> Self {
        self.data.iter_mut().for_each(|x| *x = f(*x));
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Sliding-window geometry of a convolution over a `c×h×w` image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Geom {
    pub fn new(c: usize, h: usize, w: usize, k: usize, s: usize, p: usize) -> Self {
        let out = |x: usize| (x + 2 * p - k) / s + 1;
        Geom { c, h, w, k, s, p, oh: out(h), ow: out(w) }
    }

    pub fn col_rows(&self) -> usize {
        self.c * self.k * self.k
    }

    pub fn col_cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Output positions along an axis of length `len` whose kernel offset
    /// `kk` lands inside the input, as a half-open range.
    fn valid(&self, kk: usize, len: usize, out: usize) -> (usize, usize) {
        let lo = if kk >= self.p { 0 } else { (self.p - kk).div_ceil(self.s) };
        let hi = if len + self.p > kk { ((len - 1 + self.p - kk) / self.s + 1).min(out) } else { 0 };
        (lo.min(hi), hi)
    }
}

/// Unfolds `img` (`c×h×w`) into the `c·k·k` rows of `col`, writing
/// `oh·ow` values per row starting at column `offset` of rows `ld` apart.
pub(crate) fn im2col<T: Scalar>(img: &[T], g: &Geom, col: &mut [T], ld: usize, offset: usize) {
    let k = g.k;
    for c in 0..g.c {
        let plane = &img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..k {
            let (y_lo, y_hi) = g.valid(ki, g.h, g.oh);
            for kj in 0..k {
                let (x_lo, x_hi) = g.valid(kj, g.w, g.ow);
                let row = &mut col[((c * k + ki) * k + kj) * ld + offset..][..g.oh * g.ow];
                for oy in 0..g.oh {
                    let dst = &mut row[oy * g.ow..(oy + 1) * g.ow];
                    if oy < y_lo || oy >= y_hi {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[(oy * g.s + ki - g.p) * g.w..][..g.w];
                    dst[..x_lo].fill(T::zero());
                    dst[x_hi..].fill(T::zero());
                    for (ox, d) in dst.iter_mut().enumerate().take(x_hi).skip(x_lo) {
                        *d = src[ox * g.s + kj - g.p];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `col` back onto `img`, accumulating.
pub(crate) fn col2im<T: Scalar>(col: &[T], g: &Geom, img: &mut [T], ld: usize, offset: usize) {
    let k = g.k;
    for c in 0..g.c {
        let plane = &mut img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..k {
            let (y_lo, y_hi) = g.valid(ki, g.h, g.oh);
            for kj in 0..k {
                let (x_lo, x_hi) = g.valid(kj, g.w, g.ow);
                let row = &col[((c * k + ki) * k + kj) * ld + offset..][..g.oh * g.ow];
                for oy in y_lo..y_hi {
                    let src = &row[oy * g.ow..(oy + 1) * g.ow];
                    let dst = &mut plane[(oy * g.s + ki - g.p) * g.w..][..g.w];
                    for (ox, &v) in src.iter().enumerate().take(x_hi).skip(x_lo) {
                        let d = &mut dst[ox * g.s + kj - g.p];
                        *d = *d + v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a = [[1,2,3],[4,5,6]], b = [[1,0],[0,1],[1,1]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        gemm(2, 3, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);

        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [1.0f64; 4];
        gemm(2, 3, 2, &at, true, &bt, true, 1.0, &mut c2);
        assert_eq!(c2, [5.0, 6.0, 11.0, 12.0]);
    }

    #[test]
    fn geometry() {
        assert_eq!((Geom::new(3, 64, 64, 4, 2, 1).oh, Geom::new(3, 4, 4, 4, 1, 0).oh), (32, 1));
        assert_eq!(Geom::new(1, 8, 8, 4, 2, 1).col_cols(), 16);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let g = Geom::new(2, 5, 6, 4, 2, 1);
        let x: Vec<f64> = (0..2 * 5 * 6).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..g.col_rows() * g.col_cols()).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut col = vec![0.0; y.len()];
        im2col(&x, &g, &mut col, g.col_cols(), 0);
        let mut back = vec![0.0; x.len()];
        col2im(&y, &g, &mut back, g.col_cols(), 0);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn im2col_matches_direct_indexing() {
        for (h, k, s, p) in [(5, 4, 2, 1), (4, 4, 1, 0), (8, 3, 1, 1), (7, 4, 2, 2)] {
            let g = Geom::new(2, h, h + 1, k, s, p);
            let x: Vec<f64> = (0..2 * h * (h + 1)).map(|i| i as f64 + 1.0).collect();
            let ld = g.col_cols() + 3;
            let mut col = vec![-1.0; g.col_rows() * ld];
            im2col(&x, &g, &mut col, ld, 2);
            for c in 0..2 {
                for ki in 0..k {
                    for kj in 0..k {
                        for oy in 0..g.oh {
                            for ox in 0..g.ow {
                                let iy = (oy * s + ki) as isize - p as isize;
                                let ix = (ox * s + kj) as isize - p as isize;
                                let inside = (0..h as isize).contains(&iy) && (0..(h + 1) as isize).contains(&ix);
                                let want = if inside { x[(c * h + iy as usize) * (h + 1) + ix as usize] } else { 0.0 };
                                let r = (c * k + ki) * k + kj;
                                assert_eq!(col[r * ld + 2 + oy * g.ow + ox], want);
                            }
                        }
                    }
                }
            }
        }
    }
}
