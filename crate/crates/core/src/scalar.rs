//! Real scalar abstraction shared by the dense kernels.
//!
//! Everything above the dense layer is written against [`Scalar`]; the two
//! implementations forward the heavy lifting to `matrixmultiply` (GEMM) and
//! the system LAPACK (eigen, singular value and QR factorizations).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::os::raw::{c_char, c_int};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real floating-point scalar usable by the tensor kernels.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Short LAPACK-style type prefix, used in diagnostics.
    const PREFIX: &'static str;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// `c = alpha * a * b + beta * c` with arbitrary strides (in elements).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    /// Symmetric eigensolver on a column-major `n x n` buffer.
    ///
    /// With `vectors` the buffer is overwritten by the orthonormal eigenvectors
    /// (column `k` belongs to `w[k]`). Returns the LAPACK `info` code.
    fn syev(vectors: bool, n: usize, a: &mut [Self], w: &mut [Self]) -> i32;

    /// Thin SVD of a column-major `m x n` buffer (destroyed).
    /// `u` is `m x k`, `vt` is `k x n`, both column-major, `k = min(m, n)`.
    fn gesdd(m: usize, n: usize, a: &mut [Self], s: &mut [Self], u: &mut [Self], vt: &mut [Self])
        -> i32;

    /// Householder QR of a column-major `m x n` buffer. On success `a` holds the
    /// thin `m x k` orthonormal factor and `r` the `k x n` upper-triangular one
    /// (both column-major).
    fn geqrf(m: usize, n: usize, a: &mut Vec<Self>, r: &mut [Self]) -> i32;
}

const JOB_N: c_char = b'N' as c_char;
const JOB_V: c_char = b'V' as c_char;
const JOB_S: c_char = b'S' as c_char;
const UPLO_L: c_char = b'L' as c_char;

macro_rules! impl_scalar {
    ($t:ty, $prefix:expr, $gemm:path, $syevd:path, $syev2:path, $gesdd:path, $geqrf:path, $orgqr:path) => {
        impl Scalar for $t {
            const PREFIX: &'static str = $prefix;

            #[inline]
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    // matrixmultiply handles k = 0 but skips the beta scaling
                    // contract we rely on when beta == 0 and c holds garbage.
                    for i in 0..m {
                        for j in 0..n {
                            let idx = (i as isize * rsc + j as isize * csc) as usize;
                            c[idx] = if beta == 0.0 { 0.0 } else { beta * c[idx] };
                        }
                    }
                    return;
                }
                debug_assert!(extent_ok(a.len(), m, k, rsa, csa));
                debug_assert!(extent_ok(b.len(), k, n, rsb, csb));
                debug_assert!(extent_ok(c.len(), m, n, rsc, csc));
                // SAFETY: extents are checked against the slice lengths above
                // (debug) and by every caller constructing the strides.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }

            fn syev(vectors: bool, n: usize, a: &mut [Self], w: &mut [Self]) -> i32 {
                assert!(a.len() >= n * n && w.len() >= n);
                if n == 0 {
                    return 0;
                }
                let ni = n as c_int;
                let mut info: c_int = 0;
                let mut query: Self = 0.0;
                let lquery: c_int = -1;
                if vectors {
                    let mut iquery: c_int = 0;
                    // SAFETY: workspace query, buffers sized for n x n.
                    unsafe {
                        $syevd(
                            &JOB_V, &UPLO_L, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(),
                            &mut query, &lquery, &mut iquery, &lquery, &mut info,
                        );
                    }
                    if info != 0 {
                        return info;
                    }
                    let lwork = query.max(1.0) as c_int;
                    let liwork = iquery.max(1);
                    let mut work = vec![0.0 as Self; lwork as usize];
                    let mut iwork = vec![0 as c_int; liwork as usize];
                    // SAFETY: workspace sized from the query above.
                    unsafe {
                        $syevd(
                            &JOB_V, &UPLO_L, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(),
                            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
                        );
                    }
                } else {
                    // SAFETY: workspace query.
                    unsafe {
                        $syev2(
                            &JOB_N, &UPLO_L, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(),
                            &mut query, &lquery, &mut info,
                        );
                    }
                    if info != 0 {
                        return info;
                    }
                    let lwork = query.max(1.0) as c_int;
                    let mut work = vec![0.0 as Self; lwork as usize];
                    // SAFETY: workspace sized from the query above.
                    unsafe {
                        $syev2(
                            &JOB_N, &UPLO_L, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(),
                            work.as_mut_ptr(), &lwork, &mut info,
                        );
                    }
                }
                info
            }

            fn gesdd(
                m: usize,
                n: usize,
                a: &mut [Self],
                s: &mut [Self],
                u: &mut [Self],
                vt: &mut [Self],
            ) -> i32 {
                let k = m.min(n);
                assert!(a.len() >= m * n && s.len() >= k && u.len() >= m * k && vt.len() >= k * n);
                if k == 0 {
                    return 0;
                }
                let (mi, ni, ki) = (m as c_int, n as c_int, k as c_int);
                let mut info: c_int = 0;
                let mut query: Self = 0.0;
                let lquery: c_int = -1;
                let mut iwork = vec![0 as c_int; 8 * k];
                // SAFETY: workspace query.
                unsafe {
                    $gesdd(
                        &JOB_S, &mi, &ni, a.as_mut_ptr(), &mi, s.as_mut_ptr(), u.as_mut_ptr(), &mi,
                        vt.as_mut_ptr(), &ki, &mut query, &lquery, iwork.as_mut_ptr(), &mut info,
                    );
                }
                if info != 0 {
                    return info;
                }
                let lwork = query.max(1.0) as c_int;
                let mut work = vec![0.0 as Self; lwork as usize];
                // SAFETY: workspace sized from the query above.
                unsafe {
                    $gesdd(
                        &JOB_S, &mi, &ni, a.as_mut_ptr(), &mi, s.as_mut_ptr(), u.as_mut_ptr(), &mi,
                        vt.as_mut_ptr(), &ki, work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(),
                        &mut info,
                    );
                }
                info
            }

            fn geqrf(m: usize, n: usize, a: &mut Vec<Self>, r: &mut [Self]) -> i32 {
                let k = m.min(n);
                assert!(a.len() >= m * n && r.len() >= k * n);
                if k == 0 {
                    a.truncate(0);
                    return 0;
                }
                let (mi, ni, ki) = (m as c_int, n as c_int, k as c_int);
                let mut info: c_int = 0;
                let mut tau = vec![0.0 as Self; k];
                let mut query: Self = 0.0;
                let lquery: c_int = -1;
                // SAFETY: workspace query.
                unsafe {
                    $geqrf(&mi, &ni, a.as_mut_ptr(), &mi, tau.as_mut_ptr(), &mut query, &lquery, &mut info);
                }
                if info != 0 {
                    return info;
                }
                let mut lwork = query.max(1.0) as c_int;
                let mut work = vec![0.0 as Self; lwork as usize];
                // SAFETY: workspace sized from the query above.
                unsafe {
                    $geqrf(&mi, &ni, a.as_mut_ptr(), &mi, tau.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info);
                }
                if info != 0 {
                    return info;
                }
                for j in 0..n {
                    for i in 0..k {
                        r[i + j * k] = if i <= j { a[i + j * m] } else { 0.0 };
                    }
                }
                a.truncate(m * k);
                // SAFETY: workspace query.
                unsafe {
                    $orgqr(&mi, &ki, &ki, a.as_mut_ptr(), &mi, tau.as_ptr(), &mut query, &lquery, &mut info);
                }
                if info != 0 {
                    return info;
                }
                let need = query.max(1.0) as c_int;
                if need > lwork {
                    lwork = need;
                    work.resize(lwork as usize, 0.0);
                }
                // SAFETY: workspace sized from the query above.
                unsafe {
                    $orgqr(&mi, &ki, &ki, a.as_mut_ptr(), &mi, tau.as_ptr(), work.as_mut_ptr(), &lwork, &mut info);
                }
                info
            }
        }
    };
}

fn extent_ok(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) -> bool {
    if rs < 0 || cs < 0 {
        return false;
    }
    let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
    (last as usize) < len
}

impl_scalar!(
    f64,
    "d",
    matrixmultiply::dgemm,
    lapack_sys::dsyevd_,
    lapack_sys::dsyev_2stage_,
    lapack_sys::dgesdd_,
    lapack_sys::dgeqrf_,
    lapack_sys::dorgqr_
);
impl_scalar!(
    f32,
    "s",
    matrixmultiply::sgemm,
    lapack_sys::ssyevd_,
    lapack_sys::ssyev_2stage_,
    lapack_sys::sgesdd_,
    lapack_sys::sgeqrf_,
    lapack_sys::sorgqr_
);

#[cfg(test)]
mod tests {
    use super::*;

    fn gemm_rowmajor<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
        let mut c = vec![T::zero(); m * n];
        T::gemm(m, k, n, T::one(), a, k as isize, 1, b, n as isize, 1, T::zero(), &mut c, n as isize, 1);
        c
    }

    #[test]
    fn gemm_small_both_precisions() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(gemm_rowmajor::<f64>(2, 3, 2, &a, &b), vec![4.0, 5.0, 10.0, 11.0]);
        let af: Vec<f32> = a.iter().map(|&x| x as f32).collect();
        let bf: Vec<f32> = b.iter().map(|&x| x as f32).collect();
        assert_eq!(gemm_rowmajor::<f32>(2, 3, 2, &af, &bf), vec![4.0, 5.0, 10.0, 11.0]);
    }

    #[test]
    fn gemm_zero_inner_dimension_clears_output() {
        let mut c = vec![f64::NAN; 4];
        f64::gemm(2, 0, 2, 1.0, &[], 0, 1, &[], 2, 1, 0.0, &mut c, 2, 1);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn syev_values_only_and_vectors_agree() {
        let base = [2.0f64, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let mut a = base;
        let mut w = [0.0; 3];
        assert_eq!(f64::syev(false, 3, &mut a, &mut w), 0);
        let mut b = base;
        let mut w2 = [0.0; 3];
        assert_eq!(f64::syev(true, 3, &mut b, &mut w2), 0);
        let s2 = 2f64.sqrt();
        for (x, y) in w.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in w.iter().zip(w2.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
