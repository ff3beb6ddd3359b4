//! Dense kernels on three-leg node tensors (row-major, legs `[0, 1, 2]`).

use crate::tensor::Matrix;

pub(crate) type Shape = [usize; 3];

/// Contracts `m` (new x old) into leg `leg`: `out[.., i, ..] = Σ_j m[i, j] t[.., j, ..]`.
pub(crate) fn apply_leg(t: &[f64], s: Shape, leg: usize, m: &Matrix<f64>) -> (Vec<f64>, Shape) {
    debug_assert_eq!(m.cols(), s[leg]);
    let n = m.rows();
    let mut out_shape = s;
    out_shape[leg] = n;
    let mut out = vec![0.0; n * s[(leg + 1) % 3] * s[(leg + 2) % 3]];
    let mm = m.as_slice();
    let old = s[leg];
    match leg {
        0 => {
            let r = s[1] * s[2];
            f64_gemm(n, old, r, mm, old as isize, 1, t, r as isize, 1, &mut out, r as isize, 1);
        }
        1 => {
            let blk_in = s[1] * s[2];
            let blk_out = n * s[2];
            for a in 0..s[0] {
                f64_gemm(
                    n,
                    old,
                    s[2],
                    mm,
                    old as isize,
                    1,
                    &t[a * blk_in..(a + 1) * blk_in],
                    s[2] as isize,
                    1,
                    &mut out[a * blk_out..(a + 1) * blk_out],
                    s[2] as isize,
                    1,
                );
            }
        }
        _ => {
            let r = s[0] * s[1];
            // out (r x n) = t (r x old) * m^T
            f64_gemm(r, old, n, t, old as isize, 1, mm, 1, old as isize, &mut out, n as isize, 1);
        }
    }
    (out, out_shape)
}

/// `out[i, j] = Σ a[.., i, ..] b[.., j, ..]` over the two other legs.
pub(crate) fn gram(a: &[f64], sa: Shape, b: &[f64], sb: Shape, leg: usize) -> Matrix<f64> {
    debug_assert!((0..3).all(|k| k == leg || sa[k] == sb[k]));
    let (na, nb) = (sa[leg], sb[leg]);
    let mut out = Matrix::zeros(na, nb);
    let o = out.as_mut_slice();
    match leg {
        0 => {
            let r = sa[1] * sa[2];
            f64_gemm(na, r, nb, a, r as isize, 1, b, 1, r as isize, o, nb as isize, 1);
        }
        1 => {
            let (ba, bb) = (sa[1] * sa[2], sb[1] * sb[2]);
            let c = sa[2];
            for x in 0..sa[0] {
                f64_gemm_acc(
                    na,
                    c,
                    nb,
                    &a[x * ba..(x + 1) * ba],
                    c as isize,
                    1,
                    &b[x * bb..(x + 1) * bb],
                    1,
                    c as isize,
                    o,
                    nb as isize,
                    1,
                );
            }
        }
        _ => {
            let r = sa[0] * sa[1];
            f64_gemm(na, r, nb, a, 1, na as isize, b, nb as isize, 1, o, nb as isize, 1);
        }
    }
    out
}

/// Reshapes with `leg` as the column index: `(rows over the other legs, s[leg])`.
pub(crate) fn to_leg_matrix(t: &[f64], s: Shape, leg: usize) -> Matrix<f64> {
    let axes = leg_last(leg);
    let data = crate::tensor::transpose_data(t, &s, &axes);
    Matrix::from_vec(t.len() / s[leg], s[leg], data).expect("consistent extents")
}

/// Inverse of [`to_leg_matrix`].
pub(crate) fn from_leg_matrix(m: &Matrix<f64>, s: Shape, leg: usize) -> Vec<f64> {
    let axes = leg_last(leg);
    let ps: Vec<usize> = axes.iter().map(|&a| s[a]).collect();
    // invert the permutation
    let mut inv = [0usize; 3];
    for (k, &a) in axes.iter().enumerate() {
        inv[a] = k;
    }
    crate::tensor::transpose_data(m.as_slice(), &ps, &inv)
}

fn leg_last(leg: usize) -> [usize; 3] {
    match leg {
        0 => [1, 2, 0],
        1 => [0, 2, 1],
        _ => [0, 1, 2],
    }
}

#[allow(clippy::too_many_arguments)]
fn f64_gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    <f64 as crate::Scalar>::gemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 0.0, c, rsc, csc);
}

#[allow(clippy::too_many_arguments)]
fn f64_gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    <f64 as crate::Scalar>::gemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, csc);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(s: Shape, i: usize, j: usize, k: usize) -> usize {
        (i * s[1] + j) * s[2] + k
    }

    fn sample(s: Shape, seed: f64) -> Vec<f64> {
        (0..s.iter().product::<usize>()).map(|i| ((i as f64 + seed) * 0.37).sin()).collect()
    }

    #[test]
    fn apply_leg_matches_loops() {
        let s = [2, 3, 4];
        let t = sample(s, 0.0);
        for leg in 0..3 {
            let m = Matrix::from_fn(5, s[leg], |i, j| (i as f64 - 2.0 * j as f64).cos());
            let (out, os) = apply_leg(&t, s, leg, &m);
            for i in 0..os[0] {
                for j in 0..os[1] {
                    for k in 0..os[2] {
                        let mut acc = 0.0;
                        for x in 0..s[leg] {
                            let (a, b, c) = match leg {
                                0 => (x, j, k),
                                1 => (i, x, k),
                                _ => (i, j, x),
                            };
                            let row = [i, j, k][leg];
                            acc += m[(row, x)] * t[idx(s, a, b, c)];
                        }
                        assert!((acc - out[idx(os, i, j, k)]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gram_matches_loops() {
        let sa = [2, 3, 4];
        let a = sample(sa, 0.0);
        for leg in 0..3 {
            let mut sb = sa;
            sb[leg] = 5;
            let b = sample(sb, 1.5);
            let g = gram(&a, sa, &b, sb, leg);
            for p in 0..sa[leg] {
                for q in 0..sb[leg] {
                    let mut acc = 0.0;
                    for x in 0..sa[(leg + 1) % 3] {
                        for y in 0..sa[(leg + 2) % 3] {
                            let mut ia = [0; 3];
                            ia[leg] = p;
                            ia[(leg + 1) % 3] = x;
                            ia[(leg + 2) % 3] = y;
                            let mut ib = ia;
                            ib[leg] = q;
                            acc += a[idx(sa, ia[0], ia[1], ia[2])] * b[idx(sb, ib[0], ib[1], ib[2])];
                        }
                    }
                    assert!((acc - g[(p, q)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn leg_matrix_round_trip() {
        let s = [2, 3, 4];
        let t = sample(s, 0.3);
        for leg in 0..3 {
            let m = to_leg_matrix(&t, s, leg);
            assert_eq!(m.cols(), s[leg]);
            assert_eq!(from_leg_matrix(&m, s, leg), t);
        }
    }
}
