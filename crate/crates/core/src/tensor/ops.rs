use super::dense::{DenseTensor, Leg};
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Multiply-add counter for contractions, active in debug builds only.
///
/// Counts are thread-local so concurrently running tests do not interfere.
pub mod flops {
    use std::cell::Cell;

    thread_local! {
        static COUNT: Cell<u64> = const { Cell::new(0) };
    }

    #[inline]
    pub(crate) fn record(_n: u64) {
        #[cfg(debug_assertions)]
        COUNT.with(|c| c.set(c.get() + _n));
    }

    pub fn reset() {
        COUNT.with(|c| c.set(0));
    }

    /// Multiply-adds recorded on this thread since the last [`reset`].
    /// Always zero in release builds.
    pub fn read() -> u64 {
        COUNT.with(Cell::get)
    }
}

/// Sums over the paired legs; the result carries the unpaired legs of `a`
/// followed by those of `b`, each in original order.
pub fn contract<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>, pairs: &[(&str, &str)]) -> Result<DenseTensor<T>> {
    let mut ax_a = Vec::with_capacity(pairs.len());
    let mut ax_b = Vec::with_capacity(pairs.len());
    for &(la, lb) in pairs {
        let ia = a
            .position(la)
            .ok_or_else(|| Error::usage(format!("leg '{la}' not on left operand")))?;
        let ib = b
            .position(lb)
            .ok_or_else(|| Error::usage(format!("leg '{lb}' not on right operand")))?;
        if ax_a.contains(&ia) || ax_b.contains(&ib) {
            return Err(Error::usage(format!("leg pair ({la}, {lb}) repeats a leg")));
        }
        if a.shape()[ia] != b.shape()[ib] {
            return Err(Error::dim(format!(
                "paired legs '{la}' ({}) and '{lb}' ({}) differ in extent",
                a.shape()[ia],
                b.shape()[ib]
            )));
        }
        ax_a.push(ia);
        ax_b.push(ib);
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !ax_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !ax_b.contains(i)).collect();

    let mut out_legs: Vec<Leg> = free_a.iter().map(|&i| a.legs()[i].clone()).collect();
    for &i in &free_b {
        let l = &b.legs()[i];
        if out_legs.contains(l) {
            return Err(Error::usage(format!("result would carry leg '{l}' twice")));
        }
        out_legs.push(l.clone());
    }
    let out_shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape()[i])
        .chain(free_b.iter().map(|&i| b.shape()[i]))
        .collect();

    let m: usize = free_a.iter().map(|&i| a.shape()[i]).product();
    let k: usize = ax_a.iter().map(|&i| a.shape()[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape()[i]).product();

    let perm_a: Vec<usize> = free_a.iter().chain(ax_a.iter()).copied().collect();
    let perm_b: Vec<usize> = ax_b.iter().chain(free_b.iter()).copied().collect();
    let pa = a.permute_axes(&perm_a);
    let pb = b.permute_axes(&perm_b);

    let mut out = vec![T::zero(); m * n];
    T::gemm(m, k, n, T::one(), pa.data(), k as isize, 1, pb.data(), n as isize, 1, T::zero(), &mut out, n as isize, 1);
    flops::record((m * k * n) as u64);
    DenseTensor::new(out_legs, out_shape, out)
}

fn split_legs<T: Scalar>(t: &DenseTensor<T>, row_legs: &[&str]) -> Result<()> {
    if row_legs.is_empty() || row_legs.len() >= t.rank() {
        return Err(Error::usage(format!(
            "row legs must be a nonempty proper subset of {} legs, got {}",
            t.rank(),
            row_legs.len()
        )));
    }
    for (i, l) in row_legs.iter().enumerate() {
        if t.position(l).is_none() {
            return Err(Error::usage(format!("leg '{l}' not on tensor")));
        }
        if row_legs[..i].contains(l) {
            return Err(Error::usage(format!("leg '{l}' listed twice")));
        }
    }
    Ok(())
}

fn row_shape<T: Scalar>(t: &DenseTensor<T>, row_legs: &[&str]) -> Vec<usize> {
    row_legs.iter().map(|l| t.extent(l).expect("validated")).collect()
}

/// QR factorization across the `row_legs | rest` split.
///
/// `q` carries `row_legs` then `bond`; `r` carries `bond` then the remaining
/// legs. `q` is isometric over `row_legs`.
pub fn factorize_qr<T: Scalar>(
    t: &DenseTensor<T>,
    row_legs: &[&str],
    bond: &str,
) -> Result<(DenseTensor<T>, DenseTensor<T>)> {
    split_legs(t, row_legs)?;
    let rows = row_shape(t, row_legs);
    let (mat, col_legs, col_shape) = t.to_matrix(row_legs)?;
    let (q, r) = mat.qr()?;
    let k = q.cols();
    let mut q_legs: Vec<Leg> = row_legs.iter().map(|&l| Leg::from(l)).collect();
    q_legs.push(Leg::from(bond));
    let mut q_shape = rows;
    q_shape.push(k);
    let mut r_legs = vec![Leg::from(bond)];
    r_legs.extend(col_legs);
    let mut r_shape = vec![k];
    r_shape.extend(col_shape);
    Ok((
        DenseTensor::new(q_legs, q_shape, q.into_vec())?,
        DenseTensor::new(r_legs, r_shape, r.into_vec())?,
    ))
}

/// Truncated SVD factors `t ≈ u · diag(s) · v`.
#[derive(Clone, Debug)]
pub struct SvdFactors<T> {
    /// `row_legs` then the new bond leg; isometric over `row_legs`.
    pub u: DenseTensor<T>,
    /// Kept singular values, descending.
    pub s: Vec<T>,
    /// The bond leg then the remaining legs; isometric over the remaining legs.
    pub v: DenseTensor<T>,
    /// Squared norm of the dropped singular values relative to the total.
    pub discarded_weight: T,
    /// All singular values before truncation.
    pub full_spectrum: Vec<T>,
}

/// Default relative singular-value cutoff.
pub const SVD_CUTOFF: f64 = 1e-12;

/// SVD across the `row_legs | rest` split keeping
/// `min(max_rank, #{s_i / s_0 > cutoff})` values, and at least one.
pub fn factorize_svd<T: Scalar>(
    t: &DenseTensor<T>,
    row_legs: &[&str],
    bond: &str,
    max_rank: usize,
    cutoff: T,
) -> Result<SvdFactors<T>> {
    if max_rank == 0 {
        return Err(Error::usage("max_rank must be at least 1"));
    }
    if cutoff < T::zero() {
        return Err(Error::usage("cutoff must be nonnegative"));
    }
    split_legs(t, row_legs)?;
    let rows = row_shape(t, row_legs);
    let (mat, col_legs, col_shape) = t.to_matrix(row_legs)?;
    let (u, s, vt) = mat.svd()?;
    let total: T = s.iter().map(|&x| x * x).sum();
    let s0 = s[0];
    let above = if s0 > T::zero() { s.iter().take_while(|&&x| x / s0 > cutoff).count() } else { 0 };
    let keep = above.min(max_rank).max(1);
    let kept_weight: T = s[..keep].iter().map(|&x| x * x).sum();
    let discarded_weight = if total > T::zero() { ((total - kept_weight) / total).max(T::zero()) } else { T::zero() };

    let u_kept = Matrix::from_fn(u.rows(), keep, |i, j| u[(i, j)]);
    let v_kept = Matrix::from_fn(keep, vt.cols(), |i, j| vt[(i, j)]);

    let mut u_legs: Vec<Leg> = row_legs.iter().map(|&l| Leg::from(l)).collect();
    u_legs.push(Leg::from(bond));
    let mut u_shape = rows;
    u_shape.push(keep);
    let mut v_legs = vec![Leg::from(bond)];
    v_legs.extend(col_legs);
    let mut v_shape = vec![keep];
    v_shape.extend(col_shape);
    Ok(SvdFactors {
        u: DenseTensor::new(u_legs, u_shape, u_kept.into_vec())?,
        s: s[..keep].to_vec(),
        v: DenseTensor::new(v_legs, v_shape, v_kept.into_vec())?,
        discarded_weight,
        full_spectrum: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_contraction_returns_vector() {
        let id = DenseTensor::from_matrix(Matrix::<f64>::identity(2), "i", "j").unwrap();
        let v = DenseTensor::new(vec!["j"], vec![2], vec![0.3, -1.2]).unwrap();
        let out = contract(&id, &v, &[("j", "j")]).unwrap();
        assert_eq!(out.legs(), &[Leg::from("i")]);
        assert_eq!(out.data(), &[0.3, -1.2]);
    }

    #[test]
    fn dot_product() {
        let u = DenseTensor::new(vec!["i"], vec![2], vec![3.0, 4.0]).unwrap();
        let out = contract(&u, &u, &[("i", "i")]).unwrap();
        assert_eq!(out.rank(), 0);
        assert_eq!(out.data(), &[25.0]);
    }

    #[test]
    fn contraction_matches_nested_loops() {
        let mut r = rng(1);
        let a = DenseTensor::<f64>::random(vec!["p", "q", "r", "s"], vec![2, 3, 4, 2], &mut r).unwrap();
        let b = DenseTensor::<f64>::random(vec!["x", "s", "y", "q"], vec![3, 2, 2, 3], &mut r).unwrap();
        let c = contract(&a, &b, &[("q", "q"), ("s", "s")]).unwrap();
        assert_eq!(c.shape(), &[2, 4, 3, 2]);
        let ad = |p: usize, q: usize, r: usize, s: usize| a.data()[((p * 3 + q) * 4 + r) * 2 + s];
        let bd = |x: usize, s: usize, y: usize, q: usize| b.data()[((x * 2 + s) * 2 + y) * 3 + q];
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in 0..2 {
            for rr in 0..4 {
                for x in 0..3 {
                    for y in 0..2 {
                        let mut acc = 0.0;
                        for q in 0..3 {
                            for s in 0..2 {
                                acc += ad(p, q, rr, s) * bd(x, s, y, q);
                            }
                        }
                        let got = c.data()[((p * 4 + rr) * 3 + x) * 2 + y];
                        worst = worst.max((got - acc).abs());
                        scale = scale.max(acc.abs());
                    }
                }
            }
        }
        assert!(worst <= 1e-12 * scale);
    }

    #[test]
    fn contraction_errors() {
        let a = DenseTensor::<f64>::zeros(vec!["i", "j"], vec![2, 3]).unwrap();
        let b = DenseTensor::<f64>::zeros(vec!["k", "l"], vec![2, 2]).unwrap();
        assert!(matches!(contract(&a, &b, &[("j", "k")]), Err(Error::Dimension(_))));
        assert!(matches!(contract(&a, &b, &[("i", "k"), ("i", "l")]), Err(Error::Usage(_))));
    }

    #[test]
    fn qr_of_isometry_gives_identity_like_r() {
        let mut r = rng(5);
        let m = DenseTensor::<f64>::random(vec!["a", "b"], vec![6, 3], &mut r).unwrap();
        let (q0, _) = factorize_qr(&m, &["a"], "k").unwrap();
        let (_, rr) = factorize_qr(&q0, &["a"], "k2").unwrap();
        let (mat, _, _) = rr.to_matrix(&["k2"]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { mat[(i, i)].signum() } else { 0.0 };
                assert!((mat[(i, j)] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn qr_reconstructs_three_leg_tensor() {
        let mut r = rng(9);
        let t = DenseTensor::<f64>::random(vec!["a", "b", "c"], vec![3, 4, 5], &mut r).unwrap();
        let (q, rr) = factorize_qr(&t, &["a", "c"], "k").unwrap();
        let back = contract(&q, &rr, &[("k", "k")]).unwrap();
        let mut diff = back.permute(&["a", "b", "c"]).unwrap();
        diff.axpy(-1.0, &t).unwrap();
        assert!(diff.norm() <= 1e-10 * t.norm());
        let (qm, _, _) = q.to_matrix(&["a", "c"]).unwrap();
        assert!(qm.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn qr_requires_proper_subset() {
        let t = DenseTensor::<f64>::zeros(vec!["a", "b"], vec![2, 2]).unwrap();
        assert!(matches!(factorize_qr(&t, &[], "k"), Err(Error::Usage(_))));
        assert!(matches!(factorize_qr(&t, &["a", "b"], "k"), Err(Error::Usage(_))));
    }

    #[test]
    fn svd_of_product_tensor_has_rank_one() {
        let a = [1.0, 2.0, -1.0];
        let b = [0.5, 3.0];
        let data: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let t = DenseTensor::new(vec!["i", "j"], vec![3, 2], data).unwrap();
        let f = factorize_svd(&t, &["i"], "k", 10, SVD_CUTOFF).unwrap();
        assert_eq!(f.s.len(), 1);
        assert!((f.s[0] - t.norm()).abs() < 1e-12);
        assert!(f.full_spectrum[1].abs() < 1e-12);
    }

    #[test]
    fn svd_of_bell_matrix() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = DenseTensor::new(vec!["a", "b"], vec![2, 2], vec![h, 0.0, 0.0, h]).unwrap();
        let f = factorize_svd(&t, &["a"], "k", 4, SVD_CUTOFF).unwrap();
        assert_eq!(f.s.len(), 2);
        assert!((f.s[0] - h).abs() < 1e-14 && (f.s[1] - h).abs() < 1e-14);
    }

    #[test]
    fn svd_of_zero_tensor_keeps_rank_one() {
        let t = DenseTensor::<f64>::zeros(vec!["a", "b"], vec![3, 3]).unwrap();
        let f = factorize_svd(&t, &["a"], "k", 3, SVD_CUTOFF).unwrap();
        assert_eq!(f.s, vec![0.0]);
        assert_eq!(f.discarded_weight, 0.0);
    }

    #[test]
    fn svd_truncation_weight_matches_full_spectrum() {
        let mut r = rng(21);
        let t = DenseTensor::<f64>::random(vec!["a", "b"], vec![16, 16], &mut r).unwrap();
        let full = factorize_svd(&t, &["a"], "k", 16, 0.0).unwrap();
        let trunc = factorize_svd(&t, &["a"], "k", 8, 0.0).unwrap();
        let total: f64 = full.s.iter().map(|x| x * x).sum();
        let dropped: f64 = full.s[8..].iter().map(|x| x * x).sum();
        assert!((trunc.discarded_weight - dropped / total).abs() < 1e-12);
        let kept: f64 = trunc.s.iter().map(|x| x * x).sum();
        assert!((kept + trunc.discarded_weight * total - t.norm().powi(2)).abs() < 1e-10 * total);
        let (um, _, _) = trunc.u.to_matrix(&["a"]).unwrap();
        assert!(um.orthonormality_defect() < 1e-12);
        let (vm, _, _) = trunc.v.to_matrix(&["b"]).unwrap();
        assert!(vm.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn svd_rejects_zero_rank() {
        let t = DenseTensor::<f64>::zeros(vec!["a", "b"], vec![2, 2]).unwrap();
        assert!(factorize_svd(&t, &["a"], "k", 0, 0.0).is_err());
    }

    #[cfg(debug_assertions)]
    #[test]
    fn gauge_move_touches_d_to_the_fourth() {
        for d in [4usize, 8, 12] {
            let mut r = rng(d as u64);
            let t = DenseTensor::<f64>::random(vec!["l", "r", "p"], vec![d, d, d], &mut r).unwrap();
            let gauge = DenseTensor::<f64>::random(vec!["p2", "p"], vec![d, d], &mut r).unwrap();
            flops::reset();
            let _ = contract(&t, &gauge, &[("p", "p")]).unwrap();
            assert_eq!(flops::read(), (d as u64).pow(4));
        }
    }
}
