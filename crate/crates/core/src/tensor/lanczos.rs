//! Thick-restart Lanczos for the lowest eigenpairs of a symmetric operator.
//!
//! The Krylov basis is fully reorthogonalized (classical Gram-Schmidt, two
//! passes) and restarted from the current Ritz vectors once it reaches the
//! configured size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{Matrix, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Basis memory cap; the basis shrinks for very large operators.
const BASIS_BYTES: usize = 1 << 30;

#[derive(Clone, Debug)]
pub struct LanczosOptions<T> {
    /// Residual tolerance relative to the spectral-scale estimate `max |θ|`.
    pub tol: T,
    pub max_restarts: usize,
    /// Number of Krylov vectors before a restart.
    pub basis_size: usize,
    pub seed: u64,
    /// Starting vector; random when absent.
    pub initial: Option<Vec<T>>,
}

impl<T: Scalar> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-10), max_restarts: 100, basis_size: 200, seed: 0x5eed, initial: None }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult<T> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    /// True residual norms `‖A v − θ v‖`.
    pub residuals: Vec<T>,
    pub matvecs: usize,
    pub restarts: usize,
}

/// `k` lowest eigenpairs of the symmetric action `apply(x, y): y = A x`.
pub fn lanczos_lowest<T, F>(mut apply: F, dim: usize, k: usize, opts: &LanczosOptions<T>) -> Result<LanczosResult<T>>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    if dim == 0 || k == 0 {
        return Err(Error::usage("lanczos needs positive dimension and k"));
    }
    if k > dim {
        return Err(Error::usage(format!("requested {k} eigenpairs of a {dim}-dimensional operator")));
    }
    let mem_cap = (BASIS_BYTES / (dim * std::mem::size_of::<T>())).max(2 * k + 2);
    let m_max = opts.basis_size.max(2 * k + 2).min(mem_cap).min(dim);
    let keep = if m_max >= dim { k } else { (k + k.max(8)).min(m_max - 2).max(k) };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<T> = Vec::with_capacity(m_max * dim);
    let mut h = Matrix::<T>::zeros(m_max, m_max);

    let mut start = match &opts.initial {
        Some(v) if v.len() == dim && norm(v) > T::zero() => v.clone(),
        Some(v) if v.len() != dim => {
            return Err(Error::dim(format!("initial vector has length {}, expected {dim}", v.len())));
        }
        _ => random_vector(&mut rng, dim),
    };
    let n0 = norm(&start);
    start.iter_mut().for_each(|x| *x /= n0);
    basis.extend_from_slice(&start);

    let mut w = vec![T::zero(); dim];
    let mut coef = vec![T::zero(); m_max];
    let mut matvecs = 0usize;
    let mut best_residual = T::infinity();
    let mut next_col = 0usize;

    for restart in 0..=opts.max_restarts {
        // Arnoldi extension with full reorthogonalization
        let mut beta;
        let mut j = next_col;
        loop {
            let count = basis.len() / dim;
            debug_assert_eq!(count, j + 1);
            apply(&basis[j * dim..(j + 1) * dim], &mut w);
            matvecs += 1;
            orthogonalize(&basis, count, dim, &mut w, &mut coef);
            for i in 0..count {
                h[(i, j)] = coef[i];
                h[(j, i)] = coef[i];
            }
            beta = norm(&w);
            if count == m_max {
                break;
            }
            let scale = column_scale(&h, count);
            if beta <= T::epsilon() * T::of(64.0) * scale.max(T::min_positive_value()) {
                // invariant subspace: continue with a fresh orthogonal direction
                let mut fresh = random_vector(&mut rng, dim);
                orthogonalize(&basis, count, dim, &mut fresh, &mut coef);
                let nf = norm(&fresh);
                if nf <= T::epsilon() {
                    break;
                }
                fresh.iter_mut().for_each(|x| *x /= nf);
                basis.extend_from_slice(&fresh);
                h[(count, j)] = T::zero();
                h[(j, count)] = T::zero();
            } else {
                basis.extend(w.iter().map(|&x| x / beta));
                h[(count, j)] = beta;
                h[(j, count)] = beta;
            }
            j += 1;
        }
        let m = basis.len() / dim;
        let hm = Matrix::from_fn(m, m, |a, b| h[(a, b)]);
        let eig = SymmetricMatrix::symmetrized(hm)?.eigh()?;
        let scale = eig.values.iter().fold(T::zero(), |acc, &x| acc.max(x.abs())).max(T::min_positive_value());
        let est: Vec<T> = (0..m).map(|i| (beta * eig.vectors[(m - 1, i)]).abs()).collect();
        let worst = est[..k].iter().fold(T::zero(), |acc, &x| acc.max(x));
        best_residual = best_residual.min(worst);
        let exhausted = m == dim;
        if worst <= opts.tol * scale || exhausted {
            let vectors = ritz_vectors(&basis, dim, m, &eig.vectors, k);
            let mut residuals = Vec::with_capacity(k);
            let mut y = vec![T::zero(); dim];
            for (i, v) in vectors.iter().enumerate() {
                apply(v, &mut y);
                matvecs += 1;
                let r = y.iter().zip(v).map(|(&a, &b)| (a - eig.values[i] * b).powi(2)).sum::<T>().sqrt();
                residuals.push(r);
            }
            let true_worst = residuals.iter().fold(T::zero(), |acc, &x| acc.max(x));
            if true_worst <= opts.tol * scale * T::of(10.0) || exhausted {
                return Ok(LanczosResult { values: eig.values[..k].to_vec(), vectors, residuals, matvecs, restarts: restart });
            }
            best_residual = best_residual.min(true_worst);
        }
        if restart == opts.max_restarts {
            break;
        }
        // thick restart on the lowest `keep` Ritz vectors plus the residual direction
        let p = keep.min(m - 1);
        let ritz = ritz_vectors(&basis, dim, m, &eig.vectors, p);
        basis.clear();
        for v in &ritz {
            basis.extend_from_slice(v);
        }
        for a in 0..m_max {
            for b in 0..m_max {
                h[(a, b)] = T::zero();
            }
        }
        for i in 0..p {
            h[(i, i)] = eig.values[i];
        }
        if beta > T::zero() {
            orthogonalize(&basis, p, dim, &mut w, &mut coef);
            let nb = norm(&w);
            basis.extend(w.iter().map(|&x| x / nb));
            for i in 0..p {
                let c = beta * eig.vectors[(m - 1, i)];
                h[(i, p)] = c;
                h[(p, i)] = c;
            }
        } else {
            let mut fresh = random_vector(&mut rng, dim);
            orthogonalize(&basis, p, dim, &mut fresh, &mut coef);
            let nf = norm(&fresh);
            basis.extend(fresh.iter().map(|&x| x / nf));
        }
        next_col = p;
    }
    Err(Error::Convergence {
        context: format!("lanczos for {k} of {dim} eigenpairs"),
        iterations: matvecs,
        best_residual: best_residual.to_f64_lossy(),
    })
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn random_vector<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<T> {
    (0..dim).map(|_| T::of(rng.random_range(-1.0..1.0))).collect()
}

fn column_scale<T: Scalar>(h: &Matrix<T>, count: usize) -> T {
    let mut s = T::zero();
    for i in 0..count {
        for j in 0..count {
            s = s.max(h[(i, j)].abs());
        }
    }
    s
}

/// Two-pass classical Gram-Schmidt of `w` against the first `count` basis
/// vectors; the accumulated projection coefficients land in `coef`.
fn orthogonalize<T: Scalar>(basis: &[T], count: usize, dim: usize, w: &mut [T], coef: &mut [T]) {
    let mut pass = vec![T::zero(); count];
    coef[..count].iter_mut().for_each(|c| *c = T::zero());
    for _ in 0..2 {
        // pass = V w
        T::gemm(count, dim, 1, T::one(), &basis[..count * dim], dim as isize, 1, w, 1, 1, T::zero(), &mut pass, 1, 1);
        // w -= V^T pass
        T::gemm(dim, count, 1, -T::one(), &basis[..count * dim], 1, dim as isize, &pass, 1, 1, T::one(), w, 1, 1);
        for (c, &p) in coef.iter_mut().zip(&pass) {
            *c += p;
        }
    }
}

fn ritz_vectors<T: Scalar>(basis: &[T], dim: usize, m: usize, s: &Matrix<T>, count: usize) -> Vec<Vec<T>> {
    // Y (count x dim) = S[:, :count]^T V
    let mut y = vec![T::zero(); count * dim];
    T::gemm(count, m, dim, T::one(), s.as_slice(), 1, s.cols() as isize, &basis[..m * dim], dim as isize, 1, T::zero(), &mut y, dim as isize, 1);
    y.chunks(dim)
        .map(|c| {
            let n = norm(c);
            c.iter().map(|&x| x / n).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator_lowest_three() {
        let diag: Vec<f64> = (1..=100).map(f64::from).collect();
        let res = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| {
                for i in 0..x.len() {
                    y[i] = diag[i] * x[i];
                }
            },
            100,
            3,
            &LanczosOptions::default(),
        )
        .unwrap();
        for (v, e) in res.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - e).abs() < 1e-8, "{v} vs {e}");
        }
    }

    #[test]
    fn two_site_transverse_ising_ground_energy() {
        // H = Z0 Z1 - X0 - X1 in the basis |00>,|01>,|10>,|11>
        let h = Matrix::from_vec(
            4,
            4,
            vec![
                1.0, -1.0, -1.0, 0.0, //
                -1.0, -1.0, 0.0, -1.0, //
                -1.0, 0.0, -1.0, -1.0, //
                0.0, -1.0, -1.0, 1.0,
            ],
        )
        .unwrap();
        let dense = SymmetricMatrix::new(h.clone()).unwrap().eigvalsh().unwrap();
        let res = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(&h.matvec(x)),
            4,
            1,
            &LanczosOptions::default(),
        )
        .unwrap();
        assert!((res.values[0] - dense[0]).abs() < 1e-12);
        assert!((res.values[0] + 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_k_above_dim() {
        let r = lanczos_lowest(|_: &[f64], _: &mut [f64]| {}, 3, 4, &LanczosOptions::default());
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn restart_path_handles_clustered_spectrum() {
        // small basis forces several thick restarts
        let n = 400;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).sqrt()).collect();
        let opts = LanczosOptions { basis_size: 24, max_restarts: 500, ..Default::default() };
        let res = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| {
                for i in 0..x.len() {
                    y[i] = diag[i] * x[i];
                }
            },
            n,
            4,
            &opts,
        )
        .unwrap();
        assert!(res.restarts > 0);
        for (v, e) in res.values.iter().zip(&diag[..4]) {
            assert!((v - e).abs() < 1e-8);
        }
    }

    #[test]
    fn non_convergence_reports_best_residual() {
        let n = 300;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64) * 1e-3).collect();
        let opts = LanczosOptions { basis_size: 6, max_restarts: 1, tol: 1e-14, ..Default::default() };
        let r = lanczos_lowest(
            |x: &[f64], y: &mut [f64]| {
                for i in 0..x.len() {
                    y[i] = diag[i] * x[i];
                }
            },
            n,
            2,
            &opts,
        );
        match r {
            Err(Error::Convergence { best_residual, .. }) => assert!(best_residual.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
