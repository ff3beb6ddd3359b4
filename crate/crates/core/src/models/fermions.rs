//! Quadratic-fermion solutions of open chains via the Jordan-Wigner map.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::exact::{ExactSpectrum, SpectrumSource};
use super::lattice::Boundary;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, SymmetricMatrix};
use crate::thermal::Beta;

/// Nonnegative single-particle energies and the many-body ground energy.
#[derive(Clone, Debug, PartialEq)]
pub struct FermionModes {
    /// Ascending `ε_k ≥ 0`.
    energies: Vec<f64>,
    ground_energy: f64,
}

impl FermionModes {
    /// Modes of `H = Σ A_ij c†_i c_j + ½ Σ (B_ij c†_i c†_j + h.c.) + constant`
    /// with `A` symmetric and `B` antisymmetric.
    pub fn from_quadratic(a: &Matrix<f64>, b: &Matrix<f64>, constant: f64) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n || b.rows() != n || b.cols() != n {
            return Err(Error::dim("quadratic form blocks must be square and equal in size"));
        }
        let bdg = Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => a[(i, j)],
            (true, false) => b[(i, j - n)],
            (false, true) => -b[(i - n, j)],
            (false, false) => -a[(i - n, j - n)],
        });
        let values = SymmetricMatrix::new(bdg)?.into_eigvalsh()?;
        // spectrum is ± symmetric; the upper half carries the modes
        let energies: Vec<f64> = values[n..].iter().map(|e| e.max(0.0)).collect();
        let ground_energy = -0.5 * energies.iter().sum::<f64>() + 0.5 * a.trace() + constant;
        Ok(Self { energies, ground_energy })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    /// `F = E_0 - T Σ_k ln(1 + e^{-β ε_k})`.
    pub fn free_energy(&self, beta: Beta) -> f64 {
        match beta {
            Beta::Infinite => self.ground_energy,
            Beta::Finite(b) => {
                self.ground_energy - self.energies.iter().map(|e| (-b * e).exp().ln_1p()).sum::<f64>() / b
            }
        }
    }

    /// Lowest `k` many-body levels, ascending (with multiplicity).
    pub fn lowest_levels(&self, k: usize) -> Vec<f64> {
        let eps = &self.energies;
        let mut out = Vec::with_capacity(k);
        if k == 0 {
            return out;
        }
        out.push(self.ground_energy);
        if eps.is_empty() {
            return out;
        }
        // every nonempty subset is reached once: extend by the next mode, or
        // swap the highest chosen mode for the next one
        let mut heap = BinaryHeap::new();
        heap.push(Node { sum: eps[0], last: 0 });
        while out.len() < k {
            let Some(Node { sum, last }) = heap.pop() else { break };
            out.push(self.ground_energy + sum);
            if last + 1 < eps.len() {
                heap.push(Node { sum: sum + eps[last + 1], last: last + 1 });
                heap.push(Node { sum: sum - eps[last] + eps[last + 1], last: last + 1 });
            }
        }
        out
    }

    /// Partial spectrum of the lowest `k` levels.
    pub fn truncated_spectrum(&self, k: usize) -> Result<ExactSpectrum> {
        let levels = self.lowest_levels(k);
        let complete = self.energies.len() < 63 && levels.len() as u64 == 1u64 << self.energies.len();
        ExactSpectrum::new(levels, SpectrumSource::FreeFermion, complete)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    sum: f64,
    last: usize,
}

impl Eq for Node {}

impl Ord for Node {
    // min-heap on `sum`
    fn cmp(&self, other: &Self) -> Ordering {
        other.sum.total_cmp(&self.sum).then(other.last.cmp(&self.last))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn open_only(l: usize, boundary: Boundary) -> Result<()> {
    if l == 0 {
        return Err(Error::usage("chain length must be positive"));
    }
    if boundary != Boundary::Open {
        return Err(Error::usage("free-fermion solution is provided for open chains only"));
    }
    Ok(())
}

/// Open TFI chain `J Σ Z_i Z_{i+1} - g Σ X_i`.
pub fn free_fermion_tfi_1d(l: usize, j: f64, g: f64, boundary: Boundary) -> Result<FermionModes> {
    open_only(l, boundary)?;
    // in the Hadamard-rotated frame Z_i = 1 - 2 n_i and X_i X_{i+1} hops and pairs
    let a = Matrix::from_fn(l, l, |p, q| {
        if p == q {
            2.0 * g
        } else if p.abs_diff(q) == 1 {
            j
        } else {
            0.0
        }
    });
    let b = Matrix::from_fn(l, l, |p, q| {
        if q == p + 1 {
            j
        } else if p == q + 1 {
            -j
        } else {
            0.0
        }
    });
    FermionModes::from_quadratic(&a, &b, -g * l as f64)
}

/// Open XY chain `coupling Σ (X_i X_{i+1} + Y_i Y_{i+1})`.
pub fn free_fermion_xy_chain(l: usize, coupling: f64, boundary: Boundary) -> Result<FermionModes> {
    open_only(l, boundary)?;
    let a = Matrix::from_fn(l, l, |p, q| if p.abs_diff(q) == 1 { 2.0 * coupling } else { 0.0 });
    FermionModes::from_quadratic(&a, &Matrix::zeros(l, l), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::exact::{ed_spectrum, EdMode, Truncation};
    use crate::models::hamiltonian::{build_tfi, build_xy_chain};
    use crate::models::lattice::LatticeGeometry;

    #[test]
    fn single_site_gap() {
        let m = free_fermion_tfi_1d(1, 1.0, 0.8, Boundary::Open).unwrap();
        assert!((m.energies()[0] - 1.6).abs() < 1e-14);
        let f = m.free_energy(Beta::Finite(2.0));
        assert!((f + (2.0 * (2.0 * 0.8f64).cosh()).ln() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn two_site_levels_reassemble_ed() {
        let m = free_fermion_tfi_1d(2, 1.0, 1.0, Boundary::Open).unwrap();
        let r5 = 5f64.sqrt();
        let levels = m.lowest_levels(4);
        for (a, b) in levels.iter().zip([-r5, -1.0, 1.0, r5]) {
            assert!((a - b).abs() < 1e-12, "{levels:?}");
        }
        assert!(m.truncated_spectrum(4).unwrap().is_complete());
    }

    #[test]
    fn periodic_is_unsupported() {
        assert!(free_fermion_tfi_1d(4, 1.0, 1.0, Boundary::Periodic).unwrap_err().is_usage());
    }

    #[test]
    fn free_energy_matches_ed() {
        for l in [3, 6, 10] {
            for g in [0.3, 1.0, 1.7] {
                let geo = LatticeGeometry::chain(l, Boundary::Open).unwrap();
                let ed = ed_spectrum(&build_tfi(geo, 1.0, g).unwrap(), EdMode::Full).unwrap();
                let ff = free_fermion_tfi_1d(l, 1.0, g, Boundary::Open).unwrap();
                for b in [0.1, 1.0, 10.0] {
                    let beta = Beta::Finite(b);
                    let e = ed.free_energy(beta, Truncation::Forbid).unwrap();
                    assert!((e - ff.free_energy(beta)).abs() < 1e-9, "L={l} g={g} β={b}");
                }
            }
            let geo = LatticeGeometry::chain(l, Boundary::Open).unwrap();
            let ed = ed_spectrum(&build_xy_chain(geo, 0.6).unwrap(), EdMode::Full).unwrap();
            let ff = free_fermion_xy_chain(l, 0.6, Boundary::Open).unwrap();
            for b in [0.1, 1.0, 10.0] {
                let beta = Beta::Finite(b);
                assert!((ed.free_energy(beta, Truncation::Forbid).unwrap() - ff.free_energy(beta)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lowest_levels_match_full_ed() {
        let geo = LatticeGeometry::chain(8, Boundary::Open).unwrap();
        let ed = ed_spectrum(&build_tfi(geo, 1.0, 0.6).unwrap(), EdMode::Full).unwrap();
        let ff = free_fermion_tfi_1d(8, 1.0, 0.6, Boundary::Open).unwrap();
        let levels = ff.lowest_levels(256);
        for (a, b) in levels.iter().zip(ed.energies()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(ff.lowest_levels(1000).len(), 256);
    }
}
