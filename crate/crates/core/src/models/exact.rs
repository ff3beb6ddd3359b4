//! Exact diagonalization in the computational basis.
//!
//! Basis state `s` has site `i` in bit `N - 1 - i`; bit value 0 is `Z = +1`.

use serde::{Deserialize, Serialize};

use super::fermions::FermionModes;
use super::hamiltonian::{HamiltonianTerms, RealPauli, RealTerm};
use crate::error::{Error, Result};
use crate::tensor::{lanczos_lowest, LanczosOptions, Matrix, SymmetricMatrix};
use crate::thermal::{Beta, BoltzmannSum};

pub const FULL_ED_MAX_SITES: usize = 14;
pub const LANCZOS_ED_MAX_SITES: usize = 24;
pub const DENSE_MATRIX_MAX_SITES: usize = 12;
/// Sectors up to this dimension are diagonalized densely in lowest-k mode.
const DENSE_SECTOR_DIM: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    FullEd,
    LanczosPartial,
    FreeFermion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdMode {
    Full,
    LowestK(usize),
}

/// Whether a free energy may be computed from an incomplete level list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    Forbid,
    /// The result is an upper bound on the exact free energy.
    Acknowledge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSpectrum {
    energies: Vec<f64>,
    source: SpectrumSource,
    complete: bool,
}

impl ExactSpectrum {
    pub fn new(mut energies: Vec<f64>, source: SpectrumSource, complete: bool) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::usage("empty spectrum"));
        }
        if let Some(index) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        energies.sort_by(f64::total_cmp);
        Ok(Self { energies, source, complete })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn source(&self) -> SpectrumSource {
        self.source
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Lowest `k` levels as a partial spectrum.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::usage("truncation to zero levels"));
        }
        let k = k.min(self.energies.len());
        let complete = self.complete && k == self.energies.len();
        Ok(Self { energies: self.energies[..k].to_vec(), source: self.source, complete })
    }

    pub fn free_energy(&self, beta: Beta, truncation: Truncation) -> Result<f64> {
        if !self.complete && truncation == Truncation::Forbid {
            return Err(Error::usage(format!(
                "free energy from {} levels of an incomplete spectrum needs an explicit truncation acknowledgment",
                self.energies.len()
            )));
        }
        Ok(BoltzmannSum::new(&self.energies, beta)?.free_energy(beta))
    }
}

/// Source for [`exact_free_energy`].
#[derive(Clone, Copy, Debug)]
pub enum FreeEnergyOracle<'a> {
    Spectrum(&'a ExactSpectrum),
    Modes(&'a FermionModes),
}

pub fn exact_free_energy(oracle: FreeEnergyOracle<'_>, beta: Beta, truncation: Truncation) -> Result<f64> {
    match oracle {
        FreeEnergyOracle::Spectrum(s) => s.free_energy(beta, truncation),
        FreeEnergyOracle::Modes(m) => Ok(m.free_energy(beta)),
    }
}

#[derive(Clone, Copy, Debug)]
struct BitTerm {
    amplitude: f64,
    flip: u64,
    sign: u64,
}

/// Matrix-free action of a Hamiltonian on a subset of basis states.
#[derive(Clone, Debug)]
pub struct SpinOperator {
    terms: Vec<BitTerm>,
    states: Vec<u64>,
    /// Position of each full-space state in `states`; `u32::MAX` when absent.
    index: Option<Vec<u32>>,
}

impl SpinOperator {
    /// Full `2^N` space.
    pub fn new(h: &HamiltonianTerms) -> Result<Self> {
        let n = h.n_sites();
        cap(n, LANCZOS_ED_MAX_SITES, "exact diagonalization")?;
        let terms = bit_terms(h.real_terms(), n, false);
        Ok(Self { terms, states: (0..1u64 << n).collect(), index: None })
    }

    /// X-parity sector `parity ∈ {0, 1}` (after a Hadamard rotation of every site).
    fn parity_sector(h: &HamiltonianTerms, parity: u32) -> Result<Self> {
        let n = h.n_sites();
        cap(n, LANCZOS_ED_MAX_SITES, "exact diagonalization")?;
        let terms = bit_terms(h.real_terms(), n, true);
        let states: Vec<u64> = (0..1u64 << n).filter(|s| s.count_ones() % 2 == parity).collect();
        let mut index = vec![u32::MAX; 1 << n];
        for (i, &s) in states.iter().enumerate() {
            index[s as usize] = i as u32;
        }
        Ok(Self { terms, states, index: Some(index) })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    #[inline]
    fn locate(&self, s: u64) -> usize {
        match &self.index {
            None => s as usize,
            Some(ix) => ix[s as usize] as usize,
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, &s) in self.states.iter().enumerate() {
            let mut acc = 0.0;
            for t in &self.terms {
                let amp = if (s & t.sign).count_ones() % 2 == 0 { t.amplitude } else { -t.amplitude };
                acc += amp * x[self.locate(s ^ t.flip)];
            }
            y[r] = acc;
        }
    }

    /// Dense matrix of the operator.
    pub fn to_dense(&self) -> Matrix<f64> {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        let data = m.as_mut_slice();
        for (r, &s) in self.states.iter().enumerate() {
            for t in &self.terms {
                let amp = if (s & t.sign).count_ones() % 2 == 0 { t.amplitude } else { -t.amplitude };
                data[r * d + self.locate(s ^ t.flip)] += amp;
            }
        }
        m
    }
}

fn cap(n: usize, max: usize, what: &str) -> Result<()> {
    if n > max {
        return Err(Error::Resource(format!("{what} is limited to {max} sites, got {n}")));
    }
    Ok(())
}

fn bit_terms(real: &[RealTerm], n: usize, hadamard: bool) -> Vec<BitTerm> {
    real.iter()
        .map(|t| {
            let mut flip = 0u64;
            let mut sign = 0u64;
            let mut amplitude = t.coefficient;
            for &(site, p) in &t.factors {
                let bit = 1u64 << (n - 1 - site);
                // H X H = Z, H Z H = X, H (iY) H = -(iY)
                let p = match (hadamard, p) {
                    (true, RealPauli::X) => RealPauli::Z,
                    (true, RealPauli::Z) => RealPauli::X,
                    (true, RealPauli::IY) => {
                        amplitude = -amplitude;
                        RealPauli::IY
                    }
                    (false, p) => p,
                };
                match p {
                    RealPauli::X => flip |= bit,
                    RealPauli::Z => sign |= bit,
                    RealPauli::IY => {
                        // <b^1| iY |b> = -(-1)^b
                        flip |= bit;
                        sign |= bit;
                        amplitude = -amplitude;
                    }
                }
            }
            BitTerm { amplitude, flip, sign }
        })
        .collect()
}

fn parity_symmetric(h: &HamiltonianTerms) -> bool {
    h.real_terms().iter().all(RealTerm::commutes_with_x_parity)
}

/// Dense Hamiltonian in the computational basis (`N ≤ 12`).
pub fn dense_hamiltonian(h: &HamiltonianTerms) -> Result<Matrix<f64>> {
    cap(h.n_sites(), DENSE_MATRIX_MAX_SITES, "dense Hamiltonian assembly")?;
    Ok(SpinOperator::new(h)?.to_dense())
}

fn sector_values(op: &SpinOperator, k: Option<usize>) -> Result<Vec<f64>> {
    let d = op.dim();
    if d == 0 {
        return Ok(Vec::new());
    }
    let want = k.unwrap_or(d).min(d);
    if k.is_none() || d <= DENSE_SECTOR_DIM {
        let m = SymmetricMatrix::new(op.to_dense())?;
        let mut values = m.into_eigvalsh()?;
        values.truncate(want);
        return Ok(values);
    }
    let opts = LanczosOptions::<f64> { tol: 1e-12, ..Default::default() };
    let res = lanczos_lowest(|x, y| op.apply(x, y), d, want, &opts)?;
    Ok(res.values)
}

pub fn ed_spectrum(h: &HamiltonianTerms, mode: EdMode) -> Result<ExactSpectrum> {
    let n = h.n_sites();
    let k = match mode {
        EdMode::Full => {
            cap(n, FULL_ED_MAX_SITES, "full exact diagonalization")?;
            None
        }
        EdMode::LowestK(k) => {
            if k == 0 {
                return Err(Error::usage("lowest-k diagonalization needs k ≥ 1"));
            }
            cap(n, LANCZOS_ED_MAX_SITES, "Lanczos exact diagonalization")?;
            Some(k)
        }
    };
    if h.terms().is_empty() {
        let len = k.unwrap_or(usize::MAX).min(1 << n);
        return ExactSpectrum::new(vec![0.0; len], SpectrumSource::FullEd, len == 1 << n);
    }
    let mut energies = Vec::new();
    if parity_symmetric(h) && n >= 2 {
        for parity in 0..2 {
            energies.extend(sector_values(&SpinOperator::parity_sector(h, parity)?, k)?);
        }
    } else {
        cap(n, if k.is_none() { DENSE_MATRIX_MAX_SITES } else { LANCZOS_ED_MAX_SITES }, "unsymmetrized diagonalization")?;
        energies = sector_values(&SpinOperator::new(h)?, k)?;
    }
    energies.sort_by(f64::total_cmp);
    let total = 1usize << n;
    let (source, complete) = match k {
        None => (SpectrumSource::FullEd, true),
        Some(k) => {
            energies.truncate(k);
            if energies.len() == total {
                (SpectrumSource::FullEd, true)
            } else {
                (SpectrumSource::LanczosPartial, false)
            }
        }
    };
    ExactSpectrum::new(energies, source, complete)
}

/// Ground-state energy and normalized vector in the computational basis.
pub fn ed_ground_state(h: &HamiltonianTerms) -> Result<(f64, Vec<f64>)> {
    let op = SpinOperator::new(h)?;
    let d = op.dim();
    if d <= DENSE_SECTOR_DIM {
        let eig = SymmetricMatrix::new(op.to_dense())?.eigh()?;
        return Ok((eig.values[0], eig.vectors.column(0)));
    }
    let opts = LanczosOptions::<f64> { tol: 1e-12, ..Default::default() };
    let mut res = lanczos_lowest(|x, y| op.apply(x, y), d, 1, &opts)?;
    Ok((res.values[0], res.vectors.swap_remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hamiltonian::{build_tfi, build_xy_chain};
    use crate::models::lattice::{Boundary, LatticeGeometry};

    fn chain(l: usize) -> LatticeGeometry {
        LatticeGeometry::chain(l, Boundary::Open).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn two_site_tfi() {
        let h = build_tfi(chain(2), 1.0, 1.0).unwrap();
        let s = ed_spectrum(&h, EdMode::Full).unwrap();
        let r5 = 5f64.sqrt();
        close(s.energies(), &[-r5, -1.0, 1.0, r5], 1e-12);
        assert!(s.is_complete());
        // β = ∞ gives E0
        let f = exact_free_energy(FreeEnergyOracle::Spectrum(&s), Beta::Infinite, Truncation::Forbid).unwrap();
        assert!((f + r5).abs() < 1e-12);
    }

    #[test]
    fn single_site() {
        let h = build_tfi(chain(1), 1.0, 1.0).unwrap();
        let s = ed_spectrum(&h, EdMode::Full).unwrap();
        close(s.energies(), &[-1.0, 1.0], 1e-14);
        let f = s.free_energy(Beta::Finite(1.0), Truncation::Forbid).unwrap();
        assert!((f + (2.0 * 1f64.cosh()).ln()).abs() < 1e-12);
        assert!((f + 1.126_928_011_042_972_5).abs() < 1e-12);
    }

    #[test]
    fn xy_two_site_block() {
        let h = build_xy_chain(chain(2), 1.0).unwrap();
        let s = ed_spectrum(&h, EdMode::Full).unwrap();
        close(s.energies(), &[-2.0, 0.0, 0.0, 2.0], 1e-12);
    }

    #[test]
    fn empty_model_has_zero_free_energy() {
        let h = build_xy_chain(chain(1), 1.0).unwrap();
        let s = ed_spectrum(&h, EdMode::Full).unwrap();
        for b in [0.1, 1.0, 10.0] {
            assert_eq!(s.free_energy(Beta::Finite(b), Truncation::Forbid).unwrap(), -(2f64.ln()) / b);
        }
    }

    #[test]
    fn parity_sectors_match_unsymmetrized_matrix() {
        let h = build_tfi(LatticeGeometry::chain(6, Boundary::Periodic).unwrap(), 1.0, 0.7).unwrap();
        let sym = ed_spectrum(&h, EdMode::Full).unwrap();
        let plain = SymmetricMatrix::new(dense_hamiltonian(&h).unwrap()).unwrap().into_eigvalsh().unwrap();
        close(sym.energies(), &plain, 1e-10);
        let xy = build_xy_chain(chain(5), 0.8).unwrap();
        let sym = ed_spectrum(&xy, EdMode::Full).unwrap();
        let plain = SymmetricMatrix::new(dense_hamiltonian(&xy).unwrap()).unwrap().into_eigvalsh().unwrap();
        close(sym.energies(), &plain, 1e-10);
    }

    #[test]
    fn lowest_k_agrees_with_full() {
        let h = build_tfi(chain(12), 1.0, 1.0).unwrap();
        let full = ed_spectrum(&h, EdMode::Full).unwrap();
        let part = ed_spectrum(&h, EdMode::LowestK(6)).unwrap();
        assert!(!part.is_complete());
        assert_eq!(part.source(), SpectrumSource::LanczosPartial);
        close(part.energies(), &full.energies()[..6], 1e-9);
    }

    #[test]
    fn antiferromagnetic_ground_energy_at_zero_field() {
        for l in 2..=8 {
            let h = build_tfi(chain(l), 1.0, 0.0).unwrap();
            let s = ed_spectrum(&h, EdMode::Full).unwrap();
            assert!((s.ground_energy() + (l - 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_free_energy_requires_acknowledgment() {
        let h = build_tfi(chain(4), 1.0, 1.0).unwrap();
        let s = ed_spectrum(&h, EdMode::Full).unwrap().truncated(3).unwrap();
        assert!(s.free_energy(Beta::Finite(1.0), Truncation::Forbid).unwrap_err().is_usage());
        let full = ed_spectrum(&h, EdMode::Full).unwrap();
        let bound = s.free_energy(Beta::Finite(1.0), Truncation::Acknowledge).unwrap();
        assert!(bound >= full.free_energy(Beta::Finite(1.0), Truncation::Forbid).unwrap());
    }

    #[test]
    fn size_caps() {
        let h = build_tfi(chain(15), 1.0, 1.0).unwrap();
        assert!(matches!(ed_spectrum(&h, EdMode::Full), Err(Error::Resource(_))));
        let h = build_tfi(chain(25), 1.0, 1.0).unwrap();
        assert!(matches!(ed_spectrum(&h, EdMode::LowestK(2)), Err(Error::Resource(_))));
    }

    #[test]
    fn ground_state_vector_is_an_eigenvector() {
        let h = build_tfi(chain(8), 1.0, 0.9).unwrap();
        let (e0, v) = ed_ground_state(&h).unwrap();
        let op = SpinOperator::new(&h).unwrap();
        let mut hv = vec![0.0; v.len()];
        op.apply(&v, &mut hv);
        let r: f64 = hv.iter().zip(&v).map(|(a, b)| (a - e0 * b).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-9);
    }
}
