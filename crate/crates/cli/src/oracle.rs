//! Exact references: free fermions for open chains, exact diagonalization
//! for small lattices.

use ttn_gibbs::models::{
    ed_spectrum, free_fermion_tfi_1d, free_fermion_xy_chain, Boundary, EdMode, ExactSpectrum, FermionModes,
    HamiltonianTerms, LatticeKind, Truncation, FULL_ED_MAX_SITES, LANCZOS_ED_MAX_SITES,
};
use ttn_gibbs::Beta;

use crate::config::{ModelBlock, ModelKind};

pub enum Oracle {
    Fermions(FermionModes),
    /// Complete spectrum.
    FullEd(ExactSpectrum),
    /// Lowest levels only; no free energy.
    PartialEd(ExactSpectrum),
}

impl Oracle {
    /// The best available reference for a model, if any. `levels` bounds the
    /// partial ED used for lattices above the full-ED cap.
    pub fn for_model(m: &ModelBlock, h: &HamiltonianTerms, levels: usize) -> ttn_gibbs::Result<Option<Self>> {
        if m.lattice == LatticeKind::Chain && m.boundary == Boundary::Open {
            let modes = match m.kind {
                ModelKind::Tfi => free_fermion_tfi_1d(m.l, m.j, m.g, m.boundary)?,
                ModelKind::Xy => free_fermion_xy_chain(m.l, m.coupling, m.boundary)?,
            };
            return Ok(Some(Oracle::Fermions(modes)));
        }
        let n = h.n_sites();
        if n <= FULL_ED_MAX_SITES {
            return Ok(Some(Oracle::FullEd(ed_spectrum(h, EdMode::Full)?)));
        }
        if n <= LANCZOS_ED_MAX_SITES {
            return Ok(Some(Oracle::PartialEd(ed_spectrum(h, EdMode::LowestK(levels.min(1 << n)))?)));
        }
        Ok(None)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Oracle::Fermions(_) => "free-fermion",
            Oracle::FullEd(_) => "full-ed",
            Oracle::PartialEd(_) => "lanczos-ed",
        }
    }

    /// Lowest `k` levels (fewer if the reference holds fewer).
    pub fn levels(&self, k: usize) -> Vec<f64> {
        match self {
            Oracle::Fermions(m) => m.lowest_levels(k),
            Oracle::FullEd(s) | Oracle::PartialEd(s) => s.energies().iter().take(k).copied().collect(),
        }
    }

    pub fn free_energy(&self, beta: Beta) -> Option<f64> {
        match self {
            Oracle::Fermions(m) => Some(m.free_energy(beta)),
            Oracle::FullEd(s) => s.free_energy(beta, Truncation::Forbid).ok(),
            Oracle::PartialEd(_) => None,
        }
    }

    /// Free energy of the exact mixture over the lowest `k` levels.
    pub fn truncated_free_energy(&self, k: usize, beta: Beta) -> ttn_gibbs::Result<f64> {
        let spec = match self {
            Oracle::Fermions(m) => m.truncated_spectrum(k)?,
            Oracle::FullEd(s) | Oracle::PartialEd(s) => s.truncated(k)?,
        };
        spec.free_energy(beta, Truncation::Acknowledge)
    }
}
