//! Ensembles sourced from a variational excited state, alone or mixed with
//! the ground state.

use std::sync::Arc;

use super::{diagonalize, EffectiveHamiltonian, EnsembleFactory, PureMember, ReducedSpectrum, SourceState, ThermalEnsemble};
use crate::error::{Error, Result};
use crate::groundstate::{VariationalResult, ORTHOGONALITY_TOL};
use crate::models::HamiltonianTerms;
use crate::thermal::Beta;

/// Largest admitted overlap between the mixed ground and excited states.
pub const MIXTURE_OVERLAP_TOL: f64 = 1e-4;
/// Levels of `H̃₁` more than `PRUNE_FACTOR * ORTHOGONALITY_TOL` (relative)
/// below `E₁` stand for the ground state and are dropped from the mixture.
pub const PRUNE_FACTOR: f64 = 10.0;

/// `e^{−βE₀}|E₀⟩⟨E₀| + Σ_k e^{−βẼ_k} U₁†|Ẽ_k⟩⟨Ẽ_k|U₁`, normalized.
#[derive(Clone, Debug)]
pub struct ImprovedMixture {
    ground: PureMember,
    spectrum: Arc<ReducedSpectrum>,
    kept: Vec<usize>,
}

impl ImprovedMixture {
    pub fn new(ground: &VariationalResult, excited: &VariationalResult, h: &HamiltonianTerms, chi: usize) -> Result<Self> {
        let overlap = ground.net.overlap(&excited.net)?.abs();
        if overlap > MIXTURE_OVERLAP_TOL {
            return Err(Error::usage(format!(
                "ground and excited states overlap by {overlap:.3e} > {MIXTURE_OVERLAP_TOL:e}"
            )));
        }
        if excited.energy < ground.energy {
            return Err(Error::usage("excited-state energy lies below the ground-state energy"));
        }
        let eff = EffectiveHamiltonian::new(&excited.net, h, SourceState::Excited(1))?;
        let spectrum = Arc::new(diagonalize(eff, chi)?);
        // By interlacing at most one Ritz value of H̃₁ lies below E₁.
        let cut = excited.energy - PRUNE_FACTOR * ORTHOGONALITY_TOL * excited.energy.abs().max(1.0);
        let kept = (0..spectrum.chi()).filter(|&k| spectrum.energies()[k] >= cut).collect();
        Ok(Self { ground: PureMember { energy: ground.energy, net: Arc::new(ground.net.clone()) }, spectrum, kept })
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground.energy
    }

    pub fn spectrum(&self) -> &Arc<ReducedSpectrum> {
        &self.spectrum
    }

    /// Number of `H̃₁` levels dropped as ground-state images.
    pub fn pruned(&self) -> usize {
        self.spectrum.chi() - self.kept.len()
    }
}

impl EnsembleFactory for ImprovedMixture {
    fn ensemble(&self, beta: Beta) -> Result<ThermalEnsemble> {
        ThermalEnsemble::assemble(Arc::clone(&self.spectrum), self.kept.clone(), Some(self.ground.clone()), beta)
    }
}

pub fn improved_mixture(
    ground: &VariationalResult,
    excited: &VariationalResult,
    h: &HamiltonianTerms,
    beta: Beta,
    chi: usize,
) -> Result<ThermalEnsemble> {
    ImprovedMixture::new(ground, excited, h, chi)?.ensemble(beta)
}

/// `ρ ∝ U₁† e^{−βH̃₁} U₁` from the excited state's isometries alone.
pub fn excited_only_ansatz(excited: &VariationalResult, h: &HamiltonianTerms, beta: Beta, chi: usize) -> Result<ThermalEnsemble> {
    let eff = EffectiveHamiltonian::new(&excited.net, h, SourceState::Excited(1))?;
    Arc::new(diagonalize(eff, chi)?).ensemble(beta)
}
