//! Spin Hamiltonians as local term lists, with exact reference solutions.

mod exact;
mod fermions;
mod hamiltonian;
mod lattice;

pub use exact::{
    dense_hamiltonian, ed_ground_state, ed_spectrum, exact_free_energy, EdMode, ExactSpectrum, FreeEnergyOracle,
    SpectrumSource, SpinOperator, Truncation, DENSE_MATRIX_MAX_SITES, FULL_ED_MAX_SITES, LANCZOS_ED_MAX_SITES,
};
pub use fermions::{free_fermion_tfi_1d, free_fermion_xy_chain, FermionModes};
pub use hamiltonian::{build_tfi, build_xy_chain, CouplingTerm, HamiltonianTerms, ModelTag, Pauli, RealPauli, RealTerm};
pub use lattice::{Boundary, LatticeGeometry, LatticeKind};
