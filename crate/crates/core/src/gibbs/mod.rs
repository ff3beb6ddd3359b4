//! Low-rank Gibbs ensembles on the Schmidt space of a canonical bond.
//!
//! The Hamiltonian is projected on the span of `|A_α⟩|B_β⟩`, where `A_α` and
//! `B_β` are the isometric half-networks on either side of the root bond. The
//! projected operator `H̃` is diagonalized and its lowest `χ` levels carry the
//! Boltzmann weights.

mod mixture;

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HamiltonianTerms, LatticeGeometry, RealPauli};
use crate::network::{bond_operator, collective_moments, Bond, BondOperator, Gauge, LocalOperator, TreeNetwork};
use crate::tensor::{lanczos_lowest, LanczosOptions, Matrix, SymmetricMatrix};
use crate::thermal::{Beta, BoltzmannSum};

pub use mixture::{excited_only_ansatz, improved_mixture, ImprovedMixture, MIXTURE_OVERLAP_TOL, PRUNE_FACTOR};

/// Largest `H̃` dimension diagonalized densely regardless of `χ`.
pub const DENSE_EIGH_MAX_DIM: usize = 4096;
/// Above [`DENSE_EIGH_MAX_DIM`], Lanczos is used only for at most this many levels.
pub const LANCZOS_MAX_LEVELS: usize = 256;
/// Levels whose Boltzmann weight is below this are skipped in observable sums.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-16;

/// State whose Schmidt isometries span the reduced space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "index", rename_all = "lowercase")]
pub enum SourceState {
    Ground,
    Excited(usize),
}

/// `H̃ = U H U†` with `U = Φ_A ⊗ Φ_B`, kept in factorized form.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    operator: BondOperator,
    bond: Bond,
    source: SourceState,
    lambda: Vec<f64>,
    net: Arc<TreeNetwork>,
}

/// Projects `h` on the Schmidt space of a network canonical at its root bond.
pub fn effective_bond_hamiltonian(net: &TreeNetwork, h: &HamiltonianTerms) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::new(net, h, SourceState::Ground)
}

impl EffectiveHamiltonian {
    pub fn new(net: &TreeNetwork, h: &HamiltonianTerms, source: SourceState) -> Result<Self> {
        if h.geometry() != net.topology().geometry() {
            return Err(Error::usage("Hamiltonian and network are defined on different lattices"));
        }
        let Gauge::Bond { bond, lambda } = net.gauge() else {
            return Err(Error::usage("effective Hamiltonian requires a network canonical at a bond"));
        };
        if *bond != net.topology().root_bond() {
            return Err(Error::usage("effective Hamiltonian is built at the root bond"));
        }
        let operator = bond_operator(net, &LocalOperator::from_hamiltonian(h))?;
        let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::usage("effective Hamiltonian of the zero state"));
        }
        Ok(Self {
            operator,
            bond: *bond,
            source,
            lambda: lambda.iter().map(|l| l / norm).collect(),
            net: Arc::new(net.clone()),
        })
    }

    pub fn bond(&self) -> Bond {
        self.bond
    }

    pub fn source(&self) -> SourceState {
        self.source
    }

    /// `(D_A, D_B)`
    pub fn extents(&self) -> (usize, usize) {
        (self.operator.dim(), self.operator.dim())
    }

    pub fn dim(&self) -> usize {
        self.operator.dim() * self.operator.dim()
    }

    pub fn operator(&self) -> &BondOperator {
        &self.operator
    }

    pub fn network(&self) -> &Arc<TreeNetwork> {
        &self.net
    }

    /// Normalized Schmidt values of the source state on the bond.
    pub fn schmidt_values(&self) -> &[f64] {
        &self.lambda
    }

    /// The source state in the reduced basis: `v[α D + β] = λ_α δ_αβ`.
    pub fn source_vector(&self) -> Vec<f64> {
        let d = self.lambda.len();
        let mut v = vec![0.0; d * d];
        for (a, l) in self.lambda.iter().enumerate() {
            v[a * d + a] = *l;
        }
        v
    }

    /// Dense symmetric `D² x D²` matrix, row index `α D + β`.
    pub fn to_matrix(&self) -> Result<SymmetricMatrix<f64>> {
        SymmetricMatrix::new(self.operator.to_dense())
    }

    /// `y = H̃ x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.operator.apply(x, y)
    }

    /// Physical `2^N` vector of a reduced-space vector (small `N` only).
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.operator.dim();
        if x.len() != d * d {
            return Err(Error::dim(format!("reduced vector of length {} for dimension {}", x.len(), d * d)));
        }
        self.net.embed_bond_matrix(&Matrix::from_vec(d, d, x.to_vec())?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eigensolver {
    Dense,
    Lanczos,
}

/// The `χ` lowest eigenpairs of `H̃`.
#[derive(Clone, Debug)]
pub struct ReducedSpectrum {
    eff: EffectiveHamiltonian,
    energies: Vec<f64>,
    /// Row `k` is the `k`-th eigenvector.
    vectors: Matrix<f64>,
    solver: Eigensolver,
}

/// Dense `eigh` when `dim ≤ DENSE_EIGH_MAX_DIM` or `χ > LANCZOS_MAX_LEVELS`,
/// Lanczos otherwise.
pub fn diagonalize(eff: EffectiveHamiltonian, chi: usize) -> Result<ReducedSpectrum> {
    let dim = eff.dim();
    let solver = if dim <= DENSE_EIGH_MAX_DIM || chi > LANCZOS_MAX_LEVELS {
        Eigensolver::Dense
    } else {
        Eigensolver::Lanczos
    };
    diagonalize_with(eff, chi, solver)
}

/// Like [`diagonalize`] with an explicit eigensolver.
pub fn diagonalize_with(eff: EffectiveHamiltonian, chi: usize, solver: Eigensolver) -> Result<ReducedSpectrum> {
    let dim = eff.dim();
    if chi == 0 || chi > dim {
        return Err(Error::usage(format!("retained rank χ = {chi} must lie in 1..={dim}")));
    }
    if solver == Eigensolver::Dense {
        let (mut energies, vectors) = eff.to_matrix()?.into_eigh_rows()?;
        energies.truncate(chi);
        let mut data = vectors.into_vec();
        data.truncate(chi * dim);
        data.shrink_to_fit();
        let vectors = Matrix::from_vec(chi, dim, data)?;
        return Ok(ReducedSpectrum { eff, energies, vectors, solver: Eigensolver::Dense });
    }
    let opts = LanczosOptions { initial: Some(eff.source_vector()), ..LanczosOptions::default() };
    let res = lanczos_lowest(|x, y| eff.apply(x, y), dim, chi, &opts)?;
    let mut data = Vec::with_capacity(chi * dim);
    for v in &res.vectors {
        data.extend_from_slice(v);
    }
    Ok(ReducedSpectrum {
        eff,
        energies: res.values,
        vectors: Matrix::from_vec(chi, dim, data)?,
        solver: Eigensolver::Lanczos,
    })
}

impl ReducedSpectrum {
    pub fn effective(&self) -> &EffectiveHamiltonian {
        &self.eff
    }

    /// Ascending `Ẽ_k`.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn chi(&self) -> usize {
        self.energies.len()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        self.vectors.row(k)
    }

    pub fn solver(&self) -> Eigensolver {
        self.solver
    }

    /// `⟨Ẽ_k|Õ|Ẽ_k⟩` for the listed levels.
    pub fn level_values(&self, o: &BondOperator, levels: &[usize]) -> Result<Vec<f64>> {
        if o.dim() != self.eff.operator.dim() {
            return Err(Error::dim("observable projected on a different bond space"));
        }
        Ok(levels.iter().map(|&k| o.quadratic_form(self.vector(k))).collect())
    }
}

/// Produces ensembles of one fixed spectrum at any temperature.
pub trait EnsembleFactory {
    fn ensemble(&self, beta: Beta) -> Result<ThermalEnsemble>;
}

impl EnsembleFactory for Arc<ReducedSpectrum> {
    fn ensemble(&self, beta: Beta) -> Result<ThermalEnsemble> {
        let levels: Vec<usize> = (0..self.chi()).collect();
        ThermalEnsemble::assemble(Arc::clone(self), levels, None, beta)
    }
}

/// Pure state added on top of the reduced-space levels.
#[derive(Clone, Debug)]
pub(crate) struct PureMember {
    pub energy: f64,
    pub net: Arc<TreeNetwork>,
}

/// `ρ̃ = Σ_k w_k |Ẽ_k⟩⟨Ẽ_k|`, optionally preceded by a pure ground-state member.
#[derive(Clone, Debug)]
pub struct ThermalEnsemble {
    beta: Beta,
    spectrum: Arc<ReducedSpectrum>,
    levels: Vec<usize>,
    pure: Option<PureMember>,
    /// Pure member first when present, then `levels` in order.
    energies: Vec<f64>,
    sum: BoltzmannSum,
}

/// Diagonalizes `H̃` and weights its `χ` lowest levels at `beta`.
pub fn thermal_ensemble(eff: EffectiveHamiltonian, beta: Beta, chi: usize) -> Result<ThermalEnsemble> {
    Arc::new(diagonalize(eff, chi)?).ensemble(beta)
}

/// `F = −T ln Z̃`; the lowest retained level at `β = ∞`.
pub fn free_energy(ens: &ThermalEnsemble) -> f64 {
    ens.free_energy()
}

impl ThermalEnsemble {
    pub(crate) fn assemble(
        spectrum: Arc<ReducedSpectrum>,
        levels: Vec<usize>,
        pure: Option<PureMember>,
        beta: Beta,
    ) -> Result<Self> {
        let mut energies: Vec<f64> = pure.iter().map(|p| p.energy).collect();
        energies.extend(levels.iter().map(|&k| spectrum.energies[k]));
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Internal("ensemble members are not ordered by energy".into()));
        }
        let sum = BoltzmannSum::new(&energies, beta)?;
        Ok(Self { beta, spectrum, levels, pure, energies, sum })
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    /// Number of members.
    pub fn chi(&self) -> usize {
        self.energies.len()
    }

    /// Member energies, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Normalized weights aligned with [`energies`](Self::energies), nonincreasing.
    pub fn weights(&self) -> &[f64] {
        &self.sum.weights
    }

    pub fn spectrum(&self) -> &Arc<ReducedSpectrum> {
        &self.spectrum
    }

    /// Whether a pure ground-state member precedes the reduced-space levels.
    pub fn has_pure_member(&self) -> bool {
        self.pure.is_some()
    }

    /// Reduced-space eigenvector of member `i`; `None` for the pure member.
    pub fn eigenvector(&self, i: usize) -> Option<&[f64]> {
        let offset = usize::from(self.pure.is_some());
        i.checked_sub(offset).and_then(|j| self.levels.get(j)).map(|&k| self.spectrum.vector(k))
    }

    /// `ln Z̃`; `None` at `β = ∞`.
    pub fn log_partition_function(&self) -> Option<f64> {
        match self.beta {
            Beta::Finite(b) => Some(self.sum.log_z_shifted - b * self.sum.e_min),
            Beta::Infinite => None,
        }
    }

    pub fn free_energy(&self) -> f64 {
        self.sum.free_energy(self.beta)
    }

    /// `U = Tr(H̃ ρ̃)`
    pub fn internal_energy(&self) -> f64 {
        self.sum.mean(&self.energies)
    }

    /// `S = −Σ w ln w`
    pub fn entropy(&self) -> f64 {
        self.sum.entropy()
    }

    /// `Σ_k w_k o_k` given `o_k = ⟨Ẽ_k|Õ|Ẽ_k⟩` for every spectrum level and the
    /// pure-member value when present.
    pub fn average(&self, level_values: &[f64], pure_value: Option<f64>) -> Result<f64> {
        if level_values.len() < self.spectrum.chi() {
            return Err(Error::dim("one value per spectrum level is required"));
        }
        let w = self.weights();
        let offset = usize::from(self.pure.is_some());
        let mut acc = 0.0;
        if offset == 1 {
            let p = pure_value.ok_or_else(|| Error::usage("ensemble has a pure member without a value"))?;
            acc += w[0] * p;
        }
        for (j, &k) in self.levels.iter().enumerate() {
            acc += w[j + offset] * level_values[k];
        }
        Ok(acc)
    }

    /// Spectrum levels whose weight is not negligible.
    fn active_levels(&self) -> Vec<usize> {
        let offset = usize::from(self.pure.is_some());
        let w = self.weights();
        self.levels.iter().enumerate().filter(|(j, _)| w[j + offset] > NEGLIGIBLE_WEIGHT).map(|(_, &k)| k).collect()
    }

    /// `Σ_k w_k ⟨Ẽ_k|Õ|Ẽ_k⟩` for a projected operator, with the pure-member value.
    fn weighted(&self, o: &BondOperator, pure_value: Option<f64>) -> Result<f64> {
        let active = self.active_levels();
        let values = self.spectrum.level_values(o, &active)?;
        let mut full = vec![0.0; self.spectrum.chi()];
        for (k, v) in active.into_iter().zip(values) {
            full[k] = v;
        }
        self.average(&full, pure_value)
    }

    /// Dense `ρ̃` in the `(α, β)` basis. Not defined with a pure member, which
    /// lives outside this basis.
    pub fn density_matrix(&self) -> Result<Matrix<f64>> {
        if self.pure.is_some() {
            return Err(Error::usage("density matrix of a mixture with a pure member is not in one reduced basis"));
        }
        let dim = self.spectrum.eff.dim();
        let mut rho = Matrix::zeros(dim, dim);
        let r = rho.as_mut_slice();
        for (j, &k) in self.levels.iter().enumerate() {
            let w = self.weights()[j];
            if w <= NEGLIGIBLE_WEIGHT {
                continue;
            }
            let v = self.spectrum.vector(k);
            for (a, va) in v.iter().enumerate() {
                let s = w * va;
                if s == 0.0 {
                    continue;
                }
                for (x, vb) in r[a * dim..(a + 1) * dim].iter_mut().zip(v) {
                    *x += s * vb;
                }
            }
        }
        Ok(rho)
    }
}

/// `Tr(ρ_β O)` through the operator projected on the same half-networks.
pub fn observable_expectation(ens: &ThermalEnsemble, op: &LocalOperator) -> Result<f64> {
    let o = bond_operator(ens.spectrum.eff.network(), op)?;
    let pure = match &ens.pure {
        Some(p) => Some(crate::network::expectation(&p.net, op)?),
        None => None,
    };
    ens.weighted(&o, pure)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnetization {
    /// `|Tr(ρ M)|`
    Absolute,
    /// `√Tr(ρ M²)`, insensitive to the sign of the order.
    Rms,
}

/// Site weights of `M = (1/N) Σ_i s_i Z_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderPattern {
    /// `s_i = 1`
    #[default]
    Uniform,
    /// `s_i = (-1)^(x+y)`, the order parameter of antiferromagnetic `J > 0`.
    Staggered,
}

impl OrderPattern {
    /// The pattern along which `J Σ Z_i Z_j` orders.
    pub fn for_coupling(j: f64) -> Self {
        if j > 0.0 {
            OrderPattern::Staggered
        } else {
            OrderPattern::Uniform
        }
    }

    fn weights(self, geometry: &LatticeGeometry) -> Result<Vec<f64>> {
        let n = geometry.n_sites();
        match self {
            OrderPattern::Uniform => Ok(vec![1.0; n]),
            OrderPattern::Staggered => (0..n)
                .map(|i| {
                    geometry
                        .neel_sign(i)
                        .ok_or_else(|| Error::usage("staggered order needs a bipartite lattice (even L when periodic)"))
                })
                .collect(),
        }
    }
}

/// Uniform `|⟨Z⟩|` or its RMS variant; see [`order_parameter`].
pub fn magnetization(ens: &ThermalEnsemble, kind: Magnetization) -> Result<f64> {
    order_parameter(ens, kind, OrderPattern::Uniform)
}

pub fn order_parameter(ens: &ThermalEnsemble, kind: Magnetization, pattern: OrderPattern) -> Result<f64> {
    let z = RealPauli::Z.matrix();
    let net = ens.spectrum.eff.network();
    let w = pattern.weights(net.topology().geometry())?;
    let (m1, m2) = collective_moments(net, z, &w)?;
    let pure = match &ens.pure {
        Some(p) => {
            let Gauge::Bond { lambda, .. } = p.net.gauge() else {
                return Err(Error::usage("pure member must be bond-canonical"));
            };
            let (p1, p2) = collective_moments(&p.net, z, &w)?;
            let norm: f64 = lambda.iter().map(|l| l * l).sum();
            let o = if kind == Magnetization::Absolute { p1 } else { p2 };
            Some(o.diagonal_expectation(lambda) / norm)
        }
        None => None,
    };
    match kind {
        Magnetization::Absolute => Ok(ens.weighted(&m1, pure)?.abs()),
        Magnetization::Rms => Ok(ens.weighted(&m2, pure)?.max(0.0).sqrt()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    pub temperature: f64,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    /// Centered difference of the energy; absent at the grid ends.
    pub heat_capacity: Option<f64>,
}

/// Checks a temperature grid: finite, nonnegative, strictly ascending.
pub fn validate_temperatures(temperatures: &[f64]) -> Result<()> {
    if temperatures.is_empty() {
        return Err(Error::usage("empty temperature grid"));
    }
    if temperatures.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::usage("temperatures must be finite and nonnegative"));
    }
    if temperatures.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("temperature grid must be strictly ascending"));
    }
    Ok(())
}

/// `(T, F, U, S, C)` over an ascending temperature grid (`T = 0` is `β = ∞`).
pub fn thermodynamics<E: EnsembleFactory + ?Sized>(source: &E, temperatures: &[f64]) -> Result<Vec<ThermoPoint>> {
    validate_temperatures(temperatures)?;
    let mut rows = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let ens = source.ensemble(Beta::from_temperature(t)?)?;
        rows.push(ThermoPoint {
            temperature: t,
            free_energy: ens.free_energy(),
            energy: ens.internal_energy(),
            entropy: ens.entropy(),
            heat_capacity: None,
        });
    }
    for i in 1..rows.len().saturating_sub(1) {
        let (lo, hi) = (rows[i - 1], rows[i + 1]);
        rows[i].heat_capacity = Some((hi.energy - lo.energy) / (hi.temperature - lo.temperature));
    }
    Ok(rows)
}

/// Largest grid temperature up to which `|F_m − F_e| / |F_e| < eps` holds at
/// every grid point; `0` when the first point already fails.
pub fn t_max_scan(temperatures: &[f64], f_method: &[f64], f_exact: &[f64], eps: f64) -> Result<f64> {
    validate_temperatures(temperatures)?;
    if f_method.len() != temperatures.len() || f_exact.len() != temperatures.len() {
        return Err(Error::dim("free-energy curves must share the temperature grid"));
    }
    if !(eps > 0.0) {
        return Err(Error::usage("threshold must be positive"));
    }
    let mut t_max = None;
    for ((t, fm), fe) in temperatures.iter().zip(f_method).zip(f_exact) {
        let rel = ((fm - fe) / fe).abs();
        if !(rel < eps) {
            break;
        }
        t_max = Some(*t);
    }
    Ok(t_max.unwrap_or_else(|| {
        warn!("relative free-energy error exceeds {eps} already at T = {}", temperatures[0]);
        0.0
    }))
}

#[cfg(test)]
mod tests;
