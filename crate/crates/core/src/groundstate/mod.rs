//! Variational ground and excited states by one-site tree sweeps.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::HamiltonianTerms;
use crate::network::{
    expectation, Center, EnvCache, Layout, LocalHamiltonian, LocalOperator, OverlapCache, TreeNetwork,
    TreeTopology,
};
use crate::tensor::{lanczos_lowest, LanczosOptions, SymmetricMatrix};

/// Local problems up to this dimension are diagonalized densely.
pub const DENSE_LOCAL_DIM: usize = 512;
/// Largest admissible overlap with a lower state.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocalSolver {
    Dense,
    /// Dense below [`DENSE_LOCAL_DIM`], Lanczos above with relative residual `tol`.
    Lanczos { tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d_max: usize,
    pub max_sweeps: usize,
    /// Relative energy change per sweep regarded as converged.
    pub energy_tol: f64,
    pub solver: LocalSolver,
    /// Penalty weight for excited states; `10 Σ|coefficients|` when absent.
    pub penalty_weight: Option<f64>,
    pub layout: Layout,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            d_max: 16,
            max_sweeps: 40,
            energy_tol: 1e-9,
            solver: LocalSolver::Lanczos { tol: 1e-10 },
            penalty_weight: None,
            layout: Layout::Tree,
        }
    }
}

impl SweepConfig {
    pub fn with_bond(d_max: usize) -> Self {
        Self { d_max, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::usage("bond dimension must be at least 1"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::usage("at least one sweep is required"));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::usage("energy tolerance must be positive"));
        }
        if let LocalSolver::Lanczos { tol } = self.solver {
            if !(tol > 0.0) {
                return Err(Error::usage("local solver tolerance must be positive"));
            }
        }
        if let Some(w) = self.penalty_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::usage("penalty weight must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct VariationalResult {
    /// Canonical at the root bond, normalized.
    pub net: TreeNetwork,
    pub energy: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

/// `Σ |coefficient|`, an upper bound on the spectral radius.
pub fn spectral_scale(h: &HamiltonianTerms) -> f64 {
    h.terms().iter().map(|t| t.coefficient.abs()).sum()
}

pub fn optimize_ground_state(h: &HamiltonianTerms, cfg: &SweepConfig, seed: u64) -> Result<VariationalResult> {
    let net = initial_network(h, cfg, seed)?;
    sweep(h, cfg, net, &[], 0.0)
}

/// Continues the optimization from an existing network.
pub fn refine_ground_state(h: &HamiltonianTerms, cfg: &SweepConfig, net: TreeNetwork) -> Result<VariationalResult> {
    check_topology(h, &net)?;
    sweep(h, cfg, net, &[], 0.0)
}

pub fn optimize_excited_state(
    h: &HamiltonianTerms,
    cfg: &SweepConfig,
    below: &[VariationalResult],
    seed: u64,
) -> Result<VariationalResult> {
    if below.is_empty() {
        return Err(Error::usage("excited-state search needs at least one lower state"));
    }
    for b in below {
        check_topology(h, &b.net)?;
    }
    let w = cfg.penalty_weight.unwrap_or_else(|| 10.0 * spectral_scale(h).max(1.0));
    let net = initial_network(h, cfg, seed)?;
    let res = sweep(h, cfg, net, below, w)?;
    let worst = below.iter().map(|b| b.net.overlap(&res.net).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let worst = worst.into_iter().fold(0.0, f64::max);
    if worst > ORTHOGONALITY_TOL {
        return Err(Error::Convergence {
            context: format!("excited state keeps overlap {worst:.3e} with a lower state; increase the penalty weight (now {w})"),
            iterations: res.history.len(),
            best_residual: worst,
        });
    }
    let floor = below.iter().map(|b| b.energy).fold(f64::NEG_INFINITY, f64::max);
    if res.energy < floor - 1e-8 {
        return Err(Error::Convergence {
            context: format!("excited energy {} lies below a lower state at {floor}", res.energy),
            iterations: res.history.len(),
            best_residual: floor - res.energy,
        });
    }
    Ok(res)
}

fn check_topology(h: &HamiltonianTerms, net: &TreeNetwork) -> Result<()> {
    if net.topology().geometry() != h.geometry() {
        return Err(Error::usage("network geometry differs from the Hamiltonian's"));
    }
    Ok(())
}

fn initial_network(h: &HamiltonianTerms, cfg: &SweepConfig, seed: u64) -> Result<TreeNetwork> {
    cfg.validate()?;
    let topo = TreeTopology::build(*h.geometry(), cfg.layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TreeNetwork::random(topo, cfg.d_max, &mut rng)
}

struct Penalty {
    ket: TreeNetwork,
    cache: OverlapCache,
}

fn sweep(
    h: &HamiltonianTerms,
    cfg: &SweepConfig,
    mut net: TreeNetwork,
    below: &[VariationalResult],
    weight: f64,
) -> Result<VariationalResult> {
    cfg.validate()?;
    let topo = net.topology().clone();
    let op = LocalOperator::from(h);
    let mut cache = EnvCache::new(op.clone(), &topo)?;
    let mut penalties = below
        .iter()
        .map(|b| {
            let mut ket = b.net.clone();
            ket.canonicalize(Center::Node(topo.tops()[0]))?;
            Ok(Penalty { ket, cache: OverlapCache::new(&topo) })
        })
        .collect::<Result<Vec<_>>>()?;
    let tour = topo.euler_tour().to_vec();
    let mut center = tour[0];
    net.canonicalize(Center::Node(center))?;
    net.normalize()?;

    let scale = spectral_scale(h).max(1e-300);
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for s in 0..cfg.max_sweeps {
        let mut visited = vec![false; topo.n_nodes()];
        let mut energy = f64::NAN;
        for (i, &u) in tour.iter().enumerate() {
            debug_assert_eq!(u, center);
            if !visited[u] {
                visited[u] = true;
                let (e, overlaps) = local_update(&mut net, &mut cache, &mut penalties, u, cfg, weight)?;
                energy = e - weight * overlaps.iter().map(|o| o * o).sum::<f64>();
            }
            if let Some(&v) = tour.get(i + 1) {
                let leg = topo.leg_toward(u, v);
                center = net.shift_center(u, leg)?;
                invalidate(&topo, &mut cache, &mut penalties, u);
                invalidate(&topo, &mut cache, &mut penalties, v);
            }
        }
        debug!("sweep {s}: E = {energy:.15e}");
        if let Some(&prev) = history.last() {
            if below.is_empty() && energy > prev + 1e-10 * prev.abs().max(scale * 1e-3) {
                return Err(Error::Internal(format!("sweep energy rose from {prev} to {energy}")));
            }
            history.push(energy);
            if (energy - prev).abs() <= cfg.energy_tol * energy.abs().max(1e-12) {
                converged = true;
                break;
            }
        } else {
            history.push(energy);
        }
    }
    net.canonicalize(Center::Bond(topo.root_bond()))?;
    net.normalize()?;
    let energy = expectation(&net, &op)?;
    Ok(VariationalResult { net, energy, history, converged })
}

fn invalidate(topo: &TreeTopology, cache: &mut EnvCache, penalties: &mut [Penalty], u: usize) {
    cache.invalidate(topo, u);
    for p in penalties {
        p.cache.invalidate(topo, u);
    }
}

/// Replaces the tensor at the center `u` by the lowest eigenvector of its
/// effective problem. Returns the eigenvalue and the overlaps with the lower states.
fn local_update(
    net: &mut TreeNetwork,
    cache: &mut EnvCache,
    penalties: &mut [Penalty],
    u: usize,
    cfg: &SweepConfig,
    weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut lh: LocalHamiltonian = cache.local(net, u);
    let mut projections = Vec::with_capacity(penalties.len());
    for p in penalties.iter_mut() {
        let v = p.cache.local_vector(net, &p.ket, u);
        lh.add_penalty(weight, v.clone());
        projections.push(v);
    }
    let dim = lh.dim();
    let use_dense = matches!(cfg.solver, LocalSolver::Dense) || dim <= DENSE_LOCAL_DIM;
    let (e, mut x) = if use_dense {
        let eig = SymmetricMatrix::symmetrized(lh.to_dense())?.eigh()?;
        (eig.values[0], eig.vectors.column(0))
    } else {
        let LocalSolver::Lanczos { tol } = cfg.solver else { unreachable!() };
        let opts = LanczosOptions::<f64> {
            tol,
            basis_size: 48,
            max_restarts: 200,
            initial: Some(net.data(u).to_vec()),
            ..Default::default()
        };
        let mut r = lanczos_lowest(|a, b| lh.apply(a, b), dim, 1, &opts)?;
        (r.values[0], r.vectors.swap_remove(0))
    };
    let n: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    x.iter_mut().for_each(|a| *a /= n);
    let overlaps = projections.iter().map(|p| p.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
    let shape = lh.shape;
    net.set_node(u, x, shape)?;
    cache.invalidate(net.topology(), u);
    for p in penalties.iter_mut() {
        p.cache.invalidate(net.topology(), u);
    }
    Ok((e, overlaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_tfi, ed_spectrum, free_fermion_tfi_1d, Boundary, EdMode, LatticeGeometry};
    use crate::network::Gauge;

    fn chain(l: usize) -> LatticeGeometry {
        LatticeGeometry::chain(l, Boundary::Open).unwrap()
    }

    #[test]
    fn two_site_ground_and_excited() {
        let h = build_tfi(chain(2), 1.0, 1.0).unwrap();
        let cfg = SweepConfig::with_bond(2);
        let gs = optimize_ground_state(&h, &cfg, 1).unwrap();
        assert!((gs.energy + 5f64.sqrt()).abs() < 1e-10);
        assert!(matches!(gs.net.gauge(), Gauge::Bond { .. }));
        let ex = optimize_excited_state(&h, &cfg, std::slice::from_ref(&gs), 2).unwrap();
        assert!((ex.energy + 1.0).abs() < 1e-9, "{}", ex.energy);
        assert!(gs.net.overlap(&ex.net).unwrap().abs() < 1e-6);
        let twice = optimize_excited_state(&h, &cfg, &[gs.clone(), gs.clone()], 2).unwrap();
        assert!((twice.energy - ex.energy).abs() < 1e-9);
    }

    #[test]
    fn chain_ground_state_matches_free_fermions() {
        let l = 12;
        let h = build_tfi(chain(l), 1.0, 1.0).unwrap();
        let exact = free_fermion_tfi_1d(l, 1.0, 1.0, Boundary::Open).unwrap().ground_energy();
        let gs = optimize_ground_state(&h, &SweepConfig::with_bond(16), 3).unwrap();
        assert!(gs.converged);
        assert!(gs.energy >= exact - 1e-10);
        assert!(((gs.energy - exact) / exact).abs() < 1e-8, "{} vs {exact}", gs.energy);
        assert!(gs.history.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn paramagnetic_limit() {
        let h = build_tfi(chain(6), 1.0, 50.0).unwrap();
        let gs = optimize_ground_state(&h, &SweepConfig::with_bond(4), 4).unwrap();
        for i in 0..6 {
            let x = LocalOperator::from_term(6, &crate::models::CouplingTerm::new(1.0, vec![(i, crate::models::Pauli::X)]))
                .unwrap();
            assert!(expectation(&gs.net, &x).unwrap() >= 0.999);
        }
    }

    #[test]
    fn square_ground_state_is_variational() {
        let h = build_tfi(LatticeGeometry::square(3, Boundary::Periodic).unwrap(), 1.0, 3.0).unwrap();
        let exact = ed_spectrum(&h, EdMode::Full).unwrap().ground_energy();
        let gs = optimize_ground_state(&h, &SweepConfig::with_bond(8), 5).unwrap();
        assert!(gs.energy >= exact - 1e-9);
        assert!((gs.energy - exact).abs() < 1e-3 * exact.abs());
    }
}
