use super::*;
use crate::groundstate::{optimize_excited_state, optimize_ground_state, SweepConfig, VariationalResult};
use crate::models::{build_tfi, dense_hamiltonian, ed_spectrum, Boundary, EdMode, LatticeGeometry, Truncation};
use crate::network::Center;

fn chain(l: usize, g: f64) -> HamiltonianTerms {
    build_tfi(LatticeGeometry::chain(l, Boundary::Open).unwrap(), 1.0, g).unwrap()
}

fn ground(h: &HamiltonianTerms, d: usize) -> VariationalResult {
    optimize_ground_state(h, &SweepConfig::with_bond(d), 7).unwrap()
}

fn spectrum(h: &HamiltonianTerms, d: usize, chi: usize) -> Arc<ReducedSpectrum> {
    let gs = ground(h, d);
    Arc::new(diagonalize(effective_bond_hamiltonian(&gs.net, h).unwrap(), chi).unwrap())
}

fn dense_quadratic(m: &Matrix<f64>, v: &[f64]) -> f64 {
    v.iter().zip(m.matvec(v)).map(|(a, b)| a * b).sum()
}

#[test]
fn full_bond_dimension_reproduces_ed() {
    let h = chain(8, 1.0);
    let spec = spectrum(&h, 16, 256);
    let exact = ed_spectrum(&h, EdMode::Full).unwrap();
    for (a, b) in spec.energies().iter().zip(exact.energies()) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    for beta in [0.1, 1.0, 10.0, 100.0] {
        let b = Beta::new(beta).unwrap();
        let f = spec.ensemble(b).unwrap().free_energy();
        let fe = exact.free_energy(b, Truncation::Forbid).unwrap();
        assert!((f - fe).abs() < 1e-8, "β = {beta}: {f} vs {fe}");
    }
}

#[test]
fn projected_spectrum_is_variational() {
    let h = chain(10, 1.0);
    let spec = spectrum(&h, 4, 16);
    let e0 = ed_spectrum(&h, EdMode::LowestK(1)).unwrap().ground_energy();
    assert!(spec.energies()[0] >= e0 - 1e-6 * e0.abs());
    // the source state lies in the reduced space
    let eff = spec.effective();
    let v = eff.source_vector();
    let e_src = eff.operator().quadratic_form(&v);
    assert!(spec.energies()[0] <= e_src + 1e-10);
}

#[test]
fn reduced_averages_match_physical_embedding() {
    let h = chain(8, 0.8);
    let spec = spectrum(&h, 3, 9);
    let hd = dense_hamiltonian(&h).unwrap();
    let n = 8;
    let mut z_sum = Matrix::zeros(1 << n, 1 << n);
    let mut z_stag = Matrix::zeros(1 << n, 1 << n);
    for s in 0..(1usize << n) {
        let z = |i: usize| if (s >> (n - 1 - i)) & 1 == 0 { 1.0 } else { -1.0 };
        z_sum[(s, s)] = (0..n).map(z).sum::<f64>() / n as f64;
        z_stag[(s, s)] = (0..n).map(|i| if i % 2 == 0 { z(i) } else { -z(i) }).sum::<f64>() / n as f64;
    }
    let ens = spec.ensemble(Beta::new(2.0).unwrap()).unwrap();
    let (mut u, mut m1, mut m2, mut s1, mut s2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, w) in ens.weights().iter().enumerate() {
        let psi = spec.effective().embed(ens.eigenvector(i).unwrap()).unwrap();
        assert!((psi.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
        u += w * dense_quadratic(&hd, &psi);
        let zpsi = z_sum.matvec(&psi);
        m1 += w * psi.iter().zip(&zpsi).map(|(a, b)| a * b).sum::<f64>();
        m2 += w * zpsi.iter().map(|x| x * x).sum::<f64>();
        let spsi = z_stag.matvec(&psi);
        s1 += w * psi.iter().zip(&spsi).map(|(a, b)| a * b).sum::<f64>();
        s2 += w * spsi.iter().map(|x| x * x).sum::<f64>();
    }
    let stag = |k| order_parameter(&ens, k, OrderPattern::Staggered).unwrap();
    assert!((stag(Magnetization::Absolute) - s1.abs()).abs() < 1e-10);
    assert!((stag(Magnetization::Rms) - s2.sqrt()).abs() < 1e-10);
    assert!(s2 > m2, "antiferromagnetic coupling orders along the staggered pattern");
    assert!((ens.internal_energy() - u).abs() < 1e-8);
    let op = LocalOperator::from_hamiltonian(&h);
    assert!((observable_expectation(&ens, &op).unwrap() - u).abs() < 1e-8);
    assert!((magnetization(&ens, Magnetization::Absolute).unwrap() - m1.abs()).abs() < 1e-10);
    assert!((magnetization(&ens, Magnetization::Rms).unwrap() - m2.sqrt()).abs() < 1e-10);
}

#[test]
fn identity_observable_and_weight_limits() {
    let h = chain(6, 1.0);
    let spec = spectrum(&h, 4, 10);
    let mut id = LocalOperator::new(6);
    for i in 0..6 {
        id.add_onsite(1.0 / 6.0, i, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
    }
    let hot = spec.ensemble(Beta::new(1e-12).unwrap()).unwrap();
    assert!((observable_expectation(&hot, &id).unwrap() - 1.0).abs() < 1e-12);
    for w in hot.weights() {
        assert!((w - 0.1).abs() < 1e-9);
    }
    assert!((hot.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let cold = spec.ensemble(Beta::Infinite).unwrap();
    assert_eq!(cold.weights()[0], 1.0);
    assert_eq!(cold.free_energy(), spec.energies()[0]);
    assert_eq!(cold.entropy(), 0.0);
    assert!(cold.log_partition_function().is_none());
    let lnz = spec.ensemble(Beta::new(0.5).unwrap()).unwrap().log_partition_function().unwrap();
    let direct: f64 = spec.energies().iter().map(|e| (-0.5 * e).exp()).sum::<f64>().ln();
    assert!((lnz - direct).abs() < 1e-12);
}

#[test]
fn free_energy_identity_and_chi_monotonicity() {
    let h = chain(8, 1.2);
    let gs = ground(&h, 4);
    let eff = effective_bond_hamiltonian(&gs.net, &h).unwrap();
    let mut prev = f64::INFINITY;
    for chi in [1, 2, 4, 8, 16] {
        let ens = thermal_ensemble(eff.clone(), Beta::new(1.5).unwrap(), chi).unwrap();
        let f = free_energy(&ens);
        let t = 1.0 / 1.5;
        assert!((f - (ens.internal_energy() - t * ens.entropy())).abs() < 1e-9);
        assert!(f <= prev + 1e-12);
        assert!(ens.weights().windows(2).all(|w| w[1] <= w[0]));
        prev = f;
    }
    assert!(thermal_ensemble(eff.clone(), Beta::Infinite, 0).unwrap_err().is_usage());
    assert!(thermal_ensemble(eff, Beta::Infinite, 17).unwrap_err().is_usage());
}

#[test]
fn lanczos_and_dense_levels_agree() {
    let h = chain(10, 1.0);
    let gs = ground(&h, 6);
    let eff = effective_bond_hamiltonian(&gs.net, &h).unwrap();
    let dense = diagonalize_with(eff.clone(), 5, Eigensolver::Dense).unwrap();
    let lanczos = diagonalize_with(eff, 5, Eigensolver::Lanczos).unwrap();
    for (a, b) in dense.energies().iter().zip(lanczos.energies()) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn heat_capacity_of_free_spins_is_schottky() {
    // J = 0: two independent spins with gap 2g
    let g = 0.7;
    let h = chain(2, 0.0);
    let h = build_tfi(*h.geometry(), 0.0, g).unwrap();
    let spec = spectrum(&h, 2, 4);
    let temps: Vec<f64> = (0..=2000).map(|i| 0.6 + 2e-4 * i as f64).collect();
    let rows = thermodynamics(&spec, &temps).unwrap();
    assert!(rows[0].heat_capacity.is_none() && rows.last().unwrap().heat_capacity.is_none());
    let delta = 2.0 * g;
    for r in &rows[1..rows.len() - 1] {
        let x = delta / r.temperature;
        let schottky = 2.0 * x * x * x.exp() / (1.0 + x.exp()).powi(2);
        assert!((r.heat_capacity.unwrap() - schottky).abs() < 1e-6, "T = {}: {:?} vs {schottky}", r.temperature, r.heat_capacity);
    }
    assert!(rows.windows(2).all(|w| w[1].entropy >= w[0].entropy));
    let two = thermodynamics(&spec, &[0.0, 1.0]).unwrap();
    assert!(two.iter().all(|r| r.heat_capacity.is_none()));
    assert_eq!(two[0].entropy, 0.0);
    assert!(thermodynamics(&spec, &[1.0, 0.5]).is_err());
}

#[test]
fn t_max_scan_cases() {
    let t = [0.1, 0.2, 0.3, 0.4];
    let exact = [-1.0, -1.1, -1.2, -1.3];
    assert_eq!(t_max_scan(&t, &exact, &exact, 1e-2).unwrap(), 0.4);
    let m = [-1.0, -1.1005, -1.25, -1.3];
    assert_eq!(t_max_scan(&t, &m, &exact, 1e-2).unwrap(), 0.2);
    let bad = [-2.0, -1.1, -1.2, -1.3];
    assert_eq!(t_max_scan(&t, &bad, &exact, 1e-2).unwrap(), 0.0);
    assert!(t_max_scan(&t, &m[..3], &exact, 1e-2).is_err());
}

#[test]
fn gauge_and_lattice_mismatch_are_usage_errors() {
    let h = chain(6, 1.0);
    let mut net = ground(&h, 4).net;
    net.canonicalize(Center::Node(0)).unwrap();
    assert!(effective_bond_hamiltonian(&net, &h).unwrap_err().is_usage());
    let other = chain(8, 1.0);
    let gs = ground(&h, 4);
    assert!(effective_bond_hamiltonian(&gs.net, &other).unwrap_err().is_usage());
}

#[test]
fn mixture_limits_and_pruning() {
    let h = chain(8, 1.5);
    let cfg = SweepConfig::with_bond(4);
    let gs = optimize_ground_state(&h, &cfg, 3).unwrap();
    let ex = optimize_excited_state(&h, &cfg, std::slice::from_ref(&gs), 5).unwrap();
    let mix = ImprovedMixture::new(&gs, &ex, &h, 16).unwrap();
    let cold = mix.ensemble(Beta::Infinite).unwrap();
    assert!(cold.has_pure_member());
    assert_eq!(cold.weights()[0], 1.0);
    assert_eq!(cold.free_energy(), gs.energy);
    assert!(cold.density_matrix().is_err());
    // H̃₁ holds an image of the ground state below E₁
    let only = excited_only_ansatz(&ex, &h, Beta::Infinite, 16).unwrap();
    assert!(only.free_energy() <= ex.energy + 1e-10);
    assert!(mix.pruned() <= 1);
    let warm = mix.ensemble(Beta::new(2.0).unwrap()).unwrap();
    assert!((warm.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut id = LocalOperator::new(8);
    id.add_onsite(0.125 * 8.0, 0, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
    assert!((observable_expectation(&warm, &id).unwrap() - 1.0).abs() < 1e-12);
    let m = magnetization(&warm, Magnetization::Rms).unwrap();
    assert!(m.is_finite() && m >= 0.0);
    assert!(ImprovedMixture::new(&gs, &gs, &h, 16).unwrap_err().is_usage());
}
