//! Task execution: ground state, effective-Hamiltonian spectrum, thermal
//! tables, negativity, fits and comparisons with exact references.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;
use ttn_gibbs::entanglement::{
    fit_cft_intermediate, fit_low_temperature, log_negativity, negativity_vs_temperature, FitResult,
    ReducedDensityMatrix, Window,
};
use ttn_gibbs::gibbs::{
    diagonalize, effective_bond_hamiltonian, order_parameter, t_max_scan, thermodynamics, EnsembleFactory,
    ImprovedMixture, ReducedSpectrum, ThermoPoint,
};
use ttn_gibbs::groundstate::{optimize_excited_state, optimize_ground_state, LocalSolver, SweepConfig, VariationalResult};
use ttn_gibbs::models::{build_tfi, build_xy_chain, HamiltonianTerms, LatticeGeometry};
use ttn_gibbs::network::{load_snapshot, save_snapshot};
use ttn_gibbs::Beta;

use crate::config::{AnsatzBlock, FitBlock, ModelKind, RunConfig, SchemaError, Task};
use crate::manifest::{sha256_hex, Manifest, Status, TaskRecord};
use crate::oracle::Oracle;
use crate::table::{Cell, Table};

pub fn build_hamiltonian(cfg: &RunConfig) -> ttn_gibbs::Result<HamiltonianTerms> {
    let m = &cfg.model;
    let geometry = LatticeGeometry::new(m.lattice, m.l, m.boundary)?;
    match m.kind {
        ModelKind::Tfi => build_tfi(geometry, m.j, m.g),
        ModelKind::Xy => build_xy_chain(geometry, m.coupling),
    }
}

fn sweep_config(a: &AnsatzBlock, d: usize) -> SweepConfig {
    SweepConfig {
        d_max: d,
        max_sweeps: a.max_sweeps,
        energy_tol: a.energy_tol,
        solver: LocalSolver::Lanczos { tol: a.solver_tol },
        penalty_weight: None,
        layout: a.layout,
    }
}

pub struct Run {
    cfg: RunConfig,
    h: HamiltonianTerms,
    out_dir: PathBuf,
    snap_dir: PathBuf,
    pub manifest: Manifest,
    oracle: Option<Option<Oracle>>,
    ground: Option<VariationalResult>,
    spectrum: Option<Arc<ReducedSpectrum>>,
    thermal: Option<Vec<ThermoPoint>>,
    negativity: Option<Vec<(f64, f64, f64)>>,
}

fn output_root() -> PathBuf {
    std::env::var_os("GIBBS_OUTPUT_ROOT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

impl Run {
    pub fn new(cfg: RunConfig, config_bytes: &[u8]) -> anyhow::Result<Self> {
        let h = build_hamiltonian(&cfg)?;
        let root = output_root();
        let out_dir = root.join(&cfg.output.dir);
        let snap_dir = cfg.output.snapshot_dir.as_ref().map_or_else(|| root.join("snapshots"), |d| root.join(d));
        std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let manifest = Manifest::new(serde_json::to_value(&cfg)?, config_bytes);
        Ok(Self {
            cfg,
            h,
            out_dir,
            snap_dir,
            manifest,
            oracle: None,
            ground: None,
            spectrum: None,
            thermal: None,
            negativity: None,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Runs `tasks` in dependency order; the manifest is written in every case.
    pub fn execute(&mut self, tasks: &[Task]) -> anyhow::Result<()> {
        let mut order = tasks.to_vec();
        order.sort();
        order.dedup();
        let mut failure = None;
        for task in order {
            if failure.is_some() {
                self.manifest.tasks.push(TaskRecord {
                    name: task.name().into(),
                    status: Status::NotRun,
                    seconds: 0.0,
                    error: None,
                });
                continue;
            }
            info!("task {}", task.name());
            let start = Instant::now();
            let res = self.run_task(task);
            let seconds = start.elapsed().as_secs_f64();
            let (status, error) = match &res {
                Ok(()) => (Status::Complete, None),
                Err(e) => (Status::Failed, Some(format!("{e:#}"))),
            };
            self.manifest.tasks.push(TaskRecord { name: task.name().into(), status, seconds, error });
            if let Err(e) = res {
                failure = Some(e.context(format!("task `{}` failed", task.name())));
            }
        }
        self.manifest.complete = failure.is_none();
        self.manifest.write(&self.out_dir.join("manifest.json"))?;
        failure.map_or(Ok(()), Err)
    }

    fn run_task(&mut self, task: Task) -> anyhow::Result<()> {
        match task {
            Task::Oracle => self.task_oracle(),
            Task::Ground => self.ground().map(|_| ()),
            Task::Spectrum => self.task_spectrum(),
            Task::Thermal => self.thermal().map(|_| ()),
            Task::Tmax => self.task_tmax(),
            Task::Magnetization => self.task_magnetization(),
            Task::Negativity => self.negativity().map(|_| ()),
            Task::Fit => self.task_fit(),
            Task::Mixture => self.task_mixture(),
            Task::Convergence => self.task_convergence(),
        }
    }

    fn emit(&mut self, name: &str, table: &Table) -> anyhow::Result<()> {
        let bytes = table.write(&self.out_dir.join(name))?;
        self.manifest.add_file(name, &bytes);
        Ok(())
    }

    fn temperatures(&self) -> anyhow::Result<Vec<f64>> {
        Ok(self.cfg.temperatures()?)
    }

    fn oracle(&mut self) -> anyhow::Result<Option<&Oracle>> {
        if self.oracle.is_none() {
            let o = Oracle::for_model(&self.cfg.model, &self.h, self.cfg.spectrum.levels)?;
            if let Some(o) = &o {
                self.manifest.note("oracle", o.name());
            }
            self.oracle = Some(o);
        }
        Ok(self.oracle.as_ref().and_then(|o| o.as_ref()))
    }

    fn require_oracle(&mut self, what: &str) -> anyhow::Result<&Oracle> {
        let path = format!("model (needed by {what})");
        self.oracle()?.ok_or_else(|| {
            SchemaError { path, message: "no exact reference for this lattice: open chains or N ≤ 24 only".into() }
                .into()
        })
    }

    fn task_oracle(&mut self) -> anyhow::Result<()> {
        let levels = self.cfg.spectrum.levels;
        let temps = if self.cfg.thermal.is_some() { Some(self.temperatures()?) } else { None };
        let oracle = self.require_oracle("oracle")?;
        let mut spec = Table::new(&["k", "energy"]);
        for (k, e) in oracle.levels(levels).into_iter().enumerate() {
            spec.push(vec![k.into(), e.into()]);
        }
        let mut thermal = None;
        if let Some(temps) = temps {
            let mut t = Table::new(&["T", "F"]);
            for &temp in &temps {
                if let Some(f) = oracle.free_energy(Beta::from_temperature(temp)?) {
                    t.push(vec![temp.into(), f.into()]);
                }
            }
            thermal = Some(t);
        }
        self.emit("oracle_spectrum.csv", &spec)?;
        if let Some(t) = thermal {
            self.emit("oracle_thermal.csv", &t)?;
        }
        Ok(())
    }

    fn snapshot_key(&self, d: usize, tag: &str) -> anyhow::Result<String> {
        let mut ansatz = serde_json::to_value(&self.cfg.ansatz)?;
        ansatz["D"] = json!(d);
        ansatz.as_object_mut().map(|o| o.remove("D_list"));
        let blob = serde_json::to_vec(&json!({ "model": self.cfg.model, "ansatz": ansatz, "state": tag }))?;
        Ok(sha256_hex(&blob)[..16].to_string())
    }

    fn load_state(&self, path: &Path, key: &str) -> Option<VariationalResult> {
        if !self.cfg.output.reuse_snapshots || !path.exists() {
            return None;
        }
        match load_snapshot(path) {
            Ok((net, meta)) if meta["key"] == json!(key) => Some(VariationalResult {
                net,
                energy: meta["energy"].as_f64()?,
                history: serde_json::from_value(meta["history"].clone()).ok()?,
                converged: meta["converged"].as_bool()?,
            }),
            Ok(_) => {
                warn!("snapshot {} belongs to another configuration; recomputing", path.display());
                None
            }
            Err(e) => {
                warn!("snapshot {} unreadable ({e}); recomputing", path.display());
                None
            }
        }
    }

    fn store_state(&self, path: &Path, key: &str, r: &VariationalResult) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.snap_dir).with_context(|| format!("creating {}", self.snap_dir.display()))?;
        let meta = json!({ "key": key, "energy": r.energy, "history": r.history, "converged": r.converged });
        save_snapshot(&r.net, path, &meta)?;
        Ok(())
    }

    /// Variational state `tag` ("ground" or "excited") at bond dimension `d`,
    /// from a snapshot when one matches.
    fn variational(&mut self, d: usize, tag: &str, below: &[VariationalResult]) -> anyhow::Result<VariationalResult> {
        let key = self.snapshot_key(d, tag)?;
        let path = self.snap_dir.join(format!("{tag}-{key}.ttnsnap"));
        let label = format!("{tag}_D{d}");
        if let Some(r) = self.load_state(&path, &key) {
            info!("reusing {}", path.display());
            self.manifest.note(&format!("{label}_snapshot"), "reused");
            return Ok(r);
        }
        let cfg = sweep_config(&self.cfg.ansatz, d);
        let seed = self.cfg.ansatz.seed;
        let r = if below.is_empty() {
            optimize_ground_state(&self.h, &cfg, seed)?
        } else {
            optimize_excited_state(&self.h, &cfg, below, seed.wrapping_add(1))?
        };
        if !r.converged {
            warn!("{label}: sweeps stopped before the energy tolerance was met");
        }
        self.store_state(&path, &key, &r)?;
        self.manifest.note(&format!("{label}_snapshot"), "created");
        Ok(r)
    }

    fn ground(&mut self) -> anyhow::Result<&VariationalResult> {
        if self.ground.is_none() {
            let d = self.cfg.ansatz.d;
            let r = self.variational(d, "ground", &[])?;
            let mut t = Table::new(&["sweep", "energy"]);
            for (i, e) in r.history.iter().enumerate() {
                t.push(vec![(i + 1).into(), (*e).into()]);
            }
            self.emit("ground.csv", &t)?;
            self.manifest.note("ground_energy", r.energy);
            self.manifest.note("ground_converged", r.converged);
            self.manifest.note("ground_sweeps", r.history.len());
            if let Some(o) = self.oracle()? {
                if let Some(&e0) = o.levels(1).first() {
                    self.manifest.note("ground_energy_exact", e0);
                    self.manifest.note("ground_energy_rel_error", ((r.energy - e0) / e0).abs());
                }
            }
            self.ground = Some(r);
        }
        Ok(self.ground.as_ref().expect("set above"))
    }

    /// χ clamped to the reduced dimension.
    fn effective_chi(&mut self, dim: usize, requested: usize, label: &str) -> usize {
        if requested > dim {
            warn!("{label}: χ = {requested} exceeds the reduced dimension {dim}; using {dim}");
        }
        let chi = requested.min(dim);
        self.manifest.note(&format!("{label}_chi_effective"), chi);
        chi
    }

    fn spectrum_of(&mut self, state: &VariationalResult, label: &str) -> anyhow::Result<Arc<ReducedSpectrum>> {
        let eff = effective_bond_hamiltonian(&state.net, &self.h)?;
        let requested = match &self.cfg.thermal {
            Some(t) => t.chi,
            None => self.cfg.spectrum.levels,
        };
        let chi = self.effective_chi(eff.dim(), requested, label);
        let (d_a, _) = eff.extents();
        self.manifest.note(&format!("{label}_bond_extent"), d_a);
        let spec = diagonalize(eff, chi)?;
        self.manifest.note(&format!("{label}_eigensolver"), spec.solver());
        Ok(Arc::new(spec))
    }

    fn spectrum(&mut self) -> anyhow::Result<Arc<ReducedSpectrum>> {
        if self.spectrum.is_none() {
            let g = self.ground()?.clone();
            let s = self.spectrum_of(&g, "ground")?;
            self.spectrum = Some(s);
        }
        Ok(Arc::clone(self.spectrum.as_ref().expect("set above")))
    }

    fn task_spectrum(&mut self) -> anyhow::Result<()> {
        let spec = self.spectrum()?;
        let k_max = self.cfg.spectrum.levels.min(spec.chi());
        let exact = self.oracle()?.map(|o| o.levels(k_max));
        let mut t = Table::new(&[
            "k",
            "energy",
            "exact_energy",
            "rel_error_energy",
            "excitation",
            "exact_excitation",
            "rel_error_excitation",
        ]);
        let e = spec.energies();
        for k in 0..k_max {
            let ex = exact.as_ref().and_then(|x| x.get(k).copied());
            let ex0 = exact.as_ref().and_then(|x| x.first().copied());
            let gap = e[k] - e[0];
            let exact_gap = ex.zip(ex0).map(|(a, b)| a - b);
            let rel_gap = exact_gap.filter(|_| k > 0).map(|g| ((gap - g) / g).abs());
            t.push(vec![
                k.into(),
                e[k].into(),
                ex.into(),
                ex.map(|x| ((e[k] - x) / x).abs()).into(),
                gap.into(),
                exact_gap.into(),
                rel_gap.into(),
            ]);
        }
        self.emit("spectrum.csv", &t)
    }

    fn thermal(&mut self) -> anyhow::Result<Vec<ThermoPoint>> {
        if self.thermal.is_none() {
            let spec = self.spectrum()?;
            let temps = self.temperatures()?;
            let rows = thermodynamics(&spec, &temps)?;
            let exact: Vec<Option<f64>> = match self.oracle()? {
                Some(o) => temps.iter().map(|&t| Beta::from_temperature(t).ok().and_then(|b| o.free_energy(b))).collect(),
                None => vec![None; temps.len()],
            };
            let (d, chi) = (self.cfg.ansatz.d, spec.chi());
            let mut t = Table::new(&["T", "F", "U", "S", "C", "F_exact", "rel_error", "D", "chi"]);
            for (r, fe) in rows.iter().zip(&exact) {
                t.push(vec![
                    r.temperature.into(),
                    r.free_energy.into(),
                    r.energy.into(),
                    r.entropy.into(),
                    r.heat_capacity.into(),
                    (*fe).into(),
                    fe.map(|fe| ((r.free_energy - fe) / fe).abs()).into(),
                    d.into(),
                    chi.into(),
                ]);
            }
            self.emit("thermal.csv", &t)?;
            self.thermal = Some(rows);
        }
        Ok(self.thermal.clone().expect("set above"))
    }

    fn exact_free_energies(&mut self, temps: &[f64], what: &str) -> anyhow::Result<Vec<f64>> {
        let oracle = self.require_oracle(what)?;
        temps
            .iter()
            .map(|&t| {
                oracle.free_energy(Beta::from_temperature(t)?).ok_or_else(|| {
                    anyhow!(SchemaError {
                        path: "model".into(),
                        message: format!("{what} needs exact free energies, unavailable from partial ED"),
                    })
                })
            })
            .collect()
    }

    fn task_tmax(&mut self) -> anyhow::Result<()> {
        let rows = self.thermal()?;
        let temps: Vec<f64> = rows.iter().map(|r| r.temperature).collect();
        let f: Vec<f64> = rows.iter().map(|r| r.free_energy).collect();
        let fe = self.exact_free_energies(&temps, "tmax")?;
        let eps = self.cfg.tmax.eps;
        let t_max = t_max_scan(&temps, &f, &fe, eps)?;
        let levels = self.require_oracle("tmax")?.levels(2);
        let gap = (levels.len() == 2).then(|| levels[1] - levels[0]);
        let chi = self.spectrum()?.chi();
        let m = &self.cfg.model;
        let mut t = Table::new(&["L", "g", "D", "chi", "eps", "T_max", "gap"]);
        t.push(vec![m.l.into(), m.g.into(), self.cfg.ansatz.d.into(), chi.into(), eps.into(), t_max.into(), gap.into()]);
        self.manifest.note("t_max", t_max);
        self.emit("tmax.csv", &t)
    }

    fn task_magnetization(&mut self) -> anyhow::Result<()> {
        let spec = self.spectrum()?;
        let temps = self.temperatures()?;
        let kind = self.cfg.magnetization.kind;
        let pattern = self.cfg.order_pattern().expect("checked by validate");
        let values: Vec<f64> = temps
            .par_iter()
            .map(|&t| order_parameter(&spec.ensemble(Beta::from_temperature(t)?)?, kind, pattern))
            .collect::<ttn_gibbs::Result<_>>()?;
        let kind_name = serde_json::to_value(kind)?.as_str().unwrap_or_default().to_string();
        let pattern_name = serde_json::to_value(pattern)?.as_str().unwrap_or_default().to_string();
        let mut table = Table::new(&["T", "m", "kind", "pattern"]);
        for (t, m) in temps.iter().zip(values) {
            table.push(vec![(*t).into(), m.into(), kind_name.as_str().into(), pattern_name.as_str().into()]);
        }
        self.emit("magnetization.csv", &table)
    }

    fn negativity(&mut self) -> anyhow::Result<Vec<(f64, f64, f64)>> {
        if self.negativity.is_none() {
            let spec = self.spectrum()?;
            let temps = self.temperatures()?;
            let eps0 = negativity_vs_temperature(&spec, &[0.0])?[0].epsilon;
            let eps: Vec<f64> = temps
                .par_iter()
                .map(|&t| {
                    if t == 0.0 {
                        return Ok(eps0);
                    }
                    let ens = spec.ensemble(Beta::from_temperature(t)?)?;
                    Ok(log_negativity(&ReducedDensityMatrix::from_ensemble(&ens)?)?.log_negativity)
                })
                .collect::<ttn_gibbs::Result<_>>()?;
            let rows: Vec<(f64, f64, f64)> = temps.iter().zip(eps).map(|(&t, e)| (t, e, e - eps0)).collect();
            let mut table = Table::new(&["T", "epsilon", "epsilon_s", "L", "D", "chi"]);
            for &(t, e, es) in &rows {
                table.push(vec![
                    t.into(),
                    e.into(),
                    es.into(),
                    self.cfg.model.l.into(),
                    self.cfg.ansatz.d.into(),
                    spec.chi().into(),
                ]);
            }
            self.manifest.note("epsilon_zero_temperature", eps0);
            self.emit("negativity.csv", &table)?;
            self.negativity = Some(rows);
        }
        Ok(self.negativity.clone().expect("set above"))
    }

    fn subsystem_size(&mut self) -> anyhow::Result<usize> {
        let net = &self.ground()?.net;
        Ok(net.topology().bond_block(net.topology().root_bond()).len())
    }

    fn task_fit(&mut self) -> anyhow::Result<()> {
        let rows = self.negativity()?;
        let l = self.subsystem_size()?;
        let data: Vec<(f64, f64)> = rows.iter().map(|&(t, _, es)| (t, es)).collect();
        let f = &self.cfg.fit;
        let cft = Window::new(f.cft_window[0], f.cft_window[1])?;
        let low = Window::new(f.low_window[0], f.low_window[1])?;
        let mut attempts: Vec<(&str, &str, ttn_gibbs::Result<FitResult>)> = Vec::new();
        for offset in FitBlock::offsets() {
            let (key, name) = match offset {
                ttn_gibbs::entanglement::OffsetModel::Constant => ("cft_constant", "constant"),
                ttn_gibbs::entanglement::OffsetModel::Linear => ("cft_linear", "linear"),
            };
            attempts.push((key, name, fit_cft_intermediate(&data, l, cft, offset)));
        }
        attempts.push(("low_temperature", "-", fit_low_temperature(&data, l, f.c_fixed, low)));
        // A fit whose window misses the grid is reported, not fatal, unless none succeeds.
        let mut fits: Vec<(&str, FitResult)> = Vec::new();
        let mut first_err = None;
        for (kind, offset, res) in attempts {
            match res {
                Ok(fit) => fits.push((offset, fit)),
                Err(e) => {
                    warn!("{kind} fit skipped: {e}");
                    self.manifest.note(&format!("fit_{kind}_skipped"), e.to_string());
                    first_err.get_or_insert(e);
                }
            }
        }
        if fits.is_empty() {
            return Err(first_err.expect("three attempts").into());
        }
        let mut t = Table::new(&[
            "kind",
            "offset",
            "parameter",
            "value",
            "std_error",
            "residual_norm",
            "window_lo",
            "window_hi",
            "n_points",
            "l",
        ]);
        for (offset, fit) in &fits {
            let kind = serde_json::to_value(fit.kind)?.as_str().unwrap_or_default().to_string();
            for ((name, v), se) in fit.names.iter().zip(&fit.values).zip(&fit.std_errors) {
                t.push(vec![
                    kind.as_str().into(),
                    (*offset).into(),
                    name.as_str().into(),
                    (*v).into(),
                    (*se).into(),
                    fit.residual_norm.into(),
                    fit.window.lo.into(),
                    fit.window.hi.into(),
                    fit.n_points.into(),
                    l.into(),
                ]);
            }
        }
        self.manifest.note("fits", fits.iter().map(|(o, f)| json!({ "offset": o, "fit": f })).collect::<Vec<_>>());
        self.emit("fit.csv", &t)
    }

    fn task_mixture(&mut self) -> anyhow::Result<()> {
        let ground = self.ground()?.clone();
        let spec = self.spectrum()?;
        let excited = self.variational(self.cfg.ansatz.d, "excited", std::slice::from_ref(&ground))?;
        let chi = {
            let dim = effective_bond_hamiltonian(&excited.net, &self.h)?.dim();
            self.effective_chi(dim, self.cfg.chi(), "excited")
        };
        let mix = ImprovedMixture::new(&ground, &excited, &self.h, chi)?;
        self.manifest.note("excited_energy", excited.energy);
        self.manifest.note("excited_overlap", ground.net.overlap(&excited.net)?.abs());
        self.manifest.note("mixture_pruned_levels", mix.pruned());
        self.manifest.note("excited_only_lowest_level", mix.spectrum().energies()[0]);
        let temps = self.temperatures()?;
        let exact_levels = self.cfg.mixture.exact_levels.clone();
        let oracle_present = self.oracle()?.is_some();
        let mut cols: Vec<String> =
            ["T", "F_ground", "F_mixture", "F_excited_only", "F_exact"].iter().map(|s| s.to_string()).collect();
        cols.extend(exact_levels.iter().map(|k| format!("F_exact_{k}")));
        let mut table = Table { columns: cols, rows: Vec::new() };
        for &t in &temps {
            let beta = Beta::from_temperature(t)?;
            let mut row: Vec<Cell> = vec![
                t.into(),
                spec.ensemble(beta)?.free_energy().into(),
                mix.ensemble(beta)?.free_energy().into(),
                mix.spectrum().ensemble(beta)?.free_energy().into(),
            ];
            match (oracle_present, self.oracle()?) {
                (true, Some(o)) => {
                    row.push(o.free_energy(beta).into());
                    for &k in &exact_levels {
                        row.push(o.truncated_free_energy(k, beta)?.into());
                    }
                }
                _ => row.extend(std::iter::repeat_n(Cell::Empty, 1 + exact_levels.len())),
            }
            table.push(row);
        }
        self.emit("mixture.csv", &table)
    }

    fn task_convergence(&mut self) -> anyhow::Result<()> {
        let temps = self.temperatures()?;
        let mut d_list = self.cfg.ansatz.d_list.clone();
        d_list.sort_unstable();
        d_list.dedup();
        let mut curves = Vec::new();
        for &d in &d_list {
            let state = self.variational(d, "ground", &[])?;
            let spec = self.spectrum_of(&state, &format!("convergence_D{d}"))?;
            let f: Vec<f64> = thermodynamics(&spec, &temps)?.iter().map(|r| r.free_energy).collect();
            curves.push((d, f));
        }
        let mut table = Table::new(&["D", "T", "F"]);
        for (d, f) in &curves {
            for (t, fv) in temps.iter().zip(f) {
                table.push(vec![(*d).into(), (*t).into(), (*fv).into()]);
            }
        }
        let (d_ref, f_ref) = curves.last().cloned().expect("at least two bond dimensions");
        let mut summary = Table::new(&["D", "D_ref", "max_abs_dev", "max_rel_dev"]);
        for (d, f) in &curves {
            let abs = f.iter().zip(&f_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let rel = f.iter().zip(&f_ref).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
            summary.push(vec![(*d).into(), d_ref.into(), abs.into(), rel.into()]);
        }
        self.emit("convergence.csv", &table)?;
        self.emit("convergence_summary.csv", &summary)
    }
}
