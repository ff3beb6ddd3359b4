//! Environments of operators and overlaps on the regions hanging off node legs.

use super::kernels::{apply_leg, gram, Shape};
use super::topology::{Neighbor, TreeTopology};
use super::tree::{Center, Gauge, TreeNetwork};
use crate::error::{Error, Result};
use crate::models::{CouplingTerm, HamiltonianTerms, RealTerm};
use crate::tensor::Matrix;

/// Real 2x2 site operator, row-major.
pub type SiteMatrix = [[f64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
struct PairTerm {
    coefficient: f64,
    a: (usize, SiteMatrix),
    b: (usize, SiteMatrix),
}

/// Sum of one- and two-site products of real site operators.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    n_sites: usize,
    onsite: Vec<Vec<(f64, SiteMatrix)>>,
    pairs: Vec<PairTerm>,
    /// Pair ids touching each site, ascending.
    by_site: Vec<Vec<usize>>,
}

impl LocalOperator {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites, onsite: vec![Vec::new(); n_sites], pairs: Vec::new(), by_site: vec![Vec::new(); n_sites] }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn check_site(&self, s: usize) -> Result<()> {
        if s >= self.n_sites {
            return Err(Error::usage(format!("site {s} outside a lattice of {} sites", self.n_sites)));
        }
        Ok(())
    }

    pub fn add_onsite(&mut self, coefficient: f64, site: usize, m: SiteMatrix) -> Result<()> {
        self.check_site(site)?;
        self.onsite[site].push((coefficient, m));
        Ok(())
    }

    pub fn add_pair(&mut self, coefficient: f64, a: (usize, SiteMatrix), b: (usize, SiteMatrix)) -> Result<()> {
        self.check_site(a.0)?;
        self.check_site(b.0)?;
        if a.0 == b.0 {
            return Err(Error::usage(format!("pair term acts twice on site {}", a.0)));
        }
        let id = self.pairs.len();
        self.by_site[a.0].push(id);
        self.by_site[b.0].push(id);
        self.pairs.push(PairTerm { coefficient, a, b });
        Ok(())
    }

    pub fn add_real_term(&mut self, t: &RealTerm) -> Result<()> {
        match t.factors.as_slice() {
            [(s, p)] => self.add_onsite(t.coefficient, *s, p.matrix()),
            [(s, p), (r, q)] => self.add_pair(t.coefficient, (*s, p.matrix()), (*r, q.matrix())),
            _ => Err(Error::usage("local operators hold one- and two-site terms only")),
        }
    }

    pub fn from_real_terms(n_sites: usize, terms: &[RealTerm]) -> Result<Self> {
        let mut op = Self::new(n_sites);
        for t in terms {
            op.add_real_term(t)?;
        }
        Ok(op)
    }

    pub fn from_hamiltonian(h: &HamiltonianTerms) -> Self {
        Self::from_real_terms(h.n_sites(), h.real_terms()).expect("validated term list")
    }

    pub fn from_term(n_sites: usize, t: &CouplingTerm) -> Result<Self> {
        Self::from_real_terms(n_sites, &[t.to_real()?])
    }

    fn site_env(&self, s: usize) -> Env {
        let mut block = Matrix::zeros(2, 2);
        for (c, m) in &self.onsite[s] {
            for i in 0..2 {
                for j in 0..2 {
                    block[(i, j)] += c * m[i][j];
                }
            }
        }
        let partials = self.by_site[s]
            .iter()
            .map(|&id| {
                let p = &self.pairs[id];
                let m = if p.a.0 == s { p.a.1 } else { p.b.1 };
                (id, Matrix::from_fn(2, 2, |i, j| m[i][j]))
            })
            .collect();
        Env { block: Some(block), partials }
    }
}

impl From<&HamiltonianTerms> for LocalOperator {
    fn from(h: &HamiltonianTerms) -> Self {
        Self::from_hamiltonian(h)
    }
}

/// Projected operator of a region: the terms closed inside it (`block`) and
/// the one-site factors of terms that cross its boundary (`partials`, by pair id).
#[derive(Clone, Debug)]
pub(crate) struct Env {
    pub block: Option<Matrix<f64>>,
    pub partials: Vec<(usize, Matrix<f64>)>,
}

impl Env {
    fn empty() -> Self {
        Env { block: None, partials: Vec::new() }
    }
}

/// Combines the environments on legs `a` and `b` of tensor `t` into the
/// environment seen across leg `open`.
fn combine(t: &[f64], s: Shape, open: usize, ea: (usize, &Env), eb: (usize, &Env), op: &LocalOperator) -> Env {
    let (a, ea) = ea;
    let (b, eb) = eb;
    let mut x: Option<Vec<f64>> = None;
    let mut add = |v: Vec<f64>, c: f64| match &mut x {
        None => x = Some(if c == 1.0 { v } else { v.into_iter().map(|y| c * y).collect() }),
        Some(acc) => acc.iter_mut().zip(v).for_each(|(p, q)| *p += c * q),
    };
    if let Some(m) = &ea.block {
        add(apply_leg(t, s, a, m).0, 1.0);
    }
    if let Some(m) = &eb.block {
        add(apply_leg(t, s, b, m).0, 1.0);
    }
    let mut partials = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ea.partials.len() || j < eb.partials.len() {
        let ia = ea.partials.get(i).map_or(usize::MAX, |p| p.0);
        let jb = eb.partials.get(j).map_or(usize::MAX, |p| p.0);
        if ia == jb {
            let (w, ws) = apply_leg(t, s, a, &ea.partials[i].1);
            add(apply_leg(&w, ws, b, &eb.partials[j].1).0, op.pairs[ia].coefficient);
            i += 1;
            j += 1;
        } else if ia < jb {
            let (w, ws) = apply_leg(t, s, a, &ea.partials[i].1);
            partials.push((ia, gram(t, s, &w, ws, open)));
            i += 1;
        } else {
            let (w, ws) = apply_leg(t, s, b, &eb.partials[j].1);
            partials.push((jb, gram(t, s, &w, ws, open)));
            j += 1;
        }
    }
    let block = x.map(|v| gram(t, s, &v, s, open));
    Env { block, partials }
}

fn other_legs(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Lazily computed operator environments, `slot[u][k]` for the region across
/// leg `k` of node `u`.
#[derive(Clone, Debug)]
pub struct EnvCache {
    op: LocalOperator,
    slots: Vec<[Option<Env>; 3]>,
}

impl EnvCache {
    pub fn new(op: LocalOperator, topology: &TreeTopology) -> Result<Self> {
        if op.n_sites != topology.n_sites() {
            return Err(Error::usage(format!(
                "operator on {} sites applied to a network of {} sites",
                op.n_sites,
                topology.n_sites()
            )));
        }
        Ok(Self { op, slots: vec![Default::default(); topology.n_nodes()] })
    }

    pub fn operator(&self) -> &LocalOperator {
        &self.op
    }

    pub(crate) fn ensure(&mut self, net: &TreeNetwork, u: usize, k: usize) {
        if self.slots[u][k].is_some() {
            return;
        }
        let env = match net.topology().neighbor(u, k) {
            Neighbor::Site(s) => self.op.site_env(s),
            Neighbor::Pad => Env::empty(),
            Neighbor::Node(v, kv) => {
                let (a, b) = other_legs(kv);
                self.ensure(net, v, a);
                self.ensure(net, v, b);
                let ea = self.slots[v][a].as_ref().expect("ensured");
                let eb = self.slots[v][b].as_ref().expect("ensured");
                combine(net.data(v), net.shape(v), kv, (a, ea), (b, eb), &self.op)
            }
        };
        self.slots[u][k] = Some(env);
    }

    pub(crate) fn get(&self, u: usize, k: usize) -> &Env {
        self.slots[u][k].as_ref().expect("environment requested before ensure")
    }

    /// Drops every environment whose region contains node `w`.
    pub fn invalidate(&mut self, topology: &TreeTopology, w: usize) {
        for u in 0..topology.n_nodes() {
            if u != w {
                self.slots[u][topology.leg_toward(u, w)] = None;
            }
        }
    }

    pub fn invalidate_all(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = Default::default());
    }

    /// Effective operator on the tensor space of node `u`.
    pub(crate) fn local(&mut self, net: &TreeNetwork, u: usize) -> LocalHamiltonian {
        for k in 0..3 {
            self.ensure(net, u, k);
        }
        let envs = [self.get(u, 0), self.get(u, 1), self.get(u, 2)];
        let blocks = [envs[0].block.clone(), envs[1].block.clone(), envs[2].block.clone()];
        let mut pairs = Vec::new();
        for k in 0..3 {
            for m in (k + 1)..3 {
                for (id, p) in &envs[k].partials {
                    if let Some((_, q)) = envs[m].partials.iter().find(|(j, _)| j == id) {
                        pairs.push((k, m, self.op.pairs[*id].coefficient, p.clone(), q.clone()));
                    }
                }
            }
        }
        LocalHamiltonian { shape: net.shape(u), blocks, pairs, penalties: Vec::new() }
    }

    /// Operator projected on the Schmidt space of bond-gauged `net`:
    /// `(block_A, block_B, [(coef, P_A, P_B)])`.
    pub(crate) fn bond_parts(&mut self, net: &TreeNetwork) -> Result<BondOperator> {
        let Gauge::Bond { bond, .. } = net.gauge() else {
            return Err(Error::usage("bond operator requires a bond-canonical network"));
        };
        let (x, kx, y, ky) = net.topology().bond_ends(*bond);
        self.ensure(net, y, ky);
        self.ensure(net, x, kx);
        let ea = self.get(y, ky);
        let eb = self.get(x, kx);
        let d = net.bond_extent(*bond);
        let zero = || Matrix::zeros(d, d);
        let mut pairs = Vec::new();
        for (id, p) in &ea.partials {
            if let Some((_, q)) = eb.partials.iter().find(|(j, _)| j == id) {
                pairs.push((self.op.pairs[*id].coefficient, p.clone(), q.clone()));
            }
        }
        Ok(BondOperator {
            block_a: ea.block.clone().unwrap_or_else(zero),
            block_b: eb.block.clone().unwrap_or_else(zero),
            pairs,
        })
    }
}

/// Operator restricted to the Schmidt basis `|α⟩_A |β⟩_B` of a bond.
#[derive(Clone, Debug)]
pub struct BondOperator {
    pub block_a: Matrix<f64>,
    pub block_b: Matrix<f64>,
    pub pairs: Vec<(f64, Matrix<f64>, Matrix<f64>)>,
}

impl BondOperator {
    /// Dense `D² x D²` matrix, row index `α D + β`.
    pub fn to_dense(&self) -> Matrix<f64> {
        let d = self.block_a.rows();
        let mut m = self.block_a.kron(&Matrix::identity(d));
        m.axpy(1.0, &Matrix::identity(d).kron(&self.block_b)).expect("equal shapes");
        for (c, p, q) in &self.pairs {
            m.axpy(*c, &p.kron(q)).expect("equal shapes");
        }
        m
    }

    /// Extent of each side; the operator acts on `dim()²` amplitudes.
    pub fn dim(&self) -> usize {
        self.block_a.rows()
    }

    /// `y = O x` without forming the dense matrix: with `x` read as the
    /// `D x D` matrix `X[α, β]`, `Y = A X + X Bᵀ + Σ c P X Qᵀ`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim();
        let xm = Matrix::from_vec(d, d, x.to_vec()).expect("vector of length D²");
        let mut acc = self.block_a.matmul(&xm).expect("square factors");
        acc.axpy(1.0, &xm.matmul_t(&self.block_b).expect("square factors")).expect("equal shapes");
        for (c, p, q) in &self.pairs {
            let px = p.matmul(&xm).expect("square factors");
            acc.axpy(*c, &px.matmul_t(q).expect("square factors")).expect("equal shapes");
        }
        y.copy_from_slice(acc.as_slice());
    }

    /// `⟨x|O|x⟩` (unnormalized).
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// `⟨ψ|O|ψ⟩` for `ψ = Σ λ_α |α⟩|α⟩`.
    pub fn diagonal_expectation(&self, lambda: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, la) in lambda.iter().enumerate() {
            acc += la * la * (self.block_a[(a, a)] + self.block_b[(a, a)]);
        }
        for (c, p, q) in &self.pairs {
            let mut s = 0.0;
            for (a, la) in lambda.iter().enumerate() {
                for (b, lb) in lambda.iter().enumerate() {
                    s += la * lb * p[(a, b)] * q[(a, b)];
                }
            }
            acc += c * s;
        }
        acc
    }
}

/// Effective operator at a node, plus optional rank-one penalties.
#[derive(Clone, Debug)]
pub(crate) struct LocalHamiltonian {
    pub shape: Shape,
    blocks: [Option<Matrix<f64>>; 3],
    pairs: Vec<(usize, usize, f64, Matrix<f64>, Matrix<f64>)>,
    penalties: Vec<(f64, Vec<f64>)>,
}

impl LocalHamiltonian {
    pub fn dim(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn add_penalty(&mut self, weight: f64, v: Vec<f64>) {
        self.penalties.push((weight, v));
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let s = self.shape;
        for (k, b) in self.blocks.iter().enumerate() {
            if let Some(m) = b {
                let (w, _) = apply_leg(x, s, k, m);
                y.iter_mut().zip(w).for_each(|(p, q)| *p += q);
            }
        }
        for (k, m, c, p, q) in &self.pairs {
            let (w, ws) = apply_leg(x, s, *k, p);
            let (w, _) = apply_leg(&w, ws, *m, q);
            y.iter_mut().zip(w).for_each(|(a, b)| *a += c * b);
        }
        for (w, v) in &self.penalties {
            let d: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
            y.iter_mut().zip(v).for_each(|(a, b)| *a += w * d * b);
        }
    }

    pub fn to_dense(&self) -> Matrix<f64> {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

/// Lazily computed overlap transfer matrices between a bra network (rows)
/// and a fixed ket network (columns) on the same topology.
#[derive(Clone, Debug)]
pub(crate) struct OverlapCache {
    slots: Vec<[Option<Matrix<f64>>; 3]>,
}

impl OverlapCache {
    pub fn new(topology: &TreeTopology) -> Self {
        Self { slots: vec![Default::default(); topology.n_nodes()] }
    }

    fn ensure(&mut self, bra: &TreeNetwork, ket: &TreeNetwork, u: usize, k: usize) {
        if self.slots[u][k].is_some() {
            return;
        }
        let m = match bra.topology().neighbor(u, k) {
            Neighbor::Site(_) => Matrix::identity(2),
            Neighbor::Pad => Matrix::identity(1),
            Neighbor::Node(v, kv) => {
                let (a, b) = other_legs(kv);
                self.ensure(bra, ket, v, a);
                self.ensure(bra, ket, v, b);
                let (w, ws) = apply_leg(ket.data(v), ket.shape(v), a, self.slots[v][a].as_ref().expect("ensured"));
                let (w, ws) = apply_leg(&w, ws, b, self.slots[v][b].as_ref().expect("ensured"));
                gram(bra.data(v), bra.shape(v), &w, ws, kv)
            }
        };
        self.slots[u][k] = Some(m);
    }

    pub fn invalidate(&mut self, topology: &TreeTopology, w: usize) {
        for u in 0..topology.n_nodes() {
            if u != w {
                self.slots[u][topology.leg_toward(u, w)] = None;
            }
        }
    }

    /// Projection of the ket onto the local space of node `u` of the bra.
    /// Includes the ket's Schmidt weights when it is bond-gauged.
    pub fn local_vector(&mut self, bra: &TreeNetwork, ket: &TreeNetwork, u: usize) -> Vec<f64> {
        for k in 0..3 {
            self.ensure(bra, ket, u, k);
        }
        let mut w = ket.data(u).to_vec();
        let mut s = ket.shape(u);
        for k in 0..3 {
            let (x, xs) = apply_leg(&w, s, k, self.slots[u][k].as_ref().expect("ensured"));
            w = x;
            s = xs;
        }
        w
    }
}

/// Projection of `op` on the Schmidt basis of a bond-canonical network.
pub fn bond_operator(net: &TreeNetwork, op: &LocalOperator) -> Result<BondOperator> {
    EnvCache::new(op.clone(), net.topology())?.bond_parts(net)
}

/// Projection of `(1/N) Σ_i w_i m_i` and its square on the Schmidt basis of a
/// bond-canonical network, where `m` acts on every site with weight `w_i`.
pub fn collective_moments(net: &TreeNetwork, m: SiteMatrix, weights: &[f64]) -> Result<(BondOperator, BondOperator)> {
    let Gauge::Bond { bond, .. } = net.gauge() else {
        return Err(Error::usage("bond operator requires a bond-canonical network"));
    };
    if weights.len() != net.topology().n_sites() {
        return Err(Error::dim(format!("{} site weights for {} sites", weights.len(), net.topology().n_sites())));
    }
    let (x, kx, y, ky) = net.topology().bond_ends(*bond);
    let (a1, a2) = moments(net, y, ky, &m, weights);
    let (b1, b2) = moments(net, x, kx, &m, weights);
    let n = net.topology().n_sites() as f64;
    let mut first = BondOperator { block_a: a1.clone(), block_b: b1.clone(), pairs: Vec::new() };
    first.block_a.scale(1.0 / n);
    first.block_b.scale(1.0 / n);
    let mut second = BondOperator { block_a: a2, block_b: b2, pairs: vec![(2.0 / (n * n), a1, b1)] };
    second.block_a.scale(1.0 / (n * n));
    second.block_b.scale(1.0 / (n * n));
    Ok((first, second))
}

/// `(S1, S2)` with `S1 = Σ w_i m_i` and `S2 = S1²` over the region across
/// leg `k` of node `u`.
fn moments(net: &TreeNetwork, u: usize, k: usize, m: &SiteMatrix, w: &[f64]) -> (Matrix<f64>, Matrix<f64>) {
    match net.topology().neighbor(u, k) {
        Neighbor::Site(site) => {
            let s1 = Matrix::from_fn(2, 2, |i, j| w[site] * m[i][j]);
            let s2 = s1.matmul(&s1).expect("2x2");
            (s1, s2)
        }
        Neighbor::Pad => (Matrix::zeros(1, 1), Matrix::zeros(1, 1)),
        Neighbor::Node(v, kv) => {
            let (a, b) = other_legs(kv);
            let (a1, a2) = moments(net, v, a, m, w);
            let (b1, b2) = moments(net, v, b, m, w);
            let (t, s) = (net.data(v), net.shape(v));
            let (ta1, sa) = apply_leg(t, s, a, &a1);
            let (tb1, sb) = apply_leg(t, s, b, &b1);
            let mut s1 = gram(t, s, &ta1, sa, kv);
            s1.axpy(1.0, &gram(t, s, &tb1, sb, kv)).expect("equal shapes");
            let (ta2, _) = apply_leg(t, s, a, &a2);
            let (tb2, _) = apply_leg(t, s, b, &b2);
            let (tab, sab) = apply_leg(&ta1, sa, b, &b1);
            let mut s2 = gram(t, s, &ta2, sa, kv);
            s2.axpy(1.0, &gram(t, s, &tb2, sb, kv)).expect("equal shapes");
            s2.axpy(2.0, &gram(t, s, &tab, sab, kv)).expect("equal shapes");
            (s1, s2)
        }
    }
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn expectation(net: &TreeNetwork, op: &LocalOperator) -> Result<f64> {
    let mut cache = EnvCache::new(op.clone(), net.topology())?;
    match net.gauge() {
        Gauge::Node(c) => {
            let h = cache.local(net, *c);
            let x = net.data(*c);
            let mut y = vec![0.0; x.len()];
            h.apply(x, &mut y);
            let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let den: f64 = x.iter().map(|a| a * a).sum();
            Ok(num / den)
        }
        Gauge::Bond { lambda, .. } => {
            let parts = cache.bond_parts(net)?;
            let den: f64 = lambda.iter().map(|l| l * l).sum();
            Ok(parts.diagonal_expectation(lambda) / den)
        }
        Gauge::None => {
            let mut c = net.clone();
            c.canonicalize(Center::Node(net.topology().tops()[0]))?;
            expectation(&c, op)
        }
    }
}
