use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kernels::{apply_leg, from_leg_matrix, gram, to_leg_matrix, Shape};
use super::topology::{Bond, Child, Neighbor, TreeTopology};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Dense reconstruction is limited to this many sites.
pub const DENSE_STATE_MAX_SITES: usize = 24;
/// Schmidt values below this fraction of the largest are not reported.
pub const SCHMIDT_CUTOFF: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Center {
    Node(usize),
    Bond(Bond),
}

/// Gauge of a network. With `Bond`, the state carries `diag(lambda)` on that
/// bond and every node is isometric toward it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gauge {
    None,
    Node(usize),
    Bond { bond: Bond, lambda: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtData {
    /// Positive, descending, `Σ λ² = 1`.
    pub values: Vec<f64>,
    pub bond: Bond,
    /// Number of retained values.
    pub d_eff: usize,
}

#[derive(Clone, Debug)]
pub struct TreeNetwork {
    topology: TreeTopology,
    max_bond: usize,
    tensors: Vec<DenseTensor<f64>>,
    gauge: Gauge,
}

impl TreeNetwork {
    /// Gaussian random tensors, canonical at the first top node and normalized.
    pub fn random<R: Rng + ?Sized>(topology: TreeTopology, max_bond: usize, rng: &mut R) -> Result<Self> {
        if max_bond == 0 {
            return Err(Error::usage("bond dimension must be positive"));
        }
        let tensors = (0..topology.n_nodes())
            .map(|u| {
                let dims = topology.leg_dims(u, max_bond);
                let n: usize = dims.iter().product();
                let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                DenseTensor::new(leg_labels(&topology, u).to_vec(), dims.to_vec(), data)
            })
            .collect::<Result<_>>()?;
        let mut net = Self { topology, max_bond, tensors, gauge: Gauge::None };
        let t0 = net.topology.tops()[0];
        net.canonicalize(Center::Node(t0))?;
        net.normalize()?;
        Ok(net)
    }

    /// Product state `⊗ states[i]`, embedded in the full bond dimensions.
    pub fn product(topology: TreeTopology, max_bond: usize, states: &[[f64; 2]]) -> Result<Self> {
        if states.len() != topology.n_sites() {
            return Err(Error::dim(format!("{} local states for {} sites", states.len(), topology.n_sites())));
        }
        if max_bond == 0 {
            return Err(Error::usage("bond dimension must be positive"));
        }
        let mut tensors = Vec::with_capacity(topology.n_nodes());
        for u in 0..topology.n_nodes() {
            let dims = topology.leg_dims(u, max_bond);
            let local = |c: Child, i: usize| match c {
                Child::Site(s) => states[s][i],
                _ => f64::from(u8::from(i == 0)),
            };
            let [c0, c1] = topology.nodes()[u].children;
            let mut data = vec![0.0; dims.iter().product()];
            for a in 0..dims[0] {
                for b in 0..dims[1] {
                    data[(a * dims[1] + b) * dims[2]] = local(c0, a) * local(c1, b);
                }
            }
            tensors.push(DenseTensor::new(leg_labels(&topology, u).to_vec(), dims.to_vec(), data)?);
        }
        let mut net = Self { topology, max_bond, tensors, gauge: Gauge::None };
        let t0 = net.topology.tops()[0];
        net.canonicalize(Center::Node(t0))?;
        net.normalize()?;
        Ok(net)
    }

    /// Assembles a network from raw parts; shapes are validated against the topology.
    pub fn from_parts(topology: TreeTopology, max_bond: usize, tensors: Vec<DenseTensor<f64>>, gauge: Gauge) -> Result<Self> {
        if tensors.len() != topology.n_nodes() {
            return Err(Error::dim(format!("{} tensors for {} nodes", tensors.len(), topology.n_nodes())));
        }
        let net = Self { topology, max_bond, tensors, gauge };
        net.check_shapes()?;
        Ok(net)
    }

    fn check_shapes(&self) -> Result<()> {
        let t = &self.topology;
        for u in 0..t.n_nodes() {
            let s = self.tensors[u].shape();
            if s.len() != 3 {
                return Err(Error::dim(format!("node {u} tensor has rank {}", s.len())));
            }
            for k in 0..3 {
                let ok = match t.neighbor(u, k) {
                    Neighbor::Site(_) => s[k] == 2,
                    Neighbor::Pad => s[k] == 1,
                    Neighbor::Node(v, kv) => s[k] == self.tensors[v].shape()[kv] && s[k] <= self.max_bond,
                };
                if !ok {
                    return Err(Error::dim(format!("node {u} leg {k} has inconsistent extent {}", s[k])));
                }
            }
        }
        if let Gauge::Bond { bond, lambda } = &self.gauge {
            t.validate_bond(*bond)?;
            let (x, kx, _, _) = t.bond_ends(*bond);
            if lambda.len() != self.shape(x)[kx] {
                return Err(Error::dim("Schmidt vector length differs from the bond extent"));
            }
        }
        if let Gauge::Node(c) = self.gauge {
            if c >= t.n_nodes() {
                return Err(Error::usage(format!("gauge center {c} is not a node")));
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn tensor(&self, u: usize) -> &DenseTensor<f64> {
        &self.tensors[u]
    }

    pub fn tensors(&self) -> &[DenseTensor<f64>] {
        &self.tensors
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    pub(crate) fn shape(&self, u: usize) -> Shape {
        let s = self.tensors[u].shape();
        [s[0], s[1], s[2]]
    }

    pub(crate) fn data(&self, u: usize) -> &[f64] {
        self.tensors[u].data()
    }

    /// Current extent of a bond.
    pub fn bond_extent(&self, b: Bond) -> usize {
        let (x, kx, _, _) = self.topology.bond_ends(b);
        self.shape(x)[kx]
    }

    /// Replaces the tensor of `u`; the gauge becomes `Node(u)` when `u` was
    /// the center, `None` otherwise.
    pub(crate) fn set_node(&mut self, u: usize, data: Vec<f64>, shape: Shape) -> Result<()> {
        let labels = leg_labels(&self.topology, u);
        self.tensors[u] = DenseTensor::new(labels.to_vec(), shape.to_vec(), data)?;
        if self.gauge != Gauge::Node(u) {
            self.gauge = Gauge::None;
        }
        Ok(())
    }

    /// `‖ψ‖` (requires a gauge; otherwise canonicalizes a copy).
    pub fn norm(&self) -> Result<f64> {
        match &self.gauge {
            Gauge::Node(c) => Ok(self.tensors[*c].norm()),
            Gauge::Bond { lambda, .. } => Ok(lambda.iter().map(|x| x * x).sum::<f64>().sqrt()),
            Gauge::None => {
                let mut c = self.clone();
                c.canonicalize(Center::Node(self.topology.tops()[0]))?;
                c.norm()
            }
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        if self.gauge == Gauge::None {
            self.canonicalize(Center::Node(self.topology.tops()[0]))?;
        }
        let n = self.norm()?;
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::usage(format!("cannot normalize a state of norm {n}")));
        }
        match &mut self.gauge {
            Gauge::Node(c) => self.tensors[*c].scale(1.0 / n),
            Gauge::Bond { lambda, .. } => lambda.iter_mut().for_each(|x| *x /= n),
            Gauge::None => unreachable!(),
        }
        Ok(())
    }

    /// QR step moving orthogonality off `u` across `leg`.
    fn qr_toward(&mut self, u: usize, leg: usize) -> Result<()> {
        let Neighbor::Node(v, kv) = self.topology.neighbor(u, leg) else {
            return Err(Error::usage("gauge moves follow bonds between nodes"));
        };
        let s = self.shape(u);
        let (q, r) = to_leg_matrix(self.data(u), s, leg).qr()?;
        // the bond shrinks when the other legs cannot support its extent
        let mut qs = s;
        qs[leg] = q.cols();
        let labels = leg_labels(&self.topology, u);
        self.tensors[u] = DenseTensor::new(labels.to_vec(), qs.to_vec(), from_leg_matrix(&q, qs, leg))?;
        let (w, ws) = apply_leg(self.data(v), self.shape(v), kv, &r);
        let labels = leg_labels(&self.topology, v);
        self.tensors[v] = DenseTensor::new(labels.to_vec(), ws.to_vec(), w)?;
        Ok(())
    }

    /// Moves the orthogonality center one bond, from `u` to its neighbor across `leg`.
    pub(crate) fn shift_center(&mut self, u: usize, leg: usize) -> Result<usize> {
        debug_assert_eq!(self.gauge, Gauge::Node(u));
        self.qr_toward(u, leg)?;
        let Neighbor::Node(v, _) = self.topology.neighbor(u, leg) else { unreachable!() };
        self.gauge = Gauge::Node(v);
        Ok(v)
    }

    fn absorb_lambda(&mut self) -> Result<()> {
        if let Gauge::Bond { bond, lambda } = std::mem::replace(&mut self.gauge, Gauge::None) {
            let (x, kx, _, _) = self.topology.bond_ends(bond);
            let (w, ws) = apply_leg(self.data(x), self.shape(x), kx, &Matrix::from_diagonal(&lambda));
            self.set_node(x, w, ws)?;
            self.gauge = Gauge::Node(x);
        }
        Ok(())
    }

    /// Gauges every tensor isometric toward `center`; the represented state is unchanged.
    pub fn canonicalize(&mut self, center: Center) -> Result<()> {
        let target = match center {
            Center::Node(u) => {
                if u >= self.topology.n_nodes() {
                    return Err(Error::usage(format!("node {u} does not exist")));
                }
                u
            }
            Center::Bond(b) => {
                self.topology.validate_bond(b)?;
                if let Gauge::Bond { bond, .. } = &self.gauge {
                    if *bond == b {
                        return Ok(());
                    }
                }
                self.topology.bond_ends(b).0
            }
        };
        self.absorb_lambda()?;
        match self.gauge {
            Gauge::Node(c) => {
                let path = self.topology.path(c, target);
                for w in path.windows(2) {
                    let leg = self.topology.leg_toward(w[0], w[1]);
                    self.qr_toward(w[0], leg)?;
                }
            }
            _ => {
                let order = self.topology.nodes_toward(target);
                for &u in &order[..order.len() - 1] {
                    let leg = self.topology.leg_toward(u, target);
                    self.qr_toward(u, leg)?;
                }
            }
        }
        self.gauge = Gauge::Node(target);
        if let Center::Bond(b) = center {
            self.split_bond(b)?;
        }
        Ok(())
    }

    /// From `Node(x)` with `x` the lower end of `b`, extracts `diag(λ)` on `b`.
    fn split_bond(&mut self, b: Bond) -> Result<()> {
        let (x, kx, y, ky) = self.topology.bond_ends(b);
        debug_assert_eq!(self.gauge, Gauge::Node(x));
        let s = self.shape(x);
        let (q, r) = to_leg_matrix(self.data(x), s, kx).qr()?;
        let (u, lambda, vt) = r.svd()?;
        let mut qs = s;
        qs[kx] = q.cols();
        let qx = from_leg_matrix(&q, qs, kx);
        let (tx, sx) = apply_leg(&qx, qs, kx, &u.transpose());
        let (ty, sy) = apply_leg(self.data(y), self.shape(y), ky, &vt);
        let lx = leg_labels(&self.topology, x);
        let ly = leg_labels(&self.topology, y);
        self.tensors[x] = DenseTensor::new(lx.to_vec(), sx.to_vec(), tx)?;
        self.tensors[y] = DenseTensor::new(ly.to_vec(), sy.to_vec(), ty)?;
        self.gauge = Gauge::Bond { bond: b, lambda };
        Ok(())
    }

    pub fn schmidt_spectrum(&self) -> Result<SchmidtData> {
        let Gauge::Bond { bond, lambda } = &self.gauge else {
            return Err(Error::usage("Schmidt spectrum requires a bond-canonical network"));
        };
        let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::usage("Schmidt spectrum of the zero state"));
        }
        let top = lambda[0];
        let values: Vec<f64> =
            lambda.iter().take_while(|&&l| l > SCHMIDT_CUTOFF * top).map(|l| l / norm).collect();
        Ok(SchmidtData { d_eff: values.len(), values, bond: *bond })
    }

    /// Leg of `u` pointing toward the gauge center, if `u` is not the center.
    pub fn center_leg(&self, u: usize) -> Option<usize> {
        match &self.gauge {
            Gauge::None => None,
            Gauge::Node(c) => (*c != u).then(|| self.topology.leg_toward(u, *c)),
            Gauge::Bond { bond, .. } => {
                let (x, kx, y, ky) = self.topology.bond_ends(*bond);
                if u == x {
                    Some(kx)
                } else if u == y {
                    Some(ky)
                } else {
                    Some(self.topology.leg_toward(u, x))
                }
            }
        }
    }

    /// Largest deviation from the identity of the self-contraction of `u`
    /// over its legs pointing away from the center.
    pub fn isometry_defect(&self, u: usize) -> Option<f64> {
        let leg = self.center_leg(u)?;
        let s = self.shape(u);
        let g = gram(self.data(u), s, self.data(u), s, leg);
        let mut worst: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        Some(worst)
    }

    /// Contracts the whole network into a `2^N` vector (site 0 most significant).
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = self.topology.n_sites();
        if n > DENSE_STATE_MAX_SITES {
            return Err(Error::Resource(format!("dense state of {n} sites exceeds {DENSE_STATE_MAX_SITES}")));
        }
        if matches!(&self.gauge, Gauge::Bond { bond, .. } if *bond != self.topology.root_bond()) {
            let mut c = self.clone();
            c.absorb_lambda()?;
            return c.to_dense();
        }
        let [t0, t1] = self.topology.tops();
        let v0 = self.subtree_matrix(t0);
        let mut v1 = self.subtree_matrix(t1);
        if let Gauge::Bond { lambda, .. } = &self.gauge {
            let d = lambda.len();
            for r in 0..v1.rows() {
                for (c, l) in lambda.iter().enumerate() {
                    v1.as_mut_slice()[r * d + c] *= l;
                }
            }
        }
        let psi = v0.matmul_t(&v1)?;
        let mut order: Vec<usize> = self.topology.sites_below(t0).to_vec();
        order.extend_from_slice(self.topology.sites_below(t1));
        let mut axes = vec![0; n];
        for (pos, &site) in order.iter().enumerate() {
            axes[site] = pos;
        }
        Ok(crate::tensor::transpose_data(psi.as_slice(), &vec![2; n], &axes))
    }

    /// Physical vector `Σ V[α, β] |A_α⟩|B_β⟩` for a root-bond-canonical
    /// network, with `A` the side of the lower end of the bond.
    pub fn embed_bond_matrix(&self, v: &Matrix<f64>) -> Result<Vec<f64>> {
        let n = self.topology.n_sites();
        if n > DENSE_STATE_MAX_SITES {
            return Err(Error::Resource(format!("dense state of {n} sites exceeds {DENSE_STATE_MAX_SITES}")));
        }
        let root = self.topology.root_bond();
        if !matches!(&self.gauge, Gauge::Bond { bond, .. } if *bond == root) {
            return Err(Error::usage("embedding requires the network to be canonical at the root bond"));
        }
        let (x, _, y, _) = self.topology.bond_ends(root);
        let d = self.bond_extent(root);
        if v.rows() != d || v.cols() != d {
            return Err(Error::dim(format!("bond matrix {}x{} for bond extent {d}", v.rows(), v.cols())));
        }
        let mx = self.subtree_matrix(x);
        let my = self.subtree_matrix(y);
        let psi = mx.matmul(v)?.matmul_t(&my)?;
        let mut order: Vec<usize> = self.topology.sites_below(x).to_vec();
        order.extend_from_slice(self.topology.sites_below(y));
        let mut axes = vec![0; n];
        for (pos, &site) in order.iter().enumerate() {
            axes[site] = pos;
        }
        Ok(crate::tensor::transpose_data(psi.as_slice(), &vec![2; n], &axes))
    }

    /// Rows over the subtree's sites (in `sites_below` order), columns over leg 2.
    fn subtree_matrix(&self, u: usize) -> Matrix<f64> {
        let mut t = self.data(u).to_vec();
        let mut s = self.shape(u);
        for k in 0..2 {
            if let Child::Node(v) = self.topology.nodes()[u].children[k] {
                let m = self.subtree_matrix(v);
                let (w, ws) = apply_leg(&t, s, k, &m);
                t = w;
                s = ws;
            }
        }
        Matrix::from_vec(s[0] * s[1], s[2], t).expect("consistent extents")
    }

    /// Truncates every bond to Schmidt values above `cutoff * λ_max`, at most
    /// `max_bond` of them; the norm is preserved. Leaves the root bond gauge.
    pub fn recompress(&mut self, max_bond: usize, cutoff: f64) -> Result<()> {
        if max_bond == 0 {
            return Err(Error::usage("bond dimension must be positive"));
        }
        let bonds = self.topology.bonds();
        for &b in bonds.iter().skip(1).chain(std::iter::once(&bonds[0])) {
            self.canonicalize(Center::Bond(b))?;
            let Gauge::Bond { lambda, .. } = &self.gauge else { unreachable!() };
            let norm: f64 = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
            let top = lambda[0];
            let keep = lambda.iter().filter(|&&l| l > cutoff * top).count().clamp(1, max_bond);
            if keep < lambda.len() {
                let (x, kx, y, ky) = self.topology.bond_ends(b);
                let proj = Matrix::from_fn(keep, lambda.len(), |i, j| f64::from(u8::from(i == j)));
                let (tx, sx) = apply_leg(self.data(x), self.shape(x), kx, &proj);
                let (ty, sy) = apply_leg(self.data(y), self.shape(y), ky, &proj);
                let mut kept = lambda[..keep].to_vec();
                let kn: f64 = kept.iter().map(|x| x * x).sum::<f64>().sqrt();
                kept.iter_mut().for_each(|l| *l *= norm / kn);
                let lx = leg_labels(&self.topology, x);
                let ly = leg_labels(&self.topology, y);
                self.tensors[x] = DenseTensor::new(lx.to_vec(), sx.to_vec(), tx)?;
                self.tensors[y] = DenseTensor::new(ly.to_vec(), sy.to_vec(), ty)?;
                self.gauge = Gauge::Bond { bond: b, lambda: kept };
            }
        }
        self.max_bond = self.max_bond.min(max_bond);
        Ok(())
    }

    /// Overlap `⟨self|other⟩` of two networks on the same topology.
    pub fn overlap(&self, other: &TreeNetwork) -> Result<f64> {
        if self.topology != other.topology {
            return Err(Error::usage("overlap needs networks on the same topology"));
        }
        let root = self.topology.root_bond();
        let off_root = |g: &Gauge| matches!(g, Gauge::Bond { bond, .. } if *bond != root);
        if off_root(&self.gauge) || off_root(&other.gauge) {
            let mut a = self.clone();
            let mut b = other.clone();
            a.absorb_lambda()?;
            b.absorb_lambda()?;
            return a.overlap(&b);
        }
        let [t0, t1] = self.topology.tops();
        let mut a0 = self.overlap_below(other, t0);
        let a1 = self.overlap_below(other, t1);
        // root-bond weights scale rows (self) and columns (other)
        if let Gauge::Bond { lambda, .. } = &self.gauge {
            for (i, l) in lambda.iter().enumerate() {
                (0..a0.cols()).for_each(|j| a0[(i, j)] *= l);
            }
        }
        if let Gauge::Bond { lambda, .. } = &other.gauge {
            for (j, l) in lambda.iter().enumerate() {
                (0..a0.rows()).for_each(|i| a0[(i, j)] *= l);
            }
        }
        Ok(a0.as_slice().iter().zip(a1.as_slice()).map(|(x, y)| x * y).sum())
    }

    /// Transfer matrix of a subtree, rows over `self`'s leg 2, columns over `other`'s.
    fn overlap_below(&self, other: &TreeNetwork, u: usize) -> Matrix<f64> {
        let mut x = other.data(u).to_vec();
        let mut s = other.shape(u);
        for k in 0..2 {
            if let Child::Node(v) = self.topology.nodes()[u].children[k] {
                let m = self.overlap_below(other, v);
                let (w, ws) = apply_leg(&x, s, k, &m);
                x = w;
                s = ws;
            }
        }
        gram(self.data(u), self.shape(u), &x, s, 2)
    }
}

/// Leg labels of node `u`: `s<i>` for sites, `pad`, `b<id>` for bonds.
pub(crate) fn leg_labels(t: &TreeTopology, u: usize) -> [String; 3] {
    let mut out: [String; 3] = Default::default();
    for (k, o) in out.iter_mut().enumerate() {
        *o = match t.neighbor(u, k) {
            Neighbor::Site(i) => format!("s{i}"),
            Neighbor::Pad => "pad".to_owned(),
            Neighbor::Node(..) => format!("b{}", t.bond_of_leg(u, k).expect("node leg").0),
        };
    }
    out
}
