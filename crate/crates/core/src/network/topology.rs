use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LatticeGeometry, LatticeKind};

/// What hangs below one of a node's two child legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Child {
    Site(usize),
    /// Trivial extent-1 leg.
    Pad,
    Node(usize),
}

/// Three-leg node: legs 0 and 1 are children, leg 2 points to the parent
/// node, or to the other top node across the root bond.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub children: [Child; 2],
    pub parent: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Recursive bisection (balanced binary tree; 2x2 blocking on squares).
    #[default]
    Tree,
    /// Two caterpillars meeting at the middle bond (matrix product state).
    Mps,
}

/// Internal bond, identified by its lower node; the root bond by the first top node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond(pub usize);

/// Neighbor across a node leg.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Site(usize),
    Pad,
    /// Node and the leg index on that node pointing back.
    Node(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeTopology {
    geometry: LatticeGeometry,
    layout: Layout,
    nodes: Vec<TreeNode>,
    tops: [usize; 2],
    /// Sites below each node, in contraction order.
    sites_below: Vec<Vec<usize>>,
    neighbors: Vec<[Neighbor; 3]>,
    // Euler intervals of the traversal rooted at `tops[0]`
    tin: Vec<usize>,
    tout: Vec<usize>,
    euler: Vec<usize>,
}

impl TreeTopology {
    pub fn build(geometry: LatticeGeometry, layout: Layout) -> Result<Self> {
        let n = geometry.n_sites();
        if n < 2 {
            return Err(Error::usage("a tree network needs at least two sites"));
        }
        let mut b = Builder { nodes: Vec::new() };
        let tops = match (geometry.kind(), layout) {
            (LatticeKind::Chain, Layout::Tree) => {
                let sites: Vec<usize> = (0..n).collect();
                let (a, c) = sites.split_at(n / 2);
                [b.top(|b| b.bisect(a), a), b.top(|b| b.bisect(c), c)]
            }
            (LatticeKind::Chain, Layout::Mps) => {
                let sites: Vec<usize> = (0..n).collect();
                let (a, c) = sites.split_at(n / 2);
                [b.top(|b| b.caterpillar(a, true), a), b.top(|b| b.caterpillar(c, false), c)]
            }
            (LatticeKind::Square, Layout::Tree) => {
                let l = geometry.linear_size();
                let (r0, r1) = Rect { x: 0, y: 0, w: l, h: l }.split();
                let g = geometry;
                [b.top_rect(&g, r0), b.top_rect(&g, r1)]
            }
            (LatticeKind::Square, Layout::Mps) => {
                return Err(Error::usage("the MPS layout is available for chains only"));
            }
        };
        let mut nodes = b.nodes;
        nodes[tops[0]].parent = None;
        nodes[tops[1]].parent = None;
        Ok(Self::assemble(geometry, layout, nodes, tops))
    }

    fn assemble(geometry: LatticeGeometry, layout: Layout, nodes: Vec<TreeNode>, tops: [usize; 2]) -> Self {
        let m = nodes.len();
        let mut sites_below = vec![Vec::new(); m];
        // children are created before parents
        for u in 0..m {
            let mut s = Vec::new();
            for c in nodes[u].children {
                match c {
                    Child::Site(i) => s.push(i),
                    Child::Node(v) => s.extend_from_slice(&sites_below[v]),
                    Child::Pad => {}
                }
            }
            sites_below[u] = s;
        }
        let mut neighbors = vec![[Neighbor::Pad; 3]; m];
        for u in 0..m {
            for (k, c) in nodes[u].children.iter().enumerate() {
                neighbors[u][k] = match *c {
                    Child::Site(i) => Neighbor::Site(i),
                    Child::Pad => Neighbor::Pad,
                    Child::Node(v) => Neighbor::Node(v, 2),
                };
                if let Child::Node(v) = *c {
                    neighbors[v][2] = Neighbor::Node(u, k);
                }
            }
        }
        neighbors[tops[0]][2] = Neighbor::Node(tops[1], 2);
        neighbors[tops[1]][2] = Neighbor::Node(tops[0], 2);

        let mut tin = vec![0; m];
        let mut tout = vec![0; m];
        let mut euler = Vec::with_capacity(2 * m);
        let mut clock = 0;
        // iterative DFS: (node, came-from leg, next leg to try)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(tops[0], None, 0)];
        tin[tops[0]] = clock;
        clock += 1;
        euler.push(tops[0]);
        while let Some(top) = stack.last_mut() {
            let (u, from, k) = *top;
            if k == 3 {
                tout[u] = clock;
                clock += 1;
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    euler.push(p);
                }
                continue;
            }
            top.2 += 1;
            if Some(k) == from {
                continue;
            }
            if let Neighbor::Node(v, back) = neighbors[u][k] {
                tin[v] = clock;
                clock += 1;
                euler.push(v);
                stack.push((v, Some(back), 0));
            }
        }
        Self { geometry, layout, nodes, tops, sites_below, neighbors, tin, tout, euler }
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn tops(&self) -> [usize; 2] {
        self.tops
    }

    pub fn root_bond(&self) -> Bond {
        Bond(self.tops[0])
    }

    pub fn neighbor(&self, u: usize, leg: usize) -> Neighbor {
        self.neighbors[u][leg]
    }

    pub fn sites_below(&self, u: usize) -> &[usize] {
        &self.sites_below[u]
    }

    /// All bonds; the root bond first.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = vec![self.root_bond()];
        out.extend((0..self.n_nodes()).filter(|u| !self.tops.contains(u)).map(Bond));
        out
    }

    pub fn validate_bond(&self, b: Bond) -> Result<()> {
        if b.0 >= self.n_nodes() || b.0 == self.tops[1] {
            return Err(Error::usage(format!("no bond with id {}", b.0)));
        }
        Ok(())
    }

    /// `(x, leg at x, y, leg at y)` with `x` the lower node (first top for the root).
    pub fn bond_ends(&self, b: Bond) -> (usize, usize, usize, usize) {
        let x = b.0;
        match self.neighbors[x][2] {
            Neighbor::Node(y, ky) => (x, 2, y, ky),
            _ => unreachable!("every node has a parent-side neighbor"),
        }
    }

    /// Sites on the lower side of a bond (block A).
    pub fn bond_block(&self, b: Bond) -> &[usize] {
        &self.sites_below[b.0]
    }

    /// Bond carrying leg `leg` of node `u`; `None` for site and pad legs.
    pub fn bond_of_leg(&self, u: usize, leg: usize) -> Option<Bond> {
        match self.neighbors[u][leg] {
            Neighbor::Node(v, _) => {
                if leg == 2 {
                    if self.tops.contains(&u) {
                        Some(self.root_bond())
                    } else {
                        Some(Bond(u))
                    }
                } else {
                    Some(Bond(v))
                }
            }
            _ => None,
        }
    }

    /// Number of real sites hanging across leg `leg` of `u`.
    pub fn sites_across(&self, u: usize, leg: usize) -> usize {
        match self.neighbors[u][leg] {
            Neighbor::Site(_) => 1,
            Neighbor::Pad => 0,
            Neighbor::Node(v, _) => {
                if leg == 2 {
                    self.n_sites() - self.sites_below[u].len()
                } else {
                    self.sites_below[v].len()
                }
            }
        }
    }

    fn contains(&self, outer: usize, inner: usize) -> bool {
        self.tin[outer] <= self.tin[inner] && self.tout[inner] <= self.tout[outer]
    }

    /// Leg of `u` leading toward node `w != u`.
    pub fn leg_toward(&self, u: usize, w: usize) -> usize {
        debug_assert_ne!(u, w);
        for k in 0..3 {
            if let Neighbor::Node(v, _) = self.neighbors[u][k] {
                // `v` is a DFS child of `u` unless it is the DFS parent
                let v_is_child = self.tin[v] > self.tin[u];
                let beyond = if v_is_child { self.contains(v, w) } else { !self.contains(u, w) };
                if beyond {
                    return k;
                }
            }
        }
        unreachable!("tree is connected")
    }

    /// Node path from `a` to `b`, both inclusive.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut out = vec![a];
        let mut u = a;
        while u != b {
            match self.neighbors[u][self.leg_toward(u, b)] {
                Neighbor::Node(v, _) => u = v,
                _ => unreachable!(),
            }
            out.push(u);
        }
        out
    }

    /// Nodes sorted by decreasing distance from `target` (target last).
    pub fn nodes_toward(&self, target: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_nodes()];
        let mut queue = std::collections::VecDeque::from([target]);
        dist[target] = 0;
        let mut order = Vec::with_capacity(self.n_nodes());
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for k in 0..3 {
                if let Neighbor::Node(v, _) = self.neighbors[u][k] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        order.reverse();
        order
    }

    /// Closed walk visiting every node, consecutive entries adjacent.
    pub fn euler_tour(&self) -> &[usize] {
        &self.euler
    }

    /// Levels from the root bond down to the deepest site.
    pub fn depth(&self) -> usize {
        fn down(t: &TreeTopology, u: usize) -> usize {
            t.nodes[u]
                .children
                .iter()
                .map(|c| match *c {
                    Child::Node(v) => 1 + down(t, v),
                    _ => 1,
                })
                .max()
                .unwrap_or(1)
        }
        1 + self.tops.iter().map(|&t| down(self, t)).max().unwrap_or(0)
    }

    /// Bond extents for a cap `d_max`: `min(d_max, 2^min(n_side, N - n_side))`.
    pub fn bond_dim(&self, b: Bond, d_max: usize) -> usize {
        let a = self.sites_below[b.0].len();
        let side = a.min(self.n_sites() - a);
        if side >= usize::BITS as usize - 1 {
            d_max
        } else {
            d_max.min(1 << side)
        }
    }

    /// Extents of the three legs of `u`.
    pub fn leg_dims(&self, u: usize, d_max: usize) -> [usize; 3] {
        let mut out = [1; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = match self.neighbors[u][k] {
                Neighbor::Site(_) => 2,
                Neighbor::Pad => 1,
                Neighbor::Node(..) => self.bond_dim(self.bond_of_leg(u, k).expect("node leg"), d_max),
            };
        }
        out
    }
}

struct Builder {
    nodes: Vec<TreeNode>,
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn split(self) -> (Rect, Rect) {
        if self.h >= self.w {
            let h0 = self.h / 2;
            (Rect { h: h0, ..self }, Rect { y: self.y + h0, h: self.h - h0, ..self })
        } else {
            let w0 = self.w / 2;
            (Rect { w: w0, ..self }, Rect { x: self.x + w0, w: self.w - w0, ..self })
        }
    }
}

impl Builder {
    fn push(&mut self, children: [Child; 2]) -> usize {
        self.nodes.push(TreeNode { children, parent: None });
        let u = self.nodes.len() - 1;
        for c in children {
            if let Child::Node(v) = c {
                self.nodes[v].parent = Some(u);
            }
        }
        u
    }

    /// Top node over a block: its two children, or the site and a pad.
    fn top(&mut self, inner: impl FnOnce(&mut Self) -> Child, sites: &[usize]) -> usize {
        if sites.len() == 1 {
            return self.push([Child::Site(sites[0]), Child::Pad]);
        }
        match inner(self) {
            Child::Node(u) => u,
            _ => unreachable!("blocks of two or more sites yield a node"),
        }
    }

    fn top_rect(&mut self, g: &LatticeGeometry, r: Rect) -> usize {
        if r.w * r.h == 1 {
            return self.push([Child::Site(g.site(r.x, r.y)), Child::Pad]);
        }
        match self.rect(g, r) {
            Child::Node(u) => u,
            _ => unreachable!(),
        }
    }

    fn bisect(&mut self, sites: &[usize]) -> Child {
        if sites.len() == 1 {
            return Child::Site(sites[0]);
        }
        let (a, b) = sites.split_at(sites.len() / 2);
        let ca = self.bisect(a);
        let cb = self.bisect(b);
        Child::Node(self.push([ca, cb]))
    }

    /// Chain of nodes absorbing one site each, ending at the block edge
    /// facing the other block.
    fn caterpillar(&mut self, sites: &[usize], grow_right: bool) -> Child {
        let n = sites.len();
        if grow_right {
            let mut c = Child::Site(sites[0]);
            for &s in &sites[1..] {
                c = Child::Node(self.push([c, Child::Site(s)]));
            }
            c
        } else {
            let mut c = Child::Site(sites[n - 1]);
            for &s in sites[..n - 1].iter().rev() {
                c = Child::Node(self.push([Child::Site(s), c]));
            }
            c
        }
    }

    fn rect(&mut self, g: &LatticeGeometry, r: Rect) -> Child {
        if r.w * r.h == 1 {
            return Child::Site(g.site(r.x, r.y));
        }
        let (a, b) = r.split();
        let ca = self.rect(g, a);
        let cb = self.rect(g, b);
        Child::Node(self.push([ca, cb]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Boundary;

    fn chain(l: usize) -> TreeTopology {
        TreeTopology::build(LatticeGeometry::chain(l, Boundary::Open).unwrap(), Layout::Tree).unwrap()
    }

    #[test]
    fn four_site_chain() {
        let t = chain(4);
        assert_eq!(t.n_nodes(), 2);
        assert_eq!(t.bond_block(t.root_bond()), &[0, 1]);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.bonds().len(), 1);
    }

    #[test]
    fn depth_of_large_chain() {
        assert_eq!(chain(128).depth(), 7);
        assert_eq!(chain(128).n_nodes(), 126);
    }

    #[test]
    fn square_merges_plaquettes() {
        let g = LatticeGeometry::square(4, Boundary::Open).unwrap();
        let t = TreeTopology::build(g, Layout::Tree).unwrap();
        assert_eq!(t.depth(), 4);
        let mut plaquettes = 0;
        for u in 0..t.n_nodes() {
            let s = t.sites_below(u);
            if s.len() == 4 {
                let mut c: Vec<_> = s.iter().map(|&i| g.coords(i)).collect();
                c.sort();
                let (x, y) = c[0];
                assert_eq!(c, vec![(x, y), (x, y + 1), (x + 1, y), (x + 1, y + 1)]);
                plaquettes += 1;
            }
        }
        assert_eq!(plaquettes, 4);
    }

    #[test]
    fn padding_only_for_single_site_blocks() {
        for l in 2..=9 {
            let t = chain(l);
            let pads = t.nodes().iter().flat_map(|n| n.children).filter(|c| *c == Child::Pad).count();
            let expected = usize::from(l / 2 == 1) + usize::from(l - l / 2 == 1);
            assert_eq!(pads, expected, "L={l}");
            let mut all: Vec<usize> = t.tops().iter().flat_map(|&u| t.sites_below(u).to_vec()).collect();
            all.sort();
            assert_eq!(all, (0..l).collect::<Vec<_>>());
        }
        assert!(TreeTopology::build(LatticeGeometry::chain(1, Boundary::Open).unwrap(), Layout::Tree).is_err());
    }

    #[test]
    fn bond_dims_respect_node_products() {
        for t in [chain(7), chain(16), TreeTopology::build(LatticeGeometry::square(3, Boundary::Open).unwrap(), Layout::Tree).unwrap()] {
            for d in [1, 2, 3, 5, 16] {
                for u in 0..t.n_nodes() {
                    let dims = t.leg_dims(u, d);
                    for k in (0..3).filter(|&k| matches!(t.neighbor(u, k), Neighbor::Node(..))) {
                        let others: usize = (0..3).filter(|&j| j != k).map(|j| dims[j]).product();
                        assert!(dims[k] <= others, "node {u} dims {dims:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn euler_tour_is_a_walk() {
        let t = chain(11);
        let tour = t.euler_tour();
        for w in tour.windows(2) {
            let adjacent = (0..3).any(|k| matches!(t.neighbor(w[0], k), Neighbor::Node(v, _) if v == w[1]));
            assert!(adjacent);
        }
        let mut seen: Vec<usize> = tour.to_vec();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), t.n_nodes());
    }

    #[test]
    fn paths_and_legs() {
        let t = chain(16);
        for a in 0..t.n_nodes() {
            for b in 0..t.n_nodes() {
                let p = t.path(a, b);
                assert_eq!(*p.last().unwrap(), b);
                assert!(p.len() <= 2 * t.depth());
            }
        }
    }

    #[test]
    fn mps_layout() {
        let t = TreeTopology::build(LatticeGeometry::chain(6, Boundary::Open).unwrap(), Layout::Mps).unwrap();
        assert_eq!(t.n_nodes(), 4);
        assert_eq!(t.bond_block(t.root_bond()), &[0, 1, 2]);
        assert_eq!(t.bonds().len(), 3);
    }
}
