use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Chain of `L` sites or `L x L` square lattice; square sites are indexed
/// `i = y * L + x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeGeometry {
    kind: LatticeKind,
    l: usize,
    boundary: Boundary,
}

impl LatticeGeometry {
    pub fn new(kind: LatticeKind, l: usize, boundary: Boundary) -> Result<Self> {
        if l == 0 {
            return Err(Error::usage("lattice size must be positive"));
        }
        if kind == LatticeKind::Square && l.checked_mul(l).is_none() {
            return Err(Error::usage(format!("square lattice of side {l} overflows")));
        }
        Ok(Self { kind, l, boundary })
    }

    pub fn chain(l: usize, boundary: Boundary) -> Result<Self> {
        Self::new(LatticeKind::Chain, l, boundary)
    }

    pub fn square(l: usize, boundary: Boundary) -> Result<Self> {
        Self::new(LatticeKind::Square, l, boundary)
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn linear_size(&self) -> usize {
        self.l
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_sites(&self) -> usize {
        match self.kind {
            LatticeKind::Chain => self.l,
            LatticeKind::Square => self.l * self.l,
        }
    }

    /// `(x, y)`; `y = 0` on a chain.
    pub fn coords(&self, site: usize) -> (usize, usize) {
        match self.kind {
            LatticeKind::Chain => (site, 0),
            LatticeKind::Square => (site % self.l, site / self.l),
        }
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        y * self.l + x
    }

    /// Sublattice sign `(-1)^(x+y)`; `None` when wrap bonds join equal
    /// sublattices (periodic with odd `L > 2`).
    pub fn neel_sign(&self, site: usize) -> Option<f64> {
        if self.boundary == Boundary::Periodic && self.l > 2 && self.l % 2 == 1 {
            return None;
        }
        let (x, y) = self.coords(site);
        Some(if (x + y) % 2 == 0 { 1.0 } else { -1.0 })
    }

    /// Nearest-neighbor pairs `(i, j)`, each listed once. Wrap bonds are
    /// added only when they join two sites not already bonded (`L > 2`).
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let l = self.l;
        let wrap = self.boundary == Boundary::Periodic && l > 2;
        let mut out = Vec::new();
        match self.kind {
            LatticeKind::Chain => {
                out.extend((0..l.saturating_sub(1)).map(|i| (i, i + 1)));
                if wrap {
                    out.push((l - 1, 0));
                }
            }
            LatticeKind::Square => {
                for y in 0..l {
                    for x in 0..l {
                        if x + 1 < l {
                            out.push((self.site(x, y), self.site(x + 1, y)));
                        } else if wrap {
                            out.push((self.site(x, y), self.site(0, y)));
                        }
                        if y + 1 < l {
                            out.push((self.site(x, y), self.site(x, y + 1)));
                        } else if wrap {
                            out.push((self.site(x, y), self.site(x, 0)));
                        }
                    }
                }
            }
        }
        out
    }
}
