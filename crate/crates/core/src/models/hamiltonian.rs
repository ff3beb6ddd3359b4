use std::fmt;

use serde::{Deserialize, Serialize};

use super::lattice::{LatticeGeometry, LatticeKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

/// Real 2x2 factor: `X`, `Z` or `iY = [[0, 1], [-1, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RealPauli {
    X,
    Z,
    IY,
}

impl RealPauli {
    /// Row-major 2x2 entries.
    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            RealPauli::X => [[0.0, 1.0], [1.0, 0.0]],
            RealPauli::Z => [[1.0, 0.0], [0.0, -1.0]],
            RealPauli::IY => [[0.0, 1.0], [-1.0, 0.0]],
        }
    }

    /// Whether the factor anticommutes with `X`.
    fn flips_x_parity(self) -> bool {
        !matches!(self, RealPauli::X)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, Pauli)>,
}

impl CouplingTerm {
    pub fn new(coefficient: f64, factors: Vec<(usize, Pauli)>) -> Self {
        Self { coefficient, factors }
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.iter().map(|f| f.0)
    }

    /// Real form `coefficient' * ⊗ factors'`; `Y ⊗ Y = -(iY ⊗ iY)`.
    pub fn to_real(&self) -> Result<RealTerm> {
        let n_y = self.factors.iter().filter(|f| f.1 == Pauli::Y).count();
        if n_y % 2 == 1 {
            return Err(Error::usage(format!("term {self} has an odd number of Y factors and is not real")));
        }
        let sign = if (n_y / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let factors = self
            .factors
            .iter()
            .map(|&(s, p)| {
                let r = match p {
                    Pauli::X => RealPauli::X,
                    Pauli::Y => RealPauli::IY,
                    Pauli::Z => RealPauli::Z,
                };
                (s, r)
            })
            .collect();
        Ok(RealTerm { coefficient: sign * self.coefficient, factors })
    }
}

impl fmt::Display for CouplingTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.coefficient)?;
        for (s, p) in &self.factors {
            write!(f, "·{p}{s}")?;
        }
        Ok(())
    }
}

/// Term over real factors; site order as in the source term.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, RealPauli)>,
}

impl RealTerm {
    pub fn commutes_with_x_parity(&self) -> bool {
        self.factors.iter().filter(|f| f.1.flips_x_parity()).count() % 2 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Tfi1d,
    Tfi2d,
    Xy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerms {
    geometry: LatticeGeometry,
    terms: Vec<CouplingTerm>,
    real: Vec<RealTerm>,
    tag: ModelTag,
}

impl HamiltonianTerms {
    pub fn new(geometry: LatticeGeometry, terms: Vec<CouplingTerm>, tag: ModelTag) -> Result<Self> {
        let n = geometry.n_sites();
        for t in &terms {
            if t.factors.is_empty() {
                return Err(Error::usage("coupling term without factors"));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::usage(format!("non-finite coefficient in {t}")));
            }
            if t.factors.len() > 2 {
                return Err(Error::usage(format!("term {t} acts on more than two sites")));
            }
            for (i, &(s, _)) in t.factors.iter().enumerate() {
                if s >= n {
                    return Err(Error::usage(format!("term {t} references site {s} of {n}")));
                }
                if t.factors[..i].iter().any(|f| f.0 == s) {
                    return Err(Error::usage(format!("term {t} repeats site {s}")));
                }
            }
        }
        let real = terms.iter().map(CouplingTerm::to_real).collect::<Result<_>>()?;
        Ok(Self { geometry, terms, real, tag })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn terms(&self) -> &[CouplingTerm] {
        &self.terms
    }

    pub fn real_terms(&self) -> &[RealTerm] {
        &self.real
    }

    pub fn tag(&self) -> ModelTag {
        self.tag
    }
}

/// `H = J Σ_<ij> Z_i Z_j - g Σ_i X_i`.
pub fn build_tfi(geometry: LatticeGeometry, j: f64, g: f64) -> Result<HamiltonianTerms> {
    let mut terms: Vec<CouplingTerm> = geometry
        .bonds()
        .into_iter()
        .map(|(a, b)| CouplingTerm::new(j, vec![(a, Pauli::Z), (b, Pauli::Z)]))
        .collect();
    terms.extend((0..geometry.n_sites()).map(|i| CouplingTerm::new(-g, vec![(i, Pauli::X)])));
    let tag = match geometry.kind() {
        LatticeKind::Chain => ModelTag::Tfi1d,
        LatticeKind::Square => ModelTag::Tfi2d,
    };
    HamiltonianTerms::new(geometry, terms, tag)
}

/// `H = coupling Σ_i (X_i X_{i+1} + Y_i Y_{i+1})`.
pub fn build_xy_chain(geometry: LatticeGeometry, coupling: f64) -> Result<HamiltonianTerms> {
    if geometry.kind() != LatticeKind::Chain {
        return Err(Error::usage("the XY model is defined on chains only"));
    }
    let mut terms = Vec::new();
    for (a, b) in geometry.bonds() {
        terms.push(CouplingTerm::new(coupling, vec![(a, Pauli::X), (b, Pauli::X)]));
        terms.push(CouplingTerm::new(coupling, vec![(a, Pauli::Y), (b, Pauli::Y)]));
    }
    HamiltonianTerms::new(geometry, terms, ModelTag::Xy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lattice::Boundary;

    #[test]
    fn tfi_two_sites() {
        let h = build_tfi(LatticeGeometry::chain(2, Boundary::Open).unwrap(), 1.0, 1.0).unwrap();
        let expected = vec![
            CouplingTerm::new(1.0, vec![(0, Pauli::Z), (1, Pauli::Z)]),
            CouplingTerm::new(-1.0, vec![(0, Pauli::X)]),
            CouplingTerm::new(-1.0, vec![(1, Pauli::X)]),
        ];
        assert_eq!(h.terms(), expected.as_slice());
        assert_eq!(h.tag(), ModelTag::Tfi1d);
    }

    #[test]
    fn tfi_square_torus() {
        let h = build_tfi(LatticeGeometry::square(4, Boundary::Periodic).unwrap(), 1.0, 3.0).unwrap();
        let zz = h.terms().iter().filter(|t| t.factors.len() == 2).count();
        let x = h.terms().iter().filter(|t| t.factors.len() == 1).count();
        assert_eq!((zz, x), (32, 16));
    }

    #[test]
    fn yy_maps_to_negated_real_product() {
        let t = CouplingTerm::new(0.5, vec![(0, Pauli::Y), (1, Pauli::Y)]).to_real().unwrap();
        assert_eq!(t.coefficient, -0.5);
        assert_eq!(t.factors, vec![(0, RealPauli::IY), (1, RealPauli::IY)]);
        assert!(CouplingTerm::new(1.0, vec![(0, Pauli::Y)]).to_real().is_err());
    }

    #[test]
    fn xy_rejects_square_and_handles_single_site() {
        assert!(build_xy_chain(LatticeGeometry::square(2, Boundary::Open).unwrap(), 1.0).is_err());
        let h = build_xy_chain(LatticeGeometry::chain(1, Boundary::Open).unwrap(), 1.0).unwrap();
        assert!(h.terms().is_empty());
    }

    #[test]
    fn validation() {
        let g = LatticeGeometry::chain(2, Boundary::Open).unwrap();
        let bad_site = CouplingTerm::new(1.0, vec![(2, Pauli::Z)]);
        let repeated = CouplingTerm::new(1.0, vec![(0, Pauli::Z), (0, Pauli::X)]);
        assert!(HamiltonianTerms::new(g, vec![bad_site], ModelTag::Tfi1d).is_err());
        assert!(HamiltonianTerms::new(g, vec![repeated], ModelTag::Tfi1d).is_err());
        assert!(HamiltonianTerms::new(g, vec![CouplingTerm::new(1.0, vec![])], ModelTag::Tfi1d).is_err());
    }
}
