//! Negativity of reduced-space density matrices across the root bond and the
//! scaling fits of its temperature dependence.

mod fit;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::EnsembleFactory;
use crate::tensor::{Matrix, SymmetricMatrix};
use crate::thermal::Beta;

pub use fit::{
    fit_cft_intermediate, fit_low_temperature, levenberg_marquardt, FitKind, FitResult, LmFit, LmOptions, OffsetModel,
    Window, CFT_WINDOW, LOW_T_WINDOW, MIN_FIT_POINTS,
};

/// Trace and symmetry tolerance of [`ReducedDensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-10;
/// Largest admitted difference between the two zero-temperature negativities.
pub const ZERO_T_AGREEMENT: f64 = 1e-8;

/// Density matrix over the product basis `(α, β)`, row index `α D_B + β`.
#[derive(Clone, Debug)]
pub struct ReducedDensityMatrix {
    matrix: Matrix<f64>,
    d_a: usize,
    d_b: usize,
}

impl ReducedDensityMatrix {
    /// Validates shape, symmetry and unit trace.
    pub fn new(matrix: Matrix<f64>, d_a: usize, d_b: usize) -> Result<Self> {
        let dim = d_a * d_b;
        if dim == 0 || matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::usage(format!(
                "{}x{} matrix does not factorize as {d_a} x {d_b}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        matrix.ensure_finite()?;
        let scale = matrix.max_abs().max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > DENSITY_TOL * scale {
                    return Err(Error::usage("density matrix is not symmetric"));
                }
            }
        }
        let tr = matrix.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::usage(format!("density matrix has trace {tr}")));
        }
        Ok(Self { matrix, d_a, d_b })
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ` over the product basis.
    pub fn pure(psi: &[f64], d_a: usize, d_b: usize) -> Result<Self> {
        let n = psi.len();
        let norm: f64 = psi.iter().map(|x| x * x).sum();
        if !(norm > 0.0) {
            return Err(Error::usage("pure state of zero norm"));
        }
        Self::new(Matrix::from_fn(n, n, |i, j| psi[i] * psi[j] / norm), d_a, d_b)
    }

    /// `ρ̃` of an ensemble whose members all live in the reduced space.
    pub fn from_ensemble(ens: &crate::gibbs::ThermalEnsemble) -> Result<Self> {
        let (d_a, d_b) = ens.spectrum().effective().extents();
        Self::new(ens.density_matrix()?, d_a, d_b)
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.matrix
    }

    /// `(D_A, D_B)`
    pub fn extents(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    /// Lowest eigenvalue is above `−DENSITY_TOL`.
    pub fn check_positive(&self) -> Result<()> {
        let low = SymmetricMatrix::symmetrized(self.matrix.clone())?.into_eigvalsh()?[0];
        if low < -DENSITY_TOL {
            return Err(Error::usage(format!("density matrix has eigenvalue {low}")));
        }
        Ok(())
    }
}

/// `M[(α,β),(α',β')] ↦ M[(α',β),(α,β')]` for any `D_A D_B`-square matrix.
pub fn partial_transpose_matrix(m: &Matrix<f64>, d_a: usize, d_b: usize) -> Result<Matrix<f64>> {
    let dim = d_a * d_b;
    if m.rows() != dim || m.cols() != dim {
        return Err(Error::usage(format!("{}x{} matrix does not factorize as {d_a} x {d_b}", m.rows(), m.cols())));
    }
    let mut out = Matrix::zeros(dim, dim);
    for a in 0..d_a {
        for b in 0..d_b {
            for a2 in 0..d_a {
                for b2 in 0..d_b {
                    out[(a2 * d_b + b, a * d_b + b2)] = m[(a * d_b + b, a2 * d_b + b2)];
                }
            }
        }
    }
    Ok(out)
}

/// `ρ^{T_A}`, symmetric for a symmetric `ρ`.
pub fn partial_transpose(rho: &ReducedDensityMatrix) -> Result<SymmetricMatrix<f64>> {
    SymmetricMatrix::symmetrized(partial_transpose_matrix(&rho.matrix, rho.d_a, rho.d_b)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    /// `Σ |σ|` over the negative eigenvalues of `ρ^{T_A}`.
    pub negativity: f64,
    /// `ln(2N + 1)`
    pub log_negativity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsystem: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
}

pub fn log_negativity(rho: &ReducedDensityMatrix) -> Result<NegativityResult> {
    log_negativity_with(rho, false)
}

/// Like [`log_negativity`], optionally keeping the partial-transpose spectrum.
pub fn log_negativity_with(rho: &ReducedDensityMatrix, keep_spectrum: bool) -> Result<NegativityResult> {
    let sigma = partial_transpose(rho)?.into_eigvalsh()?;
    let n: f64 = sigma.iter().filter(|&&s| s < 0.0).map(|s| -s).sum();
    Ok(NegativityResult {
        negativity: n,
        log_negativity: (2.0 * n).ln_1p(),
        temperature: None,
        subsystem: None,
        spectrum: keep_spectrum.then_some(sigma),
    })
}

/// `2 ln Σ λ` for normalized Schmidt values of a pure state.
pub fn pure_state_log_negativity(schmidt: &[f64]) -> Result<f64> {
    let norm = schmidt.iter().map(|l| l * l).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::usage("Schmidt values of the zero state"));
    }
    Ok(2.0 * (schmidt.iter().map(|l| l.abs()).sum::<f64>() / norm).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativityRow {
    pub temperature: f64,
    pub epsilon: f64,
    /// `ε(T) − ε(0)`
    pub epsilon_s: f64,
}

/// `ε(T)` and `ε_s(T)` over an ascending grid, with `ε(0)` from the `β = ∞`
/// ensemble cross-checked against the closed form of its pure state.
pub fn negativity_vs_temperature<E: EnsembleFactory + ?Sized>(
    source: &E,
    temperatures: &[f64],
) -> Result<Vec<NegativityRow>> {
    crate::gibbs::validate_temperatures(temperatures)?;
    let cold = source.ensemble(Beta::Infinite)?;
    let eps0 = log_negativity(&ReducedDensityMatrix::from_ensemble(&cold)?)?.log_negativity;
    let v0 = cold.eigenvector(0).ok_or_else(|| Error::usage("negativity needs reduced-space members"))?;
    let (d_a, d_b) = cold.spectrum().effective().extents();
    let (_, s, _) = Matrix::from_vec(d_a, d_b, v0.to_vec())?.svd()?;
    let closed = pure_state_log_negativity(&s)?;
    if (closed - eps0).abs() > ZERO_T_AGREEMENT {
        return Err(Error::Internal(format!(
            "zero-temperature negativity {eps0} disagrees with the Schmidt closed form {closed}"
        )));
    }
    let source_eps = pure_state_log_negativity(cold.spectrum().effective().schmidt_values())?;
    debug!("ε(0) = {eps0:.12}, variational state gives {source_eps:.12}");
    temperatures
        .iter()
        .map(|&t| {
            let epsilon = if t == 0.0 {
                eps0
            } else {
                let ens = source.ensemble(Beta::from_temperature(t)?)?;
                log_negativity(&ReducedDensityMatrix::from_ensemble(&ens)?)?.log_negativity
            };
            Ok(NegativityRow { temperature: t, epsilon, epsilon_s: epsilon - eps0 })
        })
        .collect()
}
