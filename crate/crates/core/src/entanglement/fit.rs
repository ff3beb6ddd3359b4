//! Damped Gauss-Newton least squares and the two negativity scaling forms.
//!
//! Intermediate temperatures, with `λ = π l T`:
//! `ε_s = (c/2) ln((1 − e^{−2λ}) / (2λ)) + f₀ [+ f₁ e^{−2λ}]`.
//! Low temperatures, with `c` fixed:
//! `ε_s = c (π l T)² / 12 + C_k (l T)^{4 Δ_k}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest window points accepted by a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Inclusive window on `λ = π l T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

pub const CFT_WINDOW: Window = Window { lo: 0.5, hi: 3.0 };
pub const LOW_T_WINDOW: Window = Window { lo: 0.0, hi: 0.5 };

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
            return Err(Error::usage(format!("invalid fit window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lo <= lambda && lambda <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    CftIntermediate,
    LowTemperature,
}

/// Treatment of the non-universal function in the intermediate form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetModel {
    /// `f₀`
    #[default]
    Constant,
    /// `f₀ + f₁ e^{−2λ}`
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Square roots of the covariance diagonal.
    pub std_errors: Vec<f64>,
    /// `‖y − model‖₂`
    pub residual_norm: f64,
    pub window: Window,
    pub n_points: usize,
    pub iterations: usize,
    pub subsystem: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_c: Option<f64>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged once a step changes no parameter by more than `param_tol (|p| + param_tol)`.
    pub param_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, param_tol: 1e-10, initial_damping: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmFit {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Levenberg-Marquardt on `Σ (y_i − model(p, x_i))²` with a central-difference
/// Jacobian. Steps leaving `feasible` are rejected like uphill steps.
pub fn levenberg_marquardt<F, G>(model: F, x: &[f64], y: &[f64], p0: &[f64], feasible: G, opts: &LmOptions) -> Result<LmFit>
where
    F: Fn(&[f64], f64) -> f64,
    G: Fn(&[f64]) -> bool,
{
    let (n, m) = (x.len(), p0.len());
    if n != y.len() || n < m || m == 0 {
        return Err(Error::usage(format!("{n} data points cannot determine {m} parameters")));
    }
    if !feasible(p0) {
        return Err(Error::usage("initial parameters are infeasible"));
    }
    let residuals = |p: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(&xi, &yi)| yi - model(p, xi)).collect() };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::usage("model is not finite at the initial parameters"));
    }
    let mut mu = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(&model, x, &p);
        let (a, g) = normal_equations(&jac, &r, m);
        if g.iter().all(|v| *v == 0.0) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while mu < 1e20 {
            let mut damped = a.clone();
            for j in 0..m {
                damped[j][j] += mu * a[j][j].max(1e-300);
            }
            let Some(delta) = solve_small(damped, g.clone()) else {
                mu *= 10.0;
                continue;
            };
            let small = delta.iter().zip(&p).all(|(d, q)| d.abs() <= opts.param_tol * (q.abs() + opts.param_tol));
            let trial: Vec<f64> = p.iter().zip(&delta).map(|(q, d)| q + d).collect();
            let rt = if feasible(&trial) { residuals(&trial) } else { Vec::new() };
            let ct = if rt.is_empty() { f64::INFINITY } else { cost(&rt) };
            if ct.is_finite() && ct <= c {
                p = trial;
                r = rt;
                c = ct;
                mu = (mu / 10.0).max(1e-15);
                accepted = true;
                converged = small;
                break;
            }
            if small {
                converged = true;
                break;
            }
            mu *= 10.0;
        }
        if converged || !accepted {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            context: format!("least-squares fit stopped at parameters {p:?}"),
            iterations,
            best_residual: c.sqrt(),
        });
    }
    let jac = jacobian(&model, x, &p);
    let (a, _) = normal_equations(&jac, &r, m);
    let sigma2 = if n > m { c / (n - m) as f64 } else { 0.0 };
    let std_errors = (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            solve_small(a.clone(), e).map_or(f64::INFINITY, |col| (sigma2 * col[j]).max(0.0).sqrt())
        })
        .collect();
    Ok(LmFit { params: p, std_errors, residual_norm: c.sqrt(), iterations })
}

fn jacobian<F: Fn(&[f64], f64) -> f64>(model: &F, x: &[f64], p: &[f64]) -> Vec<Vec<f64>> {
    let mut jac = vec![vec![0.0; p.len()]; x.len()];
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-3);
        for (i, &xi) in x.iter().enumerate() {
            q[j] = p[j] + h;
            let up = model(&q, xi);
            q[j] = p[j] - h;
            let down = model(&q, xi);
            jac[i][j] = (up - down) / (2.0 * h);
        }
        q[j] = p[j];
    }
    jac
}

/// `(JᵀJ, Jᵀr)`
fn normal_equations(jac: &[Vec<f64>], r: &[f64], m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = vec![vec![0.0; m]; m];
    let mut g = vec![0.0; m];
    for (row, ri) in jac.iter().zip(r) {
        for j in 0..m {
            g[j] += row[j] * ri;
            for k in 0..m {
                a[j][k] += row[j] * row[k];
            }
        }
    }
    (a, g)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn windowed(data: &[(f64, f64)], l: usize, window: Window) -> Result<(Vec<f64>, Vec<f64>)> {
    if l == 0 {
        return Err(Error::usage("subsystem size must be positive"));
    }
    if data.iter().any(|(t, e)| !(t.is_finite() && e.is_finite())) {
        return Err(Error::usage("fit data must be finite"));
    }
    let (t, e): (Vec<f64>, Vec<f64>) =
        data.iter().filter(|(t, _)| *t > 0.0 && window.contains(PI * l as f64 * t)).copied().unzip();
    if t.len() < MIN_FIT_POINTS {
        return Err(Error::usage(format!(
            "{} points in the window [{}, {}] of λ = π l T, at least {MIN_FIT_POINTS} required",
            t.len(),
            window.lo,
            window.hi
        )));
    }
    Ok((t, e))
}

/// `ln((1 − e^{−2λ}) / (2λ))`
fn cft_shape(lambda: f64) -> f64 {
    (-(-2.0 * lambda).exp_m1() / (2.0 * lambda)).ln()
}

/// Fits `(c, f₀[, f₁])` on `(T, ε_s)` points with `λ = π l T` in `window`.
pub fn fit_cft_intermediate(data: &[(f64, f64)], l: usize, window: Window, offset: OffsetModel) -> Result<FitResult> {
    let (t, e) = windowed(data, l, window)?;
    let lf = l as f64;
    let model = |p: &[f64], t: f64| {
        let lambda = PI * lf * t;
        let mut v = 0.5 * p[0] * cft_shape(lambda) + p[1];
        if p.len() == 3 {
            v += p[2] * (-2.0 * lambda).exp();
        }
        v
    };
    let (p0, names) = match offset {
        OffsetModel::Constant => (vec![0.5, 0.0], vec!["c", "f0"]),
        OffsetModel::Linear => (vec![0.5, 0.0, 0.0], vec!["c", "f0", "f1"]),
    };
    let fit = levenberg_marquardt(model, &t, &e, &p0, |_| true, &LmOptions::default())?;
    Ok(FitResult {
        kind: FitKind::CftIntermediate,
        names: names.into_iter().map(String::from).collect(),
        values: fit.params,
        std_errors: fit.std_errors,
        residual_norm: fit.residual_norm,
        window,
        n_points: t.len(),
        iterations: fit.iterations,
        subsystem: l,
        fixed_c: None,
    })
}

/// Fits `(C_k, Δ_k)` with `Δ_k > 0` and `c` fixed on the low-temperature window.
pub fn fit_low_temperature(data: &[(f64, f64)], l: usize, c_fixed: f64, window: Window) -> Result<FitResult> {
    if !c_fixed.is_finite() {
        return Err(Error::usage("fixed central charge must be finite"));
    }
    let (t, e) = windowed(data, l, window)?;
    let lf = l as f64;
    let analytic = |t: f64| c_fixed * (PI * lf * t).powi(2) / 12.0;
    let model = |p: &[f64], t: f64| analytic(t) + p[0] * (lf * t).powf(4.0 * p[1]);
    // start from the best exponent on a coarse grid, with C_k solved linearly
    let mut best = (f64::INFINITY, 0.0, 0.75);
    for i in 1..=60 {
        let delta = 0.05 * i as f64;
        let basis: Vec<f64> = t.iter().map(|t| (lf * t).powf(4.0 * delta)).collect();
        let den: f64 = basis.iter().map(|b| b * b).sum();
        if !(den > 0.0 && den.is_finite()) {
            continue;
        }
        let ck = basis.iter().zip(&t).zip(&e).map(|((b, t), e)| b * (e - analytic(*t))).sum::<f64>() / den;
        let cost: f64 = basis.iter().zip(&t).zip(&e).map(|((b, t), e)| (e - analytic(*t) - ck * b).powi(2)).sum();
        if cost < best.0 {
            best = (cost, ck, delta);
        }
    }
    let fit = levenberg_marquardt(model, &t, &e, &[best.1, best.2], |p| p[1] > 0.0, &LmOptions::default())?;
    Ok(FitResult {
        kind: FitKind::LowTemperature,
        names: vec!["C_k".into(), "Delta_k".into()],
        values: fit.params,
        std_errors: fit.std_errors,
        residual_norm: fit.residual_norm,
        window,
        n_points: t.len(),
        iterations: fit.iterations,
        subsystem: l,
        fixed_c: Some(c_fixed),
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;

    fn cft_data(c: f64, f0: f64, l: usize, noise: f64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        (1..=60)
            .map(|i| {
                let t = 0.05 * i as f64 / l as f64;
                let y = 0.5 * c * cft_shape(PI * l as f64 * t) + f0 + noise * normal.sample(&mut rng);
                (t, y)
            })
            .collect()
    }

    #[test]
    fn recovers_planted_central_charge() {
        let exact = fit_cft_intermediate(&cft_data(0.5, 0.1, 64, 0.0), 64, CFT_WINDOW, OffsetModel::Constant).unwrap();
        assert!((exact.parameter("c").unwrap() - 0.5).abs() < 1e-6 * 0.5);
        assert!((exact.parameter("f0").unwrap() - 0.1).abs() < 1e-6 * 0.1);
        assert!(exact.residual_norm < 1e-8);
        let noisy = fit_cft_intermediate(&cft_data(0.5, 0.1, 64, 1e-4), 64, CFT_WINDOW, OffsetModel::Constant).unwrap();
        assert!((noisy.parameter("c").unwrap() - 0.5).abs() < 1e-2);
        let one = fit_cft_intermediate(&cft_data(1.0, -0.2, 32, 1e-4), 32, CFT_WINDOW, OffsetModel::Linear).unwrap();
        assert!((one.parameter("c").unwrap() - 1.0).abs() < 2e-2);
        assert_eq!(one.values.len(), 3);
    }

    #[test]
    fn recovers_planted_low_temperature_exponent() {
        let (l, c, ck, dk) = (128usize, 0.5, -5.0, 0.75);
        let data: Vec<(f64, f64)> = (0..=40)
            .map(|i| {
                let t = 0.0125 * i as f64 / l as f64;
                (t, c * (PI * l as f64 * t).powi(2) / 12.0 + ck * (l as f64 * t).powf(4.0 * dk))
            })
            .collect();
        let fit = fit_low_temperature(&data, l, c, LOW_T_WINDOW).unwrap();
        assert!((fit.parameter("C_k").unwrap() - ck).abs() < 1e-6 * ck.abs());
        assert!((fit.parameter("Delta_k").unwrap() - dk).abs() < 1e-6 * dk);
        assert_eq!(fit.fixed_c, Some(c));
    }

    #[test]
    fn too_few_points_is_a_usage_error() {
        let data = cft_data(0.5, 0.0, 64, 0.0);
        let err = fit_cft_intermediate(&data[..3], 64, CFT_WINDOW, OffsetModel::Constant).unwrap_err();
        assert!(err.is_usage());
        assert!(Window::new(1.0, 0.5).is_err());
    }

    #[test]
    fn lm_fits_an_exponential() {
        let x: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * (-1.3 * x).exp()).collect();
        let fit =
            levenberg_marquardt(|p, x| p[0] * (p[1] * x).exp(), &x, &y, &[1.0, 0.0], |_| true, &LmOptions::default())
                .unwrap();
        assert!((fit.params[0] - 2.0).abs() < 1e-8 && (fit.params[1] + 1.3).abs() < 1e-8);
    }
}
