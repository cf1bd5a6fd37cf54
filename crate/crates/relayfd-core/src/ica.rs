//! FastICA pipeline: centering, eigendecomposition-based whitening with
//! dimension reduction, negentropy approximation and the deflationary
//! fixed-point iteration.
//!
//! Data matrices hold one observation channel per row and one time point per
//! column. Whitening diagonalizes the sample covariance `X Xᵀ / T`; rows of
//! the demixing matrix `W` are unit-norm and mutually orthogonal in the
//! whitened space, so the recovered sources are `s = W z` with `z` the
//! whitened data.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `E{ln cosh v}` for standard Gaussian `v` (quadrature, 16 digits).
const LOGCOSH_GAUSS_MEAN: f64 = 0.374_567_207_491_438;
/// `E{v^4/4}` for standard Gaussian `v`.
const QUARTIC_GAUSS_MEAN: f64 = 0.75;

/// Nonlinearity used in the negentropy approximation and the fixed-point
/// update. `LogCosh` is the general-purpose default; `Cube` is the
/// kurtosis-based alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GFunc {
    #[default]
    LogCosh,
    Cube,
}

impl GFunc {
    /// G(u), numerically stable for large |u|.
    fn g_big(self, u: f64) -> f64 {
        match self {
            // ln cosh u = |u| - ln 2 + ln(1 + exp(-2|u|))
            GFunc::LogCosh => {
                let a = u.abs();
                a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
            }
            GFunc::Cube => {
                let u2 = u * u;
                0.25 * u2 * u2
            }
        }
    }

    /// g(u) = G'(u).
    fn g(self, u: f64) -> f64 {
        match self {
            GFunc::LogCosh => u.tanh(),
            GFunc::Cube => u * u * u,
        }
    }

    /// g'(u).
    fn g_prime(self, u: f64) -> f64 {
        match self {
            GFunc::LogCosh => {
                let t = u.tanh();
                1.0 - t * t
            }
            GFunc::Cube => 3.0 * u * u,
        }
    }

    /// `E{G(v)}` for standard Gaussian `v`.
    fn gaussian_mean(self) -> f64 {
        match self {
            GFunc::LogCosh => LOGCOSH_GAUSS_MEAN,
            GFunc::Cube => QUARTIC_GAUSS_MEAN,
        }
    }
}

/// Default convergence tolerance for the fixed-point iteration.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default iteration cap per component.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Default relative eigenvalue cutoff for dimension reduction.
pub const DEFAULT_EIG_CUTOFF_RATIO: f64 = 1e-6;

/// Subtracts the row means; returns the centered matrix and the means.
pub fn center(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let t = x.ncols();
    let mean = DVector::from_fn(x.nrows(), |r, _| x.row(r).sum() / t as f64);
    let mut centered = x.clone();
    for r in 0..x.nrows() {
        for c in 0..t {
            centered[(r, c)] -= mean[r];
        }
    }
    (centered, mean)
}

/// Centering mean, whitening transform and whitened data.
#[derive(Debug, Clone)]
pub struct WhiteningResult {
    /// Row means removed before whitening (length M).
    pub mean: DVector<f64>,
    /// Whitening transform `diag(lambda^-1/2) Eᵀ`, shape n x M.
    pub matrix: DMatrix<f64>,
    /// Whitened data, shape n x T; sample covariance is the identity.
    pub whitened: DMatrix<f64>,
    /// Retained dimensions n <= M.
    pub retained_dims: usize,
    /// All M eigenvalues of the sample covariance, descending.
    pub eigenvalues: DVector<f64>,
}

impl WhiteningResult {
    /// Applies centering and whitening to new data with M rows.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} rows, got {}",
                self.mean.len(),
                x.nrows()
            )));
        }
        let mut centered = x.clone();
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                centered[(r, c)] -= self.mean[r];
            }
        }
        Ok(&self.matrix * centered)
    }
}

/// Whitens a data matrix via eigendecomposition of the sample covariance,
/// dropping dimensions whose eigenvalue falls below
/// `eig_cutoff_ratio * lambda_max`. Row means are removed internally and
/// recorded in the result.
pub fn whiten(x: &DMatrix<f64>, eig_cutoff_ratio: f64) -> Result<WhiteningResult> {
    let (m, t) = (x.nrows(), x.ncols());
    if m == 0 || t == 0 {
        return Err(Error::InvalidInput("empty data matrix".into()));
    }
    if t <= m {
        return Err(Error::InsufficientData(format!(
            "need more time points than channels, got {m} x {t}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("data matrix holds non-finite entries".into()));
    }

    let (centered, mean) = center(x);
    let cov = &centered * centered.transpose() / t as f64;
    let eig = cov.symmetric_eigen();

    // Sort eigenpairs by descending eigenvalue.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_fn(m, |i, _| eig.eigenvalues[order[i]]);

    let lambda_max = eigenvalues[0];
    if !(lambda_max > 0.0) {
        return Err(Error::NoVariance);
    }
    let cutoff = eig_cutoff_ratio * lambda_max;
    let retained = eigenvalues.iter().take_while(|&&l| l > cutoff && l > 0.0).count();
    if retained == 0 {
        return Err(Error::NoVariance);
    }

    // Whitening matrix Lambda^{-1/2} E^T with a canonical sign per
    // eigenvector (largest-magnitude entry positive) for reproducibility.
    let mut matrix = DMatrix::zeros(retained, m);
    for i in 0..retained {
        let col = eig.eigenvectors.column(order[i]);
        let mut max_idx = 0;
        for r in 1..m {
            if col[r].abs() > col[max_idx].abs() {
                max_idx = r;
            }
        }
        let sign = if col[max_idx] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / eigenvalues[i].sqrt();
        for r in 0..m {
            matrix[(i, r)] = scale * col[r];
        }
    }

    let whitened = &matrix * &centered;
    Ok(WhiteningResult { mean, matrix, whitened, retained_dims: retained, eigenvalues })
}

/// Negentropy approximation `[E{G(y)} - E{G(v)}]^2` with `v` standard
/// Gaussian. The input is standardized internally; a constant input is
/// rejected.
pub fn negentropy_approx(y: &[f64], g: GFunc) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 samples".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::NoVariance);
    }
    let std = var.sqrt();
    let e_g = y.iter().map(|v| g.g_big((v - mean) / std)).sum::<f64>() / n;
    let d = e_g - g.gaussian_mean();
    Ok(d * d)
}

/// Demixing matrix, whitening context and recovered sources.
#[derive(Debug, Clone)]
pub struct DemixingModel {
    /// Rotation in whitened space; rows unit-norm, mutually orthogonal.
    pub w: DMatrix<f64>,
    pub whitening: WhiteningResult,
    /// Recovered sources `w * whitened`.
    pub sources: DMatrix<f64>,
    /// Total fixed-point iterations across components.
    pub iterations_used: usize,
    /// False if any component hit the iteration cap before converging.
    pub converged: bool,
}

impl DemixingModel {
    /// Recovers sources from new data with the same channel count as the
    /// training data: `w * (matrix * (x - mean))`. Applied to the training
    /// matrix this reproduces `sources` bit for bit.
    pub fn separate(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = self.whitening.apply(x_new)?;
        Ok(&self.w * z)
    }
}

/// Deflationary FastICA on whitened data with seeded random initial vectors.
pub fn fastica(
    white: &WhiteningResult,
    n_sources: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<DemixingModel> {
    fastica_with_init(white, n_sources, tol, max_iter, GFunc::LogCosh, None, seed)
}

/// Deflationary FastICA with an optional warm-start demixing matrix; rows of
/// `init` (as many as available) seed the per-component iteration, further
/// components fall back to seeded random vectors.
pub fn fastica_with_init(
    white: &WhiteningResult,
    n_sources: usize,
    tol: f64,
    max_iter: usize,
    g: GFunc,
    init: Option<&DMatrix<f64>>,
    seed: u64,
) -> Result<DemixingModel> {
    let n = white.retained_dims;
    let t = white.whitened.ncols();
    if n_sources == 0 {
        return Err(Error::InvalidInput("n_sources must be >= 1".into()));
    }
    if n_sources > n {
        return Err(Error::InvalidInput(format!(
            "n_sources {n_sources} exceeds retained dimensions {n}"
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput("tol must be > 0 and max_iter >= 1".into()));
    }

    let z = &white.whitened;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_unit = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        loop {
            let v: DVector<f64> = DVector::from_fn(n, |_, _| {
                let s: f64 = StandardNormal.sample(rng);
                s
            });
            let norm = v.norm();
            if norm > 1e-12 {
                return v / norm;
            }
        }
    };

    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n_sources);
    let mut iterations_used = 0usize;
    let mut converged_all = true;

    for comp in 0..n_sources {
        let mut w = match init {
            Some(m) if comp < m.nrows() && m.ncols() == n => {
                let v = DVector::from_fn(n, |i, _| m[(comp, i)]);
                let v = orthogonalize(v, &rows);
                match normalize(v) {
                    Some(u) => u,
                    None => random_unit(&mut rng),
                }
            }
            _ => {
                let v = orthogonalize(random_unit(&mut rng), &rows);
                normalize(v).unwrap_or_else(|| random_unit(&mut rng))
            }
        };

        let mut converged = false;
        for _ in 0..max_iter {
            iterations_used += 1;
            // u = w' z, then w_new = E{z g(u)} - E{g'(u)} w
            let u = z.tr_mul(&w); // T x 1
            let mut gu = DVector::zeros(t);
            let mut gp_sum = 0.0;
            for i in 0..t {
                gu[i] = g.g(u[i]);
                gp_sum += g.g_prime(u[i]);
            }
            let mut w_new = (z * gu) / t as f64 - (gp_sum / t as f64) * &w;
            w_new = orthogonalize(w_new, &rows);
            let w_new = match normalize(w_new) {
                Some(v) => v,
                None => random_unit(&mut rng),
            };
            let overlap = w_new.dot(&w).abs();
            w = w_new;
            if overlap > 1.0 - tol {
                converged = true;
                break;
            }
        }
        converged_all &= converged;
        rows.push(w);
    }

    let w = DMatrix::from_fn(n_sources, n, |r, c| rows[r][c]);
    let sources = &w * z;
    Ok(DemixingModel {
        w,
        whitening: white.clone(),
        sources,
        iterations_used,
        converged: converged_all,
    })
}

fn orthogonalize(mut v: DVector<f64>, rows: &[DVector<f64>]) -> DVector<f64> {
    for r in rows {
        let proj = v.dot(r);
        v -= proj * r;
    }
    v
}

fn normalize(v: DVector<f64>) -> Option<DVector<f64>> {
    let norm = v.norm();
    if norm > 1e-12 {
        Some(v / norm)
    } else {
        None
    }
}
