//! Optimal weighted linear SI channel estimator and the least-squares
//! baseline.
//!
//! The estimator is `ĥ_δ = W y` with `W = (1/N_c) Fᴴ X⁻¹ V`, where the
//! `N_c × N_c` weight `V = X F W` minimises the expected residual power
//!
//! ```text
//! E_r|X = N_c σ_n² + tr{A} + tr{V C Vᴴ} - 2 Re tr{V B}
//! ```
//!
//! with `A = E[y_I y_Iᴴ | X]`, `B = A + σ_n² I` and `C = B + σ_u² I`. Each row
//! of `V` is an independent real quadratic program in `2N_c` unknowns that
//! share one Hessian `Φ`, so `Φ` is factored once and all rows are solved by
//! back-substitution.

use nalgebra::{DMatrix, DVector};

use crate::impairments::PnCovarianceTable;
use crate::linalg;
use crate::ofdm::{self, DftMatrix};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Everything the optimal estimator needs to know about one OFDM symbol.
#[derive(Debug, Clone)]
pub struct EstimatorStatistics<'a> {
    pub symbols: CVector,
    pub phase_noise: &'a PnCovarianceTable,
    pub pdp: Vec<f64>,
    pub n_tx: usize,
    pub noise_power: f64,
    pub soi_power: f64,
}

impl EstimatorStatistics<'_> {
    pub fn n_subcarriers(&self) -> usize {
        self.symbols.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.symbols.len();
        if n != self.phase_noise.n_subcarriers() {
            return Err(Error::DimensionMismatch(format!(
                "{n} symbols but a {}-subcarrier phase-noise table",
                self.phase_noise.n_subcarriers()
            )));
        }
        if self.pdp.is_empty() || self.pdp.len() > n {
            return Err(Error::DimensionMismatch(format!(
                "{} channel taps for {n} subcarriers",
                self.pdp.len()
            )));
        }
        if let Some(k) = self.symbols.iter().position(|x| x.norm() == 0.0) {
            return Err(Error::SingularSymbol(k));
        }
        let powers = self.pdp.iter().chain([&self.noise_power, &self.soi_power]);
        if let Some(bad) = powers.into_iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative power {bad}")));
        }
        Ok(())
    }
}

/// `P(d) = Σ_l pdp[l] e^{-j2πdl/N}` for `d = 0..N`.
fn pdp_spectrum(pdp: &[f64], n: usize) -> Vec<C64> {
    let mut padded = vec![C64::new(0.0, 0.0); n];
    for (slot, p) in padded.iter_mut().zip(pdp) {
        *slot = C64::new(*p, 0.0);
    }
    ofdm::fft(&padded)
}

fn finish_covariance(mut a: CMatrix) -> CMatrix {
    let scale = linalg::max_abs(&a).max(1.0);
    let correction = linalg::hermitize(&mut a);
    if correction > 1e-10 * scale {
        log::debug!("covariance symmetrised, correction {correction:e}");
    }
    a
}

/// Conditional SI covariance `A = E[y_I y_Iᴴ | X]`.
///
/// Evaluated through its time-domain form: with `x = IDFT(X)` and the
/// phase correlation `R[n₁][n₂] = E[e^{j(φ(n₁)-φ(n₂))}]`,
/// `A = N_s Ω (R ∘ Σ_l pdp[l] x_l x_lᴴ) Ωᴴ`, where `x_l` is `x` circularly
/// delayed by `l` and `Ω` the full DFT matrix. This equals the quadruple
/// sum of [`assemble_a_direct`] at `O(N_c³)` cost.
pub fn assemble_a(stats: &EstimatorStatistics) -> Result<CMatrix> {
    stats.validate()?;
    let n = stats.n_subcarriers();
    let x = ofdm::ifft(stats.symbols.as_slice());
    let corr = &stats.phase_noise.phase_correlation;

    let mut inner = CMatrix::zeros(n, n);
    for (l, &power) in stats.pdp.iter().enumerate() {
        if power == 0.0 {
            continue;
        }
        for n2 in 0..n {
            let right = x[(n2 + n - l) % n].conj() * power;
            for n1 in 0..n {
                inner[(n1, n2)] += x[(n1 + n - l) % n] * right;
            }
        }
    }
    let scale = stats.n_tx as f64;
    for n2 in 0..n {
        for n1 in 0..n {
            inner[(n1, n2)] *= corr[(n1, n2)] * scale;
        }
    }
    let omega = ofdm::build_dft_matrix(n, n)?.matrix().clone();
    let a = &omega * inner * omega.adjoint();
    Ok(finish_covariance(a))
}

/// `[A]_{m,n} = N_s Σ_i Σ_j Γ[m-i][n-j] X[i] X[j]* P(i-j)` evaluated term by
/// term. `O(N_c⁴)`; used for small sizes and as a cross-check of
/// [`assemble_a`].
pub fn assemble_a_direct(stats: &EstimatorStatistics) -> Result<CMatrix> {
    stats.validate()?;
    let n = stats.n_subcarriers();
    let spectrum = pdp_spectrum(&stats.pdp, n);
    let x = &stats.symbols;
    let gamma = &stats.phase_noise.gamma;

    // M[i][j] = X[i] X[j]* P(i-j)
    let m = CMatrix::from_fn(n, n, |i, j| x[i] * x[j].conj() * spectrum[(i + n - j) % n]);
    let mut a = CMatrix::zeros(n, n);
    for row in 0..n {
        for col in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                let gi = (row + n - i) % n;
                for j in 0..n {
                    acc += gamma[(gi, (col + n - j) % n)] * m[(i, j)];
                }
            }
            a[(row, col)] = acc * stats.n_tx as f64;
        }
    }
    Ok(finish_covariance(a))
}

/// The covariance matrices entering the residual-power expression.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

pub fn assemble_bc(a: CMatrix, noise_power: f64, soi_power: f64) -> Result<CovarianceBundle> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!("A is {:?}", a.shape())));
    }
    let defect = linalg::hermitian_defect(&a);
    if defect > 1e-8 * linalg::max_abs(&a).max(1.0) {
        return Err(Error::NonHermitian(defect));
    }
    let n = a.nrows();
    let mut b = a.clone();
    let mut c = a.clone();
    for k in 0..n {
        b[(k, k)] += noise_power;
        c[(k, k)] += noise_power + soi_power;
    }
    Ok(CovarianceBundle { a, b, c })
}

/// `Φ = [[Re C, Im C], [-Im C, Re C]]`.
pub fn real_embedding(c: &CMatrix) -> DMatrix<f64> {
    let n = c.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, col| {
        let z = c[(r % n, col % n)];
        match (r < n, col < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => z.im,
            (false, true) => -z.im,
        }
    })
}

/// `b_k = [Re B[:,k]; -Im B[:,k]]`.
pub fn linear_term(b: &CMatrix, k: usize) -> DVector<f64> {
    let n = b.nrows();
    DVector::from_fn(2 * n, |r, _| {
        let z = b[(r % n, k)];
        if r < n {
            z.re
        } else {
            -z.im
        }
    })
}

/// Hessian and linear term of the quadratic program for row `k` of `V`.
pub fn build_real_qp(c: &CMatrix, b: &CMatrix, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    (real_embedding(c), linear_term(b, k))
}

/// A factored QP Hessian, reusable across right-hand sides.
pub struct QpSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl QpSolver {
    pub fn new(phi: DMatrix<f64>) -> Result<Self> {
        if phi.nrows() != phi.ncols() {
            return Err(Error::DimensionMismatch(format!("Φ is {:?}", phi.shape())));
        }
        let n = phi.nrows();
        nalgebra::Cholesky::new(phi)
            .map(|chol| Self { chol })
            .ok_or_else(|| Error::SingularMatrix(format!("{n}x{n} QP Hessian")))
    }

    /// Minimiser `Φ⁻¹b` and optimal value `-bᵀΦ⁻¹b` of `vᵀΦv - 2bᵀv`.
    pub fn solve(&self, b: &DVector<f64>) -> (DVector<f64>, f64) {
        let v = self.chol.solve(b);
        let f = -b.dot(&v);
        (v, f)
    }

    /// Solves every column of `rhs` at once.
    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let v = self.chol.solve(rhs);
        let f = rhs
            .column_iter()
            .zip(v.column_iter())
            .map(|(b, x)| -b.dot(&x))
            .collect();
        (v, f)
    }
}

pub fn solve_qp(phi: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if b.len() != phi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "Φ is {:?}, b has {} entries",
            phi.shape(),
            b.len()
        )));
    }
    Ok(QpSolver::new(phi)?.solve(b))
}

/// Optimal `V` and the per-row optimal values `f_k*`.
#[derive(Debug, Clone)]
pub struct OptimalV {
    pub v: CMatrix,
    pub f_star: Vec<f64>,
}

impl OptimalV {
    pub fn f_star_sum(&self) -> f64 {
        self.f_star.iter().sum()
    }
}

pub fn optimal_v(bundle: &CovarianceBundle) -> Result<OptimalV> {
    let n = bundle.c.nrows();
    let solver = QpSolver::new(real_embedding(&bundle.c))?;
    let rhs = DMatrix::from_fn(2 * n, n, |r, k| {
        let z = bundle.b[(r % n, k)];
        if r < n {
            z.re
        } else {
            -z.im
        }
    });
    let (sol, f_star) = solver.solve_many(&rhs);
    let v = CMatrix::from_fn(n, n, |k, col| C64::new(sol[(col, k)], sol[(n + col, k)]));
    Ok(OptimalV { v, f_star })
}

/// `W = (1/N_c) Fᴴ X⁻¹ V`.
pub fn extract_w(v: &CMatrix, symbols: &CVector, dft: &DftMatrix) -> Result<CMatrix> {
    let n = symbols.len();
    if v.nrows() != n || dft.n_subcarriers() != n {
        return Err(Error::DimensionMismatch(format!(
            "V is {:?}, {n} symbols, DFT has {} rows",
            v.shape(),
            dft.n_subcarriers()
        )));
    }
    if let Some(k) = symbols.iter().position(|x| x.norm() == 0.0) {
        return Err(Error::SingularSymbol(k));
    }
    let mut tv = v.clone();
    for (k, x) in symbols.iter().enumerate() {
        let inv = x.inv();
        tv.row_mut(k).iter_mut().for_each(|z| *z *= inv);
    }
    Ok(dft.matrix().adjoint() * tv / C64::new(n as f64, 0.0))
}

pub fn estimate_h_delta(w: &CMatrix, y: &CVector) -> Result<CVector> {
    if w.ncols() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "W is {:?}, y has {} entries",
            w.shape(),
            y.len()
        )));
    }
    Ok(w * y)
}

/// Output of the full optimal-estimator pipeline for one symbol.
#[derive(Debug, Clone)]
pub struct WeightSolution {
    pub bundle: CovarianceBundle,
    pub v: CMatrix,
    pub w: CMatrix,
    pub f_star: Vec<f64>,
}

impl WeightSolution {
    pub fn f_star_sum(&self) -> f64 {
        self.f_star.iter().sum()
    }

    /// `ĥ_δ = W y`.
    pub fn estimate(&self, y: &CVector) -> Result<CVector> {
        estimate_h_delta(&self.w, y)
    }
}

/// Covariances, per-row QPs, `V*` and `W` for one known symbol vector.
pub fn optimal_estimator(stats: &EstimatorStatistics, dft: &DftMatrix) -> Result<WeightSolution> {
    let a = assemble_a(stats)?;
    let bundle = assemble_bc(a, stats.noise_power, stats.soi_power)?;
    let OptimalV { v, f_star } = optimal_v(&bundle)?;
    let w = extract_w(&v, &stats.symbols, dft)?;
    Ok(WeightSolution {
        bundle,
        v,
        w,
        f_star,
    })
}

fn ls_gram(symbols: &CVector, dft: &DftMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = symbols.len();
    if dft.n_subcarriers() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} symbols, DFT has {} rows",
            dft.n_subcarriers()
        )));
    }
    let xf = linalg::diag(symbols.as_slice()) * dft.matrix();
    let gram = xf.adjoint() * &xf;
    Ok((xf, gram))
}

/// Least-squares weight `W_LS = (FᴴXᴴXF)⁻¹ FᴴXᴴ`.
pub fn ls_weight(symbols: &CVector, dft: &DftMatrix) -> Result<CMatrix> {
    let (xf, gram) = ls_gram(symbols, dft)?;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("least-squares Gram matrix".into()))?;
    Ok(chol.solve(&xf.adjoint()))
}

/// `V_LS = X F W_LS`, the projection onto the span of `XF`.
pub fn ls_v(symbols: &CVector, dft: &DftMatrix) -> Result<CMatrix> {
    let w = ls_weight(symbols, dft)?;
    Ok(linalg::diag(symbols.as_slice()) * dft.matrix() * w)
}

/// `ĥ_LS = (FᴴXᴴXF)⁻¹ FᴴXᴴ y`.
pub fn ls_estimator(y: &CVector, symbols: &CVector, dft: &DftMatrix) -> Result<CVector> {
    if y.len() != symbols.len() {
        return Err(Error::DimensionMismatch(format!(
            "y has {} entries, {} symbols",
            y.len(),
            symbols.len()
        )));
    }
    Ok(ls_weight(symbols, dft)? * y)
}
