//! SI reconstruction and subtraction, residual power, and the
//! cancellation-ability metrics.

use serde::{Deserialize, Serialize};

use crate::estimator::CovarianceBundle;
use crate::linalg;
use crate::ofdm::DftMatrix;
use crate::{CMatrix, CVector, Error, Result, C64};

/// `ŷ_I = X F ĥ_δ`.
pub fn reconstruct_si(symbols: &CVector, dft: &DftMatrix, h_delta_hat: &CVector) -> Result<CVector> {
    if symbols.len() != dft.n_subcarriers() || h_delta_hat.len() != dft.n_taps() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols, {} taps, DFT is {}x{}",
            symbols.len(),
            h_delta_hat.len(),
            dft.n_subcarriers(),
            dft.n_taps()
        )));
    }
    Ok(dft.apply(h_delta_hat).component_mul(symbols))
}

/// `ŷ_U = y - ŷ_I`.
pub fn cancel(y: &CVector, y_si_hat: &CVector) -> Result<CVector> {
    if y.len() != y_si_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "y has {} entries, reconstruction {}",
            y.len(),
            y_si_hat.len()
        )));
    }
    Ok(y - y_si_hat)
}

/// Expected residual power for weight `V`:
/// `N_c σ_n² + tr{A} + tr{V C Vᴴ} - 2 Re tr{V B}`.
pub fn residual_power_theoretical(a: &CMatrix, v: &CMatrix, noise_power: f64, soi_power: f64) -> f64 {
    let n = a.nrows();
    let b_diag_shift = C64::new(noise_power, 0.0);
    let c_diag_shift = C64::new(noise_power + soi_power, 0.0);
    // tr{V C Vᴴ} = tr{V A Vᴴ} + (σ_n²+σ_u²)‖V‖², tr{V B} = tr{V A} + σ_n² tr{V}
    let va = v * a;
    let quad = (0..n)
        .map(|k| va.row(k).dot(&v.row(k).conjugate()).re)
        .sum::<f64>()
        + c_diag_shift.re * v.norm_squared();
    let cross = (0..n).map(|k| va[(k, k)].re).sum::<f64>() + b_diag_shift.re * linalg::trace_re(v);
    n as f64 * noise_power + linalg::trace_re(a) + quad - 2.0 * cross
}

/// Same quantity evaluated from an assembled bundle.
pub fn residual_power_from_bundle(bundle: &CovarianceBundle, v: &CMatrix, noise_power: f64) -> f64 {
    let n = bundle.a.nrows();
    let vc = v * &bundle.c;
    let quad: f64 = (0..n).map(|k| vc.row(k).dot(&v.row(k).conjugate()).re).sum();
    let cross = linalg::trace_re(&(v * &bundle.b));
    n as f64 * noise_power + linalg::trace_re(&bundle.a) + quad - 2.0 * cross
}

/// SI energy per OFDM symbol before cancellation,
/// `E_I = N_c σ_x² N_s Σ_l pdp[l]`.
pub fn si_power(symbol_power: f64, pdp: &[f64], n_tx: usize, n_subcarriers: usize) -> f64 {
    n_subcarriers as f64 * symbol_power * n_tx as f64 * pdp.iter().sum::<f64>()
}

/// A cancellation-ability value in dB, or the saturated case where the
/// residual vanished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ability {
    pub db: f64,
    /// Set when the residual was not positive; `db` is then `+∞`.
    pub saturated: bool,
}

/// `G = 10 log₁₀((E_I + N_c σ_n²) / E_r)`.
pub fn cancellation_ability(si_power: f64, noise_floor: f64, residual_power: f64) -> Ability {
    if residual_power > 0.0 {
        Ability {
            db: 10.0 * ((si_power + noise_floor) / residual_power).log10(),
            saturated: false,
        }
    } else {
        Ability {
            db: f64::INFINITY,
            saturated: true,
        }
    }
}

/// `G_max = 10 log₁₀((E_I + N_c σ_n²) / (E_I + N_c σ_n² + E[Σ_k f_k*]))`.
pub fn g_max_theoretical(si_power: f64, noise_floor: f64, mean_f_star_sum: f64) -> Result<f64> {
    let total = si_power + noise_floor;
    let denom = total + mean_f_star_sum;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveResidual(denom));
    }
    Ok(10.0 * (total / denom).log10())
}

/// Powers measured for one symbol and one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    /// `‖ŷ_U - y_U‖²` for this symbol.
    pub residual_power_empirical: f64,
    /// Expected residual at the weight actually used.
    pub residual_power_theoretical: f64,
    pub si_power: f64,
    pub noise_floor: f64,
    /// Ability from the empirical residual of this symbol.
    pub ability_db: f64,
    /// `Σ_k f_k*` for the optimal estimator, absent for the baseline.
    pub f_star_sum: Option<f64>,
}

impl CancellationReport {
    pub fn new(
        residual_power_empirical: f64,
        residual_power_theoretical: f64,
        si_power: f64,
        noise_floor: f64,
        f_star_sum: Option<f64>,
    ) -> Self {
        let ability_db = cancellation_ability(si_power, noise_floor, residual_power_empirical).db;
        Self {
            residual_power_empirical,
            residual_power_theoretical,
            si_power,
            noise_floor,
            ability_db,
            f_star_sum,
        }
    }
}
