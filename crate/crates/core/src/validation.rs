//! Independent cross-checks of the analytic models: Monte Carlo estimates of
//! the phase-noise and SI covariances, the complex normal-equation solution
//! of the weight design, and the time-domain reference of the received SI.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::estimator::{self, CovarianceBundle, EstimatorStatistics};
use crate::impairments::{
    self, compute_ici_coefficients, pn_covariance_table, OscillatorMode, PhaseNoiseTrace, TxRotation,
    WienerOscillator,
};
use crate::linalg;
use crate::ofdm;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Sample mean of `δ_a δ_b*` over `traces` simulated symbols, each with an
/// independent transmit and receive oscillator.
pub fn gamma_monte_carlo(delta_f: f64, n_subcarriers: usize, traces: usize, seed: u64) -> Result<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_subcarriers;
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..traces {
        let tx = WienerOscillator::new(delta_f, n, rng.random::<f64>() * 2.0 * PI)?.advance(n, &mut rng)?;
        let rx = WienerOscillator::new(delta_f, n, rng.random::<f64>() * 2.0 * PI)?.advance(n, &mut rng)?;
        let phase: Vec<f64> = tx.phases.iter().zip(&rx.phases).map(|(a, b)| a + b).collect();
        let delta = CVector::from_vec(compute_ici_coefficients(&phase)?.delta);
        acc.gerc(C64::new(1.0, 0.0), &delta, &delta, C64::new(1.0, 0.0));
    }
    Ok(acc / C64::new(traces as f64, 0.0))
}

/// Sample covariance `E[y_I y_Iᴴ]` of synthesized SI vectors for fixed
/// symbols, with fresh channels and phase noise per trial.
pub fn si_covariance_monte_carlo(
    symbols: &CVector,
    pdp: &[f64],
    n_tx: usize,
    delta_f: f64,
    trials: usize,
    seed: u64,
) -> Result<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = symbols.len();
    let dft = ofdm::build_dft_matrix(n, pdp.len())?;
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..trials {
        let channels = impairments::gen_si_channel(n_tx, pdp.len(), pdp, &mut rng)?;
        let tx: Vec<PhaseNoiseTrace> = (0..n_tx)
            .map(|_| WienerOscillator::new(delta_f, n, rng.random::<f64>() * 2.0 * PI)?.advance(n, &mut rng))
            .collect::<Result<_>>()?;
        let rx = WienerOscillator::new(delta_f, n, rng.random::<f64>() * 2.0 * PI)?.advance(n, &mut rng)?;
        let r = impairments::synthesize_received(symbols, &channels, &tx, &rx, 0.0, 0.0, &dft, &mut rng)?;
        acc.gerc(C64::new(1.0, 0.0), &r.y_si, &r.y_si, C64::new(1.0, 0.0));
    }
    Ok(acc / C64::new(trials as f64, 0.0))
}

/// Complex stationary point `V = Bᴴ C⁻¹` via an LU solve of `C Vᴴ = B`.
pub fn complex_stationary_point(bundle: &CovarianceBundle) -> Result<CMatrix> {
    let vh = bundle
        .c
        .clone()
        .lu()
        .solve(&bundle.b)
        .ok_or_else(|| Error::SingularMatrix("C in the complex normal equations".into()))?;
    Ok(vh.adjoint())
}

/// Largest relative mismatch between the frequency-domain synthesis and
/// the time-domain reference path over `realizations` random draws.
#[allow(clippy::too_many_arguments)]
pub fn time_frequency_mismatch(
    n_subcarriers: usize,
    n_taps: usize,
    n_tx: usize,
    cp_length: usize,
    delta_f: f64,
    rotation: TxRotation,
    realizations: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_subcarriers;
    let span = n + cp_length;
    let dft = ofdm::build_dft_matrix(n, n_taps)?;
    let pdp = impairments::exponential_pdp(n_taps, 4.0, 1.0);
    let mut worst = 0.0f64;
    for _ in 0..realizations {
        let x = ofdm::gen_bpsk_symbols(n, 1.0, &mut rng)?;
        let channels = impairments::gen_si_channel(n_tx, n_taps, &pdp, &mut rng)?;
        let tx: Vec<PhaseNoiseTrace> = (0..n_tx)
            .map(|_| WienerOscillator::new(delta_f, n, rng.random::<f64>() * 2.0 * PI)?.advance(span, &mut rng))
            .collect::<Result<_>>()?;
        let rx = WienerOscillator::new(delta_f, n, rng.random::<f64>() * 2.0 * PI)?.advance(span, &mut rng)?;
        let freq = impairments::synthesize_received(&x, &channels, &tx, &rx, 0.0, 0.0, &dft, &mut rng)?.y_si;
        let time = impairments::synthesize_si_time_domain(&x, &channels, &tx, &rx, cp_length, rotation)?;
        worst = worst.max((&freq - &time).norm() / time.norm());
    }
    Ok(worst)
}

/// Random covariance bundle built from a Wishart-like `A = G Gᴴ`.
pub fn random_bundle<R: Rng + ?Sized>(n: usize, noise_power: f64, soi_power: f64, rng: &mut R) -> Result<CovarianceBundle> {
    let g = CMatrix::from_column_slice(n, n, impairments::gen_cscg(n * n, 1.0, rng)?.as_slice());
    let mut a = &g * g.adjoint();
    linalg::hermitize(&mut a);
    estimator::assemble_bc(a, noise_power, soi_power)
}

/// One line of the validation report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}: {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

/// Phase-noise covariance against its Monte Carlo estimate, max absolute
/// entry error.
pub fn check_gamma(delta_f: f64, n: usize, traces: usize, seed: u64) -> Result<Check> {
    let table = pn_covariance_table(delta_f, n, OscillatorMode::PerAntenna)?;
    let mc = gamma_monte_carlo(delta_f, n, traces, seed)?;
    let err = linalg::max_abs_diff(&table.gamma, &mc);
    Ok(Check::new(format!("phase-noise covariance (Δf={delta_f:e}, N_c={n})"), err, 2e-3))
}

/// SI covariance against its Monte Carlo estimate, error relative to the
/// largest entry.
pub fn check_si_covariance(n: usize, n_taps: usize, n_tx: usize, delta_f: f64, trials: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let symbols = ofdm::gen_bpsk_symbols(n, 1.0, &mut rng)?;
    let pdp = impairments::exponential_pdp(n_taps, 4.0, 1.0);
    let table = pn_covariance_table(delta_f, n, OscillatorMode::PerAntenna)?;
    let stats = EstimatorStatistics {
        symbols: symbols.clone(),
        phase_noise: &table,
        pdp: pdp.clone(),
        n_tx,
        noise_power: 1.0,
        soi_power: 0.0,
    };
    let a = estimator::assemble_a(&stats)?;
    let mc = si_covariance_monte_carlo(&symbols, &pdp, n_tx, delta_f, trials, seed)?;
    let rel = linalg::max_abs_diff(&a, &mc) / linalg::max_abs(&a);
    Ok(Check::new(format!("SI covariance (N_c={n}, L={n_taps}, Δf={delta_f:e})"), rel, 3e-2))
}

/// Row-wise real QP solution against `Bᴴ C⁻¹` over random instances; the
/// measured value is the worst absolute entry error.
pub fn check_qp_equivalence(sizes: &[usize], instances: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut positive_f = false;
    for &n in sizes {
        for _ in 0..instances {
            let bundle = random_bundle(n, rng.random::<f64>() + 0.1, rng.random::<f64>() * 2.0, &mut rng)?;
            let real = estimator::optimal_v(&bundle)?;
            let complex = complex_stationary_point(&bundle)?;
            worst = worst.max(linalg::max_abs_diff(&real.v, &complex));
            positive_f |= real.f_star.iter().any(|f| *f > 0.0);
        }
    }
    if positive_f {
        worst = f64::INFINITY;
    }
    Ok(Check::new("real QP vs complex normal equations", worst, 1e-8))
}

/// Frequency-domain synthesis against the time-domain path.
pub fn check_time_frequency(n: usize, n_taps: usize, realizations: usize, seed: u64) -> Result<Check> {
    let err = time_frequency_mismatch(n, n_taps, 4, 16, 1e-2, TxRotation::AtChannelOutput, realizations, seed)?;
    Ok(Check::new(format!("time/frequency synthesis (N_c={n}, L={n_taps})"), err, 1e-8))
}

/// The full oracle suite run by the `validate` command.
pub fn run_all(seed: u64, quick: bool) -> Result<Vec<Check>> {
    let (traces, trials) = if quick { (20_000, 20_000) } else { (100_000, 100_000) };
    Ok(vec![
        check_gamma(1e-4, 32, traces, seed)?,
        check_gamma(1e-3, 32, traces, seed + 1)?,
        check_si_covariance(8, 2, 4, 1e-3, trials, seed + 2)?,
        check_qp_equivalence(&[4, 8, 16], 100, seed + 3)?,
        check_time_frequency(32, 4, 100, seed + 4)?,
    ])
}
