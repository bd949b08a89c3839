//! Stochastic channel and hardware-impairment models.
//!
//! Phase noise is a free-running-oscillator Wiener process. `Δf` is the
//! phase-noise bandwidth relative to the subcarrier spacing, so one OFDM
//! symbol (`N_c` samples) accumulates a phase variance of `4πΔf` and each
//! sample increment has variance `4πΔf / N_c`.
//!
//! The SI path of transmit antenna `s` sees the combined phase
//! `φ_s(n) = θ_s^T(n) + θ^R(n)`; its frequency-domain effect on one symbol is
//! the circular mixing `Y[k] = Σ_i δ^s_{k-i} H_s[i] X[i]`, with
//! `δ_m = (1/N_c) Σ_n e^{jφ(n)} e^{-j2πmn/N_c}`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ofdm::{self, DftMatrix};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Phase variance accumulated by one oscillator over one OFDM symbol.
pub fn symbol_phase_variance(delta_f: f64) -> f64 {
    4.0 * PI * delta_f
}

/// Per-sample Wiener increment variance of one oscillator.
pub fn sample_increment_variance(delta_f: f64, n_subcarriers: usize) -> f64 {
    symbol_phase_variance(delta_f) / n_subcarriers as f64
}

/// Phase values of one oscillator, one per time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNoiseTrace {
    pub phases: Vec<f64>,
    pub increment_variance: f64,
    pub initial_phase: f64,
}

impl PhaseNoiseTrace {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn final_phase(&self) -> f64 {
        *self.phases.last().unwrap_or(&self.initial_phase)
    }

    /// Trace with no phase noise.
    pub fn constant(n_samples: usize, phase: f64) -> Self {
        Self {
            phases: vec![phase; n_samples],
            increment_variance: 0.0,
            initial_phase: phase,
        }
    }
}

/// Wiener phase trace: `phases[0] = initial_phase`, then i.i.d. Gaussian
/// increments of the given variance.
pub fn gen_wiener_phase<R: Rng + ?Sized>(
    n_samples: usize,
    increment_variance: f64,
    initial_phase: f64,
    rng: &mut R,
) -> Result<PhaseNoiseTrace> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("phase trace needs at least one sample".into()));
    }
    if !(increment_variance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "phase increment variance must be nonnegative, got {increment_variance}"
        )));
    }
    let mut phases = Vec::with_capacity(n_samples);
    phases.push(initial_phase);
    if increment_variance == 0.0 {
        phases.resize(n_samples, initial_phase);
    } else {
        let step = Normal::new(0.0, increment_variance.sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut phase = initial_phase;
        for _ in 1..n_samples {
            phase += step.sample(rng);
            phases.push(phase);
        }
    }
    Ok(PhaseNoiseTrace {
        phases,
        increment_variance,
        initial_phase,
    })
}

/// A free-running oscillator whose phase continues across OFDM symbols.
#[derive(Debug, Clone)]
pub struct WienerOscillator {
    increment_variance: f64,
    next_phase: f64,
}

impl WienerOscillator {
    pub fn new(delta_f: f64, n_subcarriers: usize, initial_phase: f64) -> Result<Self> {
        if !(delta_f >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "phase-noise bandwidth must be nonnegative, got {delta_f}"
            )));
        }
        Ok(Self {
            increment_variance: sample_increment_variance(delta_f, n_subcarriers),
            next_phase: initial_phase,
        })
    }

    pub fn increment_variance(&self) -> f64 {
        self.increment_variance
    }

    /// Emits the next `n_samples` phases. The following call picks up one
    /// increment after the last emitted sample.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<PhaseNoiseTrace> {
        let trace = gen_wiener_phase(n_samples, self.increment_variance, self.next_phase, rng)?;
        let step: f64 = rng.sample(StandardNormal);
        self.next_phase = trace.final_phase() + step * self.increment_variance.sqrt();
        Ok(trace)
    }
}

/// Frequency-domain phase-noise mixing coefficients of one OFDM symbol,
/// indexed circularly.
#[derive(Debug, Clone, PartialEq)]
pub struct IciCoefficients {
    pub delta: Vec<C64>,
}

impl IciCoefficients {
    /// `δ_m` with `m` wrapped modulo `N_c`.
    pub fn get(&self, m: isize) -> C64 {
        let n = self.delta.len() as isize;
        self.delta[m.rem_euclid(n) as usize]
    }

    /// Common phase error term `δ_0`.
    pub fn cpe(&self) -> C64 {
        self.delta[0]
    }

    /// Applies the mixing `out[k] = Σ_i δ_{k-i} input[i]`.
    pub fn mix(&self, input: &[C64]) -> Vec<C64> {
        let n = self.delta.len();
        debug_assert_eq!(input.len(), n);
        (0..n)
            .map(|k| {
                let mut acc = C64::new(0.0, 0.0);
                for (i, v) in input.iter().enumerate() {
                    acc += self.delta[(k + n - i) % n] * v;
                }
                acc
            })
            .collect()
    }
}

pub fn compute_ici_coefficients(combined_phase: &[f64]) -> Result<IciCoefficients> {
    if combined_phase.is_empty() {
        return Err(Error::InvalidDimension("empty phase vector".into()));
    }
    let rotations: Vec<C64> = combined_phase
        .iter()
        .map(|&phi| C64::from_polar(1.0, phi))
        .collect();
    let scale = 1.0 / combined_phase.len() as f64;
    let delta = ofdm::fft(&rotations).into_iter().map(|z| z * scale).collect();
    Ok(IciCoefficients { delta })
}

/// How transmit antennas are driven by oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OscillatorMode {
    /// One independent oscillator per transmit antenna.
    #[default]
    PerAntenna,
    /// A single transmit oscillator shared by all antennas.
    Shared,
}

impl std::str::FromStr for OscillatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-antenna" => Ok(Self::PerAntenna),
            "shared" => Ok(Self::Shared),
            other => Err(Error::InvalidConfig(format!("unknown oscillator mode {other:?}"))),
        }
    }
}

/// Second-order statistics of the combined (transmit plus receive) phase
/// noise over one OFDM symbol.
#[derive(Debug, Clone)]
pub struct PnCovarianceTable {
    /// `Γ[a][b] = E[δ_a δ_b*]`, offsets taken modulo `N_c`.
    pub gamma: CMatrix,
    /// `E[e^{j(φ(n₁) - φ(n₂))}]` over the useful samples of the symbol.
    pub phase_correlation: nalgebra::DMatrix<f64>,
    pub delta_f: f64,
    pub oscillator_mode: OscillatorMode,
}

impl PnCovarianceTable {
    pub fn n_subcarriers(&self) -> usize {
        self.gamma.nrows()
    }

    /// `Γ` with both offsets wrapped.
    pub fn at(&self, a: isize, b: isize) -> C64 {
        let n = self.n_subcarriers() as isize;
        self.gamma[(a.rem_euclid(n) as usize, b.rem_euclid(n) as usize)]
    }
}

/// Closed-form covariance for two independent Wiener oscillators (transmit
/// and receive), each with per-sample variance `4πΔf/N_c`:
/// `E[e^{j(φ(n₁)-φ(n₂))}] = exp(-σ_c²|n₁-n₂|/2)` with `σ_c² = 2·4πΔf/N_c`.
pub fn pn_covariance_table(
    delta_f: f64,
    n_subcarriers: usize,
    oscillator_mode: OscillatorMode,
) -> Result<PnCovarianceTable> {
    if !(delta_f >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "phase-noise bandwidth must be nonnegative, got {delta_f}"
        )));
    }
    if n_subcarriers == 0 {
        return Err(Error::InvalidDimension("zero subcarriers".into()));
    }
    let n = n_subcarriers;
    let combined = 2.0 * sample_increment_variance(delta_f, n);
    let decay: Vec<f64> = (0..n).map(|d| (-combined * d as f64 / 2.0).exp()).collect();
    let phase_correlation =
        nalgebra::DMatrix::from_fn(n, n, |i, j| decay[i.abs_diff(j)]);

    // Γ = (1/N²) Ω R Ωᴴ with Ω[a][n] = e^{-j2πan/N}
    let omega = ofdm::build_dft_matrix(n, n)?.matrix().clone();
    let corr_c = phase_correlation.map(|v| C64::new(v, 0.0));
    let mut gamma = &omega * corr_c * omega.adjoint();
    gamma /= C64::new((n * n) as f64, 0.0);
    crate::linalg::hermitize(&mut gamma);

    Ok(PnCovarianceTable {
        gamma,
        phase_correlation,
        delta_f,
        oscillator_mode,
    })
}

/// Multipath SI channels of all transmit antennas towards one receive
/// antenna.
#[derive(Debug, Clone)]
pub struct SiChannelSet {
    /// `N_s × L` tap gains.
    pub taps: CMatrix,
    /// Per-tap average power, shared by every antenna.
    pub pdp: Vec<f64>,
}

impl SiChannelSet {
    pub fn n_tx(&self) -> usize {
        self.taps.nrows()
    }

    pub fn n_taps(&self) -> usize {
        self.taps.ncols()
    }

    /// Impulse response of antenna `s` as a column vector.
    pub fn antenna_taps(&self, s: usize) -> CVector {
        self.taps.row(s).transpose()
    }
}

/// Exponential power-delay profile `pdp[l] ∝ e^{-l/decay}` scaled to
/// `total_power`.
pub fn exponential_pdp(n_taps: usize, decay: f64, total_power: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_taps).map(|l| (-(l as f64) / decay).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p * total_power / sum).collect()
}

pub fn gen_si_channel<R: Rng + ?Sized>(
    n_tx: usize,
    n_taps: usize,
    pdp: &[f64],
    rng: &mut R,
) -> Result<SiChannelSet> {
    if pdp.len() != n_taps {
        return Err(Error::InvalidParameter(format!(
            "power-delay profile has {} entries for {n_taps} taps",
            pdp.len()
        )));
    }
    if let Some(bad) = pdp.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::InvalidParameter(format!("negative tap power {bad}")));
    }
    let mut taps = CMatrix::zeros(n_tx, n_taps);
    for s in 0..n_tx {
        for (l, &power) in pdp.iter().enumerate() {
            taps[(s, l)] = cscg_sample(power, rng);
        }
    }
    Ok(SiChannelSet {
        taps,
        pdp: pdp.to_vec(),
    })
}

fn cscg_sample<R: Rng + ?Sized>(power: f64, rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * (power / 2.0).sqrt()
}

/// I.i.d. circularly-symmetric complex Gaussian vector, per-entry variance
/// `power`.
pub fn gen_cscg<R: Rng + ?Sized>(n: usize, power: f64, rng: &mut R) -> Result<CVector> {
    if !(power >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative power {power}")));
    }
    Ok(CVector::from_fn(n, |_, _| cscg_sample(power, rng)))
}

/// Receiver noise.
pub fn gen_awgn<R: Rng + ?Sized>(n: usize, power: f64, rng: &mut R) -> Result<CVector> {
    gen_cscg(n, power, rng)
}

/// Uplink signal-of-interest, modelled through its per-subcarrier power only.
pub fn gen_soi<R: Rng + ?Sized>(n: usize, power: f64, rng: &mut R) -> Result<CVector> {
    gen_cscg(n, power, rng)
}

/// One received OFDM symbol and its components.
#[derive(Debug, Clone)]
pub struct ReceivedSignal {
    pub y: CVector,
    pub y_soi: CVector,
    pub y_si: CVector,
    pub noise: CVector,
    /// CPE-rotated combined channel `Σ_s δ_0^s h_s`.
    pub h_delta: CVector,
}

fn check_traces(
    channels: &SiChannelSet,
    tx_traces: &[PhaseNoiseTrace],
    rx_trace: &PhaseNoiseTrace,
    min_len: usize,
) -> Result<()> {
    if tx_traces.len() != 1 && tx_traces.len() != channels.n_tx() {
        return Err(Error::DimensionMismatch(format!(
            "{} transmit phase traces for {} antennas",
            tx_traces.len(),
            channels.n_tx()
        )));
    }
    if tx_traces.iter().chain(std::iter::once(rx_trace)).any(|t| t.len() < min_len) {
        return Err(Error::DimensionMismatch(format!(
            "phase traces must cover at least {min_len} samples"
        )));
    }
    Ok(())
}

/// Combined phase of antenna `s` over the last `n` samples of the traces.
fn combined_phase(tx: &PhaseNoiseTrace, rx: &PhaseNoiseTrace, n: usize) -> Vec<f64> {
    let tx = &tx.phases[tx.len() - n..];
    let rx = &rx.phases[rx.len() - n..];
    tx.iter().zip(rx).map(|(a, b)| a + b).collect()
}

/// Frequency-domain synthesis of one received symbol.
///
/// Phase traces may include the cyclic-prefix samples; the last `N_c`
/// samples are the ones seen by the receiver after CP removal. A single
/// transmit trace means all antennas share one oscillator.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_received<R: Rng + ?Sized>(
    symbols: &CVector,
    channels: &SiChannelSet,
    tx_traces: &[PhaseNoiseTrace],
    rx_trace: &PhaseNoiseTrace,
    soi_power: f64,
    noise_power: f64,
    dft: &DftMatrix,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    let n = symbols.len();
    if dft.n_subcarriers() != n || dft.n_taps() != channels.n_taps() {
        return Err(Error::DimensionMismatch(format!(
            "DFT matrix is {}x{}, symbols {n}, channel taps {}",
            dft.n_subcarriers(),
            dft.n_taps(),
            channels.n_taps()
        )));
    }
    check_traces(channels, tx_traces, rx_trace, n)?;

    let mut y_si = CVector::zeros(n);
    let mut h_delta = CVector::zeros(channels.n_taps());
    let mut shared: Option<IciCoefficients> = None;
    for s in 0..channels.n_tx() {
        let ici = if tx_traces.len() == 1 {
            shared
                .get_or_insert_with(|| {
                    compute_ici_coefficients(&combined_phase(&tx_traces[0], rx_trace, n))
                        .expect("nonempty phase")
                })
                .clone()
        } else {
            compute_ici_coefficients(&combined_phase(&tx_traces[s], rx_trace, n))?
        };
        let h = channels.antenna_taps(s);
        let weighted: Vec<C64> = dft
            .apply(&h)
            .iter()
            .zip(symbols.iter())
            .map(|(hk, xk)| hk * xk)
            .collect();
        for (acc, v) in y_si.iter_mut().zip(ici.mix(&weighted)) {
            *acc += v;
        }
        h_delta += h * ici.cpe();
    }

    let y_soi = gen_soi(n, soi_power, rng)?;
    let noise = gen_awgn(n, noise_power, rng)?;
    let y = &y_si + &y_soi + &noise;
    Ok(ReceivedSignal {
        y,
        y_soi,
        y_si,
        noise,
        h_delta,
    })
}

/// Where the transmit oscillator phase is applied in the time-domain path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxRotation {
    /// At the output of each antenna's channel, evaluated at the receive
    /// sample. This is the model behind the frequency-domain synthesis.
    AtChannelOutput,
    /// On the transmitted samples, before the multipath channel.
    BeforeChannel,
}

/// Time-domain reference path for the SI component: modulate, rotate by the
/// transmit phase, run the FIR channel, sum antennas, rotate by the receive
/// phase, strip the CP and demodulate. Traces must cover `N_c + cp_length`
/// samples.
pub fn synthesize_si_time_domain(
    symbols: &CVector,
    channels: &SiChannelSet,
    tx_traces: &[PhaseNoiseTrace],
    rx_trace: &PhaseNoiseTrace,
    cp_length: usize,
    rotation: TxRotation,
) -> Result<CVector> {
    let n = symbols.len();
    let total = n + cp_length;
    check_traces(channels, tx_traces, rx_trace, total)?;
    if channels.n_taps() > cp_length + 1 {
        return Err(Error::InvalidDimension(format!(
            "{} taps exceed the {cp_length}-sample cyclic prefix",
            channels.n_taps()
        )));
    }
    let tx_samples = ofdm::modulate(symbols.as_slice(), cp_length)?;
    let window = |t: &PhaseNoiseTrace| t.phases[t.len() - total..].to_vec();
    let rx_phase = window(rx_trace);

    let mut received = vec![C64::new(0.0, 0.0); total];
    for s in 0..channels.n_tx() {
        let tx_phase = window(&tx_traces[if tx_traces.len() == 1 { 0 } else { s }]);
        let input: Vec<C64> = match rotation {
            TxRotation::BeforeChannel => tx_samples
                .iter()
                .zip(&tx_phase)
                .map(|(x, p)| x * C64::from_polar(1.0, *p))
                .collect(),
            TxRotation::AtChannelOutput => tx_samples.clone(),
        };
        for t in 0..total {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..channels.n_taps().min(t + 1) {
                acc += channels.taps[(s, l)] * input[t - l];
            }
            if rotation == TxRotation::AtChannelOutput {
                acc *= C64::from_polar(1.0, tx_phase[t]);
            }
            received[t] += acc;
        }
    }
    for (r, p) in received.iter_mut().zip(&rx_phase) {
        *r *= C64::from_polar(1.0, *p);
    }
    Ok(CVector::from_vec(ofdm::demodulate(&received, cp_length)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_bandwidth_trace_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = gen_wiener_phase(64, 0.0, 0.3, &mut rng).unwrap();
        assert!(t.phases.iter().all(|&p| p == 0.3));
        let mut osc = WienerOscillator::new(0.0, 128, 1.0).unwrap();
        let t = osc.advance(10, &mut rng).unwrap();
        assert!(t.phases.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn symbol_variance_value() {
        assert!((symbol_phase_variance(1e-3) - 0.012566370614359173).abs() < 1e-15);
        assert!((sample_increment_variance(1e-3, 128) - 0.012566370614359173 / 128.0).abs() < 1e-18);
    }

    #[test]
    fn wiener_variance_law() {
        // Var(φ[n] - φ[0]) = n·σ² over 10⁴ traces
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let var = sample_increment_variance(1e-3, 1);
        let n = 64;
        let trials = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let t = gen_wiener_phase(128, var, 0.0, &mut rng).unwrap();
            let d = t.phases[n] - t.phases[0];
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / trials as f64;
        let sample_var = sum_sq / trials as f64 - mean * mean;
        let expected = n as f64 * var;
        assert!((sample_var / expected - 1.0).abs() < 0.05, "{sample_var} vs {expected}");
    }

    #[test]
    fn oscillator_continues_across_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut osc = WienerOscillator::new(1e-2, 16, 0.0).unwrap();
        let a = osc.advance(80, &mut rng).unwrap();
        let b = osc.advance(80, &mut rng).unwrap();
        // the boundary step is one ordinary increment
        let jump = (b.phases[0] - a.final_phase()).abs();
        assert!(jump < 6.0 * osc.increment_variance().sqrt());
        assert_eq!(b.initial_phase, b.phases[0]);
    }

    #[test]
    fn negative_bandwidth_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(WienerOscillator::new(-1e-3, 16, 0.0).is_err());
        assert!(gen_wiener_phase(4, -1.0, 0.0, &mut rng).is_err());
        assert!(gen_wiener_phase(0, 1.0, 0.0, &mut rng).is_err());
        assert!(pn_covariance_table(-1.0, 8, OscillatorMode::PerAntenna).is_err());
    }

    #[test]
    fn ici_for_constant_phase() {
        let ici = compute_ici_coefficients(&[0.0; 16]).unwrap();
        assert!((ici.cpe() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(ici.delta[1..].iter().all(|d| d.norm() < 1e-15));

        let ici = compute_ici_coefficients(&[0.7; 16]).unwrap();
        assert!((ici.cpe() - C64::from_polar(1.0, 0.7)).norm() < 1e-15);
        assert!(ici.delta[1..].iter().all(|d| d.norm() < 1e-15));
        assert!(compute_ici_coefficients(&[]).is_err());
    }

    #[test]
    fn ici_energy_is_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = gen_wiener_phase(64, 0.3, 1.0, &mut rng).unwrap();
        let ici = compute_ici_coefficients(&t.phases).unwrap();
        let energy: f64 = ici.delta.iter().map(|d| d.norm_sqr()).sum();
        assert!((energy - 1.0).abs() < 1e-10);
        assert_eq!(ici.get(-1), ici.delta[63]);
    }

    #[test]
    fn covariance_table_basic_properties() {
        let t = pn_covariance_table(0.0, 16, OscillatorMode::PerAntenna).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let expected = if a == 0 && b == 0 { 1.0 } else { 0.0 };
                assert!((t.gamma[(a, b)] - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
        for df in [0.0, 1e-5, 1e-3, 1e-2] {
            let t = pn_covariance_table(df, 32, OscillatorMode::Shared).unwrap();
            assert!(crate::linalg::hermitian_defect(&t.gamma) < 1e-12);
            let diag: f64 = t.gamma.diagonal().iter().map(|z| z.re).sum();
            assert!((diag - 1.0).abs() < 1e-10);
            assert_eq!(t.at(-1, 0), t.gamma[(31, 0)]);
        }
    }

    #[test]
    fn channel_shapes_and_pdp() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = gen_si_channel(64, 16, &exponential_pdp(16, 4.0, 1.0), &mut rng).unwrap();
        assert_eq!(ch.taps.shape(), (64, 16));
        let ch = gen_si_channel(8, 2, &[1.0, 0.0], &mut rng).unwrap();
        assert!(ch.taps.column(1).iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(gen_si_channel(2, 2, &[1.0, -0.1], &mut rng).is_err());
        assert!(gen_si_channel(2, 3, &[1.0, 0.1], &mut rng).is_err());

        let pdp = exponential_pdp(16, 4.0, 2.5);
        assert!((pdp.iter().sum::<f64>() - 2.5).abs() < 1e-12);
        assert!(pdp.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn channel_tap_powers_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pdp = exponential_pdp(8, 4.0, 1.0);
        let ch = gen_si_channel(10_000, 8, &pdp, &mut rng).unwrap();
        for (l, p) in pdp.iter().enumerate() {
            let power = ch.taps.column(l).iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e4;
            assert!((power / p - 1.0).abs() < 0.05, "tap {l}: {power} vs {p}");
        }
    }

    #[test]
    fn cscg_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(gen_awgn(16, 0.0, &mut rng).unwrap().iter().all(|z| z.norm() == 0.0));
        let v = gen_soi(100_000, 2.0, &mut rng).unwrap();
        let power = v.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
        assert!((power / 2.0 - 1.0).abs() < 0.03);
        let re = v.iter().map(|z| z.re * z.re).sum::<f64>() / 1e5;
        let im = v.iter().map(|z| z.im * z.im).sum::<f64>() / 1e5;
        assert!((re - 1.0).abs() < 0.03 && (im - 1.0).abs() < 0.03);
        assert!(gen_cscg(4, -1.0, &mut rng).is_err());
    }

    #[test]
    fn clean_synthesis_is_xfh() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 16;
        let dft = ofdm::build_dft_matrix(n, 4).unwrap();
        let x = ofdm::gen_bpsk_symbols(n, 1.0, &mut rng).unwrap();
        let ch = gen_si_channel(3, 4, &exponential_pdp(4, 4.0, 1.0), &mut rng).unwrap();
        let tx = vec![PhaseNoiseTrace::constant(n, 0.0); 3];
        let rx = PhaseNoiseTrace::constant(n, 0.0);
        let r = synthesize_received(&x, &ch, &tx, &rx, 0.0, 0.0, &dft, &mut rng).unwrap();
        let h_sum: CVector = (0..3).map(|s| ch.antenna_taps(s)).fold(CVector::zeros(4), |a, b| a + b);
        let expected = crate::linalg::diag(x.as_slice()) * dft.matrix() * &h_sum;
        assert!((&r.y - expected).norm() < 1e-12);
        assert!((&r.h_delta - h_sum).norm() < 1e-12);
    }

    #[test]
    fn synthesis_rejects_mismatched_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let dft = ofdm::build_dft_matrix(8, 2).unwrap();
        let x = ofdm::gen_bpsk_symbols(8, 1.0, &mut rng).unwrap();
        let ch = gen_si_channel(3, 2, &[1.0, 0.5], &mut rng).unwrap();
        let rx = PhaseNoiseTrace::constant(8, 0.0);
        let two = vec![PhaseNoiseTrace::constant(8, 0.0); 2];
        assert!(matches!(
            synthesize_received(&x, &ch, &two, &rx, 0.0, 0.0, &dft, &mut rng),
            Err(Error::DimensionMismatch(_))
        ));
        let short = vec![PhaseNoiseTrace::constant(4, 0.0)];
        assert!(synthesize_received(&x, &ch, &short, &rx, 0.0, 0.0, &dft, &mut rng).is_err());
    }
}
