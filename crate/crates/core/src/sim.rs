//! Scenario configuration, seeded Monte Carlo trials, parameter sweeps and
//! CSV/JSON reporting.
//!
//! Every trial draws its randomness from a ChaCha stream selected by
//! `(master_seed, trial_index)`, so a sweep is a pure function of its
//! configuration regardless of how trials are scheduled. The same trial
//! index sees the same random stream at every sweep point.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cancellation::{self, CancellationReport};
use crate::estimator::{self, EstimatorStatistics};
use crate::impairments::{
    self, exponential_pdp, pn_covariance_table, OscillatorMode, PnCovarianceTable, WienerOscillator,
};
use crate::ofdm::{self, DftMatrix};
use crate::{CVector, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Modulation {
    #[default]
    Bpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PdpShape {
    /// `pdp[l] ∝ e^{-l/pdp_decay}`.
    #[default]
    Exponential,
    Uniform,
}

/// All scenario parameters. Powers are linear except where suffixed `_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_tx: usize,
    pub n_subcarriers: usize,
    pub cp_length: usize,
    pub n_taps: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// Seconds; derived from the spacing and FFT size when absent.
    pub sample_time: Option<f64>,
    pub modulation: Modulation,
    pub symbol_power: f64,
    /// Phase-noise bandwidth relative to the subcarrier spacing.
    pub delta_f: f64,
    pub inr_db: f64,
    pub snr_db: f64,
    pub n_trials: usize,
    pub master_seed: u64,
    pub oscillator_mode: OscillatorMode,
    pub pdp_shape: PdpShape,
    pub pdp_decay: f64,
    /// Length of the optimal estimator's reconstruction basis. Defaults to
    /// `n_subcarriers`, where the weight `V` maps back to `W` exactly.
    pub estimator_taps: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_tx: 64,
            n_subcarriers: 128,
            cp_length: 16,
            n_taps: 16,
            subcarrier_spacing: 15e3,
            sample_time: None,
            modulation: Modulation::Bpsk,
            symbol_power: 1.0,
            delta_f: 1e-3,
            inr_db: 40.0,
            snr_db: 10.0,
            n_trials: 500,
            master_seed: 1,
            oscillator_mode: OscillatorMode::PerAntenna,
            pdp_shape: PdpShape::Exponential,
            pdp_decay: 4.0,
            estimator_taps: None,
        }
    }
}

impl SimConfig {
    /// Reduced profile for quick runs: 32 subcarriers, 8 antennas, 200 trials.
    pub fn fast() -> Self {
        Self {
            n_tx: 8,
            n_subcarriers: 32,
            n_trials: 200,
            ..Self::default()
        }
    }

    pub fn estimator_taps(&self) -> usize {
        self.estimator_taps.unwrap_or(self.n_subcarriers)
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
            .unwrap_or(1.0 / (self.subcarrier_spacing * self.n_subcarriers as f64))
    }

    /// Parses the plain-text `key = value` form.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_tx == 0 || self.n_subcarriers == 0 || self.n_taps == 0 {
            return bad("antenna, subcarrier and tap counts must be positive".into());
        }
        if self.n_taps > self.n_subcarriers {
            return bad(format!("{} taps exceed {} subcarriers", self.n_taps, self.n_subcarriers));
        }
        if !(1..=self.n_subcarriers).contains(&self.estimator_taps()) {
            return bad(format!(
                "estimator basis of {} taps must lie in 1..={}",
                self.estimator_taps(),
                self.n_subcarriers
            ));
        }
        if self.cp_length >= self.n_subcarriers {
            return bad(format!("cyclic prefix {} is not shorter than the symbol", self.cp_length));
        }
        if !(self.symbol_power > 0.0) {
            return bad(format!("symbol power must be positive, got {}", self.symbol_power));
        }
        if !(self.delta_f >= 0.0) || !self.delta_f.is_finite() {
            return bad(format!("delta_f must be finite and nonnegative, got {}", self.delta_f));
        }
        if self.inr_db.is_nan() || self.snr_db.is_nan() || self.inr_db == f64::INFINITY {
            return bad("INR and SNR must be numbers (INR finite)".into());
        }
        if self.snr_db == f64::INFINITY {
            return bad("SNR must not be +inf".into());
        }
        if self.n_trials == 0 {
            return bad("need at least one trial".into());
        }
        if !(self.pdp_decay > 0.0) {
            return bad(format!("pdp_decay must be positive, got {}", self.pdp_decay));
        }
        if !(self.subcarrier_spacing > 0.0) {
            return bad("subcarrier spacing must be positive".into());
        }
        if let Some(ts) = self.sample_time {
            let derived = 1.0 / (self.subcarrier_spacing * self.n_subcarriers as f64);
            if !(ts > 0.0) {
                return bad(format!("sample time must be positive, got {ts}"));
            }
            if (ts / derived - 1.0).abs() > 0.05 {
                log::warn!("sample time {ts:e} s differs from 1/(spacing·N_c) = {derived:e} s");
            }
        }
        if self.n_taps > self.cp_length + 1 {
            log::warn!(
                "{} taps exceed the {}-sample cyclic prefix; the frequency-domain model ignores the resulting ISI",
                self.n_taps,
                self.cp_length
            );
        }
        Ok(())
    }
}

/// Absolute powers implied by a configuration (noise power is the unit
/// reference).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedPowers {
    /// `Σ_l pdp[l]` for each transmit antenna.
    pub channel_power: f64,
    pub pdp: Vec<f64>,
    pub noise_power: f64,
    pub soi_power: f64,
    /// `E_I`.
    pub si_power: f64,
    /// `N_c σ_n²`.
    pub noise_floor: f64,
}

pub fn derive_powers(config: &SimConfig) -> Result<DerivedPowers> {
    config.validate()?;
    let noise_power = 1.0;
    let n = config.n_subcarriers as f64;
    let noise_floor = n * noise_power;
    let si_target = 10f64.powf(config.inr_db / 10.0) * noise_floor;
    let channel_power = si_target / (n * config.symbol_power * config.n_tx as f64);
    let pdp = match config.pdp_shape {
        PdpShape::Exponential => exponential_pdp(config.n_taps, config.pdp_decay, channel_power),
        PdpShape::Uniform => vec![channel_power / config.n_taps as f64; config.n_taps],
    };
    let si_power =
        cancellation::si_power(config.symbol_power, &pdp, config.n_tx, config.n_subcarriers);
    Ok(DerivedPowers {
        channel_power,
        pdp,
        noise_power,
        soi_power: 10f64.powf(config.snr_db / 10.0) * noise_power,
        si_power,
        noise_floor,
    })
}

/// Reports of both estimators on one shared realisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub optimal: CancellationReport,
    pub ls: CancellationReport,
}

/// Per-configuration state shared by all trials.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    pub powers: DerivedPowers,
    pub phase_noise: PnCovarianceTable,
    /// `N_c × L` basis of the physical channel and the LS fit.
    pub dft: DftMatrix,
    /// Reconstruction basis of the optimal estimator.
    pub estimator_dft: DftMatrix,
}

impl Scenario {
    pub fn new(config: SimConfig) -> Result<Self> {
        let powers = derive_powers(&config)?;
        let phase_noise =
            pn_covariance_table(config.delta_f, config.n_subcarriers, config.oscillator_mode)?;
        let dft = ofdm::build_dft_matrix(config.n_subcarriers, config.n_taps)?;
        let estimator_dft = ofdm::build_dft_matrix(config.n_subcarriers, config.estimator_taps())?;
        Ok(Self {
            config,
            powers,
            phase_noise,
            dft,
            estimator_dft,
        })
    }

    /// Random stream of one trial.
    pub fn trial_rng(&self, trial_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.master_seed);
        rng.set_stream(trial_index);
        rng
    }

    pub fn run_trial(&self, trial_index: u64) -> Result<TrialOutcome> {
        self.run_trial_inner(trial_index).map_err(|e| Error::Trial {
            index: trial_index,
            source: Box::new(e),
        })
    }

    fn run_trial_inner(&self, trial_index: u64) -> Result<TrialOutcome> {
        let cfg = &self.config;
        let p = &self.powers;
        let mut rng = self.trial_rng(trial_index);
        let n = cfg.n_subcarriers;
        let span = n + cfg.cp_length;

        let symbols = match cfg.modulation {
            Modulation::Bpsk => ofdm::gen_bpsk_symbols(n, cfg.symbol_power, &mut rng)?,
        };
        let channels = impairments::gen_si_channel(cfg.n_tx, cfg.n_taps, &p.pdp, &mut rng)?;
        let n_tx_osc = match cfg.oscillator_mode {
            OscillatorMode::PerAntenna => cfg.n_tx,
            OscillatorMode::Shared => 1,
        };
        let trace = |rng: &mut ChaCha8Rng| -> Result<impairments::PhaseNoiseTrace> {
            let start = rng.random::<f64>() * 2.0 * PI;
            WienerOscillator::new(cfg.delta_f, n, start)?.advance(span, rng)
        };
        let tx_traces = (0..n_tx_osc)
            .map(|_| trace(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        let rx_trace = trace(&mut rng)?;
        let rx = impairments::synthesize_received(
            &symbols,
            &channels,
            &tx_traces,
            &rx_trace,
            p.soi_power,
            p.noise_power,
            &self.dft,
            &mut rng,
        )?;

        let residual = |basis: &DftMatrix, h_hat: &CVector| -> Result<f64> {
            let y_hat = cancellation::reconstruct_si(&symbols, basis, h_hat)?;
            let r = cancellation::cancel(&rx.y, &y_hat)? - &rx.y_soi;
            Ok(r.norm_squared())
        };

        let stats = EstimatorStatistics {
            symbols: symbols.clone(),
            phase_noise: &self.phase_noise,
            pdp: p.pdp.clone(),
            n_tx: cfg.n_tx,
            noise_power: p.noise_power,
            soi_power: p.soi_power,
        };
        let solution = estimator::optimal_estimator(&stats, &self.estimator_dft)?;
        let f_sum = solution.f_star_sum();
        // the weight actually applied; equals V* when the basis is complete
        let v_used = crate::linalg::diag(symbols.as_slice()) * self.estimator_dft.matrix() * &solution.w;
        let optimal = CancellationReport::new(
            residual(&self.estimator_dft, &solution.estimate(&rx.y)?)?,
            cancellation::residual_power_from_bundle(&solution.bundle, &v_used, p.noise_power),
            p.si_power,
            p.noise_floor,
            Some(f_sum),
        );

        let w_ls = estimator::ls_weight(&symbols, &self.dft)?;
        let v_ls = crate::linalg::diag(symbols.as_slice()) * self.dft.matrix() * &w_ls;
        let ls = CancellationReport::new(
            residual(&self.dft, &(&w_ls * &rx.y))?,
            cancellation::residual_power_from_bundle(&solution.bundle, &v_ls, p.noise_power),
            p.si_power,
            p.noise_floor,
            None,
        );
        Ok(TrialOutcome { optimal, ls })
    }

    /// Runs trials `0..n_trials`, results in trial order.
    pub fn run_trials(&self, parallel: bool) -> Result<Vec<TrialOutcome>> {
        let count = self.config.n_trials as u64;
        if parallel {
            (0..count).into_par_iter().map(|i| self.run_trial(i)).collect()
        } else {
            (0..count).map(|i| self.run_trial(i)).collect()
        }
    }
}

/// One trial of `config`.
pub fn run_trial(config: &SimConfig, trial_index: u64) -> Result<TrialOutcome> {
    Scenario::new(config.clone())?.run_trial(trial_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    Inr,
    Snr,
    DeltaF,
}

impl SweepVariable {
    pub fn apply(self, config: &mut SimConfig, value: f64) {
        match self {
            Self::Inr => config.inr_db = value,
            Self::Snr => config.snr_db = value,
            Self::DeltaF => config.delta_f = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ls,
    Optimal,
}

/// Aggregate of one estimator at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep_var: SweepVariable,
    pub value: f64,
    pub method: Method,
    /// Ability from the mean empirical residual.
    pub g_emp_db: f64,
    /// Ability predicted from the mean optimal QP values (optimal only).
    pub g_theo_db: Option<f64>,
    pub resid_mean: f64,
    pub trials: usize,
    /// 95% normal-approximation half-width of the per-trial dB samples.
    pub ci_db: f64,
}

fn ci_halfwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return f64::NAN;
    }
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.96 * (var / n).sqrt()
}

/// Aggregates trial outcomes of one sweep point into one record per method.
pub fn aggregate(
    variable: SweepVariable,
    value: f64,
    powers: &DerivedPowers,
    outcomes: &[TrialOutcome],
) -> Result<[SweepRecord; 2]> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no trials to aggregate".into()));
    }
    let count = outcomes.len() as f64;
    let record = |method: Method, pick: fn(&TrialOutcome) -> &CancellationReport| -> Result<SweepRecord> {
        let resid_mean = outcomes.iter().map(|o| pick(o).residual_power_empirical).sum::<f64>() / count;
        let g_emp_db =
            cancellation::cancellation_ability(powers.si_power, powers.noise_floor, resid_mean).db;
        let g_theo_db = match method {
            Method::Optimal => {
                let mean_f = outcomes
                    .iter()
                    .map(|o| pick(o).f_star_sum.unwrap_or(0.0))
                    .sum::<f64>()
                    / count;
                Some(cancellation::g_max_theoretical(powers.si_power, powers.noise_floor, mean_f)?)
            }
            Method::Ls => None,
        };
        let samples: Vec<f64> = outcomes.iter().map(|o| pick(o).ability_db).collect();
        Ok(SweepRecord {
            sweep_var: variable,
            value,
            method,
            g_emp_db,
            g_theo_db,
            resid_mean,
            trials: outcomes.len(),
            ci_db: ci_halfwidth(&samples),
        })
    };
    Ok([record(Method::Ls, |o| &o.ls)?, record(Method::Optimal, |o| &o.optimal)?])
}

/// Runs `config.n_trials` trials at every value and returns records ordered
/// by value, then method.
pub fn sweep(config: &SimConfig, variable: SweepVariable, values: &[f64]) -> Result<Vec<SweepRecord>> {
    sweep_with(config, variable, values, true)
}

pub fn sweep_with(
    config: &SimConfig,
    variable: SweepVariable,
    values: &[f64],
    parallel: bool,
) -> Result<Vec<SweepRecord>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    let mut records = Vec::with_capacity(values.len() * 2);
    for &value in values {
        let mut point = config.clone();
        variable.apply(&mut point, value);
        let scenario = Scenario::new(point)?;
        let outcomes = scenario.run_trials(parallel)?;
        records.extend(aggregate(variable, value, &scenario.powers, &outcomes)?);
        log::info!("{variable:?} = {value}: done");
    }
    records.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.method.cmp(&b.method)));
    Ok(records)
}

const CSV_HEADER: [&str; 8] = [
    "sweep_var", "value", "method", "g_emp_db", "g_theo_db", "resid_mean", "trials", "ci_db",
];

/// Writes the header and one row per record.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let records = reader.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(records)
}

/// Machine-readable run summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub config: SimConfig,
    pub sweep_var: Option<SweepVariable>,
    pub records: Vec<SweepRecord>,
}

impl RunSummary {
    pub fn new(config: SimConfig, sweep_var: Option<SweepVariable>, records: Vec<SweepRecord>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            sweep_var,
            records,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
