//! CP-OFDM substrate: DFT matrix, BPSK symbol generation and
//! modulation/demodulation.
//!
//! Transform convention: the forward transform is the unnormalised sum
//! `X[k] = Σ_n x(n) e^{-j2πkn/N}` and the inverse carries the `1/N` factor.
//! All power bookkeeping elsewhere in the crate is done in the frequency
//! domain.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::FftPlanner;

use crate::{CMatrix, CVector, Error, Result, C64};

/// The `N_c × L` partial DFT matrix with `[F]_{n,l} = e^{-j2πnl/N_c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftMatrix {
    entries: CMatrix,
}

impl DftMatrix {
    pub fn n_subcarriers(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_taps(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    /// Channel impulse response to frequency response, `F h`.
    pub fn apply(&self, taps: &CVector) -> CVector {
        &self.entries * taps
    }
}

pub fn build_dft_matrix(n_subcarriers: usize, n_taps: usize) -> Result<DftMatrix> {
    if n_subcarriers == 0 || n_taps == 0 || n_taps > n_subcarriers {
        return Err(Error::InvalidDimension(format!(
            "DFT matrix needs 1 <= taps <= subcarriers, got {n_taps} taps, {n_subcarriers} subcarriers"
        )));
    }
    let n = n_subcarriers as f64;
    let entries = CMatrix::from_fn(n_subcarriers, n_taps, |row, col| {
        // reduce the exponent mod N first so large products stay exact
        let k = (row * col) % n_subcarriers;
        C64::from_polar(1.0, -2.0 * PI * k as f64 / n)
    });
    Ok(DftMatrix { entries })
}

/// One OFDM symbol in both domains.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    pub freq_symbols: CVector,
    pub time_samples: Vec<C64>,
    pub symbol_power: f64,
}

impl OfdmFrame {
    pub fn new(freq_symbols: CVector, cp_length: usize, symbol_power: f64) -> Result<Self> {
        let time_samples = modulate(freq_symbols.as_slice(), cp_length)?;
        Ok(Self {
            freq_symbols,
            time_samples,
            symbol_power,
        })
    }
}

/// Equiprobable BPSK symbols `±√σ_x²`.
pub fn gen_bpsk_symbols<R: Rng + ?Sized>(
    n_subcarriers: usize,
    symbol_power: f64,
    rng: &mut R,
) -> Result<CVector> {
    if !(symbol_power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "symbol power must be positive, got {symbol_power}"
        )));
    }
    let amp = symbol_power.sqrt();
    Ok(CVector::from_fn(n_subcarriers, |_, _| {
        if rng.random::<bool>() {
            C64::new(amp, 0.0)
        } else {
            C64::new(-amp, 0.0)
        }
    }))
}

/// Unnormalised forward DFT of `samples`.
pub fn fft(samples: &[C64]) -> Vec<C64> {
    let mut buf = samples.to_vec();
    if !buf.is_empty() {
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    }
    buf
}

/// Inverse DFT with the `1/N` factor.
pub fn ifft(symbols: &[C64]) -> Vec<C64> {
    let mut buf = symbols.to_vec();
    if !buf.is_empty() {
        FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
    buf
}

/// Inverse transform of `freq_symbols` with the last `cp_length` samples
/// prepended.
pub fn modulate(freq_symbols: &[C64], cp_length: usize) -> Result<Vec<C64>> {
    let n = freq_symbols.len();
    if n == 0 {
        return Err(Error::InvalidDimension("cannot modulate an empty symbol".into()));
    }
    if cp_length >= n {
        return Err(Error::InvalidDimension(format!(
            "cyclic prefix {cp_length} must be shorter than the symbol ({n})"
        )));
    }
    let body = ifft(freq_symbols);
    let mut out = Vec::with_capacity(n + cp_length);
    out.extend_from_slice(&body[n - cp_length..]);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Strips the cyclic prefix and applies the forward transform.
pub fn demodulate(time_samples: &[C64], cp_length: usize) -> Result<Vec<C64>> {
    if time_samples.len() <= cp_length {
        return Err(Error::InvalidDimension(format!(
            "{} samples cannot carry a {cp_length}-sample prefix and a body",
            time_samples.len()
        )));
    }
    Ok(fft(&time_samples[cp_length..]))
}
