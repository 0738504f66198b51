//! Downlink training round-trip: the basis/Doppler decomposition of the
//! model channel, the wideband pilot precoder, unitary pilots, the UE's
//! least-squares coefficient estimate, feedback quantization and the
//! final channel prediction.
//!
//! The pilot dimension is always `N_s * M`: training overhead scales with
//! the angle-delay support and model order, never with the antenna count
//! or bandwidth. Doppler phases are anchored at absolute slot zero (the
//! first uplink sample), so both link ends agree on time without
//! exchanging timestamps.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand_core::RngCore;

use crate::channel::ChannelSnapshot;
use crate::config::{flat_to_grid, Band, SystemConfig};
use crate::linalg::{self, CMat};
use crate::pencil::UlParamEstimate;
use crate::rng::complex_gaussian;
use crate::ul2dl::{ul_to_dl_doppler_with, ul_to_dl_vector, DlBasisVector, DopplerMap};
use crate::{Error, Result};

/// Downlink training state held by the base station: the basis columns,
/// per-index Doppler factors, and the training slot.
#[derive(Debug, Clone)]
pub struct DlTrainingState {
    /// One column per support index, orthonormal to working precision.
    pub basis: Vec<DlBasisVector>,
    /// `N_s` rows of `M` unit-modulus per-slot phase factors.
    pub dopplers: Vec<Vec<Complex64>>,
    /// Slot at which the pilot is transmitted.
    pub t_train: i64,
    /// Shared model order `M`.
    pub m_order: usize,
}

impl DlTrainingState {
    pub fn n_s(&self) -> usize {
        self.basis.len()
    }

    /// Pilot length `tau = N_s * M`.
    pub fn tau_len(&self) -> usize {
        self.n_s() * self.m_order
    }

    pub fn dim(&self) -> usize {
        self.basis.first().map_or(0, |b| b.d.len())
    }

    /// Doppler row of index `j` evaluated at slot `t`.
    pub fn doppler_row(&self, j: usize, t: i64) -> Vec<Complex64> {
        self.dopplers[j].iter().map(|z| z.powi(t as i32)).collect()
    }

    /// Dense `N_s x (N_s M)` block-diagonal Doppler matrix at slot `t`;
    /// diagnostic-sized only.
    pub fn doppler_matrix(&self, t: i64) -> CMat {
        let n_s = self.n_s();
        let m = self.m_order;
        let mut e = CMat::zeros(n_s, n_s * m);
        for j in 0..n_s {
            for (k, z) in self.doppler_row(j, t).iter().enumerate() {
                e.set(j, j * m + k, *z);
            }
        }
        e
    }
}

/// Unitary pilot matrix, `tau x tau`.
#[derive(Debug, Clone)]
pub struct PilotMatrix {
    pub s: CMat,
}

impl PilotMatrix {
    pub fn tau(&self) -> usize {
        self.s.cols()
    }
}

/// Estimated (possibly quantized) feedback coefficients, index-major and
/// pole-minor as the decomposition orders them.
#[derive(Debug, Clone)]
pub struct FeedbackVector {
    /// Length `N_s * M`; reconstructed values when quantized.
    pub a_hat: Vec<Complex64>,
    pub n_s: usize,
    pub m_order: usize,
    pub quantized: bool,
    /// Amplitude codebook bits; `None` means unquantized amplitudes.
    pub c_a: Option<u8>,
    /// Phase codebook bits; `None` means unquantized phases.
    pub c_p: Option<u8>,
    /// Unquantized scale anchor (the largest coefficient amplitude).
    pub anchor: f64,
    /// Codeword pairs (amplitude, phase) when quantized.
    pub codewords: Option<Vec<(u16, u16)>>,
}

/// Builds the downlink training state from an uplink estimate. Models of
/// unequal order are padded with unit poles and zero amplitudes so every
/// Doppler block has the shared width.
pub fn build_training_state(
    est: &UlParamEstimate,
    cfg: &SystemConfig,
    t_train: i64,
    map: DopplerMap,
) -> Result<DlTrainingState> {
    if est.models.is_empty() {
        return Err(Error::Invalid("empty uplink estimate"));
    }
    let m_order = est.models.iter().map(|m| m.order).max().unwrap();
    let mut basis = Vec::with_capacity(est.models.len());
    let mut dopplers = Vec::with_capacity(est.models.len());
    for model in &est.models {
        let g = flat_to_grid(model.index + 1, cfg)?;
        basis.push(ul_to_dl_vector(&g, cfg));
        let mut row = Vec::with_capacity(m_order);
        for pole in &model.poles {
            row.push(ul_to_dl_doppler_with(*pole, cfg, map)?);
        }
        row.resize(m_order, Complex64::ONE);
        dopplers.push(row);
    }
    Ok(DlTrainingState {
        basis,
        dopplers,
        t_train,
        m_order,
    })
}

/// The wideband pilot precoder `F = conj(D E(t)) / M`, the product of the
/// right inverse of `D^T` (which is `conj(D)` for orthonormal columns)
/// and the per-block pseudo-inverse of `E(t)^T`.
pub fn build_precoder(state: &DlTrainingState) -> CMat {
    let dim = state.dim();
    let m = state.m_order;
    let inv_m = 1.0 / m as f64;
    let mut f = CMat::zeros(dim, state.tau_len());
    for (j, b) in state.basis.iter().enumerate() {
        let row = state.doppler_row(j, state.t_train);
        for (k, z) in row.iter().enumerate() {
            let factor = (z * inv_m).conj();
            let col = f.col_mut(j * m + k);
            for (r, dv) in b.d.iter().enumerate() {
                col[r] = dv.conj() * factor;
            }
        }
    }
    f
}

/// Unitary pilot matrix of dimension `n`: the normalized DFT.
pub fn build_pilot(n: usize) -> Result<PilotMatrix> {
    if n < 1 {
        return Err(Error::Invalid("pilot dimension must be >= 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let s = CMat::from_fn(n, n, |r, c| {
        Complex64::from_polar(scale, -2.0 * PI * (r * c % n) as f64 / n as f64)
    });
    Ok(PilotMatrix { s })
}

/// Noise-free received row `y = h^T F S`.
pub fn received_noise_free(
    h: &ChannelSnapshot,
    f: &CMat,
    s: &PilotMatrix,
) -> Result<Vec<Complex64>> {
    if h.h.len() != f.rows() {
        return Err(Error::DimensionMismatch {
            expected: f.rows(),
            got: h.h.len(),
        });
    }
    if f.cols() != s.s.rows() {
        return Err(Error::DimensionMismatch {
            expected: f.cols(),
            got: s.s.rows(),
        });
    }
    let hf = f.vec_mat(&h.h);
    Ok(s.s.vec_mat(&hf))
}

/// The same received row accumulated per subcarrier: each subcarrier
/// applies its own slice of the wideband precoder to the pilot rows and
/// the UE sums across subcarriers. Kept as the independent route for
/// checking the matrix form.
pub fn received_noise_free_per_subcarrier(
    h: &ChannelSnapshot,
    f: &CMat,
    s: &PilotMatrix,
    cfg: &SystemConfig,
) -> Result<Vec<Complex64>> {
    let n_t = cfg.n_t();
    if h.h.len() != cfg.grid_len() || f.rows() != cfg.grid_len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.grid_len(),
            got: h.h.len(),
        });
    }
    let tau = s.tau();
    let n_cols = f.cols();
    let mut y = vec![Complex64::ZERO; tau];
    for l in 0..cfg.n_f {
        let h_l = &h.h[l * n_t..(l + 1) * n_t];
        // g_l = sum_n f_n(t, f_l) s_n : the transmitted sequence matrix
        // on this subcarrier.
        let mut g_l = CMat::zeros(n_t, tau);
        for n in 0..n_cols {
            let f_block = &f.col(n)[l * n_t..(l + 1) * n_t];
            let s_row: Vec<Complex64> = (0..tau).map(|k| s.s.at(n, k)).collect();
            for (c, sv) in s_row.iter().enumerate() {
                let col = g_l.col_mut(c);
                for (r, fv) in f_block.iter().enumerate() {
                    col[r] += fv * sv;
                }
            }
        }
        let x_l = g_l.vec_mat(h_l);
        for (acc, v) in y.iter_mut().zip(&x_l) {
            *acc += v;
        }
    }
    Ok(y)
}

/// Simulates the downlink training reception: `y = h^T F S + n` with the
/// noise variance set per received pilot symbol relative to the mean
/// noise-free symbol power. Returns the received row and the noise
/// variance actually applied (`0` for the `INFINITY` sentinel).
pub fn simulate_dl_training<R: RngCore + ?Sized>(
    h: &ChannelSnapshot,
    f: &CMat,
    s: &PilotMatrix,
    pilot_snr_db: f64,
    rng: &mut R,
) -> Result<(Vec<Complex64>, f64)> {
    let mut y = received_noise_free(h, f, s)?;
    if pilot_snr_db == f64::INFINITY {
        return Ok((y, 0.0));
    }
    let mean_pow = linalg::norm_sqr(&y) / y.len() as f64;
    let sigma2 = mean_pow / 10f64.powf(pilot_snr_db / 10.0);
    for z in y.iter_mut() {
        *z += complex_gaussian(rng, sigma2);
    }
    Ok((y, sigma2))
}

/// Least-squares coefficient estimate from the received row: the row
/// space projection of the true coefficients plus shaped noise. With
/// `M = 1` the projector is the identity and the estimate is exact in
/// the noise-free case.
pub fn estimate_coefficients(
    y: &[Complex64],
    s: &PilotMatrix,
    state: &DlTrainingState,
) -> Result<FeedbackVector> {
    let tau = state.tau_len();
    if y.len() != tau || s.tau() != tau {
        return Err(Error::DimensionMismatch {
            expected: tau,
            got: y.len(),
        });
    }
    // v = conj(S) y^T, then per-block projection onto the Doppler row.
    let mut v = vec![Complex64::ZERO; tau];
    for (r, slot) in v.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (k, yk) in y.iter().enumerate() {
            acc += s.s.at(r, k).conj() * yk;
        }
        *slot = acc;
    }
    let m = state.m_order;
    let inv_m = 1.0 / m as f64;
    let mut a_hat = vec![Complex64::ZERO; tau];
    for j in 0..state.n_s() {
        let e = state.doppler_row(j, state.t_train);
        let block = &v[j * m..(j + 1) * m];
        let s_j: Complex64 = e.iter().zip(block).map(|(ez, vz)| ez * vz).sum();
        for (k, ez) in e.iter().enumerate() {
            a_hat[j * m + k] = ez.conj() * s_j * inv_m;
        }
    }
    Ok(FeedbackVector {
        a_hat,
        n_s: state.n_s(),
        m_order: m,
        quantized: false,
        c_a: None,
        c_p: None,
        anchor: 1.0,
        codewords: None,
    })
}

fn amplitude_codebook(bits: u8) -> Vec<f64> {
    // (1/sqrt(2))^k for k = 0 .. 2^bits - 2, plus an explicit zero.
    let levels = (1usize << bits) - 1;
    let mut cb: Vec<f64> = (0..levels).map(|k| 0.5f64.powf(k as f64 / 2.0)).collect();
    cb.push(0.0);
    cb
}

/// Quantizes the feedback with a geometric amplitude codebook (normalized
/// by the strongest coefficient, which travels unquantized as the scale
/// anchor) and a uniform phase codebook. `None` bits leave that component
/// untouched.
pub fn quantize_feedback(
    fb: &FeedbackVector,
    c_a: Option<u8>,
    c_p: Option<u8>,
) -> Result<FeedbackVector> {
    if c_a.is_none() && c_p.is_none() {
        return Ok(fb.clone());
    }
    for bits in [c_a, c_p].into_iter().flatten() {
        if !(1..=16).contains(&bits) {
            return Err(Error::Invalid("codebook bits must lie in [1, 16]"));
        }
    }
    let anchor = fb.a_hat.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let amp_cb = c_a.map(amplitude_codebook);
    let phase_levels = c_p.map(|b| 1usize << b);

    let mut values = Vec::with_capacity(fb.a_hat.len());
    let mut codes = Vec::with_capacity(fb.a_hat.len());
    for z in &fb.a_hat {
        let u = if anchor > 0.0 { z.norm() / anchor } else { 0.0 };
        let (amp, amp_idx) = match &amp_cb {
            Some(cb) => {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (k, &c) in cb.iter().enumerate() {
                    let d = (c - u).abs();
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                (cb[best] * anchor, best as u16)
            }
            None => (z.norm(), 0),
        };
        let (phase, phase_idx) = match phase_levels {
            Some(levels) => {
                let step = 2.0 * PI / levels as f64;
                let k = (z.arg() / step).round() as i64;
                let k = k.rem_euclid(levels as i64) as usize;
                (k as f64 * step, k as u16)
            }
            None => (z.arg(), 0),
        };
        values.push(Complex64::from_polar(amp, phase));
        codes.push((amp_idx, phase_idx));
    }
    Ok(FeedbackVector {
        a_hat: values,
        n_s: fb.n_s,
        m_order: fb.m_order,
        quantized: true,
        c_a,
        c_p,
        anchor,
        codewords: Some(codes),
    })
}

/// Reconstructs the channel at `t_target >= t_train` from the fed-back
/// coefficients, the basis and the per-slot Doppler factors, all in
/// absolute slot time.
pub fn predict_channel(
    state: &DlTrainingState,
    fb: &FeedbackVector,
    t_target: i64,
) -> Result<ChannelSnapshot> {
    if t_target < state.t_train {
        return Err(Error::Invalid(
            "prediction target precedes the training slot",
        ));
    }
    if fb.a_hat.len() != state.tau_len() {
        return Err(Error::DimensionMismatch {
            expected: state.tau_len(),
            got: fb.a_hat.len(),
        });
    }
    let m = state.m_order;
    let mut h = vec![Complex64::ZERO; state.dim()];
    for (j, b) in state.basis.iter().enumerate() {
        let row = state.doppler_row(j, t_target);
        let coeff: Complex64 = row
            .iter()
            .zip(&fb.a_hat[j * m..(j + 1) * m])
            .map(|(z, a)| a * z)
            .sum();
        if coeff == Complex64::ZERO {
            continue;
        }
        for (acc, dv) in h.iter_mut().zip(&b.d) {
            *acc += dv * coeff;
        }
    }
    Ok(ChannelSnapshot {
        t: t_target,
        band: Band::Dl,
        h,
    })
}

const WIRE_HEADER: usize = 8;
const WIRE_ANCHOR: usize = 8;

impl FeedbackVector {
    /// Serialized size in bytes of the wire layout.
    pub fn wire_len(&self) -> usize {
        let per = if self.quantized { 4 } else { 16 };
        WIRE_HEADER + self.a_hat.len() * per + WIRE_ANCHOR
    }

    /// Wire layout: `u32 N_s`, `u32 M`, then per coefficient either the
    /// `(u16, u16)` codeword pair (quantized) or the raw `(f64, f64)`
    /// complex value, then the `f64` scale anchor. All little-endian.
    /// The quantization mode and bit widths travel out of band.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&(self.n_s as u32).to_le_bytes());
        out.extend_from_slice(&(self.m_order as u32).to_le_bytes());
        if self.quantized {
            let codes = self
                .codewords
                .as_ref()
                .expect("quantized vector carries codewords");
            for &(a, p) in codes {
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&p.to_le_bytes());
            }
        } else {
            for z in &self.a_hat {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.anchor.to_le_bytes());
        out
    }

    /// Parses the wire layout produced by [`FeedbackVector::to_bytes`].
    pub fn from_bytes(
        bytes: &[u8],
        quantized: bool,
        c_a: Option<u8>,
        c_p: Option<u8>,
    ) -> Result<FeedbackVector> {
        let fail = Error::Invalid("feedback wire format truncated or inconsistent");
        if bytes.len() < WIRE_HEADER + WIRE_ANCHOR {
            return Err(fail);
        }
        let n_s = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let count = n_s * m;
        let per = if quantized { 4 } else { 16 };
        if bytes.len() != WIRE_HEADER + count * per + WIRE_ANCHOR {
            return Err(fail);
        }
        let anchor = f64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        let body = &bytes[WIRE_HEADER..bytes.len() - WIRE_ANCHOR];
        if quantized {
            let amp_cb = amplitude_codebook(c_a.ok_or(Error::Invalid(
                "amplitude bits required to decode quantized feedback",
            ))?);
            let p_bits = c_p.ok_or(Error::Invalid(
                "phase bits required to decode quantized feedback",
            ))?;
            let levels = 1usize << p_bits;
            let step = 2.0 * PI / levels as f64;
            let mut a_hat = Vec::with_capacity(count);
            let mut codes = Vec::with_capacity(count);
            for k in 0..count {
                let a = u16::from_le_bytes(body[4 * k..4 * k + 2].try_into().unwrap());
                let p = u16::from_le_bytes(body[4 * k + 2..4 * k + 4].try_into().unwrap());
                let amp = *amp_cb.get(a as usize).ok_or(fail.clone())?;
                if (p as usize) >= levels {
                    return Err(fail);
                }
                a_hat.push(Complex64::from_polar(amp * anchor, p as f64 * step));
                codes.push((a, p));
            }
            Ok(FeedbackVector {
                a_hat,
                n_s,
                m_order: m,
                quantized: true,
                c_a,
                c_p,
                anchor,
                codewords: Some(codes),
            })
        } else {
            let mut a_hat = Vec::with_capacity(count);
            for k in 0..count {
                let re = f64::from_le_bytes(body[16 * k..16 * k + 8].try_into().unwrap());
                let im = f64::from_le_bytes(body[16 * k + 8..16 * k + 16].try_into().unwrap());
                a_hat.push(Complex64::new(re, im));
            }
            Ok(FeedbackVector {
                a_hat,
                n_s,
                m_order: m,
                quantized: false,
                c_a: None,
                c_p: None,
                anchor,
                codewords: None,
            })
        }
    }
}
