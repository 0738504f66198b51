//! Evaluation metrics: normalized prediction error, its noise floor and
//! sandwich bounds, a relative-comparison spectral efficiency, and
//! feedback-overhead accounting.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::channel::ChannelSnapshot;
use crate::config::SystemConfig;
use crate::linalg::{self, CMat};
use crate::{Error, Result};

/// Reporting floor for exact predictions (the ratio underflows the log).
pub const NMSE_FLOOR_DB: f64 = -200.0;

/// Linear-domain squared error ratio `||h - h_pred||^2 / ||h||^2`.
pub fn linear_nmse(h_true: &ChannelSnapshot, h_pred: &ChannelSnapshot) -> Result<f64> {
    if h_true.h.len() != h_pred.h.len() {
        return Err(Error::DimensionMismatch {
            expected: h_true.h.len(),
            got: h_pred.h.len(),
        });
    }
    let denom = linalg::norm_sqr(&h_true.h);
    if denom <= 0.0 {
        return Err(Error::Invalid("true channel has zero energy"));
    }
    let err: f64 = h_true
        .h
        .iter()
        .zip(&h_pred.h)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / denom)
}

/// Converts a linear error ratio to decibels with the reporting floor.
pub fn nmse_db_from_linear(linear: f64) -> f64 {
    if linear <= 0.0 {
        return NMSE_FLOOR_DB;
    }
    (10.0 * linear.log10()).max(NMSE_FLOOR_DB)
}

/// Per-drop prediction error in dB. Aggregates over drops must average
/// the linear ratios first and convert once.
pub fn nmse_db(h_true: &ChannelSnapshot, h_pred: &ChannelSnapshot) -> Result<f64> {
    Ok(nmse_db_from_linear(linear_nmse(h_true, h_pred)?))
}

/// Error floor of the full-support configuration:
/// `10 log10(sigma^2 N_s M / E||h||^2)`. Zero noise yields the negative
/// infinity sentinel.
pub fn noise_floor_db(sigma2: f64, n_s: usize, m: usize, mean_h_energy: f64) -> f64 {
    if sigma2 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (sigma2 * (n_s * m) as f64 / mean_h_energy).log10()
}

/// Per-drop observation feeding the sandwich bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundObservation {
    /// Measured linear error ratio of the drop.
    pub linear_nmse: f64,
    /// Noise-free projection error `||h - D D^+ h||^2 / ||h||^2`.
    pub projection_error: f64,
    /// `N_s M sigma^2 / ||h||^2` for the drop.
    pub noise_term: f64,
}

/// Outcome of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundOutcome {
    Pass,
    Fail,
    NotApplicable,
}

impl BoundOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundOutcome::Pass => "pass",
            BoundOutcome::Fail => "fail",
            BoundOutcome::NotApplicable => "na",
        }
    }
}

/// Sandwich bound over a run: with expectations estimated across drops,
/// the measured error must lie within the projection error plus/minus
/// the noise term. For single-pole model-class channels the upper bound
/// is attained with equality in expectation, so each side is asserted up
/// to three standard errors of its estimated slack; a single observation
/// degenerates to the strict comparison. Runs without pilot noise are
/// not applicable.
pub fn check_sandwich_bounds(obs: &[BoundObservation]) -> BoundOutcome {
    if obs.is_empty() || obs.iter().all(|o| o.noise_term == 0.0) {
        return BoundOutcome::NotApplicable;
    }
    let hi: Vec<f64> = obs
        .iter()
        .map(|o| o.projection_error + o.noise_term - o.linear_nmse)
        .collect();
    let lo: Vec<f64> = obs
        .iter()
        .map(|o| o.linear_nmse - (o.projection_error - o.noise_term))
        .collect();
    let scale = obs
        .iter()
        .map(|o| o.projection_error + o.noise_term)
        .sum::<f64>()
        / obs.len() as f64;
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if side_holds(&hi, floor) && side_holds(&lo, floor) {
        BoundOutcome::Pass
    } else {
        BoundOutcome::Fail
    }
}

/// One-sided test: the mean slack may dip below zero only within three
/// standard errors of its estimate.
fn side_holds(slack: &[f64], floor: f64) -> bool {
    let n = slack.len() as f64;
    let mean = slack.iter().sum::<f64>() / n;
    if slack.len() < 2 {
        return mean >= -floor;
    }
    let var = slack.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    mean >= -(3.0 * stderr + floor)
}

/// Squared projection residual of `h` onto the span of the given columns,
/// normalized by the energy of `h`. Solves the small Gram system so
/// near-orthonormal bases are handled exactly.
pub fn projection_error(h: &[Complex64], basis: &[Vec<Complex64>]) -> Result<f64> {
    if basis.is_empty() {
        return Err(Error::Invalid("empty basis"));
    }
    let k = basis.len();
    let gram = CMat::from_fn(k, k, |r, c| linalg::dot(&basis[r], &basis[c]));
    let rhs: Vec<Complex64> = basis.iter().map(|b| linalg::dot(b, h)).collect();
    let coeff = linalg::solve(&gram, &rhs)?;
    let mut proj = vec![Complex64::ZERO; h.len()];
    for (b, &x) in basis.iter().zip(&coeff) {
        for (acc, bv) in proj.iter_mut().zip(b) {
            *acc += bv * x;
        }
    }
    let denom = linalg::norm_sqr(h);
    if denom <= 0.0 {
        return Err(Error::Invalid("zero vector has no projection error"));
    }
    let err: f64 = h.iter().zip(&proj).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / denom)
}

/// Relative-comparison spectral efficiency in bits/s/Hz: per subcarrier,
/// precoders are derived from the predicted channels (matched filter for
/// one UE, zero forcing across UEs otherwise) and the SINR is evaluated
/// on the true channels, then averaged over subcarriers.
pub fn spectral_efficiency(
    h_true: &[&ChannelSnapshot],
    h_pred: &[&ChannelSnapshot],
    noise_power: f64,
    cfg: &SystemConfig,
) -> Result<f64> {
    let k_ues = h_true.len();
    if k_ues == 0 || h_pred.len() != k_ues {
        return Err(Error::Invalid("need matching true/predicted channel sets"));
    }
    if noise_power <= 0.0 {
        return Err(Error::Invalid("noise power must be positive"));
    }
    let n_t = cfg.n_t();
    for s in h_true.iter().chain(h_pred.iter()) {
        if s.h.len() != cfg.grid_len() {
            return Err(Error::DimensionMismatch {
                expected: cfg.grid_len(),
                got: s.h.len(),
            });
        }
    }

    let mut se_sum = 0.0;
    for l in 0..cfg.n_f {
        let sl = l * n_t..(l + 1) * n_t;
        let pred_cols: Vec<&[Complex64]> = h_pred.iter().map(|s| &s.h[sl.clone()]).collect();
        let precoders = if k_ues == 1 {
            vec![matched_filter(pred_cols[0])]
        } else {
            zero_forcing(&pred_cols)?
        };
        for k in 0..k_ues {
            let hk = &h_true[k].h[sl.clone()];
            let signal = row_times(hk, &precoders[k]).norm_sqr();
            let mut interf = 0.0;
            for (j, w) in precoders.iter().enumerate() {
                if j != k {
                    interf += row_times(hk, w).norm_sqr();
                }
            }
            se_sum += (1.0 + signal / (noise_power + interf)).log2();
        }
    }
    Ok(se_sum / cfg.n_f as f64)
}

fn row_times(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Unit-norm matched filter `conj(h) / ||h||`.
fn matched_filter(h: &[Complex64]) -> Vec<Complex64> {
    let n = linalg::norm(h);
    if n == 0.0 {
        return vec![Complex64::ZERO; h.len()];
    }
    h.iter().map(|z| z.conj() / n).collect()
}

/// Zero-forcing columns with unit power: `conj(H) (H^T conj(H))^{-1}`,
/// column-normalized.
fn zero_forcing(pred: &[&[Complex64]]) -> Result<Vec<Vec<Complex64>>> {
    let k = pred.len();
    let n_t = pred[0].len();
    // G[r][c] = h_r^T conj(h_c) = conj(dot(h_r, conj?)). Build directly.
    let gram = CMat::from_fn(k, k, |r, c| {
        pred[r].iter().zip(pred[c]).map(|(a, b)| a * b.conj()).sum()
    });
    let mut cols = Vec::with_capacity(k);
    for kk in 0..k {
        let mut e = vec![Complex64::ZERO; k];
        e[kk] = Complex64::ONE;
        let x = linalg::solve(&gram, &e)?;
        let mut w = vec![Complex64::ZERO; n_t];
        for (j, &xj) in x.iter().enumerate() {
            for (acc, hv) in w.iter_mut().zip(pred[j]) {
                *acc += hv.conj() * xj;
            }
        }
        let n = linalg::norm(&w);
        if n > 0.0 {
            for z in w.iter_mut() {
                *z /= n;
            }
        }
        cols.push(w);
    }
    Ok(cols)
}

/// Feedback cost per coherence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackOverhead {
    /// Complex scalars fed back per coherence interval, `N_s M / N_c`.
    pub scalars_per_coherence: f64,
    /// Information bits under the given codebook, including the 64-bit
    /// scale anchor; `None` without quantization.
    pub bits: Option<u64>,
}

/// Overhead accounting: the coefficient count never depends on the
/// antenna count or bandwidth.
pub fn feedback_overhead(
    n_s: usize,
    m: usize,
    n_c: usize,
    codebook: Option<(u8, u8)>,
) -> Result<FeedbackOverhead> {
    if n_s < 1 || m < 1 || n_c < 1 {
        return Err(Error::Invalid("overhead inputs must be positive"));
    }
    let scalars = (n_s * m) as f64 / n_c as f64;
    let bits = codebook.map(|(c_a, c_p)| (n_s * m) as u64 * (c_a as u64 + c_p as u64) + 64);
    Ok(FeedbackOverhead {
        scalars_per_coherence: scalars,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Band;

    fn snap(h: Vec<Complex64>) -> ChannelSnapshot {
        ChannelSnapshot {
            t: 0,
            band: Band::Dl,
            h,
        }
    }

    fn ones(n: usize) -> Vec<Complex64> {
        vec![Complex64::ONE; n]
    }

    #[test]
    fn exact_prediction_hits_floor() {
        let a = snap(ones(8));
        assert_eq!(nmse_db(&a, &a.clone()).unwrap(), NMSE_FLOOR_DB);
    }

    #[test]
    fn zero_predictor_is_zero_db() {
        let a = snap(ones(8));
        let b = snap(vec![Complex64::ZERO; 8]);
        assert!((nmse_db(&a, &b).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn doubled_prediction_is_zero_db() {
        let a = snap(ones(8));
        let b = snap(vec![Complex64::new(2.0, 0.0); 8]);
        assert!((nmse_db(&a, &b).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn zero_truth_rejected() {
        let a = snap(vec![Complex64::ZERO; 4]);
        assert!(nmse_db(&a, &a.clone()).is_err());
    }

    #[test]
    fn floor_formula_values() {
        assert!((noise_floor_db(1.0, 32, 1, 32.0) - 0.0).abs() < 1e-12);
        assert_eq!(noise_floor_db(0.0, 32, 1, 32.0), f64::NEG_INFINITY);
        assert!((noise_floor_db(0.1, 10, 2, 4.0) - 10.0 * (0.5f64).log10()).abs() < 1e-12);
    }

    #[test]
    fn sandwich_outcomes() {
        // noise-free: not applicable
        let obs = [BoundObservation {
            linear_nmse: 0.2,
            projection_error: 0.2,
            noise_term: 0.0,
        }];
        assert_eq!(check_sandwich_bounds(&obs), BoundOutcome::NotApplicable);

        // inside the band
        let obs = [BoundObservation {
            linear_nmse: 0.25,
            projection_error: 0.2,
            noise_term: 0.1,
        }];
        assert_eq!(check_sandwich_bounds(&obs), BoundOutcome::Pass);

        // above the band
        let obs = [BoundObservation {
            linear_nmse: 0.4,
            projection_error: 0.2,
            noise_term: 0.1,
        }];
        assert_eq!(check_sandwich_bounds(&obs), BoundOutcome::Fail);
    }

    #[test]
    fn projection_error_of_in_span_vector_is_zero() {
        let b1: Vec<Complex64> = vec![Complex64::ONE, Complex64::ZERO, Complex64::ZERO];
        let b2: Vec<Complex64> = vec![Complex64::ZERO, Complex64::new(0.0, 1.0), Complex64::ZERO];
        let h = vec![
            Complex64::new(0.3, -0.4),
            Complex64::new(1.0, 2.0),
            Complex64::ZERO,
        ];
        let e = projection_error(&h, &[b1.clone(), b2.clone()]).unwrap();
        assert!(e < 1e-14);
        let h_out = vec![Complex64::ZERO, Complex64::ZERO, Complex64::ONE];
        let e = projection_error(&h_out, &[b1, b2]).unwrap();
        assert!((e - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unit_snr_single_ue() {
        // ||h_f||^2 = 1 per subcarrier with matched prediction: SE = 1.
        let f_u = 1.92e9;
        let c = 299_792_458.0;
        let cfg = SystemConfig {
            n_v: 1,
            n_h: 2,
            p_t: 1,
            l_v: c / (2.0 * f_u),
            l_h: c / (2.0 * f_u),
            f_u,
            f_d: 2.11e9,
            f_delta: 30e3,
            n_f: 4,
            t_srs: 5e-4,
            n_d: 1,
            c,
        };
        let scale = 1.0 / (2.0f64).sqrt();
        let h = snap(vec![Complex64::new(scale, 0.0); 8]);
        let se = spectral_efficiency(&[&h], &[&h.clone()], 1.0, &cfg).unwrap();
        assert!((se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_prediction_zero_se() {
        let f_u = 1.92e9;
        let c = 299_792_458.0;
        let cfg = SystemConfig {
            n_v: 1,
            n_h: 2,
            p_t: 1,
            l_v: c / (2.0 * f_u),
            l_h: c / (2.0 * f_u),
            f_u,
            f_d: 2.11e9,
            f_delta: 30e3,
            n_f: 1,
            t_srs: 5e-4,
            n_d: 1,
            c,
        };
        let h_true = snap(vec![Complex64::ONE, Complex64::ZERO]);
        let h_pred = snap(vec![Complex64::ZERO, Complex64::ONE]);
        let se = spectral_efficiency(&[&h_true], &[&h_pred], 1.0, &cfg).unwrap();
        assert!(se.abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_cancels_inter_ue_interference() {
        let f_u = 1.92e9;
        let c = 299_792_458.0;
        let cfg = SystemConfig {
            n_v: 1,
            n_h: 4,
            p_t: 1,
            l_v: c / (2.0 * f_u),
            l_h: c / (2.0 * f_u),
            f_u,
            f_d: 2.11e9,
            f_delta: 30e3,
            n_f: 2,
            t_srs: 5e-4,
            n_d: 1,
            c,
        };
        use crate::rng::complex_gaussian;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha12Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let ues: Vec<ChannelSnapshot> = (0..3)
            .map(|_| snap((0..8).map(|_| complex_gaussian(&mut rng, 1.0)).collect()))
            .collect();
        let refs: Vec<&ChannelSnapshot> = ues.iter().collect();
        // perfect prediction: ZF kills interference, SINR = signal/noise
        let se = spectral_efficiency(&refs, &refs, 1.0, &cfg).unwrap();
        assert!(se > 0.0);
        // verify interference suppression directly
        let n_t = cfg.n_t();
        let pred_cols: Vec<&[Complex64]> = ues.iter().map(|s| &s.h[0..n_t]).collect();
        let w = super::zero_forcing(&pred_cols).unwrap();
        for (k, ue) in ues.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                let g = super::row_times(&ue.h[0..n_t], wj).norm();
                if j != k {
                    assert!(g < 1e-10, "residual interference {g}");
                } else {
                    assert!(g > 1e-6);
                }
            }
        }
    }

    #[test]
    fn overhead_values() {
        let o = feedback_overhead(200, 1, 1, None).unwrap();
        assert!((o.scalars_per_coherence - 200.0).abs() < 1e-12);
        assert_eq!(o.bits, None);
        let o = feedback_overhead(200, 1, 2, None).unwrap();
        assert!((o.scalars_per_coherence - 100.0).abs() < 1e-12);
        let o = feedback_overhead(200, 1, 1, Some((4, 6))).unwrap();
        assert_eq!(o.bits, Some(200 * 10 + 64));
        assert!(feedback_overhead(0, 1, 1, None).is_err());
    }
}
