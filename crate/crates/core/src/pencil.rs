//! Matrix Pencil pole estimation on per-index complex-gain series, MDL
//! model-order detection, truncated-SVD denoising, and the driver that
//! turns a window of uplink snapshots into per-index Doppler models.
//!
//! A series of `N_L` samples and a prediction order `L` yield the two
//! shifted prediction matrices; the non-trivial eigenvalues of the
//! pseudo-inverse pencil are the poles. Feasibility requires
//! `M <= L <= N_L - M`.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::channel::ChannelSnapshot;
use crate::linalg::{self, CMat};
use crate::transform::{
    select_support, AngleDelayImage, AngleDelayTransform, SupportSelection, SupportSet,
};
use crate::{Error, Result};

/// Complex-gain time series of one angle-delay index.
#[derive(Debug, Clone)]
pub struct GainSeries {
    /// 0-based flat grid index this series belongs to.
    pub index: usize,
    /// Samples at `slot_times`, length `N_L >= 2`.
    pub values: Vec<Complex64>,
    /// Uniformly spaced slot indices; poles are per-slot factors.
    pub slot_times: Vec<i64>,
}

impl GainSeries {
    pub fn new(index: usize, values: Vec<Complex64>, slot_times: Vec<i64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Invalid("gain series needs at least two samples"));
        }
        if values.len() != slot_times.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: slot_times.len(),
            });
        }
        let step = slot_times[1] - slot_times[0];
        if step <= 0 || slot_times.windows(2).any(|w| w[1] - w[0] != step) {
            return Err(Error::Invalid("slot times must be uniformly increasing"));
        }
        Ok(GainSeries {
            index,
            values,
            slot_times,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.len()
    }
}

/// Exponential model of one gain series: `sum_m a_m z_m^t`.
#[derive(Debug, Clone)]
pub struct PoleModel {
    pub index: usize,
    pub poles: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
    pub order: usize,
    /// Relative reconstruction residual on the training slots.
    pub residual: f64,
}

/// Output of the uplink estimation driver: the selected support and one
/// pole model per support index.
#[derive(Debug, Clone)]
pub struct UlParamEstimate {
    pub support: SupportSet,
    pub models: Vec<PoleModel>,
    pub l_order: usize,
}

impl UlParamEstimate {
    /// Keeps the `k` strongest poles (by fitted amplitude) of every
    /// model. One pilot slot identifies a single coefficient per block,
    /// so prediction-side consumers reduce to the dominant pole.
    pub fn reduced_to_dominant(&self, k: usize) -> UlParamEstimate {
        let models = self
            .models
            .iter()
            .map(|m| {
                let mut order: Vec<usize> = (0..m.poles.len()).collect();
                order.sort_by(|&i, &j| {
                    m.amplitudes[j]
                        .norm()
                        .partial_cmp(&m.amplitudes[i].norm())
                        .unwrap()
                        .then(i.cmp(&j))
                });
                order.truncate(k.max(1));
                PoleModel {
                    index: m.index,
                    poles: order.iter().map(|&i| m.poles[i]).collect(),
                    amplitudes: order.iter().map(|&i| m.amplitudes[i]).collect(),
                    order: order.len(),
                    residual: m.residual,
                }
            })
            .collect();
        UlParamEstimate {
            support: self.support.clone(),
            models,
            l_order: self.l_order,
        }
    }
}

/// Builds the shifted prediction matrices, both `(N_L - L) x L` with the
/// sample-reversed row layout; the second is advanced by one sample.
pub fn build_prediction_matrices(s: &GainSeries, l: usize) -> Result<(CMat, CMat)> {
    let n = s.n_samples();
    if l < 1 || l >= n {
        return Err(Error::Invalid(
            "prediction order must satisfy 1 <= L <= N_L - 1",
        ));
    }
    let rows = n - l;
    // 1-based sample index: P0[r, c] = g(t_{L + r - c}), P1 shifted by one.
    let p0 = CMat::from_fn(rows, l, |r, c| s.values[l + r - c - 1]);
    let p1 = CMat::from_fn(rows, l, |r, c| s.values[l + r - c]);
    Ok((p0, p1))
}

/// Eigenvalues of `pinv(P0) * P1` restricted to its non-trivial spectrum,
/// computed on the rank-reduced pencil; returns the `m` of largest
/// modulus (ties broken by ascending phase).
pub fn estimate_poles(p0: &CMat, p1: &CMat, m: usize) -> Result<Vec<Complex64>> {
    if m < 1 {
        return Err(Error::Invalid("pole count must be >= 1"));
    }
    if p0.rows() != p1.rows() || p0.cols() != p1.cols() {
        return Err(Error::DimensionMismatch {
            expected: p0.rows() * p0.cols(),
            got: p1.rows() * p1.cols(),
        });
    }
    if m > p0.rows().min(p0.cols()) {
        return Err(Error::Invalid("pole count exceeds pencil dimensions"));
    }
    let dec = linalg::svd(p0)?;
    let tol = dec.rank_tolerance(p0.rows(), p0.cols());
    let rank = dec.s.iter().filter(|&&s| s > tol).count();
    if rank < m {
        return Err(Error::RankDeficient { required: m, rank });
    }
    // Non-zero eigenvalues of pinv(P0) P1 equal those of
    // U_r^H P1 V_r diag(1/s_r)  (r x r).
    let mut reduced = CMat::zeros(rank, rank);
    for c in 0..rank {
        let pv = p1.mat_vec(dec.v.col(c));
        for r in 0..rank {
            reduced.set(r, c, linalg::dot(dec.u.col(r), &pv) / dec.s[c]);
        }
    }
    let mut eigs = linalg::eigenvalues(&reduced)?;
    eigs.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(a.arg().partial_cmp(&b.arg()).unwrap())
    });
    eigs.truncate(m);
    Ok(eigs)
}

/// Augmented data matrix `[p(t_{L+1}) | P0]`, the full `(N_L - L) x (L+1)`
/// sliding-window matrix of the series.
fn augmented_matrix(s: &GainSeries, l: usize) -> Result<CMat> {
    let n = s.n_samples();
    if l < 1 || l >= n {
        return Err(Error::Invalid(
            "prediction order must satisfy 1 <= L <= N_L - 1",
        ));
    }
    let rows = n - l;
    Ok(CMat::from_fn(rows, l + 1, |r, c| s.values[l + r - c]))
}

/// Model order via the description-length criterion on the singular
/// values of the augmented matrix. The split minimizing the penalized
/// geometric-to-arithmetic mean statistic is the retained-component
/// count; ties resolve to the smallest order.
pub fn detect_order_mdl(s: &GainSeries, l: usize) -> Result<usize> {
    if linalg::norm(&s.values) == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let aug = augmented_matrix(s, l)?;
    let dec = linalg::svd(&aug)?;
    // Clamp at the rank tolerance so machine-noise singular values form a
    // flat (zero information) tail instead of random log-ratios.
    let tol = dec
        .rank_tolerance(aug.rows(), aug.cols())
        .max(f64::MIN_POSITIVE);
    let p = l.min(dec.s.len());
    let sv: Vec<f64> = dec.s[..p].iter().map(|&x| x.max(tol)).collect();

    let n_l = s.n_samples() as f64;
    let mut best_x = 0usize;
    let mut best = f64::INFINITY;
    for x in 0..p {
        let tail = &sv[x..p];
        let k = tail.len() as f64;
        let log_gm = tail.iter().map(|&v| v.ln()).sum::<f64>() / k;
        let am = tail.iter().sum::<f64>() / k;
        let data = -n_l * k * (log_gm - am.ln());
        let penalty = 0.5 * (x as f64) * (2.0 * p as f64 - x as f64) * n_l.ln();
        let obj = data + penalty;
        if obj < best - 1e-12 {
            best = obj;
            best_x = x;
        }
    }
    Ok(best_x)
}

/// Rank-`m` truncated-SVD denoising of the augmented matrix. The two
/// returned matrices are the cleaned prediction pair, rebuilt from
/// row-shifted right singular vectors; feeding them to
/// [`estimate_poles`] realizes the noisy-sample pencil.
pub fn denoise_truncated_svd(s: &GainSeries, l: usize, m: usize) -> Result<(CMat, CMat)> {
    if m < 1 {
        return Err(Error::Invalid("model order must be >= 1"));
    }
    let aug = augmented_matrix(s, l)?;
    let dec = linalg::svd(&aug)?;
    let tol = dec.rank_tolerance(aug.rows(), aug.cols());
    let rank = dec.s.iter().filter(|&&x| x > tol).count();
    if m > rank {
        return Err(Error::RankDeficient { required: m, rank });
    }
    let rows = aug.rows();
    // Column c of the augmented matrix holds sample t_{L + r - c}; the
    // trailing L columns form P0, the leading L columns form P1.
    let mut p0 = CMat::zeros(rows, l);
    let mut p1 = CMat::zeros(rows, l);
    for k in 0..m {
        let u = dec.u.col(k);
        let sv = dec.s[k];
        let v = dec.v.col(k); // length l + 1
        for c in 0..l {
            let f0 = v[c + 1].conj() * sv;
            let f1 = v[c].conj() * sv;
            let col0 = p0.col_mut(c);
            for r in 0..rows {
                col0[r] += u[r] * f0;
            }
            let col1 = p1.col_mut(c);
            for r in 0..rows {
                col1[r] += u[r] * f1;
            }
        }
    }
    Ok((p0, p1))
}

/// Least-squares fit of per-pole amplitudes at the series' absolute slot
/// times; returns the amplitudes and the relative training residual.
pub fn fit_amplitudes(s: &GainSeries, poles: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    if poles.is_empty() {
        return Err(Error::Invalid("need at least one pole"));
    }
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            if (poles[i] - poles[j]).norm() <= 1e-12 * (1.0 + poles[i].norm()) {
                return Err(Error::DuplicatePoles);
            }
        }
    }
    let a = CMat::from_fn(s.n_samples(), poles.len(), |r, c| {
        poles[c].powi(s.slot_times[r] as i32)
    });
    let x = linalg::lstsq(&a, &s.values)?;
    let fit = a.mat_vec(&x);
    let denom = linalg::norm(&s.values);
    let residual = if denom > 0.0 {
        let err: f64 = fit
            .iter()
            .zip(&s.values)
            .map(|(f, v)| (f - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        err / denom
    } else {
        0.0
    };
    Ok((x, residual))
}

/// Handling of noise in the sample window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PencilMode {
    /// Samples are exact; the model order equals the prediction order.
    NoiseFree,
    /// Samples are noisy; detect the order and denoise before the pencil.
    Noisy(OrderSelection),
}

/// How the model order is chosen in noisy mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderSelection {
    /// One order for every support index: the most frequent per-index
    /// description-length vote (ties to the smaller order).
    SharedMdl,
    /// Independent order per support index.
    PerIndexMdl,
    /// Fixed order, must be below the prediction order.
    Fixed(usize),
}

/// Full uplink estimation pass: project the sample window, select the
/// support, and fit one pole model per support index.
///
/// Snapshots must be on consecutive slots so poles are per-slot factors.
pub fn run_doppler_estimation(
    snapshots: &[ChannelSnapshot],
    xform: &AngleDelayTransform,
    selection: SupportSelection,
    l_order: usize,
    mode: PencilMode,
) -> Result<UlParamEstimate> {
    if snapshots.len() < 2 {
        return Err(Error::Invalid("need at least two channel samples"));
    }
    let band = snapshots[0].band;
    for w in snapshots.windows(2) {
        if w[1].t - w[0].t != 1 {
            return Err(Error::Invalid("snapshots must be on consecutive slots"));
        }
        if w[1].band != band {
            return Err(Error::Invalid("snapshots must share a band"));
        }
    }
    let n_l = snapshots.len();
    match mode {
        PencilMode::NoiseFree => {
            // L = M in the noise-free regime; feasibility needs 2L <= N_L.
            if 2 * l_order > n_l {
                return Err(Error::Invalid("noise-free mode needs 2L <= N_L"));
            }
        }
        PencilMode::Noisy(OrderSelection::Fixed(m)) => {
            if m >= l_order {
                return Err(Error::Invalid("noisy mode needs M < L"));
            }
        }
        PencilMode::Noisy(_) => {}
    }

    let images: Vec<AngleDelayImage> = snapshots.iter().map(|s| xform.project(s)).collect();
    let support = select_support(&images, selection)?;
    let slots: Vec<i64> = snapshots.iter().map(|s| s.t).collect();

    let series: Vec<GainSeries> = support
        .indices
        .iter()
        .map(|&i| {
            GainSeries::new(
                i,
                images.iter().map(|img| img.g_hat[i]).collect(),
                slots.clone(),
            )
        })
        .collect::<Result<_>>()?;

    let shared_m = match mode {
        PencilMode::Noisy(OrderSelection::SharedMdl) => {
            let mut votes: Vec<usize> = Vec::new();
            for s in &series {
                let m = detect_order_mdl(s, l_order)?;
                if m >= votes.len() {
                    votes.resize(m + 1, 0);
                }
                votes[m] += 1;
            }
            let mut best = 0usize;
            for (m, &count) in votes.iter().enumerate() {
                if count > votes[best] {
                    best = m;
                }
            }
            Some(best.max(1))
        }
        _ => None,
    };

    let mut models = Vec::with_capacity(series.len());
    for s in &series {
        let (p0, p1, m) = match mode {
            PencilMode::NoiseFree => {
                // M = L, clamped to the numerical rank so that weak
                // support entries take the order their series can carry.
                let (p0, p1) = build_prediction_matrices(s, l_order)?;
                let dec = linalg::svd(&p0)?;
                let m = l_order.min(dec.rank(p0.rows(), p0.cols()));
                if m == 0 {
                    // a zero-power index carries no Doppler information
                    models.push(PoleModel {
                        index: s.index,
                        poles: alloc::vec![Complex64::ONE],
                        amplitudes: alloc::vec![Complex64::ZERO],
                        order: 1,
                        residual: 0.0,
                    });
                    continue;
                }
                (p0, p1, m)
            }
            PencilMode::Noisy(order) => {
                let m = match order {
                    OrderSelection::SharedMdl => shared_m.unwrap(),
                    OrderSelection::PerIndexMdl => detect_order_mdl(s, l_order)?.max(1),
                    OrderSelection::Fixed(m) => m,
                };
                let (p0, p1) = denoise_truncated_svd(s, l_order, m)?;
                (p0, p1, m)
            }
        };
        let poles = estimate_poles(&p0, &p1, m)?;
        let (amplitudes, residual) = fit_amplitudes(s, &poles)?;
        models.push(PoleModel {
            index: s.index,
            poles,
            amplitudes,
            order: m,
            residual,
        });
    }
    Ok(UlParamEstimate {
        support,
        models,
        l_order,
    })
}
