//! The unitary angle-delay transform: a Kronecker product of normalized
//! DFT factors applied along the vertical, horizontal and frequency axes
//! of the stacked space-frequency vector, plus sparse support selection
//! on the transformed image.
//!
//! The full matrix is never materialized; each factor is applied as a
//! fast per-axis transform (radix-2 when the factor length is a power of
//! two, a precomputed dense factor otherwise). With two polarizations the
//! spatial factor acts block-diagonally per polarization.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::channel::ChannelSnapshot;
use crate::config::SystemConfig;
use crate::{Error, Result};

/// Channel image in the angle-delay domain at one slot.
#[derive(Debug, Clone)]
pub struct AngleDelayImage {
    /// Length `N_t * N_f`; the transform is unitary so its norm equals
    /// the norm of the originating snapshot.
    pub g_hat: Vec<Complex64>,
    pub t: i64,
    pub band: crate::config::Band,
}

/// Selected angle-delay support.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    /// 0-based positions into the angle-delay vector, ordered by
    /// descending aggregate power (ties by ascending index).
    pub indices: Vec<usize>,
    /// Power threshold used for selection; `None` in fixed-size mode.
    pub eta: Option<f64>,
    /// Fraction of total power captured by `indices`.
    pub captured_power_fraction: f64,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// How to pick the support from aggregate index powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportSelection {
    /// Smallest index set capturing this fraction of total power.
    Eta(f64),
    /// Exactly this many strongest indices.
    FixedSize(usize),
}

/// One normalized DFT factor.
#[derive(Debug, Clone)]
struct UnitaryDft {
    len: usize,
    kind: DftKind,
}

#[derive(Debug, Clone)]
enum DftKind {
    /// Iterative radix-2; twiddles hold `exp(-j 2 pi k / len)`.
    Radix2 { twiddles: Vec<Complex64> },
    /// Dense forward matrix (normalized), column-major `len x len`.
    Dense { fwd: Vec<Complex64> },
}

impl UnitaryDft {
    fn new(len: usize) -> Self {
        assert!(len >= 1);
        let kind = if len.is_power_of_two() {
            let twiddles = (0..len / 2)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
                .collect();
            DftKind::Radix2 { twiddles }
        } else {
            let scale = 1.0 / (len as f64).sqrt();
            let mut fwd = vec![Complex64::ZERO; len * len];
            for c in 0..len {
                for r in 0..len {
                    fwd[c * len + r] =
                        Complex64::from_polar(scale, -2.0 * PI * (r * c % len) as f64 / len as f64);
                }
            }
            DftKind::Dense { fwd }
        };
        UnitaryDft { len, kind }
    }

    /// In-place unitary transform of one fiber. `forward` applies the
    /// negative-exponent kernel; the inverse is its conjugate.
    fn apply(&self, buf: &mut [Complex64], scratch: &mut [Complex64], forward: bool) {
        debug_assert_eq!(buf.len(), self.len);
        match &self.kind {
            DftKind::Radix2 { twiddles } => {
                let n = self.len;
                // Bit-reversal permutation.
                let mut j = 0usize;
                for i in 0..n {
                    if i < j {
                        buf.swap(i, j);
                    }
                    let mut m = n >> 1;
                    while m >= 1 && j & m != 0 {
                        j ^= m;
                        m >>= 1;
                    }
                    j |= m;
                }
                let mut width = 2;
                while width <= n {
                    let half = width / 2;
                    let stride = n / width;
                    for start in (0..n).step_by(width) {
                        for k in 0..half {
                            let mut w = twiddles[k * stride];
                            if !forward {
                                w = w.conj();
                            }
                            let a = buf[start + k];
                            let b = buf[start + k + half] * w;
                            buf[start + k] = a + b;
                            buf[start + k + half] = a - b;
                        }
                    }
                    width <<= 1;
                }
                let scale = 1.0 / (n as f64).sqrt();
                for z in buf.iter_mut() {
                    *z *= scale;
                }
            }
            DftKind::Dense { fwd } => {
                let n = self.len;
                scratch[..n].fill(Complex64::ZERO);
                for c in 0..n {
                    let x = buf[c];
                    if x == Complex64::ZERO {
                        continue;
                    }
                    let col = &fwd[c * n..(c + 1) * n];
                    if forward {
                        for r in 0..n {
                            scratch[r] += col[r] * x;
                        }
                    } else {
                        for r in 0..n {
                            scratch[r] += col[r].conj() * x;
                        }
                    }
                }
                buf.copy_from_slice(&scratch[..n]);
            }
        }
    }
}

/// Precomputed transform plan; immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct AngleDelayTransform {
    n_v: usize,
    n_h: usize,
    n_f: usize,
    p_t: usize,
    dft_v: UnitaryDft,
    dft_h: UnitaryDft,
    dft_f: UnitaryDft,
}

impl AngleDelayTransform {
    pub fn new(cfg: &SystemConfig) -> Self {
        AngleDelayTransform {
            n_v: cfg.n_v,
            n_h: cfg.n_h,
            n_f: cfg.n_f,
            p_t: cfg.p_t,
            dft_v: UnitaryDft::new(cfg.n_v),
            dft_h: UnitaryDft::new(cfg.n_h),
            dft_f: UnitaryDft::new(cfg.n_f),
        }
    }

    /// Length of the vectors this plan transforms, `N_t * N_f`.
    pub fn dim(&self) -> usize {
        self.n_v * self.n_h * self.p_t * self.n_f
    }

    /// Projects a snapshot to the angle-delay domain (`Q^H h`).
    pub fn project(&self, snap: &ChannelSnapshot) -> AngleDelayImage {
        let mut data = snap.h.clone();
        self.apply_axes(&mut data, true);
        AngleDelayImage {
            g_hat: data,
            t: snap.t,
            band: snap.band,
        }
    }

    /// Returns to the space-frequency domain (`Q g`); exact inverse of
    /// [`AngleDelayTransform::project`].
    pub fn unproject(&self, img: &AngleDelayImage) -> ChannelSnapshot {
        let mut data = img.g_hat.clone();
        self.apply_axes(&mut data, false);
        ChannelSnapshot {
            t: img.t,
            band: img.band,
            h: data,
        }
    }

    /// Applies the three per-axis factors. Projection uses the forward
    /// (conjugated) spatial kernels and the inverse frequency kernel,
    /// matching a Kronecker structure whose frequency factor enters
    /// conjugated; unprojection applies the adjoints.
    fn apply_axes(&self, data: &mut [Complex64], project: bool) {
        assert_eq!(data.len(), self.dim());
        let n_t = self.n_v * self.n_h * self.p_t;
        let spatial = self.n_v * self.n_h;
        let max_len = self.n_v.max(self.n_h).max(self.n_f);
        let mut fiber = vec![Complex64::ZERO; max_len];
        let mut scratch = vec![Complex64::ZERO; max_len];

        // Vertical: contiguous runs of length n_v.
        if self.n_v > 1 {
            for n in 0..self.n_f {
                for p in 0..self.p_t {
                    for h in 0..self.n_h {
                        let base = n * n_t + p * spatial + h * self.n_v;
                        fiber[..self.n_v].copy_from_slice(&data[base..base + self.n_v]);
                        self.dft_v
                            .apply(&mut fiber[..self.n_v], &mut scratch, project);
                        data[base..base + self.n_v].copy_from_slice(&fiber[..self.n_v]);
                    }
                }
            }
        }
        // Horizontal: stride n_v within each polarization block.
        if self.n_h > 1 {
            for n in 0..self.n_f {
                for p in 0..self.p_t {
                    for v in 0..self.n_v {
                        let base = n * n_t + p * spatial + v;
                        for (k, slot) in fiber[..self.n_h].iter_mut().enumerate() {
                            *slot = data[base + k * self.n_v];
                        }
                        self.dft_h
                            .apply(&mut fiber[..self.n_h], &mut scratch, project);
                        for (k, slot) in fiber[..self.n_h].iter().enumerate() {
                            data[base + k * self.n_v] = *slot;
                        }
                    }
                }
            }
        }
        // Frequency: stride n_t, conjugated relative to the spatial factors.
        if self.n_f > 1 {
            for a in 0..n_t {
                for (k, slot) in fiber[..self.n_f].iter_mut().enumerate() {
                    *slot = data[a + k * n_t];
                }
                self.dft_f
                    .apply(&mut fiber[..self.n_f], &mut scratch, !project);
                for (k, slot) in fiber[..self.n_f].iter().enumerate() {
                    data[a + k * n_t] = *slot;
                }
            }
        }
    }
}

/// Spatial column of the (block-diagonal) angle factor for a 0-based
/// spatial index; length `N_t`, unit norm.
pub fn spatial_column(spatial_idx: usize, cfg: &SystemConfig) -> Vec<Complex64> {
    let spatial = cfg.spatial_per_pol();
    let pol = spatial_idx / spatial;
    let within = spatial_idx % spatial;
    let col_h = within / cfg.n_v;
    let col_v = within % cfg.n_v;
    let scale = 1.0 / (spatial as f64).sqrt();
    let mut out = vec![Complex64::ZERO; cfg.n_t()];
    for h in 0..cfg.n_h {
        let ph = 2.0 * PI * (h * col_h % cfg.n_h) as f64 / cfg.n_h as f64;
        for v in 0..cfg.n_v {
            let pv = 2.0 * PI * (v * col_v % cfg.n_v) as f64 / cfg.n_v as f64;
            out[pol * spatial + h * cfg.n_v + v] = Complex64::from_polar(scale, ph + pv);
        }
    }
    out
}

/// Closed-form column of the full transform for a 0-based flat index:
/// the Kronecker product of a conjugated frequency DFT column and a
/// spatial column. Used by the downlink basis construction and as an
/// independent oracle against the fast path.
pub fn grid_column(flat_zero_based: usize, cfg: &SystemConfig) -> Vec<Complex64> {
    let n_t = cfg.n_t();
    let delay = flat_zero_based / n_t;
    let spatial_idx = flat_zero_based % n_t;
    let sp = spatial_column(spatial_idx, cfg);
    let fscale = 1.0 / (cfg.n_f as f64).sqrt();
    let mut out = vec![Complex64::ZERO; cfg.grid_len()];
    for n in 0..cfg.n_f {
        let wf = Complex64::from_polar(
            fscale,
            -2.0 * PI * (n * delay % cfg.n_f) as f64 / cfg.n_f as f64,
        );
        for a in 0..n_t {
            out[n * n_t + a] = wf * sp[a];
        }
    }
    out
}

/// Ranks indices by power aggregated over the given images and keeps
/// either the smallest prefix reaching the `eta` fraction of total power
/// or a fixed count. Equal powers break ties by ascending index.
pub fn select_support(images: &[AngleDelayImage], sel: SupportSelection) -> Result<SupportSet> {
    if images.is_empty() {
        return Err(Error::Invalid("support selection needs at least one image"));
    }
    let len = images[0].g_hat.len();
    for img in images {
        if img.g_hat.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: img.g_hat.len(),
            });
        }
    }
    match sel {
        SupportSelection::Eta(eta) => {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Invalid("eta must lie in (0, 1]"));
            }
        }
        SupportSelection::FixedSize(n_s) => {
            if n_s < 1 || n_s > len {
                return Err(Error::Invalid("fixed support size out of range"));
            }
        }
    }

    // Per-index contributions are sorted before summation so the result
    // is bit-identical under any permutation of the input slots.
    let mut power = vec![0.0f64; len];
    let mut contrib = vec![0.0f64; images.len()];
    for (i, p) in power.iter_mut().enumerate() {
        for (c, img) in contrib.iter_mut().zip(images) {
            *c = img.g_hat[i].norm_sqr();
        }
        contrib.sort_unstable_by(f64::total_cmp);
        *p = contrib.iter().sum();
    }
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSeries);
    }

    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&i, &j| power[j].partial_cmp(&power[i]).unwrap().then(i.cmp(&j)));

    let (indices, eta_used) = match sel {
        SupportSelection::Eta(eta) => {
            let target = eta * total;
            let mut cum = 0.0;
            let mut kept = Vec::new();
            for &i in &order {
                if power[i] <= 0.0 {
                    break;
                }
                kept.push(i);
                cum += power[i];
                if cum >= target * (1.0 - 1e-12) {
                    break;
                }
            }
            (kept, Some(eta))
        }
        SupportSelection::FixedSize(n_s) => (order[..n_s].to_vec(), None),
    };
    let captured: f64 = indices.iter().map(|&i| power[i]).sum::<f64>() / total;
    Ok(SupportSet {
        indices,
        eta: eta_used,
        captured_power_fraction: captured,
    })
}

/// Rebuilds the space-frequency vector from the support entries only.
pub fn approximate(
    img: &AngleDelayImage,
    support: &SupportSet,
    xform: &AngleDelayTransform,
) -> Result<ChannelSnapshot> {
    let len = img.g_hat.len();
    let mut masked = AngleDelayImage {
        g_hat: vec![Complex64::ZERO; len],
        t: img.t,
        band: img.band,
    };
    for &i in &support.indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i + 1, len });
        }
        masked.g_hat[i] = img.g_hat[i];
    }
    Ok(xform.unproject(&masked))
}
