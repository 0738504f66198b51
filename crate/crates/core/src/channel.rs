//! Ground-truth channel synthesis: clustered multipath parameter draws
//! and time-varying wideband space-frequency channels for both bands.
//!
//! Uplink and downlink share angles, delays and (up to carrier scaling)
//! Doppler shifts; complex gains and polarization phases are free per
//! band. Doppler is stored as an angular frequency in rad/s so that
//! `exp(j w t)` with `t` in seconds is the physical phase progression.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand_core::RngCore;

use crate::config::{Band, SystemConfig};
use crate::rng::{complex_gaussian, standard_normal_pair, uniform_range, unit_phase};
use crate::{Error, Result};

/// One propagation path.
#[derive(Debug, Clone)]
pub struct PathParams {
    /// Uplink complex gain.
    pub beta_u: Complex64,
    /// Downlink complex gain.
    pub beta_d: Complex64,
    /// Zenith angle in radians, `[0, pi]`.
    pub theta: f64,
    /// Azimuth angle in radians, `(-pi, pi]`.
    pub phi: f64,
    /// Path delay in seconds.
    pub tau: f64,
    /// Cosine of the angle between this path and the velocity vector.
    pub cos_speed_angle: f64,
    /// Per-polarization phase pair; used only when `P_t = 2`.
    pub pol_phase: [Complex64; 2],
}

impl PathParams {
    /// Uplink Doppler angular frequency in rad/s for UE speed `v` (m/s).
    pub fn doppler(&self, v: f64, band: Band, cfg: &SystemConfig) -> f64 {
        2.0 * PI * v * self.cos_speed_angle * cfg.carrier(band) / cfg.c
    }
}

/// A multipath parameter set shared between the bands.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub paths: Vec<PathParams>,
    /// UE speed in m/s.
    pub speed: f64,
}

/// Space-frequency channel vector at one slot.
#[derive(Debug, Clone)]
pub struct ChannelSnapshot {
    /// Slot index; one slot lasts `T_srs` seconds.
    pub t: i64,
    pub band: Band,
    /// Length `N_t * N_f`, stacked subcarrier-major.
    pub h: Vec<Complex64>,
}

/// Uplink steering vector of one polarization, the Kronecker product of
/// the horizontal and vertical factors. First element is exactly one and
/// every element has unit modulus.
pub fn steering_vector(theta: f64, phi: f64, freq: f64, cfg: &SystemConfig) -> Vec<Complex64> {
    let kv = 2.0 * PI * cfg.l_v * freq / cfg.c * theta.cos();
    let kh = 2.0 * PI * cfg.l_h * freq / cfg.c * theta.cos() * phi.cos();
    let mut out = Vec::with_capacity(cfg.spatial_per_pol());
    for h in 0..cfg.n_h {
        let ph = Complex64::from_polar(1.0, kh * h as f64);
        for v in 0..cfg.n_v {
            out.push(ph * Complex64::from_polar(1.0, kv * v as f64));
        }
    }
    out
}

/// Frequency-domain delay signature across the `N_f` subcarriers,
/// including the carrier-dependent global phase factor.
pub fn delay_vector(tau: f64, carrier: f64, cfg: &SystemConfig) -> Vec<Complex64> {
    let global = Complex64::from_polar(1.0, -2.0 * PI * carrier * cfg.f_delta * tau);
    let step = -2.0 * PI * tau * cfg.f_delta;
    (0..cfg.n_f)
        .map(|n| global * Complex64::from_polar(1.0, step * n as f64))
        .collect()
}

/// Synthetic clustered scenario: rays scattered around random cluster
/// centers, exponential delay profile, Rayleigh per-ray gains normalized
/// so that `E||h||^2 = N_t * N_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub cluster_count: usize,
    pub rays_per_cluster: usize,
    /// RMS angular spread of ray offsets, in degrees.
    pub angle_spread_deg: f64,
    /// RMS delay spread (exponential cluster-delay profile), in seconds.
    pub delay_spread_s: f64,
    /// UE speed in km/h.
    pub speed_kmh: f64,
    /// Snap ray angles and delays to the nearest on-region grid point.
    pub snap_to_grid: bool,
}

impl ClusterSpec {
    fn validate(&self) -> Result<()> {
        if self.cluster_count < 1 {
            return Err(Error::Invalid("cluster count must be >= 1"));
        }
        if self.rays_per_cluster < 1 {
            return Err(Error::Invalid("rays per cluster must be >= 1"));
        }
        if self.angle_spread_deg.is_nan() || self.angle_spread_deg < 0.0 {
            return Err(Error::Invalid("angle spread must be >= 0"));
        }
        if self.delay_spread_s.is_nan() || self.delay_spread_s < 0.0 {
            return Err(Error::Invalid("delay spread must be >= 0"));
        }
        if self.speed_kmh.is_nan() || self.speed_kmh < 0.0 {
            return Err(Error::Invalid("speed must be >= 0"));
        }
        Ok(())
    }
}

/// Draws a clustered [`PathSet`]. Total path count is
/// `cluster_count * rays_per_cluster`; gains are scaled so the expected
/// channel energy equals `N_t * N_f` in either band.
///
/// One velocity direction is drawn per set and each ray's
/// `cos_speed_angle` is the dot product of its arrival direction with
/// it: marginally uniform in `[-1, 1]` per path, with the physical
/// intra-cluster correlation that makes per-beam Doppler low-order.
pub fn synth_paths<R: RngCore + ?Sized>(
    spec: &ClusterSpec,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<PathSet> {
    spec.validate()?;
    let rays = spec.rays_per_cluster;
    let clusters = spec.cluster_count;
    let sigma_a = spec.angle_spread_deg.to_radians();
    let ray_var = 1.0 / (clusters * rays) as f64;

    // UE velocity direction, uniform on the sphere.
    let vz = uniform_range(rng, -1.0, 1.0);
    let vphi = uniform_range(rng, -PI, PI);
    let vs = (1.0 - vz * vz).max(0.0).sqrt();
    let v_dir = [vs * vphi.cos(), vs * vphi.sin(), vz];

    let mut paths = Vec::with_capacity(clusters * rays);
    for _ in 0..clusters {
        let theta_c = uniform_range(rng, PI / 4.0, 3.0 * PI / 4.0);
        let phi_c = uniform_range(rng, -PI, PI);
        let tau_c = if spec.delay_spread_s > 0.0 {
            let u = crate::rng::uniform(rng).max(1e-300);
            -spec.delay_spread_s * u.ln()
        } else {
            0.0
        };
        for _ in 0..rays {
            let (g1, g2) = standard_normal_pair(rng);
            let mut theta = (theta_c + g1 * sigma_a).clamp(0.0, PI);
            let mut phi = wrap_angle(phi_c + g2 * sigma_a);
            let mut tau = tau_c;
            if spec.snap_to_grid {
                (theta, phi, tau) = snap_ray(theta, phi, tau, cfg);
            }
            let dir = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            let cos_speed = dir[0] * v_dir[0] + dir[1] * v_dir[1] + dir[2] * v_dir[2];
            let beta_u = complex_gaussian(rng, ray_var);
            let beta_d = beta_u * unit_phase(rng);
            paths.push(PathParams {
                beta_u,
                beta_d,
                theta,
                phi,
                tau,
                cos_speed_angle: cos_speed.clamp(-1.0, 1.0),
                pol_phase: [unit_phase(rng), unit_phase(rng)],
            });
        }
    }
    Ok(PathSet {
        paths,
        speed: spec.speed_kmh / 3.6,
    })
}

fn wrap_angle(phi: f64) -> f64 {
    let mut p = phi;
    while p <= -PI {
        p += 2.0 * PI;
    }
    while p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Snaps a ray onto the closest visible grid point: the vertical cosine to
/// the nearest reachable DFT frequency, the horizontal cosine product
/// likewise (feasible given the snapped zenith), the delay to the nearest
/// bin of the delay grid.
fn snap_ray(theta: f64, phi: f64, tau: f64, cfg: &SystemConfig) -> (f64, f64, f64) {
    let scale_v = cfg.c / (cfg.l_v * cfg.f_u);
    let mut best_v = 0.0f64;
    let mut best_d = f64::INFINITY;
    for iv in 1..=cfg.n_v {
        let cosv = crate::config::wrapped_fraction(iv, cfg.n_v) * scale_v;
        if cosv.abs() > 1.0 {
            continue;
        }
        let d = (cosv - theta.cos()).abs();
        if d < best_d {
            best_d = d;
            best_v = cosv;
        }
    }
    let cos_theta = best_v;

    let scale_h = cfg.c / (cfg.l_h * cfg.f_u);
    let target = theta.cos() * phi.cos();
    let mut best_p = 0.0f64;
    let mut best_d = f64::INFINITY;
    for ih in 1..=cfg.n_h {
        let prod = crate::config::wrapped_fraction(ih, cfg.n_h) * scale_h;
        if prod.abs() > cos_theta.abs() {
            continue; // would need |cos(phi)| > 1 at the snapped zenith
        }
        let d = (prod - target).abs();
        if d < best_d {
            best_d = d;
            best_p = prod;
        }
    }
    let cos_phi = if cos_theta == 0.0 {
        0.0
    } else {
        (best_p / cos_theta).clamp(-1.0, 1.0)
    };

    let bin = 1.0 / (cfg.n_f as f64 * cfg.f_delta);
    let k = (tau / bin).round().clamp(0.0, (cfg.n_f - 1) as f64);
    (cos_theta.acos(), cos_phi.acos(), k * bin)
}

/// Evaluates the space-frequency channel of `paths` at slot `t` in the
/// requested band.
pub fn channel_at(paths: &PathSet, t: i64, band: Band, cfg: &SystemConfig) -> ChannelSnapshot {
    let freq = cfg.carrier(band);
    let n_t = cfg.n_t();
    let spatial = cfg.spatial_per_pol();
    let t_sec = t as f64 * cfg.t_srs;
    let mut h = vec![Complex64::ZERO; cfg.grid_len()];

    for p in &paths.paths {
        let steer = steering_vector(p.theta, p.phi, freq, cfg);
        let delay = delay_vector(p.tau, freq, cfg);
        let beta = match band {
            Band::Ul => p.beta_u,
            Band::Dl => p.beta_d,
        };
        let w = p.doppler(paths.speed, band, cfg);
        let mut phase = beta
            * Complex64::from_polar(1.0, -2.0 * PI * freq * p.tau)
            * Complex64::from_polar(1.0, w * t_sec);
        if band == Band::Dl {
            phase *= Complex64::from_polar(1.0, -2.0 * PI * (cfg.f_d - cfg.f_u) * p.tau);
        }
        for (n, dn) in delay.iter().enumerate() {
            let base = n * n_t;
            let f = phase * dn;
            if cfg.p_t == 1 {
                for (a, s) in steer.iter().enumerate() {
                    h[base + a] += f * s;
                }
            } else {
                for (pol, pp) in p.pol_phase.iter().enumerate() {
                    let fp = f * pp;
                    let off = base + pol * spatial;
                    for (a, s) in steer.iter().enumerate() {
                        h[off + a] += fp * s;
                    }
                }
            }
        }
    }
    ChannelSnapshot { t, band, h }
}

/// Adds i.i.d. circular complex Gaussian noise at the given sample SNR
/// (dB) relative to the mean per-element channel power.
/// `f64::INFINITY` is the noise-free sentinel.
pub fn add_sample_noise<R: RngCore + ?Sized>(
    snap: &ChannelSnapshot,
    sample_snr_db: f64,
    rng: &mut R,
) -> ChannelSnapshot {
    if sample_snr_db == f64::INFINITY {
        return snap.clone();
    }
    let mean_pow = crate::linalg::norm_sqr(&snap.h) / snap.h.len() as f64;
    let var = mean_pow / 10f64.powf(sample_snr_db / 10.0);
    let mut out = snap.clone();
    for z in out.h.iter_mut() {
        *z += complex_gaussian(rng, var);
    }
    out
}
