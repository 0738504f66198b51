//! Carrier transposition: rotate uplink angle-delay basis vectors to the
//! downlink carrier and rescale Doppler poles by the carrier ratio.
//!
//! The rotation is a diagonal phase ramp driven by the carrier offset and
//! the grid angles, applied per spatial block (per polarization block in
//! dual-polarized configurations). Grid indices outside the visible
//! region have no physical angle; they keep the untouched column, which
//! preserves orthonormality of the basis.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::config::{flat_to_grid, grid_to_angles, GridIndex, SystemConfig};
use crate::transform::grid_column;
use crate::{Error, Result};

/// A downlink basis column derived from one uplink grid index.
#[derive(Debug, Clone)]
pub struct DlBasisVector {
    /// 0-based flat source index.
    pub index: usize,
    /// Length `N_t * N_f`, unit norm.
    pub d: Vec<Complex64>,
    /// Grid zenith angle; NaN when the index is off-region.
    pub theta: f64,
    /// Grid azimuth angle; NaN when the index is off-region.
    pub phi: f64,
    /// Whether the index maps to a physical angle (rotation applied).
    pub on_region: bool,
}

/// How an uplink pole maps to a downlink per-slot phase factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerMap {
    /// Scale the signed phase by `f_d / f_u`; approaching and receding
    /// paths stay distinguishable.
    #[default]
    Signed,
    /// Scale `acos(Re(z/|z|))`, which folds the sign away; kept for
    /// comparison runs.
    Unsigned,
}

/// Diagonal of the spatial rotation for one polarization block: a
/// unit-modulus phase ramp in the carrier offset `f_d - f_u`.
pub fn rotation_phases(theta: f64, phi: f64, cfg: &SystemConfig) -> Vec<Complex64> {
    let df = cfg.f_d - cfg.f_u;
    let kv = 2.0 * PI * cfg.l_v * df / cfg.c * theta.cos();
    let kh = 2.0 * PI * cfg.l_h * df / cfg.c * theta.cos() * phi.cos();
    let mut out = Vec::with_capacity(cfg.spatial_per_pol());
    for h in 0..cfg.n_h {
        let ph = kh * h as f64;
        for v in 0..cfg.n_v {
            out.push(Complex64::from_polar(1.0, ph + kv * v as f64));
        }
    }
    out
}

/// Rotates the DFT column of `g` to the downlink carrier. Off-region
/// indices keep the unrotated column and are flagged.
pub fn ul_to_dl_vector(g: &GridIndex, cfg: &SystemConfig) -> DlBasisVector {
    let mut d = grid_column(g.flat - 1, cfg);
    match grid_to_angles(g, cfg) {
        Ok((theta, phi)) => {
            let rot = rotation_phases(theta, phi, cfg);
            let n_t = cfg.n_t();
            let spatial = cfg.spatial_per_pol();
            for n in 0..cfg.n_f {
                for p in 0..cfg.p_t {
                    let base = n * n_t + p * spatial;
                    for (k, r) in rot.iter().enumerate() {
                        d[base + k] *= r;
                    }
                }
            }
            DlBasisVector {
                index: g.flat - 1,
                d,
                theta,
                phi,
                on_region: true,
            }
        }
        Err(_) => DlBasisVector {
            index: g.flat - 1,
            d,
            theta: f64::NAN,
            phi: f64::NAN,
            on_region: false,
        },
    }
}

/// Convenience wrapper over a 0-based flat index.
pub fn ul_to_dl_vector_flat(flat_zero_based: usize, cfg: &SystemConfig) -> Result<DlBasisVector> {
    let g = flat_to_grid(flat_zero_based + 1, cfg)?;
    Ok(ul_to_dl_vector(&g, cfg))
}

/// Maps an uplink pole to the downlink per-slot phase factor using the
/// signed-phase rule.
pub fn ul_to_dl_doppler(pole: Complex64, cfg: &SystemConfig) -> Result<Complex64> {
    ul_to_dl_doppler_with(pole, cfg, DopplerMap::Signed)
}

/// Maps an uplink pole to the downlink per-slot phase factor. The pole
/// magnitude is discarded: Doppler is pure phase progression.
pub fn ul_to_dl_doppler_with(
    pole: Complex64,
    cfg: &SystemConfig,
    map: DopplerMap,
) -> Result<Complex64> {
    if pole.norm() == 0.0 {
        return Err(Error::Invalid("zero pole has no phase"));
    }
    let ratio = cfg.carrier_ratio();
    let psi = match map {
        DopplerMap::Signed => pole.arg(),
        DopplerMap::Unsigned => {
            let unit = pole / pole.norm();
            unit.re.clamp(-1.0, 1.0).acos()
        }
    };
    Ok(Complex64::from_polar(1.0, psi * ratio))
}
