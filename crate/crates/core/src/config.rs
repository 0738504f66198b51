//! System configuration and the bijection between flat angle-delay grid
//! indices and (delay, horizontal, vertical) index triples, plus the
//! inverse mapping from grid indices to physical steering angles.

use crate::{Error, Result};

/// Which carrier a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Ul,
    Dl,
}

/// Array geometry, carrier plan, OFDM numerology and timing for one
/// scenario. Construct with [`SystemConfig::validated`] before use.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Vertical antenna elements per polarization.
    pub n_v: usize,
    /// Horizontal antenna elements per polarization.
    pub n_h: usize,
    /// Polarizations per element, 1 or 2.
    pub p_t: usize,
    /// Vertical element spacing in meters.
    pub l_v: f64,
    /// Horizontal element spacing in meters.
    pub l_h: f64,
    /// Uplink center frequency in Hz.
    pub f_u: f64,
    /// Downlink center frequency in Hz.
    pub f_d: f64,
    /// Subcarrier spacing in Hz.
    pub f_delta: f64,
    /// Subcarrier count.
    pub n_f: usize,
    /// Sounding period in seconds (one slot).
    pub t_srs: f64,
    /// CSI delay in slots.
    pub n_d: u64,
    /// Propagation speed in m/s.
    pub c: f64,
}

impl SystemConfig {
    /// Checks every invariant and returns the record unchanged, or the
    /// first violation by name.
    pub fn validated(self) -> Result<Self> {
        if self.n_v < 1 {
            return Err(Error::Config("vertical element count must be >= 1"));
        }
        if self.n_h < 1 {
            return Err(Error::Config("horizontal element count must be >= 1"));
        }
        if self.n_f < 1 {
            return Err(Error::Config("subcarrier count must be >= 1"));
        }
        if self.p_t != 1 && self.p_t != 2 {
            return Err(Error::Config("polarizations must be 1 or 2"));
        }
        for (v, name) in [
            (self.l_v, "vertical spacing must be positive"),
            (self.l_h, "horizontal spacing must be positive"),
            (self.f_u, "uplink carrier must be positive"),
            (self.f_d, "downlink carrier must be positive"),
            (self.f_delta, "subcarrier spacing must be positive"),
            (self.t_srs, "sounding period must be positive"),
            (self.c, "propagation speed must be positive"),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(name));
            }
        }
        Ok(self)
    }

    /// Total antenna ports `N_v * N_h * P_t`; derived, never stored.
    #[inline]
    pub fn n_t(&self) -> usize {
        self.n_v * self.n_h * self.p_t
    }

    /// Spatial ports of one polarization.
    #[inline]
    pub fn spatial_per_pol(&self) -> usize {
        self.n_v * self.n_h
    }

    /// Length of the space-frequency vector, `N_t * N_f`.
    #[inline]
    pub fn grid_len(&self) -> usize {
        self.n_t() * self.n_f
    }

    /// CSI delay in seconds, `N_d * T_srs`; derived.
    #[inline]
    pub fn t_d(&self) -> f64 {
        self.n_d as f64 * self.t_srs
    }

    #[inline]
    pub fn carrier(&self, band: Band) -> f64 {
        match band {
            Band::Ul => self.f_u,
            Band::Dl => self.f_d,
        }
    }

    /// Downlink-to-uplink carrier ratio `f_d / f_u`.
    #[inline]
    pub fn carrier_ratio(&self) -> f64 {
        self.f_d / self.f_u
    }
}

/// Decomposition of a flat grid index into delay, angle, horizontal,
/// vertical (and polarization) components. `flat` and the angle indices
/// are 1-based; `delay_idx` and `pol` are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridIndex {
    /// Flat index in `[1, N_t*N_f]`.
    pub flat: usize,
    /// Delay bin, `0..N_f`.
    pub delay_idx: usize,
    /// Angle index in `[1, N_t]`.
    pub i_a: usize,
    /// Horizontal index in `[1, N_h]`.
    pub i_h: usize,
    /// Vertical index in `[1, N_v]`.
    pub i_v: usize,
    /// Polarization block, `0..P_t`.
    pub pol: usize,
}

/// Decomposes a 1-based flat index. The flat index enumerates the
/// Kronecker order of the transform: delay-major, then polarization,
/// then horizontal, then vertical.
pub fn flat_to_grid(i: usize, cfg: &SystemConfig) -> Result<GridIndex> {
    let len = cfg.grid_len();
    if i < 1 || i > len {
        return Err(Error::IndexOutOfRange { index: i, len });
    }
    let n_t = cfg.n_t();
    // i_a = mod(i, N_t) with the mod-zero branch mapping to N_t.
    let i_a = (i - 1) % n_t + 1;
    let delay_idx = (i - 1) / n_t; // == ceil(i / N_t) - 1
    let spatial = cfg.spatial_per_pol();
    let pol = (i_a - 1) / spatial;
    let within = (i_a - 1) % spatial; // 0-based spatial index in its block
    let i_v = within % cfg.n_v + 1;
    let i_h = within / cfg.n_v + 1;
    Ok(GridIndex {
        flat: i,
        delay_idx,
        i_a,
        i_h,
        i_v,
        pol,
    })
}

impl GridIndex {
    /// Recomposes the flat index from the component indices.
    pub fn recompose(
        delay_idx: usize,
        pol: usize,
        i_h: usize,
        i_v: usize,
        cfg: &SystemConfig,
    ) -> Self {
        let spatial = cfg.spatial_per_pol();
        let within = (i_h - 1) * cfg.n_v + (i_v - 1);
        let i_a = pol * spatial + within + 1;
        let flat = delay_idx * cfg.n_t() + i_a;
        GridIndex {
            flat,
            delay_idx,
            i_a,
            i_h,
            i_v,
            pol,
        }
    }

    /// 0-based position of this index in a stacked space-frequency vector.
    #[inline]
    pub fn vector_pos(&self) -> usize {
        self.flat - 1
    }
}

/// Normalized DFT frequency of a 1-based grid index, wrapped into
/// `[-1/2, 1/2)` so that negative-cosine directions are reachable.
pub(crate) fn wrapped_fraction(idx: usize, n: usize) -> f64 {
    let f = (idx - 1) as f64 / n as f64;
    if f >= 0.5 {
        f - 1.0
    } else {
        f
    }
}

const COS_SLACK: f64 = 1e-12;

/// Grid angles `(theta, phi)` in radians for which the uplink steering
/// vector coincides with the DFT column addressed by `g`. Errors when the
/// required cosine arguments leave the visible region.
pub fn grid_to_angles(g: &GridIndex, cfg: &SystemConfig) -> Result<(f64, f64)> {
    if g.i_v < 1 || g.i_v > cfg.n_v || g.i_h < 1 || g.i_h > cfg.n_h {
        return Err(Error::IndexOutOfRange {
            index: g.i_a,
            len: cfg.n_t(),
        });
    }
    let nu_v = wrapped_fraction(g.i_v, cfg.n_v);
    let cos_theta = nu_v * cfg.c / (cfg.l_v * cfg.f_u);
    if cos_theta.abs() > 1.0 + COS_SLACK {
        return Err(Error::OffGridAngle {
            cos_value: cos_theta,
        });
    }
    let cos_theta = cos_theta.clamp(-1.0, 1.0);

    let nu_h = wrapped_fraction(g.i_h, cfg.n_h);
    // The horizontal steering phase carries cos(theta) * cos(phi).
    let prod = nu_h * cfg.c / (cfg.l_h * cfg.f_u);
    let cos_phi = if prod == 0.0 {
        0.0
    } else if cos_theta == 0.0 {
        return Err(Error::OffGridAngle {
            cos_value: f64::INFINITY,
        });
    } else {
        prod / cos_theta
    };
    if cos_phi.abs() > 1.0 + COS_SLACK {
        return Err(Error::OffGridAngle { cos_value: cos_phi });
    }
    let cos_phi = cos_phi.clamp(-1.0, 1.0);

    Ok((cos_theta.acos(), cos_phi.acos()))
}
