//! Core algorithms for uplink-aided downlink channel prediction in FDD
//! massive MIMO.
//!
//! The crate covers the full prediction chain as a set of pure functions
//! over complex vectors:
//!
//! - [`config`]: validated system configuration and the flat index /
//!   (delay, angle) grid mapping,
//! - [`channel`]: synthesis of time-varying wideband multipath channels
//!   with partially reciprocal uplink and downlink bands,
//! - [`transform`]: the unitary angle-delay transform and sparse support
//!   selection,
//! - [`pencil`]: Matrix Pencil pole estimation with MDL order detection
//!   and truncated-SVD denoising,
//! - [`ul2dl`]: carrier transposition of angle-delay vectors and Doppler
//!   poles from the uplink band to the downlink band,
//! - [`training`]: downlink pilot precoding, coefficient estimation,
//!   feedback quantization and channel prediction,
//! - [`metrics`]: NMSE/SE metrics, prediction-error bounds and feedback
//!   overhead accounting.
//!
//! Everything is `no_std` + `alloc`; randomness enters only through
//! caller-provided [`rand_core::RngCore`] generators so results are
//! reproducible by construction.
//!
//! # Example
//!
//! Predict the downlink channel of a moving on-grid path ten slots
//! ahead from two uplink samples:
//!
//! ```
//! use chanpred_core::channel::{channel_at, PathParams, PathSet};
//! use chanpred_core::config::{flat_to_grid, grid_to_angles, Band, SystemConfig};
//! use chanpred_core::metrics::nmse_db;
//! use chanpred_core::pencil::{run_doppler_estimation, PencilMode};
//! use chanpred_core::training::*;
//! use chanpred_core::transform::{AngleDelayTransform, SupportSelection};
//! use chanpred_core::ul2dl::DopplerMap;
//! use chanpred_core::Complex64;
//!
//! let c = 299_792_458.0;
//! let cfg = SystemConfig {
//!     n_v: 4, n_h: 4, p_t: 1,
//!     l_v: c / (2.0 * 1.92e9), l_h: c / (2.0 * 1.92e9),
//!     f_u: 1.92e9, f_d: 2.11e9, f_delta: 30e3, n_f: 8,
//!     t_srs: 5e-4, n_d: 10, c,
//! }
//! .validated()?;
//!
//! // one path sitting exactly on a grid point, moving at 30 m/s
//! let g = flat_to_grid(3 * cfg.n_t() + 7, &cfg)?;
//! let (theta, phi) = grid_to_angles(&g, &cfg)?;
//! let paths = PathSet {
//!     paths: vec![PathParams {
//!         beta_u: Complex64::new(1.0, -0.4),
//!         beta_d: Complex64::new(-0.3, 0.9),
//!         theta, phi,
//!         tau: g.delay_idx as f64 / (cfg.n_f as f64 * cfg.f_delta),
//!         cos_speed_angle: 0.6,
//!         pol_phase: [Complex64::ONE; 2],
//!     }],
//!     speed: 30.0,
//! };
//!
//! // uplink: two sounding snapshots -> support + Doppler pole
//! let xform = AngleDelayTransform::new(&cfg);
//! let ul: Vec<_> = (0..2).map(|t| channel_at(&paths, t, Band::Ul, &cfg)).collect();
//! let est = run_doppler_estimation(
//!     &ul, &xform, SupportSelection::FixedSize(1), 1, PencilMode::NoiseFree,
//! )?;
//!
//! // downlink: precoded training at slot 1, prediction at slot 11
//! let state = build_training_state(&est, &cfg, 1, DopplerMap::Signed)?;
//! let f = build_precoder(&state);
//! let s = build_pilot(state.tau_len())?;
//! let y = received_noise_free(&channel_at(&paths, 1, Band::Dl, &cfg), &f, &s)?;
//! let fb = estimate_coefficients(&y, &s, &state)?;
//! let predicted = predict_channel(&state, &fb, 11)?;
//!
//! let truth = channel_at(&paths, 11, Band::Dl, &cfg);
//! assert!(nmse_db(&truth, &predicted)? <= -180.0);
//! # Ok::<(), chanpred_core::Error>(())
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod channel;
pub mod config;
pub mod linalg;
pub mod metrics;
pub mod pencil;
pub mod rng;
pub mod training;
pub mod transform;
pub mod ul2dl;

mod error;

pub use error::Error;
pub use num_complex::Complex64;

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Result<T> = core::result::Result<T, Error>;
