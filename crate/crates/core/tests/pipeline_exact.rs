//! End-to-end exactness: for on-grid paths with distinct delay bins the
//! whole chain (uplink sampling, pencil, carrier transposition, precoded
//! training, feedback, prediction) reproduces the downlink channel at a
//! future slot to working precision with only two uplink samples.

use chanpred_core::channel::{channel_at, ChannelSnapshot, PathParams, PathSet};
use chanpred_core::config::{flat_to_grid, grid_to_angles, Band, GridIndex, SystemConfig};
use chanpred_core::linalg;
use chanpred_core::metrics::linear_nmse;
use chanpred_core::pencil::{run_doppler_estimation, PencilMode};
use chanpred_core::training::{
    build_pilot, build_precoder, build_training_state, estimate_coefficients, predict_channel,
    received_noise_free,
};
use chanpred_core::transform::{AngleDelayTransform, SupportSelection};
use chanpred_core::ul2dl::DopplerMap;
use chanpred_core::Complex64;

fn cfg(n_v: usize, n_h: usize, p_t: usize, n_f: usize) -> SystemConfig {
    let f_u = 1.92e9;
    let c = 299_792_458.0;
    SystemConfig {
        n_v,
        n_h,
        p_t,
        l_v: c / (2.0 * f_u),
        l_h: c / (2.0 * f_u),
        f_u,
        f_d: 2.11e9,
        f_delta: 30e3,
        n_f,
        t_srs: 5e-4,
        n_d: 10,
        c,
    }
}

/// Builds one on-grid path from a flat grid index; errors out of the test
/// if the index has no physical angle.
fn on_grid_path(flat: usize, cos_speed: f64, beta: Complex64, cfg: &SystemConfig) -> PathParams {
    let g = flat_to_grid(flat, cfg).unwrap();
    let (theta, phi) = grid_to_angles(&g, cfg).unwrap();
    PathParams {
        beta_u: beta,
        beta_d: beta * Complex64::from_polar(1.0, 0.7),
        theta,
        phi,
        tau: g.delay_idx as f64 / (cfg.n_f as f64 * cfg.f_delta),
        cos_speed_angle: cos_speed,
        pol_phase: [Complex64::ONE, Complex64::from_polar(1.0, -1.1)],
    }
}

fn run_chain(
    cfg: &SystemConfig,
    paths: &PathSet,
    n_s: usize,
    t_target: i64,
) -> (ChannelSnapshot, ChannelSnapshot) {
    let xform = AngleDelayTransform::new(cfg);
    let ul: Vec<ChannelSnapshot> = (0..2)
        .map(|t| channel_at(paths, t, Band::Ul, cfg))
        .collect();
    let est = run_doppler_estimation(
        &ul,
        &xform,
        SupportSelection::FixedSize(n_s),
        1,
        PencilMode::NoiseFree,
    )
    .unwrap();
    let t_train = 1;
    let state = build_training_state(&est, cfg, t_train, DopplerMap::Signed).unwrap();
    let f = build_precoder(&state);
    let s = build_pilot(state.tau_len()).unwrap();
    let h_train = channel_at(paths, t_train, Band::Dl, cfg);
    let y = received_noise_free(&h_train, &f, &s).unwrap();
    let fb = estimate_coefficients(&y, &s, &state).unwrap();
    let pred = predict_channel(&state, &fb, t_target).unwrap();
    let truth = channel_at(paths, t_target, Band::Dl, cfg);
    (pred, truth)
}

#[test]
fn single_path_prediction_is_exact() {
    let cfg = cfg(4, 4, 1, 8);
    let paths = PathSet {
        paths: vec![on_grid_path(
            3 * cfg.n_t() + 7,
            0.6,
            Complex64::new(1.1, -0.4),
            &cfg,
        )],
        speed: 30.0,
    };
    let (pred, truth) = run_chain(&cfg, &paths, 1, 1 + cfg.n_d as i64);
    let nmse = linear_nmse(&truth, &pred).unwrap();
    assert!(nmse < 1e-18, "single-path NMSE {nmse:e}");
}

#[test]
fn multi_path_distinct_delays_prediction_is_exact() {
    let cfg = cfg(4, 4, 1, 16);
    let n_t = cfg.n_t();
    // Distinct delay bins keep the downlink basis exactly orthonormal.
    // Spatial indices come from the vertical end-fire family (vertical
    // grid frequency -1/2), where every azimuth index is on-region.
    let specs = [
        (1usize, 2usize, 0.9f64),
        (3, 6, -0.4),
        (5, 10, 0.2),
        (7, 14, -0.85),
        (9, 6, 0.55),
    ];
    let mut members = Vec::new();
    for (k, &(delay, spatial, cs)) in specs.iter().enumerate() {
        let flat = delay * n_t + spatial + 1;
        // skip off-region spatial indices by construction: verify now
        let g = flat_to_grid(flat, &cfg).unwrap();
        assert!(grid_to_angles(&g, &cfg).is_ok(), "spec {k} off-region");
        members.push(on_grid_path(
            flat,
            cs,
            Complex64::from_polar(1.0 + 0.2 * k as f64, 0.5 * k as f64),
            &cfg,
        ));
    }
    let paths = PathSet {
        paths: members,
        speed: 25.0,
    };
    let (pred, truth) = run_chain(&cfg, &paths, specs.len(), 1 + cfg.n_d as i64);
    let nmse = linear_nmse(&truth, &pred).unwrap();
    assert!(nmse < 1e-18, "multi-path NMSE {nmse:e}");
}

#[test]
fn dual_polarization_prediction_is_exact() {
    let cfg = cfg(2, 4, 2, 8);
    let n_t = cfg.n_t();
    // One physical path occupies one spatial index per polarization
    // block; with distinct delays the support has two entries per path.
    let flats = [2 * n_t + 4, 5 * n_t + 6];
    let mut members = Vec::new();
    for (k, &flat) in flats.iter().enumerate() {
        members.push(on_grid_path(
            flat,
            0.3 + 0.4 * k as f64,
            Complex64::new(0.9, 0.1 * k as f64),
            &cfg,
        ));
    }
    let paths = PathSet {
        paths: members,
        speed: 40.0,
    };
    let (pred, truth) = run_chain(&cfg, &paths, 2 * flats.len(), 1 + cfg.n_d as i64);
    let nmse = linear_nmse(&truth, &pred).unwrap();
    assert!(nmse < 1e-18, "dual-pol NMSE {nmse:e}");
}

#[test]
fn static_prediction_exact_at_any_horizon() {
    let cfg = cfg(2, 2, 1, 8);
    let paths = PathSet {
        paths: vec![on_grid_path(
            4 * cfg.n_t() + 2,
            0.0,
            Complex64::new(0.7, 0.7),
            &cfg,
        )],
        speed: 0.0,
    };
    for horizon in [1i64, 11, 101] {
        let (pred, truth) = run_chain(&cfg, &paths, 1, horizon);
        let nmse = linear_nmse(&truth, &pred).unwrap();
        assert!(nmse < 1e-20, "horizon {horizon}: NMSE {nmse:e}");
    }
}

/// The grid-resolution mechanism: the same physical paths predicted on a
/// coarse grid (where they fall off-grid) carry a much larger error than
/// on the fine grid that contains them exactly.
#[test]
fn coarse_grid_error_dominates_fine_grid_error() {
    let fine = cfg(4, 4, 1, 32);
    let coarse = cfg(2, 2, 1, 8);
    let n_t = fine.n_t();
    let specs = [
        (1usize, 2usize, 0.9f64),
        (5, 6, -0.4),
        (9, 10, 0.2),
        (13, 14, -0.85),
        (21, 6, 0.5),
        (27, 10, -0.15),
    ];
    let mut members = Vec::new();
    for (k, &(delay, spatial, cs)) in specs.iter().enumerate() {
        members.push(on_grid_path(
            delay * n_t + spatial + 1,
            cs,
            Complex64::from_polar(1.0, 0.3 * k as f64),
            &fine,
        ));
    }
    let paths = PathSet {
        paths: members,
        speed: 20.0,
    };
    let horizon = 1 + fine.n_d as i64;
    let (pred_f, truth_f) = run_chain(&fine, &paths, specs.len(), horizon);
    let (pred_c, truth_c) = run_chain(&coarse, &paths, specs.len(), horizon);
    let nmse_f = linear_nmse(&truth_f, &pred_f).unwrap();
    let nmse_c = linear_nmse(&truth_c, &pred_c).unwrap();
    assert!(nmse_f < 1e-12, "fine-grid NMSE {nmse_f:e}");
    assert!(
        nmse_c > 1e3 * nmse_f,
        "coarse {nmse_c:e} should dwarf fine {nmse_f:e}"
    );
}

/// Pilot length statically equals N_s * M and the received row length
/// follows it, independent of the array size.
#[test]
fn training_overhead_tracks_support_not_array() {
    for c in [cfg(2, 2, 1, 8), cfg(4, 8, 1, 32)] {
        let paths = PathSet {
            paths: vec![
                on_grid_path(1, 0.5, Complex64::ONE, &c),
                on_grid_path(c.n_t() + 2, -0.5, Complex64::new(0.0, 1.0), &c),
            ],
            speed: 10.0,
        };
        let xform = AngleDelayTransform::new(&c);
        let ul: Vec<ChannelSnapshot> = (0..2)
            .map(|t| channel_at(&paths, t, Band::Ul, &c))
            .collect();
        let est = run_doppler_estimation(
            &ul,
            &xform,
            SupportSelection::FixedSize(2),
            1,
            PencilMode::NoiseFree,
        )
        .unwrap();
        let state = build_training_state(&est, &c, 1, DopplerMap::Signed).unwrap();
        assert_eq!(state.tau_len(), 2);
        let f = build_precoder(&state);
        assert_eq!(f.cols(), 2);
        let s = build_pilot(state.tau_len()).unwrap();
        let h = channel_at(&paths, 1, Band::Dl, &c);
        let y = received_noise_free(&h, &f, &s).unwrap();
        assert_eq!(y.len(), 2);
    }
}

/// Ground-truth reciprocity carried through the estimate: the scaled
/// uplink pole matches the true downlink per-slot factor.
#[test]
fn estimated_dl_pole_matches_truth() {
    let cfg = cfg(4, 4, 1, 8);
    let flat = 2 * cfg.n_t() + 6;
    let paths = PathSet {
        paths: vec![on_grid_path(flat, -0.7, Complex64::ONE, &cfg)],
        speed: 45.0,
    };
    let xform = AngleDelayTransform::new(&cfg);
    let ul: Vec<ChannelSnapshot> = (0..2)
        .map(|t| channel_at(&paths, t, Band::Ul, &cfg))
        .collect();
    let est = run_doppler_estimation(
        &ul,
        &xform,
        SupportSelection::FixedSize(1),
        1,
        PencilMode::NoiseFree,
    )
    .unwrap();
    let state = build_training_state(&est, &cfg, 1, DopplerMap::Signed).unwrap();
    let wd = paths.paths[0].doppler(paths.speed, Band::Dl, &cfg);
    let expect = Complex64::from_polar(1.0, wd * cfg.t_srs);
    assert!((state.dopplers[0][0] - expect).norm() < 1e-9);
}

/// Sanity guard used by the exactness constructions: grid columns with
/// distinct delay bins stay orthogonal after rotation, so the basis
/// Gram matrix is the identity.
#[test]
fn exactness_basis_is_orthonormal() {
    let cfg = cfg(4, 4, 1, 16);
    let n_t = cfg.n_t();
    let flats = [n_t + 2, 3 * n_t + 7, 5 * n_t + 11, 9 * n_t + 5];
    let cols: Vec<Vec<Complex64>> = flats
        .iter()
        .map(|&f| {
            chanpred_core::ul2dl::ul_to_dl_vector_flat(f - 1, &cfg)
                .unwrap()
                .d
        })
        .collect();
    for (i, a) in cols.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            let g = linalg::dot(a, b).norm();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((g - expect).abs() < 1e-12);
        }
    }
    let _ = GridIndex::recompose(0, 0, 1, 1, &cfg);
}

/// Noisy-sample smoke run: a 40-path clustered scenario at 20 dB sample
/// SNR completes through order detection, denoising and amplitude
/// fitting with finite per-index residuals. The aggregate residual is
/// frozen from this oracle's first run.
#[test]
fn noisy_forty_path_smoke() {
    use chanpred_core::channel::{add_sample_noise, synth_paths, ClusterSpec};
    use chanpred_core::pencil::OrderSelection;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    let cfg = cfg(2, 8, 1, 32);
    let clusters = ClusterSpec {
        cluster_count: 8,
        rays_per_cluster: 5,
        angle_spread_deg: 3.0,
        delay_spread_s: 300e-9,
        speed_kmh: 120.0,
        snap_to_grid: false,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let paths = synth_paths(&clusters, &cfg, &mut rng).unwrap();
    assert_eq!(paths.paths.len(), 40);
    let xform = AngleDelayTransform::new(&cfg);
    let ul: Vec<ChannelSnapshot> = (0..10)
        .map(|t| add_sample_noise(&channel_at(&paths, t, Band::Ul, &cfg), 20.0, &mut rng))
        .collect();
    let est = run_doppler_estimation(
        &ul,
        &xform,
        SupportSelection::FixedSize(24),
        2,
        PencilMode::Noisy(OrderSelection::SharedMdl),
    )
    .unwrap();
    assert_eq!(est.models.len(), 24);
    assert!(est.models.iter().all(|m| m.residual.is_finite()));
    let aggregate: f64 =
        est.models.iter().map(|m| m.residual).sum::<f64>() / est.models.len() as f64;
    assert!(aggregate < 0.5, "aggregate residual {aggregate}");
    // regression envelope frozen from the first run of this oracle
    let frozen = 0.3255;
    assert!(
        (aggregate - frozen).abs() < 0.1,
        "aggregate residual {aggregate} drifted from frozen {frozen}"
    );
}
