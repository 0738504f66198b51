//! Built-in invariant suite behind the `selftest` subcommand: transform
//! isometry against the closed-form oracle, pencil recovery, order
//! detection, downlink basis orthonormality, the prediction-error
//! sandwich over a noise-configured run, report determinism, overhead
//! structure and baseline aging.

use chanpred_core::channel::{channel_at, ChannelSnapshot, PathParams, PathSet};
use chanpred_core::config::{flat_to_grid, grid_to_angles, Band, SystemConfig};
use chanpred_core::linalg;
use chanpred_core::metrics::{check_sandwich_bounds, BoundObservation, BoundOutcome};
use chanpred_core::pencil::{
    build_prediction_matrices, detect_order_mdl, estimate_poles, GainSeries,
};
use chanpred_core::training::FeedbackVector;
use chanpred_core::transform::{grid_column, AngleDelayTransform, SupportSelection};
use chanpred_core::ul2dl::ul_to_dl_vector_flat;
use chanpred_core::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::runner::{drop_rng, run_pipeline_once, run_scenario, PipelineKnobs};
use crate::spec::ConfigFile;

/// One named check with its outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, pass: bool, detail: String) -> CheckResult {
        CheckResult { name, pass, detail }
    }
}

fn half_wave_ul_cfg(n_v: usize, n_h: usize, p_t: usize, n_f: usize) -> SystemConfig {
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

fn check_transform_isometry() -> CheckResult {
    let cfg = half_wave_ul_cfg(2, 8, 2, 32);
    let xform = AngleDelayTransform::new(&cfg);
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let h: Vec<Complex64> = (0..cfg.grid_len())
            .map(|_| chanpred_core::rng::complex_gaussian(&mut rng, 1.0))
            .collect();
        let snap = ChannelSnapshot {
            t: 0,
            band: Band::Ul,
            h,
        };
        let img = xform.project(&snap);
        let back = xform.unproject(&img);
        let hn = linalg::norm(&snap.h);
        worst = worst.max((linalg::norm(&img.g_hat) - hn).abs() / hn);
        let diff: f64 = back
            .h
            .iter()
            .zip(&snap.h)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / hn);
    }
    CheckResult::new(
        "transform-isometry",
        worst < 1e-12,
        format!("worst relative deviation {worst:.3e}"),
    )
}

fn check_transform_dense_oracle() -> CheckResult {
    let cfg = half_wave_ul_cfg(2, 4, 2, 13);
    let xform = AngleDelayTransform::new(&cfg);
    let mut rng = ChaCha12Rng::seed_from_u64(102);
    let h: Vec<Complex64> = (0..cfg.grid_len())
        .map(|_| chanpred_core::rng::complex_gaussian(&mut rng, 1.0))
        .collect();
    let snap = ChannelSnapshot {
        t: 0,
        band: Band::Ul,
        h,
    };
    let img = xform.project(&snap);
    let mut worst: f64 = 0.0;
    for i in 0..cfg.grid_len() {
        let oracle = linalg::dot(&grid_column(i, &cfg), &snap.h);
        worst = worst.max((img.g_hat[i] - oracle).norm());
    }
    CheckResult::new(
        "transform-dense-oracle",
        worst < 1e-12,
        format!("worst entry deviation {worst:.3e}"),
    )
}

fn check_pencil_recovery() -> CheckResult {
    let mut rng = ChaCha12Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for m in 1..=3usize {
        for n_l in (2 * m)..=10usize {
            for l in m..=(n_l - m) {
                let poles: Vec<Complex64> = (0..m)
                    .map(|_| {
                        Complex64::from_polar(
                            1.0,
                            chanpred_core::rng::uniform_range(&mut rng, -3.0, 3.0),
                        )
                    })
                    .collect();
                if poles.len() > 1 {
                    let mut sep = f64::INFINITY;
                    for i in 0..m {
                        for j in (i + 1)..m {
                            sep = sep.min((poles[i] - poles[j]).norm());
                        }
                    }
                    if sep < 0.05 {
                        continue;
                    }
                }
                let amps: Vec<Complex64> = (0..m)
                    .map(|_| chanpred_core::rng::complex_gaussian(&mut rng, 1.0))
                    .collect();
                if amps.iter().any(|a| a.norm() < 0.1) {
                    continue;
                }
                let values: Vec<Complex64> = (0..n_l as i64)
                    .map(|t| {
                        poles
                            .iter()
                            .zip(&amps)
                            .map(|(z, a)| a * z.powi(t as i32))
                            .sum()
                    })
                    .collect();
                let s = GainSeries::new(0, values, (0..n_l as i64).collect()).unwrap();
                let (p0, p1) = build_prediction_matrices(&s, l).unwrap();
                let est = match estimate_poles(&p0, &p1, m) {
                    Ok(e) => e,
                    Err(e) => {
                        return CheckResult::new(
                            "pencil-recovery",
                            false,
                            format!("M={m} L={l} N={n_l}: {e}"),
                        )
                    }
                };
                for z in &poles {
                    let best = est
                        .iter()
                        .map(|p| (p - z).norm())
                        .fold(f64::INFINITY, f64::min);
                    worst = worst.max(best);
                }
                cases += 1;
            }
        }
    }
    CheckResult::new(
        "pencil-recovery",
        worst < 1e-8,
        format!("{cases} feasible cases, worst pole error {worst:.3e}"),
    )
}

fn check_mdl_order() -> CheckResult {
    let single: Vec<Complex64> = (0..8i64)
        .map(|t| Complex64::from_polar(1.3, 0.8 * t as f64))
        .collect();
    let s1 = GainSeries::new(0, single, (0..8).collect()).unwrap();
    let double: Vec<Complex64> = (0..10i64)
        .map(|t| {
            Complex64::from_polar(1.0, 0.9 * t as f64) + Complex64::from_polar(0.8, -1.4 * t as f64)
        })
        .collect();
    let s2 = GainSeries::new(0, double, (0..10).collect()).unwrap();
    let m1 = detect_order_mdl(&s1, 3);
    let m2 = detect_order_mdl(&s2, 3);
    let pass = m1 == Ok(1) && m2 == Ok(2);
    CheckResult::new(
        "mdl-order",
        pass,
        format!("single -> {m1:?}, double -> {m2:?}"),
    )
}

fn check_dl_basis_orthonormal() -> CheckResult {
    // reference carriers with half-wavelength spacing at the downlink
    let f_d = 2.11e9;
    let c = 299_792_458.0;
    let cfg = SystemConfig {
        n_v: 2,
        n_h: 8,
        p_t: 2,
        l_v: 0.5 * c / f_d,
        l_h: 0.5 * c / f_d,
        f_u: 1.92e9,
        f_d,
        f_delta: 30e3,
        n_f: 32,
        t_srs: 5e-4,
        n_d: 10,
        c,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(104);
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < 100 {
        let i = (chanpred_core::rng::uniform(&mut rng) * cfg.grid_len() as f64) as usize;
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    let cols: Vec<Vec<Complex64>> = picked
        .iter()
        .map(|&i| ul_to_dl_vector_flat(i, &cfg).unwrap().d)
        .collect();
    let mut worst: f64 = 0.0;
    for (a, ca) in cols.iter().enumerate() {
        for (b, cb) in cols.iter().enumerate() {
            let g = linalg::dot(ca, cb).norm();
            let expect = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - expect).abs());
        }
    }
    CheckResult::new(
        "dl-basis-orthonormal",
        worst < 1e-10,
        format!("worst Gram deviation {worst:.3e}"),
    )
}

/// System used by the sandwich run: half-wavelength uplink spacing so
/// the vertical end-fire family is on-region.
pub fn sandwich_cfg() -> SystemConfig {
    half_wave_ul_cfg(2, 4, 1, 16)
}

/// Twelve on-grid paths with pairwise-distinct delay bins and one
/// Doppler each; amplitudes decay so a fixed support of eight captures
/// most but not all of the energy.
pub fn sandwich_paths(cfg: &SystemConfig) -> PathSet {
    let n_t = cfg.n_t();
    let spatial_cycle = [1usize, 3, 5, 7]; // vertical end-fire family
    let mut members = Vec::new();
    for k in 0..12usize {
        let flat = k * n_t + spatial_cycle[k % spatial_cycle.len()] + 1;
        let g = flat_to_grid(flat, cfg).expect("index in range");
        let (theta, phi) = grid_to_angles(&g, cfg).expect("on-region by construction");
        let beta = Complex64::from_polar(0.82f64.powi(k as i32), 0.4 * k as f64);
        members.push(PathParams {
            beta_u: beta,
            beta_d: beta * Complex64::from_polar(1.0, 1.3 + 0.2 * k as f64),
            theta,
            phi,
            tau: g.delay_idx as f64 / (cfg.n_f as f64 * cfg.f_delta),
            cos_speed_angle: -0.9 + 0.16 * k as f64,
            pol_phase: [Complex64::ONE; 2],
        });
    }
    PathSet {
        paths: members,
        speed: 25.0,
    }
}

/// Runs the sandwich scenario for `drops` pilot-noise realizations and
/// returns the per-drop observations.
pub fn sandwich_observations(drops: usize) -> Vec<BoundObservation> {
    let cfg = sandwich_cfg();
    let xform = AngleDelayTransform::new(&cfg);
    let paths = sandwich_paths(&cfg);
    let knobs = PipelineKnobs {
        cfg: &cfg,
        xform: &xform,
        sample_snr_db: None,
        pilot_snr_db: Some(10.0),
        n_l: 2,
        l_order: 1,
        selection: SupportSelection::FixedSize(8),
        quant: None,
        t_e: 1,
        t_predict: 1 + cfg.n_d as i64,
    };
    (0..drops)
        .map(|d| {
            let mut rng = drop_rng(424_242, d, 0);
            let outcome = run_pipeline_once(&paths, &knobs, &mut rng).expect("pipeline");
            outcome.bound.expect("noise-configured run records bounds")
        })
        .collect()
}

fn check_prediction_error_sandwich() -> CheckResult {
    let obs = sandwich_observations(500);
    let outcome = check_sandwich_bounds(&obs);
    let n = obs.len() as f64;
    let measured = obs.iter().map(|o| o.linear_nmse).sum::<f64>() / n;
    let proj = obs.iter().map(|o| o.projection_error).sum::<f64>() / n;
    let noise = obs.iter().map(|o| o.noise_term).sum::<f64>() / n;
    CheckResult::new(
        "prediction-error-sandwich",
        outcome == BoundOutcome::Pass,
        format!(
            "{} drops: measured {measured:.5} in [{:.5}, {:.5}] -> {}",
            obs.len(),
            proj - noise,
            proj + noise,
            outcome.as_str()
        ),
    )
}

fn check_determinism() -> CheckResult {
    let cf = ConfigFile::parse(determinism_config()).expect("embedded config parses");
    let spec = cf
        .resolve("selftest-det")
        .expect("embedded config resolves");
    let a = run_scenario(&spec).expect("run");
    let b = run_scenario(&spec).expect("run");
    let ca = crate::report::to_csv(&a, &spec);
    let cb = crate::report::to_csv(&b, &spec);
    CheckResult::new(
        "report-determinism",
        ca == cb,
        format!("{} drops compared byte-for-byte", a.records.len()),
    )
}

fn determinism_config() -> &'static str {
    r#"
[system]
N_v = 2
N_h = 4
P_t = 1
l_v = 0.0780709526
l_h = 0.0780709526
f_u = 1.92e9
f_d = 2.11e9
f_delta = 30e3
N_f = 16
T_srs = 5e-4
N_d = 10
c = 299792458.0

[clusters]
cluster_count = 4
rays_per_cluster = 5
angle_spread_deg = 3.0
delay_spread_s = 200e-9

[scenario]
speed_kmh = 60.0
n_l = 8
l_order = 2
n_s = 16
drops = 6
seed = 2024
t_s = 0
t_e = 7
"#
}

fn check_overhead_structure() -> CheckResult {
    // pilot length and serialized feedback size depend only on (N_s, M)
    let n_s = 12usize;
    let m = 2usize;
    let mut sizes = Vec::new();
    for (n_v, n_h, n_f) in [(1usize, 4usize, 8usize), (8, 8, 8), (2, 8, 128)] {
        let cfg = half_wave_ul_cfg(n_v, n_h, 1, n_f);
        let _ = cfg.n_t(); // 4 .. 64 antennas across the grid
        let tau = n_s * m;
        let fb = FeedbackVector {
            a_hat: vec![Complex64::ONE; tau],
            n_s,
            m_order: m,
            quantized: false,
            c_a: None,
            c_p: None,
            anchor: 1.0,
            codewords: None,
        };
        let quant = chanpred_core::training::quantize_feedback(&fb, Some(4), Some(6)).unwrap();
        sizes.push((tau, fb.to_bytes().len(), quant.to_bytes().len()));
    }
    let all_equal = sizes.windows(2).all(|w| w[0] == w[1]);
    CheckResult::new(
        "overhead-structure",
        all_equal,
        format!("(tau, raw bytes, quantized bytes) across configs: {sizes:?}"),
    )
}

fn check_stale_baseline_ages() -> CheckResult {
    // single slow path: the stale baseline error must grow with the delay
    let cfg = sandwich_cfg();
    let paths = PathSet {
        paths: vec![sandwich_paths(&cfg).paths.remove(0)],
        speed: 5.0,
    };
    let h0 = channel_at(&paths, 0, Band::Dl, &cfg);
    let mut last = -1.0;
    let mut ok = true;
    for t in [2i64, 5, 10, 20] {
        let ht = channel_at(&paths, t, Band::Dl, &cfg);
        let lin = chanpred_core::metrics::linear_nmse(&ht, &h0).unwrap();
        ok &= lin >= last - 1e-12;
        last = lin;
    }
    CheckResult::new(
        "stale-baseline-ages",
        ok && last > 1e-6,
        format!("stale error at max delay {last:.3e}"),
    )
}

/// Runs the whole battery.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_transform_isometry(),
        check_transform_dense_oracle(),
        check_pencil_recovery(),
        check_mdl_order(),
        check_dl_basis_orthonormal(),
        check_prediction_error_sandwich(),
        check_determinism(),
        check_overhead_structure(),
        check_stale_baseline_ages(),
    ]
}
