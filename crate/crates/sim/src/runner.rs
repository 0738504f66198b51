//! Scenario execution: one prediction round per Monte-Carlo drop, with
//! deterministic per-drop random streams, order-independent aggregation
//! and a stale-CSI baseline computed on the same drop.

use chanpred_core::channel::{add_sample_noise, channel_at, synth_paths, ChannelSnapshot, PathSet};
use chanpred_core::config::{Band, SystemConfig};
use chanpred_core::linalg;
use chanpred_core::metrics::{
    check_sandwich_bounds, linear_nmse, nmse_db_from_linear, spectral_efficiency, BoundObservation,
    BoundOutcome, FeedbackOverhead,
};
use chanpred_core::pencil::{run_doppler_estimation, OrderSelection, PencilMode};
use chanpred_core::training::{
    build_pilot, build_precoder, build_training_state, estimate_coefficients, predict_channel,
    quantize_feedback, simulate_dl_training,
};
use chanpred_core::transform::{AngleDelayTransform, SupportSelection};
use chanpred_core::ul2dl::DopplerMap;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::time::Instant;

use crate::spec::ScenarioSpec;
use crate::SimError;

/// Knobs of one prediction round, independent of how paths were drawn.
#[derive(Debug, Clone)]
pub struct PipelineKnobs<'a> {
    pub cfg: &'a SystemConfig,
    pub xform: &'a AngleDelayTransform,
    pub sample_snr_db: Option<f64>,
    pub pilot_snr_db: Option<f64>,
    pub n_l: usize,
    pub l_order: usize,
    pub selection: SupportSelection,
    pub quant: Option<(u8, u8)>,
    /// Estimation window: the `n_l` slots ending at `t_e`.
    pub t_e: i64,
    /// Prediction slot, normally `t_e + N_d`.
    pub t_predict: i64,
}

impl<'a> PipelineKnobs<'a> {
    pub fn from_spec(spec: &'a ScenarioSpec, xform: &'a AngleDelayTransform) -> PipelineKnobs<'a> {
        PipelineKnobs {
            cfg: &spec.cfg,
            xform,
            sample_snr_db: spec.sample_snr_db,
            pilot_snr_db: spec.pilot_snr_db,
            n_l: spec.n_l,
            l_order: spec.l_order,
            selection: spec.selection,
            quant: spec.quant,
            t_e: spec.t_e,
            t_predict: spec.t_e + spec.cfg.n_d as i64,
        }
    }
}

/// Everything one prediction round produces.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub h_true: ChannelSnapshot,
    pub h_pred: ChannelSnapshot,
    /// The true downlink channel at the training slot, reused after the
    /// CSI delay as the no-prediction baseline.
    pub h_stale: ChannelSnapshot,
    pub nmse_lin: f64,
    pub nmse_stale_lin: f64,
    pub n_s_used: usize,
    pub m_used: usize,
    pub bound: Option<BoundObservation>,
}

/// Runs one full prediction round over a fixed path set.
pub fn run_pipeline_once(
    paths: &PathSet,
    knobs: &PipelineKnobs<'_>,
    rng: &mut ChaCha12Rng,
) -> chanpred_core::Result<PipelineOutcome> {
    let cfg = knobs.cfg;
    let t0 = knobs.t_e - knobs.n_l as i64 + 1;
    let mut ul: Vec<ChannelSnapshot> = (t0..=knobs.t_e)
        .map(|t| channel_at(paths, t, Band::Ul, cfg))
        .collect();
    if let Some(snr) = knobs.sample_snr_db {
        for snap in ul.iter_mut() {
            *snap = add_sample_noise(snap, snr, rng);
        }
    }
    let mode = match knobs.sample_snr_db {
        None => PencilMode::NoiseFree,
        Some(_) => PencilMode::Noisy(OrderSelection::SharedMdl),
    };
    let est = run_doppler_estimation(&ul, knobs.xform, knobs.selection, knobs.l_order, mode)?;
    // One pilot slot identifies one coefficient per support index, so the
    // training stage keeps each model's dominant pole.
    let est = est.reduced_to_dominant(1);
    let state = build_training_state(&est, cfg, knobs.t_e, DopplerMap::Signed)?;
    let f = build_precoder(&state);
    let s = build_pilot(state.tau_len())?;

    let h_train = channel_at(paths, knobs.t_e, Band::Dl, cfg);
    let (y, sigma2) = simulate_dl_training(
        &h_train,
        &f,
        &s,
        knobs.pilot_snr_db.unwrap_or(f64::INFINITY),
        rng,
    )?;
    let fb = estimate_coefficients(&y, &s, &state)?;
    let fb_used = match knobs.quant {
        Some((c_a, c_p)) => quantize_feedback(&fb, Some(c_a), Some(c_p))?,
        None => fb,
    };
    let h_pred = predict_channel(&state, &fb_used, knobs.t_predict)?;
    let h_true = channel_at(paths, knobs.t_predict, Band::Dl, cfg);

    let nmse_lin = linear_nmse(&h_true, &h_pred)?;
    let nmse_stale_lin = linear_nmse(&h_true, &h_train)?;

    let bound = if sigma2 > 0.0 {
        let basis: Vec<Vec<chanpred_core::Complex64>> =
            state.basis.iter().map(|b| b.d.clone()).collect();
        let projection_error = chanpred_core::metrics::projection_error(&h_true.h, &basis)?;
        let noise_term = state.tau_len() as f64 * sigma2 / linalg::norm_sqr(&h_true.h);
        Some(BoundObservation {
            linear_nmse: nmse_lin,
            projection_error,
            noise_term,
        })
    } else {
        None
    };

    Ok(PipelineOutcome {
        h_true,
        h_pred,
        h_stale: h_train,
        nmse_lin,
        nmse_stale_lin,
        n_s_used: state.n_s(),
        m_used: state.m_order,
        bound,
    })
}

/// Per-drop record feeding the report.
#[derive(Debug, Clone)]
pub struct DropRecord {
    pub drop_idx: usize,
    pub nmse_lin: f64,
    pub nmse_stale_lin: f64,
    pub se: f64,
    pub se_stale: f64,
    pub n_s_used: usize,
    pub m_used: usize,
    pub bound: Option<BoundObservation>,
    /// A failed drop records the error instead of metrics.
    pub error: Option<String>,
}

impl DropRecord {
    fn failed(drop_idx: usize, err: String) -> DropRecord {
        DropRecord {
            drop_idx,
            nmse_lin: f64::NAN,
            nmse_stale_lin: f64::NAN,
            se: f64::NAN,
            se_stale: f64::NAN,
            n_s_used: 0,
            m_used: 0,
            bound: None,
            error: Some(err),
        }
    }
}

/// Completed run: per-drop records plus linear-domain aggregates.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario_id: String,
    pub records: Vec<DropRecord>,
    pub aggregate_nmse_db: f64,
    pub aggregate_nmse_stale_db: f64,
    pub mean_se: f64,
    pub mean_se_stale: f64,
    pub bound_outcome: BoundOutcome,
    pub overhead: Option<FeedbackOverhead>,
    pub failed_drops: usize,
    /// Set when more than 5% of drops failed.
    pub flagged: bool,
    pub wall_clock_s: f64,
    pub k_ues: usize,
    pub se_noise_power: f64,
}

/// Deterministic per-(drop, ue) stream split from the master seed.
pub fn drop_rng(seed: u64, drop_idx: usize, ue: usize) -> ChaCha12Rng {
    let mut z = seed
        ^ (drop_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (ue as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha12Rng::seed_from_u64(z)
}

fn run_drop(spec: &ScenarioSpec, knobs: &PipelineKnobs<'_>, drop_idx: usize) -> DropRecord {
    let mut outcomes = Vec::with_capacity(spec.k_ues);
    for ue in 0..spec.k_ues {
        let mut rng = drop_rng(spec.seed, drop_idx, ue);
        let paths = match synth_paths(&spec.clusters, &spec.cfg, &mut rng) {
            Ok(p) => p,
            Err(e) => return DropRecord::failed(drop_idx, e.to_string()),
        };
        match run_pipeline_once(&paths, knobs, &mut rng) {
            Ok(o) => outcomes.push(o),
            Err(e) => return DropRecord::failed(drop_idx, e.to_string()),
        }
    }
    let trues: Vec<&ChannelSnapshot> = outcomes.iter().map(|o| &o.h_true).collect();
    let preds: Vec<&ChannelSnapshot> = outcomes.iter().map(|o| &o.h_pred).collect();
    let stales: Vec<&ChannelSnapshot> = outcomes.iter().map(|o| &o.h_stale).collect();
    let se = match spectral_efficiency(&trues, &preds, spec.se_noise_power, &spec.cfg) {
        Ok(v) => v,
        Err(e) => return DropRecord::failed(drop_idx, e.to_string()),
    };
    let se_stale = match spectral_efficiency(&trues, &stales, spec.se_noise_power, &spec.cfg) {
        Ok(v) => v,
        Err(e) => return DropRecord::failed(drop_idx, e.to_string()),
    };
    let k = outcomes.len() as f64;
    DropRecord {
        drop_idx,
        nmse_lin: outcomes.iter().map(|o| o.nmse_lin).sum::<f64>() / k,
        nmse_stale_lin: outcomes.iter().map(|o| o.nmse_stale_lin).sum::<f64>() / k,
        se,
        se_stale,
        n_s_used: outcomes[0].n_s_used,
        m_used: outcomes[0].m_used,
        bound: if spec.k_ues == 1 {
            outcomes[0].bound
        } else {
            None
        },
        error: None,
    }
}

/// Executes every drop of the scenario. Drops run in parallel on the
/// global thread pool; per-drop random streams and ordered collection
/// make the report identical under any thread count.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunReport, SimError> {
    let start = Instant::now();
    let xform = AngleDelayTransform::new(&spec.cfg);
    let knobs = PipelineKnobs::from_spec(spec, &xform);

    let records: Vec<DropRecord> = (0..spec.drops)
        .into_par_iter()
        .map(|d| run_drop(spec, &knobs, d))
        .collect();

    let total = records.len();
    let ok: Vec<DropRecord> = records
        .iter()
        .filter(|r| r.error.is_none())
        .cloned()
        .collect();
    let failed_drops = total - ok.len();
    if ok.is_empty() {
        return Err(SimError::Run(format!(
            "scenario {}: every drop failed ({})",
            spec.scenario_id,
            records[0].error.clone().unwrap_or_default()
        )));
    }
    let n = ok.len() as f64;
    let mean_lin = ok.iter().map(|r| r.nmse_lin).sum::<f64>() / n;
    let mean_stale_lin = ok.iter().map(|r| r.nmse_stale_lin).sum::<f64>() / n;
    let observations: Vec<BoundObservation> = ok.iter().filter_map(|r| r.bound).collect();
    let bound_outcome = check_sandwich_bounds(&observations);
    let overhead = chanpred_core::metrics::feedback_overhead(
        ok[0].n_s_used.max(1),
        ok[0].m_used.max(1),
        1,
        spec.quant,
    )
    .ok();

    Ok(RunReport {
        scenario_id: spec.scenario_id.clone(),
        aggregate_nmse_db: nmse_db_from_linear(mean_lin),
        aggregate_nmse_stale_db: nmse_db_from_linear(mean_stale_lin),
        mean_se: ok.iter().map(|r| r.se).sum::<f64>() / n,
        mean_se_stale: ok.iter().map(|r| r.se_stale).sum::<f64>() / n,
        records,
        bound_outcome,
        overhead,
        failed_drops,
        flagged: failed_drops as f64 > 0.05 * total as f64,
        wall_clock_s: start.elapsed().as_secs_f64(),
        k_ues: spec.k_ues,
        se_noise_power: spec.se_noise_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ConfigFile;

    fn static_on_grid_config() -> String {
        // single snapped static path: the pipeline is exact
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
N_f = 8
T_srs = 5e-4
N_d = 10
c = 299792458.0

[clusters]
cluster_count = 1
rays_per_cluster = 1
angle_spread_deg = 0.0
delay_spread_s = 200e-9
snap_to_grid = true

[scenario]
speed_kmh = 0.0
n_l = 2
l_order = 1
eta = 0.9999
drops = 1
seed = 11
t_s = 0
t_e = 1
"#
        .to_string()
    }

    #[test]
    fn static_on_grid_single_path_hits_floor() {
        let cf = ConfigFile::parse(&static_on_grid_config()).unwrap();
        let spec = cf.resolve("static").unwrap();
        let report = run_scenario(&spec).unwrap();
        assert_eq!(report.failed_drops, 0);
        assert!(
            report.aggregate_nmse_db <= -200.0,
            "NMSE {}",
            report.aggregate_nmse_db
        );
    }

    #[test]
    fn same_seed_reproduces_report_exactly() {
        let cf = ConfigFile::parse(crate::spec::SAMPLE).unwrap();
        let spec = cf.resolve("det").unwrap();
        let a = run_scenario(&spec).unwrap();
        let b = run_scenario(&spec).unwrap();
        assert_eq!(
            crate::report::to_csv(&a, &spec),
            crate::report::to_csv(&b, &spec)
        );
        assert_eq!(a.aggregate_nmse_db.to_bits(), b.aggregate_nmse_db.to_bits());
    }

    #[test]
    fn stale_nmse_non_decreasing_in_csi_delay() {
        // single moving path; doppler low enough that the first half
        // period covers the whole delay grid
        let base = static_on_grid_config()
            .replace("speed_kmh = 0.0", "speed_kmh = 20.0")
            .replace("snap_to_grid = true", "snap_to_grid = false");
        let mut last = -1.0;
        for n_d in [2u64, 5, 10, 20] {
            let text = base.replace("N_d = 10", &format!("N_d = {n_d}"));
            let cf = ConfigFile::parse(&text).unwrap();
            let spec = cf.resolve("stale").unwrap();
            let report = run_scenario(&spec).unwrap();
            let lin = 10f64.powf(report.aggregate_nmse_stale_db / 10.0);
            assert!(
                lin >= last - 1e-12,
                "stale NMSE decreased at N_d={n_d}: {lin} < {last}"
            );
            last = lin;
        }
        assert!(last > 1e-6, "stale baseline should age visibly");
    }

    #[test]
    fn multi_ue_run_produces_finite_se() {
        let text = crate::spec::SAMPLE
            .replace("drops = 4", "drops = 2\nk_ues = 3")
            .replace("speed_kmh = 60.0", "speed_kmh = 30.0");
        let cf = ConfigFile::parse(&text).unwrap();
        let spec = cf.resolve("mu").unwrap();
        let report = run_scenario(&spec).unwrap();
        assert_eq!(report.failed_drops, 0);
        assert!(report.mean_se.is_finite() && report.mean_se > 0.0);
        assert!(report.mean_se_stale.is_finite() && report.mean_se_stale > 0.0);
    }

    #[test]
    fn infeasible_pencil_window_fails_the_run() {
        // noise-free estimation needs 2L <= N_L; every drop propagates
        // the violation and the run reports it instead of panicking
        let text = crate::spec::SAMPLE
            .replace("n_l = 10", "n_l = 3")
            .replace("t_e = 9", "t_e = 2");
        let spec = ConfigFile::parse(&text).unwrap().resolve("bad").unwrap();
        let err = run_scenario(&spec).unwrap_err();
        assert!(err.to_string().contains("every drop failed"), "{err}");
    }

    #[test]
    fn noisy_sample_scenario_completes_and_beats_stale() {
        // sample noise routes the estimation through order detection and
        // truncated-SVD denoising
        let text = crate::spec::SAMPLE
            .replace("N_h = 8", "N_h = 16")
            .replace("f_delta = 30e3", "f_delta = 120e3")
            .replace("cluster_count = 8", "cluster_count = 4")
            .replace("rays_per_cluster = 5", "rays_per_cluster = 10")
            .replace("angle_spread_deg = 3.0", "angle_spread_deg = 1.0")
            .replace("drops = 4", "drops = 10")
            .replace(
                "speed_kmh = 60.0",
                "speed_kmh = 120.0\nsample_snr_db = 20.0\npilot_snr_db = 15.0",
            );
        let spec = ConfigFile::parse(&text).unwrap().resolve("noisy").unwrap();
        let report = run_scenario(&spec).unwrap();
        assert_eq!(report.failed_drops, 0);
        assert!(report.aggregate_nmse_db.is_finite());
        assert!(
            report.aggregate_nmse_db < report.aggregate_nmse_stale_db,
            "{} vs stale {}",
            report.aggregate_nmse_db,
            report.aggregate_nmse_stale_db
        );
        // pilot noise present: the sandwich outcome must be recorded
        assert_ne!(
            report.bound_outcome,
            chanpred_core::metrics::BoundOutcome::NotApplicable
        );
    }

    #[test]
    fn quantized_run_never_beats_unquantized_beyond_tolerance() {
        // healthy operating point and enough paired drops that the
        // systematic quantization penalty dominates the luck term
        let text = crate::spec::SAMPLE
            .replace("N_h = 8", "N_h = 16")
            .replace("f_delta = 30e3", "f_delta = 120e3")
            .replace("cluster_count = 8", "cluster_count = 4")
            .replace("rays_per_cluster = 5", "rays_per_cluster = 10")
            .replace("angle_spread_deg = 3.0", "angle_spread_deg = 1.0")
            .replace("drops = 4", "drops = 40");
        let plain = ConfigFile::parse(&text).unwrap().resolve("plain").unwrap();
        let quant_text = text.replace("n_s = 24", "n_s = 24\nc_a = 4\nc_p = 6");
        let quant = ConfigFile::parse(&quant_text)
            .unwrap()
            .resolve("quant")
            .unwrap();
        let a = run_scenario(&plain).unwrap();
        let b = run_scenario(&quant).unwrap();
        // paired drops: quantization may only help within numerical noise
        assert!(b.aggregate_nmse_db >= a.aggregate_nmse_db - 0.01);
        let oh = b.overhead.unwrap();
        // the prediction stage keeps one pole per index: M = 1
        assert_eq!(oh.bits, Some(24 * 10 + 64));
    }
}
