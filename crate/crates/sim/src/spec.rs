//! Scenario configuration: the on-disk TOML schema, validation, and
//! expansion of sweep grids into per-point resolved scenarios.

use chanpred_core::channel::ClusterSpec;
use chanpred_core::config::SystemConfig;
use chanpred_core::transform::SupportSelection;
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Top-level configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub clusters: ClusterSection,
    pub scenario: ScenarioSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Array geometry, carrier plan, numerology and timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "N_v")]
    pub n_v: usize,
    #[serde(rename = "N_h")]
    pub n_h: usize,
    #[serde(rename = "P_t")]
    pub p_t: usize,
    pub l_v: f64,
    pub l_h: f64,
    pub f_u: f64,
    pub f_d: f64,
    pub f_delta: f64,
    #[serde(rename = "N_f")]
    pub n_f: usize,
    #[serde(rename = "T_srs")]
    pub t_srs: f64,
    #[serde(rename = "N_d")]
    pub n_d: u64,
    pub c: f64,
}

/// Synthetic clustered scenario parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub cluster_count: usize,
    pub rays_per_cluster: usize,
    pub angle_spread_deg: f64,
    pub delay_spread_s: f64,
    #[serde(default)]
    pub snap_to_grid: bool,
}

/// Run parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub speed_kmh: f64,
    /// Omitted = noise-free uplink samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_snr_db: Option<f64>,
    /// Omitted = noise-free downlink pilots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_snr_db: Option<f64>,
    pub n_l: usize,
    pub l_order: usize,
    /// Exactly one of `n_s` and `eta` must be present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Feedback quantization bits; both or neither.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_a: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_p: Option<u8>,
    pub drops: usize,
    pub seed: u64,
    pub t_s: i64,
    pub t_e: i64,
    #[serde(default = "default_k_ues")]
    pub k_ues: usize,
    #[serde(default = "default_se_noise")]
    pub se_noise_power: f64,
}

fn default_k_ues() -> usize {
    1
}

fn default_se_noise() -> f64 {
    1.0
}

/// Sweep grid: a cartesian product over any subset of these axes.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_d: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_snr_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_snr_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_order: Option<Vec<usize>>,
}

/// One fully resolved scenario ready to execute.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub scenario_id: String,
    pub cfg: SystemConfig,
    pub clusters: ClusterSpec,
    pub sample_snr_db: Option<f64>,
    pub pilot_snr_db: Option<f64>,
    pub n_l: usize,
    pub l_order: usize,
    pub selection: SupportSelection,
    pub quant: Option<(u8, u8)>,
    pub drops: usize,
    pub seed: u64,
    pub t_s: i64,
    pub t_e: i64,
    pub k_ues: usize,
    pub se_noise_power: f64,
    /// Echo of the resolved file-level sections for the manifest.
    pub resolved: ConfigFile,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Resolves the base scenario (ignoring any sweep section).
    pub fn resolve(&self, scenario_id: &str) -> Result<ScenarioSpec, SimError> {
        let s = &self.system;
        let cfg = SystemConfig {
            n_v: s.n_v,
            n_h: s.n_h,
            p_t: s.p_t,
            l_v: s.l_v,
            l_h: s.l_h,
            f_u: s.f_u,
            f_d: s.f_d,
            f_delta: s.f_delta,
            n_f: s.n_f,
            t_srs: s.t_srs,
            n_d: s.n_d,
            c: s.c,
        }
        .validated()
        .map_err(|e| SimError::Config(e.to_string()))?;

        let sc = &self.scenario;
        let selection = match (sc.n_s, sc.eta) {
            (Some(n), None) => SupportSelection::FixedSize(n),
            (None, Some(eta)) => SupportSelection::Eta(eta),
            _ => {
                return Err(SimError::Config(
                    "exactly one of scenario.n_s and scenario.eta must be set".into(),
                ))
            }
        };
        let quant = match (sc.c_a, sc.c_p) {
            (Some(a), Some(p)) => Some((a, p)),
            (None, None) => None,
            _ => {
                return Err(SimError::Config(
                    "scenario.c_a and scenario.c_p must be set together".into(),
                ))
            }
        };
        if sc.drops < 1 {
            return Err(SimError::Config("scenario.drops must be >= 1".into()));
        }
        if sc.n_l < 2 {
            return Err(SimError::Config("scenario.n_l must be >= 2".into()));
        }
        if sc.t_e < sc.t_s + sc.n_l as i64 - 1 {
            return Err(SimError::Config(
                "scenario window too short: need t_e >= t_s + n_l - 1".into(),
            ));
        }
        if sc.k_ues < 1 {
            return Err(SimError::Config("scenario.k_ues must be >= 1".into()));
        }

        let clusters = ClusterSpec {
            cluster_count: self.clusters.cluster_count,
            rays_per_cluster: self.clusters.rays_per_cluster,
            angle_spread_deg: self.clusters.angle_spread_deg,
            delay_spread_s: self.clusters.delay_spread_s,
            speed_kmh: sc.speed_kmh,
            snap_to_grid: self.clusters.snap_to_grid,
        };

        Ok(ScenarioSpec {
            scenario_id: scenario_id.to_string(),
            cfg,
            clusters,
            sample_snr_db: sc.sample_snr_db,
            pilot_snr_db: sc.pilot_snr_db,
            n_l: sc.n_l,
            l_order: sc.l_order,
            selection,
            quant,
            drops: sc.drops,
            seed: sc.seed,
            t_s: sc.t_s,
            t_e: sc.t_e,
            k_ues: sc.k_ues,
            se_noise_power: sc.se_noise_power,
            resolved: ConfigFile {
                system: self.system.clone(),
                clusters: self.clusters.clone(),
                scenario: self.scenario.clone(),
                sweep: None,
            },
        })
    }

    /// Expands the sweep grid into resolved scenarios, cartesian order.
    /// Without a sweep section the base scenario is returned alone.
    pub fn expand_sweep(&self) -> Result<Vec<ScenarioSpec>, SimError> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![self.resolve("base")?]);
        };
        let speeds = sweep
            .speed_kmh
            .clone()
            .unwrap_or_else(|| vec![self.scenario.speed_kmh]);
        let n_ds = sweep.n_d.clone().unwrap_or_else(|| vec![self.system.n_d]);
        let sample_snrs: Vec<Option<f64>> = match &sweep.sample_snr_db {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![self.scenario.sample_snr_db],
        };
        let pilot_snrs: Vec<Option<f64>> = match &sweep.pilot_snr_db {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![self.scenario.pilot_snr_db],
        };
        let n_ss: Vec<Option<usize>> = match &sweep.n_s {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![self.scenario.n_s],
        };
        let l_orders = sweep
            .l_order
            .clone()
            .unwrap_or_else(|| vec![self.scenario.l_order]);

        let mut out = Vec::new();
        for &speed in &speeds {
            for &n_d in &n_ds {
                for &sample in &sample_snrs {
                    for &pilot in &pilot_snrs {
                        for &n_s in &n_ss {
                            for &l_order in &l_orders {
                                let mut point = self.clone();
                                point.sweep = None;
                                point.scenario.speed_kmh = speed;
                                point.system.n_d = n_d;
                                point.scenario.sample_snr_db = sample;
                                point.scenario.pilot_snr_db = pilot;
                                if n_s.is_some() {
                                    point.scenario.n_s = n_s;
                                    point.scenario.eta = None;
                                }
                                point.scenario.l_order = l_order;
                                let id =
                                    sweep_label(sweep, speed, n_d, sample, pilot, n_s, l_order);
                                out.push(point.resolve(&id)?);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn sweep_label(
    sweep: &SweepSection,
    speed: f64,
    n_d: u64,
    sample: Option<f64>,
    pilot: Option<f64>,
    n_s: Option<usize>,
    l_order: usize,
) -> String {
    let mut parts = Vec::new();
    if sweep.speed_kmh.is_some() {
        parts.push(format!("v{speed}"));
    }
    if sweep.n_d.is_some() {
        parts.push(format!("nd{n_d}"));
    }
    if sweep.sample_snr_db.is_some() {
        parts.push(format!(
            "ssnr{}",
            sample.map_or("inf".into(), |v| v.to_string())
        ));
    }
    if sweep.pilot_snr_db.is_some() {
        parts.push(format!(
            "psnr{}",
            pilot.map_or("inf".into(), |v| v.to_string())
        ));
    }
    if sweep.n_s.is_some() {
        parts.push(format!("ns{}", n_s.map_or("eta".into(), |v| v.to_string())));
    }
    if sweep.l_order.is_some() {
        parts.push(format!("l{l_order}"));
    }
    if parts.is_empty() {
        "base".to_string()
    } else {
        parts.join("-")
    }
}

/// Shared test fixture.
#[cfg(test)]
pub(crate) const SAMPLE: &str = r#"
[system]
N_v = 2
N_h = 8
P_t = 1
l_v = 0.0710408668
l_h = 0.0710408668
f_u = 1.92e9
f_d = 2.11e9
f_delta = 30e3
N_f = 32
T_srs = 5e-4
N_d = 10
c = 299792458.0

[clusters]
cluster_count = 8
rays_per_cluster = 5
angle_spread_deg = 3.0
delay_spread_s = 100e-9

[scenario]
speed_kmh = 60.0
n_l = 10
l_order = 2
n_s = 24
drops = 4
seed = 7
t_s = 0
t_e = 9
"#;
