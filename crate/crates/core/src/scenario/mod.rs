//! Test environments, evaluation configuration, presets and requirement thresholds.

mod load;
mod presets;
mod requirements;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::antenna::ArrayConfig;
use crate::error::{Error, Result};
use crate::geometry::LayoutKind;
use crate::link::LinkParams;
use crate::traffic::TrafficModelSpec;

pub use load::{apply_overrides, load_config, load_config_str, to_toml};
pub use presets::{preset, preset_by_name, tx_power_for_bandwidth, PRESET_SOURCES};
pub use requirements::{
    requirement_for, Metric, Requirement, RequirementSet, RequirementSource, Sense,
};

/// The five evaluation environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestEnvironment {
    #[serde(rename = "IndoorHotspot_eMBB")]
    IndoorHotspotEmbb,
    #[serde(rename = "DenseUrban_eMBB")]
    DenseUrbanEmbb,
    #[serde(rename = "Rural_eMBB")]
    RuralEmbb,
    #[serde(rename = "UrbanMacro_mMTC")]
    UrbanMacroMmtc,
    #[serde(rename = "UrbanMacro_URLLC")]
    UrbanMacroUrllc,
}

impl TestEnvironment {
    pub const ALL: [TestEnvironment; 5] = [
        TestEnvironment::IndoorHotspotEmbb,
        TestEnvironment::DenseUrbanEmbb,
        TestEnvironment::RuralEmbb,
        TestEnvironment::UrbanMacroMmtc,
        TestEnvironment::UrbanMacroUrllc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestEnvironment::IndoorHotspotEmbb => "IndoorHotspot_eMBB",
            TestEnvironment::DenseUrbanEmbb => "DenseUrban_eMBB",
            TestEnvironment::RuralEmbb => "Rural_eMBB",
            TestEnvironment::UrbanMacroMmtc => "UrbanMacro_mMTC",
            TestEnvironment::UrbanMacroUrllc => "UrbanMacro_URLLC",
        }
    }

    pub fn layout_kind(self) -> LayoutKind {
        match self {
            TestEnvironment::IndoorHotspotEmbb => LayoutKind::Indoor12,
            TestEnvironment::DenseUrbanEmbb => LayoutKind::DenseUrbanTwoLayer,
            TestEnvironment::RuralEmbb
            | TestEnvironment::UrbanMacroMmtc
            | TestEnvironment::UrbanMacroUrllc => LayoutKind::HexMacro19,
        }
    }

    /// KPIs computed for this environment, in report order.
    pub fn kpis(self) -> Vec<KpiKey> {
        use Direction::{Downlink as Dl, Uplink as Ul};
        let k = |direction, metric| KpiKey { direction, metric };
        match self {
            TestEnvironment::IndoorHotspotEmbb => vec![
                k(Dl, Metric::AvgSe),
                k(Ul, Metric::AvgSe),
                k(Dl, Metric::Pct5Se),
                k(Ul, Metric::Pct5Se),
                k(Ul, Metric::Mobility { speed_kmh: 10 }),
            ],
            TestEnvironment::DenseUrbanEmbb => vec![
                k(Dl, Metric::AvgSe),
                k(Ul, Metric::AvgSe),
                k(Dl, Metric::Pct5Se),
                k(Ul, Metric::Pct5Se),
                k(Ul, Metric::Mobility { speed_kmh: 30 }),
                k(Dl, Metric::UserExperiencedRate),
                k(Ul, Metric::UserExperiencedRate),
            ],
            TestEnvironment::RuralEmbb => vec![
                k(Dl, Metric::AvgSe),
                k(Ul, Metric::AvgSe),
                k(Dl, Metric::Pct5Se),
                k(Ul, Metric::Pct5Se),
                k(Ul, Metric::Mobility { speed_kmh: 120 }),
                k(Ul, Metric::Mobility { speed_kmh: 500 }),
            ],
            TestEnvironment::UrbanMacroMmtc => vec![k(Ul, Metric::ConnectionDensity)],
            TestEnvironment::UrbanMacroUrllc => {
                vec![k(Dl, Metric::Reliability), k(Ul, Metric::Reliability)]
            }
        }
    }
}

impl fmt::Display for TestEnvironment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestEnvironment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestEnvironment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownPreset {
                environment: s.to_string(),
                variant: String::new(),
            })
    }
}

/// Configuration column. Its meaning depends on the environment: ISD for mMTC,
/// carrier for URLLC, channel-model variant for eMBB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::A => "A",
            Variant::B => "B",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Variant::A),
            "B" | "b" => Ok(Variant::B),
            other => Err(Error::UnknownPreset {
                environment: String::new(),
                variant: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downlink,
    Uplink,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Downlink, Direction::Uplink];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Downlink => "downlink",
            Direction::Uplink => "uplink",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "downlink" | "dl" => Ok(Direction::Downlink),
            "uplink" | "ul" => Ok(Direction::Uplink),
            other => Err(Error::Domain(format!("unknown link direction `{other}`"))),
        }
    }
}

/// A (direction, metric) pair naming one KPI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KpiKey {
    pub direction: Direction,
    pub metric: Metric,
}

/// `[scenario]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub environment: TestEnvironment,
    pub config_variant: Variant,
    /// Hz.
    pub carrier_frequency: f64,
    /// Meters. Ignored by the indoor layout, which has fixed coordinates.
    pub isd: f64,
    pub bs_height: f64,
    pub ue_height: f64,
    /// Total BS transmit power over `bandwidth`, dBm.
    pub bs_tx_power: f64,
    /// Maximum UE transmit power, dBm.
    pub ue_tx_power: f64,
    pub bs_noise_figure: f64,
    pub ue_noise_figure: f64,
    /// Peak gain of one BS antenna element, dBi.
    pub bs_element_gain: f64,
    pub ue_element_gain: f64,
    /// dBm/Hz.
    pub thermal_noise_density: f64,
    /// Hz.
    pub bandwidth: f64,
    pub indoor_fraction: f64,
    /// Share of indoor UEs behind high-loss building walls.
    pub high_loss_fraction: f64,
    /// km/h.
    pub ue_speed_indoor: f64,
    pub ue_speed_outdoor: f64,
    pub ues_per_trxp: u32,
    /// Name of a channel profile, e.g. `UMa_A`.
    pub channel_profile: String,
    /// Minimum 2D BS-UE distance, meters.
    pub min_ue_distance: f64,
    /// Dense-urban only: include the micro layer as extra co-channel TRxPs.
    pub micro_layer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaParams {
    pub bs: ArrayConfig,
    pub ue: ArrayConfig,
}

/// `[run]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    pub drops: u32,
    pub master_seed: u64,
    /// Simulated time per drop, seconds.
    #[serde(rename = "duration_T")]
    pub duration_t: f64,
    /// Worker threads; 0 picks the available parallelism. Never affects results.
    pub workers: u32,
    /// Stop once the running mean UL SINR settles.
    pub early_stop: bool,
    pub convergence_window: u32,
    pub convergence_tolerance: f64,
    /// Channel snapshots per drop used by the scheduler.
    pub fading_samples: u32,
    /// Drops used to calibrate uplink power control.
    pub calibration_drops: u32,
    /// Device-density search grid for the non-full-buffer route, devices/km².
    pub density_min: f64,
    pub density_max: f64,
    pub density_step: f64,
    /// Simulated seconds of message traffic per density probe.
    pub density_horizon: f64,
}

/// Complete scenario parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub scenario: ScenarioParams,
    pub antenna: AntennaParams,
    pub traffic: TrafficModelSpec,
    pub link: LinkParams,
    pub run: RunParams,
}

impl EvaluationConfig {
    /// Checks every documented range; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        validate::validate(self)
    }

    /// Noise bandwidth of an uplink transmission.
    pub fn ul_bandwidth(&self) -> f64 {
        match self.traffic.kind {
            crate::traffic::TrafficKind::FullBuffer => self.scenario.bandwidth,
            crate::traffic::TrafficKind::PoissonMessaging => self.traffic.user_bandwidth,
        }
    }

    /// TOML serialization with the worker count zeroed; the worker count
    /// does not affect results.
    pub fn canonical_toml(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.workers = 0;
        to_toml(&canonical)
    }

    /// SHA-256 of [`canonical_toml`](Self::canonical_toml), hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = self.canonical_toml();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
