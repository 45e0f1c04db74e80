use super::{
    AntennaParams, EvaluationConfig, RunParams, ScenarioParams, TestEnvironment, Variant,
};
use crate::antenna::ArrayConfig;
use crate::error::{Error, Result};
use crate::link::LinkParams;
use crate::traffic::{TrafficKind, TrafficModelSpec};

/// Where each preset's values come from, as shown by `list-scenarios`.
pub const PRESET_SOURCES: [(TestEnvironment, &str); 5] = [
    (
        TestEnvironment::IndoorHotspotEmbb,
        "ITU-R M.2412 indoor hotspot eMBB; A/B select channel model A/B",
    ),
    (
        TestEnvironment::DenseUrbanEmbb,
        "ITU-R M.2412 dense urban eMBB (macro layer); A/B select channel model A/B",
    ),
    (
        TestEnvironment::RuralEmbb,
        "ITU-R M.2412 rural eMBB; A/B select channel model A/B",
    ),
    (
        TestEnvironment::UrbanMacroMmtc,
        "mMTC evaluation configuration; A: ISD 500 m, B: ISD 1732 m",
    ),
    (
        TestEnvironment::UrbanMacroUrllc,
        "URLLC evaluation configuration; A: 4 GHz up to 100 MHz, B: 700 MHz up to 40 MHz",
    ),
];

/// Total BS power: 49 dBm at 20 MHz scaled by 10·log10(W / 20 MHz), with the
/// 10 MHz anchor pinned at 46 dBm.
pub fn tx_power_for_bandwidth(bandwidth_hz: f64) -> f64 {
    if bandwidth_hz == 10e6 {
        46.0
    } else {
        49.0 + 10.0 * (bandwidth_hz / 20e6).log10()
    }
}

fn run_defaults() -> RunParams {
    RunParams {
        drops: 10_000,
        master_seed: 1,
        duration_t: 0.1,
        workers: 0,
        early_stop: false,
        convergence_window: 100,
        convergence_tolerance: 1e-3,
        fading_samples: 4,
        calibration_drops: 4,
        density_min: 1e5,
        density_max: 1e8,
        density_step: 1e5,
        density_horizon: 600.0,
    }
}

fn macro_scenario(environment: TestEnvironment, variant: Variant) -> ScenarioParams {
    ScenarioParams {
        environment,
        config_variant: variant,
        carrier_frequency: 4e9,
        isd: 500.0,
        bs_height: 25.0,
        ue_height: 1.5,
        bs_tx_power: tx_power_for_bandwidth(20e6),
        ue_tx_power: 23.0,
        bs_noise_figure: 5.0,
        ue_noise_figure: 7.0,
        bs_element_gain: 8.0,
        ue_element_gain: 0.0,
        thermal_noise_density: -174.0,
        bandwidth: 20e6,
        indoor_fraction: 0.8,
        high_loss_fraction: 0.2,
        ue_speed_indoor: 3.0,
        ue_speed_outdoor: 30.0,
        ues_per_trxp: 10,
        channel_profile: "UMa_A".to_string(),
        min_ue_distance: 35.0,
        micro_layer: false,
    }
}

fn bs_panel(m: u32, n: u32, p: u32, mp: u32, np: u32, tilt: f64) -> ArrayConfig {
    let mut a = ArrayConfig::panel(m, n, p, 1, 1, mp, np);
    a.electrical_downtilt = tilt;
    a
}

fn ue_array(n: u32, p: u32) -> ArrayConfig {
    let mut a = ArrayConfig::single_isotropic();
    a.n = n;
    a.np = n;
    a.p = p;
    a.panel_spacing_h = n as f64 * 0.5;
    a
}

fn full_buffer(resources: u32, bandwidth: f64) -> TrafficModelSpec {
    TrafficModelSpec {
        kind: TrafficKind::FullBuffer,
        pdu_size: 32,
        rate: 0.0,
        user_bandwidth: bandwidth,
        resources,
        pf_constant: 0.01,
        slot_duration: 1e-3,
        message_overhead: 0.0,
    }
}

fn channel_variant(variant: Variant, base: &str) -> String {
    match variant {
        Variant::A => format!("{base}_A"),
        Variant::B => format!("{base}_B"),
    }
}

/// Fully populated configuration for an (environment, variant) pair.
pub fn preset(environment: TestEnvironment, variant: Variant) -> Result<EvaluationConfig> {
    let link = LinkParams::default();
    let mut run = run_defaults();
    let config = match environment {
        TestEnvironment::UrbanMacroMmtc => {
            let mut s = macro_scenario(environment, variant);
            s.carrier_frequency = 700e6;
            s.isd = match variant {
                Variant::A => 500.0,
                Variant::B => 1732.0,
            };
            s.bandwidth = 10e6;
            s.bs_tx_power = tx_power_for_bandwidth(10e6);
            s.ue_speed_outdoor = 3.0;
            run.fading_samples = 1;
            EvaluationConfig {
                scenario: s,
                antenna: AntennaParams {
                    bs: bs_panel(4, 1, 2, 1, 1, 12.0),
                    ue: ArrayConfig::single_isotropic(),
                },
                traffic: TrafficModelSpec {
                    kind: TrafficKind::PoissonMessaging,
                    pdu_size: 32,
                    rate: 1.0 / 7200.0,
                    // Twelve 15 kHz single tones: one 180 kHz NB-IoT carrier.
                    user_bandwidth: 15e3,
                    resources: 12,
                    pf_constant: 0.01,
                    slot_duration: 1e-3,
                    message_overhead: 0.0,
                },
                link: LinkParams {
                    sinr_min: -15.0,
                    ..link
                },
                run,
            }
        }
        TestEnvironment::UrbanMacroUrllc => {
            let mut s = macro_scenario(environment, variant);
            s.indoor_fraction = 0.2;
            s.high_loss_fraction = 0.0;
            let (bs, ue) = match variant {
                Variant::A => {
                    s.carrier_frequency = 4e9;
                    s.bandwidth = 100e6;
                    (bs_panel(8, 4, 2, 1, 4, 12.0), ue_array(2, 2))
                }
                Variant::B => {
                    s.carrier_frequency = 700e6;
                    s.bandwidth = 40e6;
                    (bs_panel(4, 2, 2, 1, 2, 12.0), ue_array(1, 2))
                }
            };
            s.bs_tx_power = tx_power_for_bandwidth(s.bandwidth);
            EvaluationConfig {
                scenario: s.clone(),
                antenna: AntennaParams { bs, ue },
                traffic: full_buffer(10, s.bandwidth),
                link,
                run,
            }
        }
        TestEnvironment::DenseUrbanEmbb => {
            let mut s = macro_scenario(environment, variant);
            s.isd = 200.0;
            s.bs_tx_power = 44.0;
            s.channel_profile = channel_variant(variant, "UMa");
            EvaluationConfig {
                scenario: s,
                antenna: AntennaParams {
                    bs: bs_panel(8, 8, 2, 2, 8, 9.0),
                    ue: ue_array(2, 2),
                },
                traffic: full_buffer(10, 20e6),
                link,
                run,
            }
        }
        TestEnvironment::RuralEmbb => {
            let mut s = macro_scenario(environment, variant);
            s.carrier_frequency = 700e6;
            s.isd = 1732.0;
            s.bs_height = 35.0;
            s.bandwidth = 10e6;
            s.bs_tx_power = tx_power_for_bandwidth(10e6);
            s.indoor_fraction = 0.5;
            s.high_loss_fraction = 0.0;
            s.ue_speed_outdoor = 120.0;
            s.channel_profile = channel_variant(variant, "RMa");
            EvaluationConfig {
                scenario: s,
                antenna: AntennaParams {
                    bs: bs_panel(8, 4, 2, 1, 4, 3.0),
                    ue: ue_array(2, 2),
                },
                traffic: full_buffer(10, 10e6),
                link,
                run,
            }
        }
        TestEnvironment::IndoorHotspotEmbb => {
            let mut s = macro_scenario(environment, variant);
            s.isd = 20.0;
            s.bs_height = 3.0;
            s.bs_tx_power = 24.0;
            s.bs_element_gain = 5.0;
            s.indoor_fraction = 1.0;
            s.high_loss_fraction = 0.0;
            s.ue_speed_indoor = 3.0;
            s.ue_speed_outdoor = 3.0;
            s.min_ue_distance = 0.0;
            s.channel_profile = channel_variant(variant, "InH");
            let mut bs = bs_panel(4, 4, 2, 4, 4, 0.0);
            bs.downtilt = 90.0;
            EvaluationConfig {
                scenario: s,
                antenna: AntennaParams {
                    bs,
                    ue: ue_array(2, 2),
                },
                traffic: full_buffer(10, 20e6),
                link,
                run,
            }
        }
    };
    Ok(config)
}

/// Preset lookup by names as typed on the command line.
pub fn preset_by_name(environment: &str, variant: &str) -> Result<EvaluationConfig> {
    let unknown = || Error::UnknownPreset {
        environment: environment.to_string(),
        variant: variant.to_string(),
    };
    let env: TestEnvironment = environment.parse().map_err(|_| unknown())?;
    let var: Variant = variant.parse().map_err(|_| unknown())?;
    preset(env, var)
}
