use super::{EvaluationConfig, TestEnvironment, Variant};
use crate::antenna::ArrayConfig;
use crate::channel::ProfileLibrary;
use crate::error::{Error, Result};
use crate::traffic::TrafficKind;

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

fn in_range(x: f64, lo: f64, hi: f64, field: &str) -> Result<()> {
    check(
        x.is_finite() && x >= lo && x <= hi,
        field,
        &format!("must lie in [{lo}, {hi}], got {x}"),
    )
}

fn positive(x: f64, field: &str) -> Result<()> {
    check(x.is_finite() && x > 0.0, field, &format!("must be positive, got {x}"))
}

fn array(a: &ArrayConfig, prefix: &str) -> Result<()> {
    let f = |name: &str| format!("{prefix}.{name}");
    for (v, name) in [(a.m, "M"), (a.n, "N"), (a.mg, "Mg"), (a.ng, "Ng"), (a.mp, "Mp"), (a.np, "Np")] {
        check(v >= 1, &f(name), "count must be at least 1")?;
    }
    check(a.p == 1 || a.p == 2, &f("P"), "polarizations must be 1 or 2")?;
    check(a.mp <= a.m && a.m.is_multiple_of(a.mp), &f("Mp"), "must divide M")?;
    check(a.np <= a.n && a.n.is_multiple_of(a.np), &f("Np"), "must divide N")?;
    check(a.element_count() <= 4096, &f("M"), "more than 4096 elements")?;
    positive(a.element_spacing_h, &f("element_spacing_h"))?;
    positive(a.element_spacing_v, &f("element_spacing_v"))?;
    positive(a.panel_spacing_h, &f("panel_spacing_h"))?;
    positive(a.panel_spacing_v, &f("panel_spacing_v"))?;
    in_range(a.bearing, -360.0, 360.0, &f("bearing"))?;
    in_range(a.downtilt, -90.0, 90.0, &f("downtilt"))?;
    in_range(a.electrical_downtilt, -90.0, 90.0, &f("electrical_downtilt"))?;
    in_range(a.h_beamwidth, 1.0, 360.0, &f("h_beamwidth"))?;
    in_range(a.v_beamwidth, 1.0, 180.0, &f("v_beamwidth"))?;
    in_range(a.front_back_ratio, 0.0, 100.0, &f("front_back_ratio"))?;
    in_range(a.sidelobe_limit, 0.0, 100.0, &f("sidelobe_limit"))
}

pub(super) fn validate(c: &EvaluationConfig) -> Result<()> {
    let s = &c.scenario;
    in_range(s.carrier_frequency, 0.5e9, 100e9, "scenario.carrier_frequency")?;
    positive(s.isd, "scenario.isd")?;
    check(s.isd <= 1e5, "scenario.isd", "must not exceed 100 km")?;
    in_range(s.bs_height, 1.0, 150.0, "scenario.bs_height")?;
    in_range(s.ue_height, 1.0, 22.5, "scenario.ue_height")?;
    in_range(s.bs_tx_power, -30.0, 80.0, "scenario.bs_tx_power")?;
    in_range(s.ue_tx_power, -40.0, 40.0, "scenario.ue_tx_power")?;
    in_range(s.bs_noise_figure, 0.0, 30.0, "scenario.bs_noise_figure")?;
    in_range(s.ue_noise_figure, 0.0, 30.0, "scenario.ue_noise_figure")?;
    in_range(s.bs_element_gain, -30.0, 30.0, "scenario.bs_element_gain")?;
    in_range(s.ue_element_gain, -30.0, 30.0, "scenario.ue_element_gain")?;
    in_range(s.thermal_noise_density, -200.0, -100.0, "scenario.thermal_noise_density")?;
    positive(s.bandwidth, "scenario.bandwidth")?;
    check(s.bandwidth <= 2e9, "scenario.bandwidth", "must not exceed 2 GHz")?;
    if s.environment == TestEnvironment::UrbanMacroUrllc {
        let cap = match s.config_variant {
            Variant::A => 100e6,
            Variant::B => 40e6,
        };
        check(s.bandwidth <= cap, "scenario.bandwidth", &format!("URLLC {} caps bandwidth at {cap} Hz", s.config_variant))?;
    }
    in_range(s.indoor_fraction, 0.0, 1.0, "scenario.indoor_fraction")?;
    in_range(s.high_loss_fraction, 0.0, 1.0, "scenario.high_loss_fraction")?;
    in_range(s.ue_speed_indoor, 0.0, 1000.0, "scenario.ue_speed_indoor")?;
    in_range(s.ue_speed_outdoor, 0.0, 1000.0, "scenario.ue_speed_outdoor")?;
    check(
        (1..=10_000).contains(&s.ues_per_trxp),
        "scenario.ues_per_trxp",
        "must lie in [1, 10000]",
    )?;
    check(
        ProfileLibrary::builtin().get(&s.channel_profile).is_some(),
        "scenario.channel_profile",
        &format!("unknown channel profile `{}`", s.channel_profile),
    )?;
    in_range(s.min_ue_distance, 0.0, s.isd.max(1.0), "scenario.min_ue_distance")?;

    array(&c.antenna.bs, "antenna.bs")?;
    array(&c.antenna.ue, "antenna.ue")?;

    let t = &c.traffic;
    if t.kind == TrafficKind::PoissonMessaging {
        check(t.pdu_size > 0, "traffic.pdu_size", "must be positive for Poisson messaging")?;
        positive(t.rate, "traffic.rate")?;
    } else {
        in_range(t.rate, 0.0, 1e6, "traffic.rate")?;
    }
    positive(t.user_bandwidth, "traffic.user_bandwidth")?;
    check(
        t.user_bandwidth <= s.bandwidth,
        "traffic.user_bandwidth",
        "must not exceed scenario.bandwidth",
    )?;
    check(
        (1..=10_000).contains(&t.resources),
        "traffic.resources",
        "must lie in [1, 10000]",
    )?;
    check(
        t.pf_constant > 0.0 && t.pf_constant <= 1.0,
        "traffic.pf_constant",
        "must lie in (0, 1]",
    )?;
    positive(t.slot_duration, "traffic.slot_duration")?;
    in_range(t.message_overhead, 0.0, 3600.0, "traffic.message_overhead")?;

    let l = &c.link;
    check(
        l.efficiency > 0.0 && l.efficiency <= 1.0,
        "link.efficiency",
        "must lie in (0, 1]",
    )?;
    positive(l.se_max_dl, "link.se_max_dl")?;
    positive(l.se_max_ul, "link.se_max_ul")?;
    in_range(l.sinr_min, -50.0, 50.0, "link.sinr_min")?;
    in_range(l.estimation_backoff, 0.0, 30.0, "link.estimation_backoff")?;
    in_range(l.bler_sinr_50, -50.0, 50.0, "link.bler_sinr_50")?;
    positive(l.bler_slope, "link.bler_slope")?;
    check(
        l.bler_floor >= 0.0 && l.bler_floor < 1.0,
        "link.bler_floor",
        "must lie in [0, 1)",
    )?;
    check(l.harq_max_transmissions >= 1, "link.harq_max_transmissions", "must be at least 1")?;
    positive(l.harq_transmission_time, "link.harq_transmission_time")?;
    in_range(l.harq_combining_gain, 0.0, 30.0, "link.harq_combining_gain")?;
    positive(l.latency_budget, "link.latency_budget")?;
    in_range(l.pc_p0, -200.0, 40.0, "link.pc_p0")?;
    in_range(l.pc_alpha, 0.0, 1.0, "link.pc_alpha")?;
    positive(l.iot_target, "link.iot_target")?;
    positive(l.subcarrier_spacing, "link.subcarrier_spacing")?;
    check(!l.doppler_backoff.is_empty(), "link.doppler_backoff", "table must not be empty")?;
    for w in l.doppler_backoff.windows(2) {
        check(
            w[1][0] > w[0][0] && w[1][1] >= w[0][1],
            "link.doppler_backoff",
            "thresholds must increase and backoffs must not decrease",
        )?;
    }
    for e in &l.doppler_backoff {
        check(
            e[0] >= 0.0 && e[1] >= 0.0 && e[0].is_finite() && e[1].is_finite(),
            "link.doppler_backoff",
            "entries must be finite and non-negative",
        )?;
    }

    let r = &c.run;
    check(
        (1..=10_000_000).contains(&r.drops),
        "run.drops",
        "must lie in [1, 10000000]",
    )?;
    check(
        r.master_seed <= i64::MAX as u64,
        "run.master_seed",
        "must fit in a signed 64-bit integer",
    )?;
    positive(r.duration_t, "run.duration_T")?;
    check(
        r.duration_t >= t.slot_duration,
        "run.duration_T",
        "must cover at least one scheduling slot",
    )?;
    check(r.workers <= 1024, "run.workers", "must not exceed 1024")?;
    check(r.convergence_window >= 1, "run.convergence_window", "must be at least 1")?;
    positive(r.convergence_tolerance, "run.convergence_tolerance")?;
    check(
        (1..=1000).contains(&r.fading_samples),
        "run.fading_samples",
        "must lie in [1, 1000]",
    )?;
    check(r.calibration_drops >= 1, "run.calibration_drops", "must be at least 1")?;
    positive(r.density_min, "run.density_min")?;
    check(
        r.density_max.is_finite() && r.density_max > r.density_min,
        "run.density_max",
        "must exceed run.density_min",
    )?;
    positive(r.density_step, "run.density_step")?;
    check(
        (r.density_max - r.density_min) / r.density_step <= 1e7,
        "run.density_step",
        "grid has more than 1e7 points",
    )?;
    positive(r.density_horizon, "run.density_horizon")
}
