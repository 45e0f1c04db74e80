//! Drop loop, deterministic merge and KPI evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::calibrate::{calibrate_p0, Calibration};
use super::density::density_search;
use super::drop::{DropContext, DropResult};
use super::rng::STREAM_ALGORITHM;
use crate::error::{Error, Result};
use crate::geometry::{build_layout, NetworkLayout};
use crate::link::lin_to_db;
use crate::metrics::{
    avg_spectral_efficiency, connection_density_fullbuffer, mobility_check, occupied_bandwidth, pct5_user_se,
    reliability, user_experienced_data_rate, CdInputs, CdfEstimator, ConvergenceMonitor, ConvergenceState,
    DensitySearch, SeInputs,
};
use crate::scenario::{requirement_for, Direction, EvaluationConfig, Metric, RequirementSet, TestEnvironment, Variant};
use crate::traffic::TrafficKind;

/// Drops evaluated in parallel before the serial fold.
pub const CHUNK_DROPS: usize = 32;

/// CDF names, also used for the exported files.
pub const CDF_DL_SINR: &str = "dl_sinr";
pub const CDF_UL_SINR: &str = "ul_sinr";
pub const CDF_DL_SE: &str = "dl_user_se";
pub const CDF_UL_SE: &str = "ul_user_se";
pub const CDF_DL_THROUGHPUT: &str = "dl_throughput";
pub const CDF_UL_THROUGHPUT: &str = "ul_throughput";

/// One computed KPI with its requirement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiValue {
    pub direction: Direction,
    pub metric: Metric,
    pub value: f64,
    pub unit: &'static str,
    pub requirement: Option<f64>,
    pub pass: Option<bool>,
    /// CDF the value was read from.
    pub cdf: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub state: ConvergenceState,
    pub window: u32,
    pub tolerance: f64,
    /// Running mean of the per-drop mean UL SINR, dB.
    pub running_mean: f64,
    pub standard_error: f64,
    /// Per-drop mean UL SINR in drop order, dB.
    pub drop_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub environment: TestEnvironment,
    pub variant: Variant,
    pub config_hash: String,
    /// The hashed configuration text.
    pub config_toml: String,
    pub master_seed: u64,
    pub stream_algorithm: &'static str,
    pub drops_requested: u32,
    pub drops_run: u32,
    pub convergence: ConvergenceReport,
    pub cdfs: BTreeMap<&'static str, CdfEstimator>,
    pub kpis: Vec<KpiValue>,
    pub calibration: Calibration,
    /// Mean uplink interference over thermal measured in the run, dB.
    pub mean_iot_db: f64,
    /// Time-averaged uplink UEs multiplexed per TRxP.
    pub n_mux: f64,
    pub density_search: Option<DensitySearch>,
    /// Connection density by the full-buffer formula, devices/km².
    pub full_buffer_density: Option<f64>,
    /// Largest relative SINR consistency error over all samples.
    pub max_sinr_consistency_error: f64,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn kpi(&self, direction: Direction, metric: Metric) -> Option<&KpiValue> {
        self.kpis.iter().find(|k| k.direction == direction && k.metric == metric)
    }
}

/// Serial fold of drop results ordered by drop index.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    n_drops: u32,
    n_trxps: u32,
    dl_sinr: CdfEstimator,
    ul_sinr: CdfEstimator,
    dl_bits: Vec<f64>,
    ul_bits: Vec<f64>,
    iot_sum: f64,
    iot_count: u64,
    mux_sum: u64,
    mux_count: u64,
    max_consistency: f64,
    drop_means: Vec<f64>,
    last_index: Option<u32>,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the next drop; indices must arrive in increasing order.
    pub fn push(&mut self, d: &DropResult) -> Result<()> {
        if self.last_index.is_some_and(|i| i >= d.drop_index) {
            return Err(Error::Internal(format!("drop {} folded out of order", d.drop_index)));
        }
        if self.n_drops > 0 && self.n_trxps != d.n_trxps as u32 {
            return Err(Error::Internal("TRxP count changed between drops".into()));
        }
        self.last_index = Some(d.drop_index);
        self.n_drops += 1;
        self.n_trxps = d.n_trxps as u32;
        self.dl_sinr.extend(d.dl.iter().map(|s| s.sinr));
        self.ul_sinr.extend(d.ul.iter().map(|s| s.sinr));
        for s in d.dl.iter().chain(&d.ul) {
            self.max_consistency = self.max_consistency.max(s.consistency_error());
        }
        self.dl_bits.extend(d.dl_bits.iter().map(|&b| b as f64));
        self.ul_bits.extend(d.ul_bits.iter().map(|&b| b as f64));
        self.iot_sum += d.iot_sum;
        self.iot_count += d.iot_count;
        self.mux_sum += d.mux_sum;
        self.mux_count += d.mux_count;
        self.drop_means.push(d.mean_ul_sinr());
        Ok(())
    }

    /// Folds drops given in any order.
    pub fn from_drops(mut drops: Vec<DropResult>) -> Result<Self> {
        drops.sort_by_key(|d| d.drop_index);
        let mut acc = Accumulator::new();
        for d in &drops {
            acc.push(d)?;
        }
        Ok(acc)
    }

    pub fn n_drops(&self) -> u32 {
        self.n_drops
    }
}

fn worker_pool(workers: u32) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers as usize)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))
}

/// Calibrated per-run state.
pub struct Simulator<'a> {
    config: &'a EvaluationConfig,
    layout: &'a NetworkLayout,
    ctx: DropContext<'a>,
    calibration: Calibration,
}

impl<'a> Simulator<'a> {
    /// Validates the configuration and calibrates uplink power control on `layout`.
    pub fn new(config: &'a EvaluationConfig, layout: &'a NetworkLayout) -> Result<Self> {
        config.validate()?;
        let l = &config.link;
        let calibration = calibrate_p0(
            |p0| DropContext::new(config, layout, p0),
            l.pc_p0,
            l.iot_target,
            config.run.master_seed,
            config.run.calibration_drops,
        )?;
        let ctx = DropContext::new(config, layout, calibration.p0)?;
        Ok(Simulator {
            config,
            layout,
            ctx,
            calibration,
        })
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn run_drop(&self, drop_index: u32) -> Result<DropResult> {
        self.ctx.run(drop_index)
    }

    /// Runs the drop loop and evaluates the KPIs.
    pub fn run(&self) -> Result<RunResult> {
        self.run_observed(|_| Ok(()))
    }

    /// As [`Simulator::run`], handing each drop to `observe` in drop-index order.
    pub fn run_observed(&self, mut observe: impl FnMut(&DropResult) -> Result<()>) -> Result<RunResult> {
        let r = &self.config.run;
        let pool = worker_pool(r.workers)?;
        let cap = r.drops as usize;
        let mut monitor = ConvergenceMonitor::new(r.convergence_window as usize, r.convergence_tolerance, cap);
        let mut state = ConvergenceState::Continue;
        let mut acc = Accumulator::new();
        let mut next = 0u32;
        'drops: while next < r.drops {
            let end = (next as usize + CHUNK_DROPS).min(cap) as u32;
            let chunk: Vec<Result<DropResult>> =
                pool.install(|| (next..end).into_par_iter().map(|i| self.ctx.run(i)).collect());
            for d in chunk {
                let d = d?;
                acc.push(&d)?;
                observe(&d)?;
                state = monitor.push(d.mean_ul_sinr());
                if state == ConvergenceState::Capped || (r.early_stop && state == ConvergenceState::Converged) {
                    break 'drops;
                }
            }
            next = end;
        }
        if state == ConvergenceState::Continue && acc.n_drops() as usize >= cap {
            state = ConvergenceState::Capped;
        }
        self.finish(acc, monitor, state)
    }

    /// KPIs from folded drops.
    pub fn finish(&self, acc: Accumulator, monitor: ConvergenceMonitor, state: ConvergenceState) -> Result<RunResult> {
        let c = self.config;
        let s = &c.scenario;
        let env = s.environment;
        let t = c.run.duration_t;
        let w = s.bandwidth;
        let reqs = RequirementSet::builtin();
        let mut warnings = Vec::new();
        if let Some(wm) = &self.calibration.warning {
            warnings.push(wm.clone());
        }
        let mut acc = acc;
        acc.dl_sinr.sort();
        acc.ul_sinr.sort();
        let tput = |bits: &[f64]| -> Vec<f64> { bits.iter().map(|b| b / t).collect() };
        let dl_tput = tput(&acc.dl_bits);
        let ul_tput = tput(&acc.ul_bits);

        let n_mux = if acc.mux_count > 0 { acc.mux_sum as f64 / acc.mux_count as f64 } else { 0.0 };
        let mean_iot_db = if acc.iot_count > 0 { lin_to_db(acc.iot_sum / acc.iot_count as f64) } else { f64::NAN };
        if mean_iot_db > c.link.iot_target {
            warnings.push(format!(
                "measured mean IoT {mean_iot_db:.2} dB exceeds the {:.1} dB cap",
                c.link.iot_target
            ));
        }

        let mut density = None;
        let mut full_buffer_density = None;
        let mut kpis = Vec::new();
        for key in env.kpis() {
            let (dir, metric) = (key.direction, key.metric);
            let (bits, tputs, sinr) = match dir {
                Direction::Downlink => (&acc.dl_bits, &dl_tput, &acc.dl_sinr),
                Direction::Uplink => (&acc.ul_bits, &ul_tput, &acc.ul_sinr),
            };
            let (se_cdf, sinr_cdf, tput_cdf) = match dir {
                Direction::Downlink => (CDF_DL_SE, CDF_DL_SINR, CDF_DL_THROUGHPUT),
                Direction::Uplink => (CDF_UL_SE, CDF_UL_SINR, CDF_UL_THROUGHPUT),
            };
            let requirement = requirement_for(&reqs, env, dir, metric).ok();
            let (value, unit, cdf, detail) = match metric {
                Metric::AvgSe => {
                    let v = avg_spectral_efficiency(&SeInputs {
                        n_drops: acc.n_drops,
                        bits: bits.clone(),
                        duration: t,
                        bandwidth: w,
                        trxps: acc.n_trxps,
                    })?;
                    (v, "bit/s/Hz/TRxP", se_cdf, format!("{} TRxPs, {} drops", acc.n_trxps, acc.n_drops))
                }
                Metric::Pct5Se => {
                    let se: Vec<f64> = tputs.iter().map(|x| x / w).collect();
                    (pct5_user_se(&se)?, "bit/s/Hz", se_cdf, format!("{} users", se.len()))
                }
                Metric::UserExperiencedRate => {
                    (user_experienced_data_rate(tputs)?, "bit/s", tput_cdf, format!("{} users", tputs.len()))
                }
                Metric::Mobility { speed_kmh } => {
                    let m = mobility_check(
                        sinr,
                        speed_kmh as f64,
                        s.carrier_frequency,
                        &c.link.abstraction(Direction::Uplink),
                        &c.link.doppler_backoff,
                        c.link.subcarrier_spacing,
                        requirement.unwrap_or(0.0),
                    )?;
                    let detail = format!("median SINR {:.2} dB, Doppler backoff {:.1} dB", m.sinr, m.backoff);
                    (m.rate, "bit/s/Hz", sinr_cdf, detail)
                }
                Metric::Reliability => {
                    let rel = reliability(sinr, &c.link.bler(), &c.link.harq(), c.link.latency_budget)?;
                    (rel.success, "probability", sinr_cdf, format!("5th-percentile SINR {:.2} dB", rel.sinr))
                }
                Metric::ConnectionDensity => {
                    let area = self.area_km2();
                    if c.traffic.kind == TrafficKind::PoissonMessaging {
                        let samples = acc.ul_sinr.sorted_samples();
                        let search = density_search(c, &samples, area)?;
                        let detail = format!(
                            "p99 delay {:.3} s at the reported density; {} probes; efficiency {}, SINR floor {} dB",
                            search.delay,
                            search.probes.len(),
                            c.link.efficiency,
                            c.link.sinr_min
                        );
                        if !search.monotone {
                            warnings.push(format!(
                                "delay is not monotone in density; widest bracket {:?}",
                                search.bracket
                            ));
                        }
                        let v = search.density;
                        density = Some(search);
                        full_buffer_density = Some(self.full_buffer_density(&acc, n_mux)?.0);
                        (v, "devices/km2", sinr_cdf, detail)
                    } else {
                        let (v, detail) = self.full_buffer_density(&acc, n_mux)?;
                        full_buffer_density = Some(v);
                        (v, "devices/km2", sinr_cdf, detail)
                    }
                }
                other => {
                    return Err(Error::Internal(format!("{other} is not a simulated KPI")));
                }
            };
            let pass = requirement.map(|r| metric.meets(value, r));
            kpis.push(KpiValue {
                direction: dir,
                metric,
                value,
                unit,
                requirement,
                pass,
                cdf,
                detail,
            });
        }

        let se = |x: &[f64]| CdfEstimator::from_samples(x.iter().map(|v| v / w).collect());
        let mut cdfs = BTreeMap::new();
        cdfs.insert(CDF_DL_SE, se(&dl_tput));
        cdfs.insert(CDF_UL_SE, se(&ul_tput));
        cdfs.insert(CDF_DL_THROUGHPUT, CdfEstimator::from_samples(dl_tput));
        cdfs.insert(CDF_UL_THROUGHPUT, CdfEstimator::from_samples(ul_tput));
        let drop_means = std::mem::take(&mut acc.drop_means);
        let (n_drops, max_consistency) = (acc.n_drops, acc.max_consistency);
        cdfs.insert(CDF_DL_SINR, std::mem::take(&mut acc.dl_sinr));
        cdfs.insert(CDF_UL_SINR, std::mem::take(&mut acc.ul_sinr));

        Ok(RunResult {
            environment: env,
            variant: s.config_variant,
            config_hash: c.hash(),
            config_toml: c.canonical_toml(),
            master_seed: c.run.master_seed,
            stream_algorithm: STREAM_ALGORITHM,
            drops_requested: c.run.drops,
            drops_run: n_drops,
            convergence: ConvergenceReport {
                state,
                window: c.run.convergence_window,
                tolerance: c.run.convergence_tolerance,
                running_mean: monitor.running_mean(),
                standard_error: monitor.standard_error(),
                drop_means,
            },
            cdfs,
            kpis,
            calibration: self.calibration.clone(),
            mean_iot_db,
            n_mux,
            density_search: density,
            full_buffer_density,
            max_sinr_consistency_error: max_consistency,
            warnings,
        })
    }

    fn area_km2(&self) -> f64 {
        self.layout.trxp_area(0) / 1e6
    }

    /// n_mux · W / mean(B) over the TRxP area, B = offered load / uplink SE.
    fn full_buffer_density(&self, acc: &Accumulator, n_mux: f64) -> Result<(f64, String)> {
        let c = self.config;
        let abstraction = c.link.abstraction(Direction::Uplink);
        let load = c.traffic.offered_load();
        let w_user = c.traffic.user_bandwidth;
        let mut occupied = Vec::new();
        let mut unserved = 0usize;
        for &sinr in acc.ul_sinr.sorted_samples().iter() {
            let se = abstraction.sinr_to_se(sinr - c.link.estimation_backoff);
            if se > 0.0 {
                occupied.push(occupied_bandwidth(load, se * w_user, w_user));
            } else {
                unserved += 1;
            }
        }
        let v = connection_density_fullbuffer(&CdInputs {
            n_mux,
            bandwidth: c.scenario.bandwidth,
            occupied,
            isd: c.scenario.isd,
        })?;
        Ok((v, format!("n_mux {n_mux:.2}; {unserved} users below the SINR floor left out of mean(B)")))
    }
}

/// Runs `config` on its standard layout.
pub fn run(config: &EvaluationConfig) -> Result<RunResult> {
    let layout = build_layout(config);
    run_with_layout(config, &layout)
}

pub fn run_with_layout(config: &EvaluationConfig, layout: &NetworkLayout) -> Result<RunResult> {
    Simulator::new(config, layout)?.run()
}
