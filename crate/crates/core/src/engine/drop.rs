//! One drop: placement, large-scale links, attachment, serving-link fading,
//! SINR and proportional-fair scheduling.

use std::borrow::Cow;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::rng::{link_id, Domain, DropStreams, StreamKind};
use crate::antenna::{ArrayConfig, PortArray};
use crate::channel::pathloss::pathloss_unchecked;
use crate::channel::{
    assign_los, gen_clusters, gen_lsp_given_sf, o2i_loss, shadow_sigma, ChannelProfile, ChannelRealization,
    CoefficientGenerator, LosAngles, ProfileLibrary,
};
use crate::error::{Error, Result};
use crate::geometry::{attach, drop_ues, wrap_image, NetworkLayout, Tier, UePlacement};
use crate::link::{db_to_lin, lin_to_db, noise_power_with_density, sinr_from_totals, uplink_power_control, SinrSample};
use crate::scenario::{Direction, EvaluationConfig, TestEnvironment};
use crate::traffic::{schedule_pf, SchedulerState, TrafficKind};

/// Micro TRxPs transmit this much below the macro power, dB.
pub const MICRO_POWER_OFFSET_DB: f64 = 11.0;

/// Everything one drop contributes to a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropResult {
    pub drop_index: u32,
    /// TRxPs active in this drop, micro layer included.
    pub n_trxps: usize,
    /// Placements with their serving TRxP.
    pub ues: Vec<UePlacement>,
    pub dl: Vec<SinrSample>,
    pub ul: Vec<SinrSample>,
    /// Bits delivered per UE over the drop.
    pub dl_bits: Vec<u64>,
    pub ul_bits: Vec<u64>,
    /// Σ of linear uplink interference over thermal across TRxPs and fading samples.
    pub iot_sum: f64,
    pub iot_count: u64,
    /// Σ of distinct uplink UEs per TRxP and slot, and the number of such slots.
    pub mux_sum: u64,
    pub mux_count: u64,
}

impl DropResult {
    /// Mean uplink SINR over the drop's UEs, dB.
    pub fn mean_ul_sinr(&self) -> f64 {
        if self.ul.is_empty() {
            return f64::NAN;
        }
        self.ul.iter().map(|s| s.sinr).sum::<f64>() / self.ul.len() as f64
    }
}

/// Large-scale state of one UE–TRxP link.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkState {
    pub pathloss: f64,
    pub sf_sigma: f64,
    /// Standard normal behind the shadow fading.
    pub xi0: f64,
    pub o2i: f64,
    pub los: bool,
    pub d3d: f64,
    /// Pathloss, shadowing and penetration, dB.
    pub loss: f64,
    /// Loss minus the BS and UE port gains toward each other, dB.
    pub coupling: f64,
    pub angles: LosAngles,
}

/// Geometry and large-scale links of a drop; all that uplink calibration needs.
pub(crate) struct LargeScale<'l> {
    pub layout: Cow<'l, NetworkLayout>,
    pub ues: Vec<UePlacement>,
    pub ue_arrays: Vec<PortArray>,
    /// UE-major, `ues.len() * n_trxps`.
    pub links: Vec<LinkState>,
    pub serving: Vec<usize>,
    /// UEs attached to each TRxP, ascending.
    pub members: Vec<Vec<u32>>,
}

impl LargeScale<'_> {
    pub fn n_trxps(&self) -> usize {
        self.layout.trxps.len()
    }

    pub fn link(&self, ue: usize, trxp: usize) -> &LinkState {
        &self.links[ue * self.n_trxps() + trxp]
    }
}

/// Immutable per-run state shared by every drop.
pub struct DropContext<'a> {
    config: &'a EvaluationConfig,
    layout: &'a NetworkLayout,
    macro_profile: &'static ChannelProfile,
    micro_profile: &'static ChannelProfile,
    macro_arrays: Vec<PortArray>,
    micro_array: PortArray,
    /// Uplink power control target, dBm.
    p0: f64,
    noise_dl_mw: f64,
    noise_ul_mw: f64,
}

fn profile(name: &str) -> Result<&'static ChannelProfile> {
    ProfileLibrary::builtin()
        .get(name)
        .ok_or_else(|| Error::invalid("scenario.channel_profile", format!("no channel profile named {name}")))
}

/// Profile of the micro layer: the UMi profile of the same variant.
fn micro_profile_name(macro_name: &str) -> String {
    match macro_name.rsplit_once('_') {
        Some((_, variant)) => format!("UMi_{variant}"),
        None => "UMi_A".to_string(),
    }
}

impl<'a> DropContext<'a> {
    pub fn new(config: &'a EvaluationConfig, layout: &'a NetworkLayout, p0: f64) -> Result<Self> {
        let s = &config.scenario;
        let macro_profile = profile(&s.channel_profile)?;
        let micro_profile = profile(&micro_profile_name(&s.channel_profile))?;
        let macro_arrays = layout
            .trxps
            .iter()
            .map(|t| PortArray::new(&config.antenna.bs, s.bs_element_gain, t.boresight))
            .collect::<Result<Vec<_>>>()?;
        let micro_array = PortArray::new(&ArrayConfig::single_isotropic(), s.bs_element_gain, 0.0)?;
        Ok(DropContext {
            config,
            layout,
            macro_profile,
            micro_profile,
            macro_arrays,
            micro_array,
            p0,
            noise_dl_mw: db_to_lin(noise_power_with_density(
                s.thermal_noise_density,
                s.bandwidth,
                s.ue_noise_figure,
            )),
            noise_ul_mw: db_to_lin(noise_power_with_density(
                s.thermal_noise_density,
                config.ul_bandwidth(),
                s.bs_noise_figure,
            )),
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    fn bs_array(&self, layout: &NetworkLayout, t: usize) -> &PortArray {
        match layout.trxps[t].tier {
            Tier::Macro => &self.macro_arrays[t],
            Tier::Micro => &self.micro_array,
        }
    }

    fn profile_of(&self, layout: &NetworkLayout, t: usize) -> &'static ChannelProfile {
        match layout.trxps[t].tier {
            Tier::Macro => self.macro_profile,
            Tier::Micro => self.micro_profile,
        }
    }

    fn tx_power(&self, layout: &NetworkLayout, t: usize) -> f64 {
        let p = self.config.scenario.bs_tx_power;
        match layout.trxps[t].tier {
            Tier::Macro => p,
            Tier::Micro => p - MICRO_POWER_OFFSET_DB,
        }
    }

    fn wants_micro_layer(&self) -> bool {
        let s = &self.config.scenario;
        s.micro_layer
            && s.environment == TestEnvironment::DenseUrbanEmbb
            && self.layout.trxps.iter().all(|t| t.tier == Tier::Macro)
    }

    /// Placement, pathloss, shadowing, penetration, port gains and attachment.
    pub(crate) fn large_scale(&self, streams: &DropStreams) -> Result<LargeScale<'a>> {
        let s = &self.config.scenario;
        let fc = s.carrier_frequency;
        let layout: Cow<'a, NetworkLayout> = if self.wants_micro_layer() {
            let mut rng = streams.stream(link_id(StreamKind::MicroLayer, 0, 0));
            Cow::Owned(self.layout.with_micro_layer(&mut rng)?)
        } else {
            Cow::Borrowed(self.layout)
        };
        let mut ues = drop_ues(&layout, self.config, &mut streams.stream(link_id(StreamKind::Geometry, 0, 0)));
        let n_t = layout.trxps.len();
        let ue_arrays = ues
            .iter()
            .map(|u| PortArray::new(&self.config.antenna.ue, s.ue_element_gain, u.direction.to_degrees()))
            .collect::<Result<Vec<_>>>()?;
        let mut links = Vec::with_capacity(ues.len() * n_t);
        for (u, ue) in ues.iter().enumerate() {
            let mut rng = streams.stream(link_id(StreamKind::LargeScale, u as u32, 0));
            for t in 0..n_t {
                let trxp = &layout.trxps[t];
                let img = wrap_image(&layout, ue.position, trxp.position);
                let (dx, dy, dz) = (ue.position[0] - img[0], ue.position[1] - img[1], ue.position[2] - img[2]);
                let d2d = (dx * dx + dy * dy).sqrt();
                let d3d = (d2d * d2d + dz * dz).sqrt();
                let prof = self.profile_of(&layout, t);
                let los = assign_los(prof, d2d, &mut rng).los;
                let (h_bs, h_ut) = (img[2].max(ue.position[2]), img[2].min(ue.position[2]));
                let pathloss = pathloss_unchecked(prof, los, fc, d3d, h_bs, h_ut);
                let sf_sigma = shadow_sigma(prof, los, fc, d2d, h_bs, h_ut);
                let xi0: f64 = StandardNormal.sample(&mut rng);
                let o2i = if ue.indoor && prof.o2i {
                    o2i_loss(fc, ue.high_loss, ue.indoor_distance, &mut rng)
                } else {
                    0.0
                };
                let angles = LosAngles::between(img, ue.position);
                let g_bs = self.bs_array(&layout, t).port_gain_db(angles.aod, angles.zod);
                let g_ue = ue_arrays[u].port_gain_db(angles.aoa, angles.zoa);
                let loss = pathloss + sf_sigma * xi0 + o2i;
                links.push(LinkState {
                    pathloss,
                    sf_sigma,
                    xi0,
                    o2i,
                    los,
                    d3d,
                    loss,
                    coupling: loss - g_bs - g_ue,
                    angles,
                });
            }
        }
        let serving: Vec<usize> = (0..ues.len()).map(|u| attach(n_t, |t| links[u * n_t + t].coupling)).collect();
        let mut members = vec![Vec::new(); n_t];
        for (u, &t) in serving.iter().enumerate() {
            members[t].push(u as u32);
            ues[u].serving_trxp = Some(t);
        }
        Ok(LargeScale {
            layout,
            ues,
            ue_arrays,
            links,
            serving,
            members,
        })
    }

    /// Uplink transmit power of every UE under the current P0, dBm.
    pub(crate) fn ul_powers(&self, ls: &LargeScale) -> Vec<f64> {
        let l = &self.config.link;
        (0..ls.ues.len())
            .map(|u| {
                let cl = ls.link(u, ls.serving[u]).coupling;
                uplink_power_control(cl, self.p0, l.pc_alpha, self.config.scenario.ue_tx_power)
            })
            .collect()
    }

    /// One randomly chosen active UE per TRxP for each fading sample.
    pub(crate) fn ul_interferers(&self, ls: &LargeScale, streams: &DropStreams) -> Vec<Vec<Option<u32>>> {
        (0..self.fading_samples())
            .map(|k| {
                let mut rng = streams.stream(link_id(StreamKind::Scheduler, k as u32, 0));
                ls.members
                    .iter()
                    .map(|m| (!m.is_empty()).then(|| m[rng.random_range(0..m.len())]))
                    .collect()
            })
            .collect()
    }

    fn fading_samples(&self) -> usize {
        self.config.run.fading_samples.max(1) as usize
    }

    pub(crate) fn noise_ul_mw(&self) -> f64 {
        self.noise_ul_mw
    }

    /// Band-averaged serving-link gain at each fading sample.
    fn serving_gains(&self, ls: &LargeScale, u: usize, streams: &DropStreams) -> Vec<f64> {
        let fc = self.config.scenario.carrier_frequency;
        let s = ls.serving[u];
        let ue = &ls.ues[u];
        let link = ls.link(u, s);
        let prof = self.profile_of(&ls.layout, s);
        let cond = prof.condition(link.los);
        let mut rng = streams.stream(link_id(StreamKind::Serving, u as u32, s as u32));
        let lsp = gen_lsp_given_sf(prof, link.los, fc, link.sf_sigma, link.xi0, &mut rng);
        let clusters = gen_clusters(
            cond,
            &lsp,
            cond.clusters as usize,
            cond.rays as usize,
            cond.zsd.mean(prof.lsp_x(fc)),
            link.angles,
            ue.indoor,
            &mut rng,
        );
        let real = ChannelRealization {
            pathloss: link.pathloss,
            shadow: link.sf_sigma * link.xi0,
            penetration: link.o2i,
            los: link.los,
            clusters,
            speed: ue.speed,
            direction: ue.direction,
            carrier: fc,
            distance_3d: link.d3d,
        };
        let gen = CoefficientGenerator::new(&real, self.bs_array(&ls.layout, s), &ls.ue_arrays[u]);
        let k_n = self.fading_samples();
        let dt = self.config.run.duration_t / k_n as f64;
        (0..k_n).map(|k| gen.wideband_gain(k as f64 * dt)).collect()
    }

    /// Runs one drop.
    pub fn run(&self, drop_index: u32) -> Result<DropResult> {
        let streams = DropStreams::new(Domain::Drop, self.config.run.master_seed, drop_index as u64);
        let ls = self.large_scale(&streams)?;
        let n_u = ls.ues.len();
        let n_t = ls.n_trxps();
        let k_n = self.fading_samples();

        let gains: Vec<Vec<f64>> = (0..n_u).map(|u| self.serving_gains(&ls, u, &streams)).collect();

        // downlink: every other TRxP transmits at full power
        let tx: Vec<f64> = (0..n_t).map(|t| self.tx_power(&ls.layout, t)).collect();
        let mut dl_sinr = vec![0.0; n_u * k_n];
        let mut dl = Vec::with_capacity(n_u);
        for u in 0..n_u {
            let s = ls.serving[u];
            let interference: f64 = (0..n_t)
                .filter(|&t| t != s)
                .map(|t| db_to_lin(tx[t] - ls.link(u, t).coupling))
                .sum();
            let base = db_to_lin(tx[s] - ls.link(u, s).loss);
            let mut mean_signal = 0.0;
            for k in 0..k_n {
                let signal = base * gains[u][k];
                mean_signal += signal / k_n as f64;
                dl_sinr[u * k_n + k] = lin_to_db(signal / (interference + self.noise_dl_mw));
            }
            dl.push(sinr_from_totals(u as u32, Direction::Downlink, mean_signal, interference, self.noise_dl_mw));
        }

        // uplink: one interfering UE per other TRxP and fading sample
        let powers = self.ul_powers(&ls);
        let picks = self.ul_interferers(&ls, &streams);
        let ul_interference: Vec<Vec<f64>> = picks.iter().map(|p| uplink_interference(&ls, &powers, p)).collect();
        let iot_sum: f64 = ul_interference.iter().flatten().map(|i| i / self.noise_ul_mw).sum();
        let iot_count = (k_n * n_t) as u64;
        let mut ul_sinr = vec![0.0; n_u * k_n];
        let mut ul = Vec::with_capacity(n_u);
        for u in 0..n_u {
            let s = ls.serving[u];
            let base = db_to_lin(powers[u] - ls.link(u, s).loss);
            let (mut mean_signal, mut mean_interference) = (0.0, 0.0);
            for k in 0..k_n {
                let signal = base * gains[u][k];
                let interference = ul_interference[k][s];
                mean_signal += signal / k_n as f64;
                mean_interference += interference / k_n as f64;
                ul_sinr[u * k_n + k] = lin_to_db(signal / (interference + self.noise_ul_mw));
            }
            ul.push(sinr_from_totals(u as u32, Direction::Uplink, mean_signal, mean_interference, self.noise_ul_mw));
        }

        let dl_sched = self.schedule(&ls, Direction::Downlink, &dl_sinr);
        let ul_sched = self.schedule(&ls, Direction::Uplink, &ul_sinr);

        Ok(DropResult {
            drop_index,
            n_trxps: n_t,
            ues: ls.ues,
            dl,
            ul,
            dl_bits: dl_sched.bits,
            ul_bits: ul_sched.bits,
            iot_sum,
            iot_count,
            mux_sum: ul_sched.mux_sum,
            mux_count: ul_sched.mux_count,
        })
    }

    /// Bandwidth of one scheduler resource, Hz.
    fn resource_bandwidth(&self, direction: Direction) -> f64 {
        let tr = &self.config.traffic;
        if direction == Direction::Uplink && tr.kind == TrafficKind::PoissonMessaging {
            tr.user_bandwidth
        } else {
            self.config.scenario.bandwidth / tr.resources.max(1) as f64
        }
    }

    /// Full-buffer proportional-fair scheduling of every TRxP over the drop.
    fn schedule(&self, ls: &LargeScale, direction: Direction, sinr: &[f64]) -> Scheduled {
        let tr = &self.config.traffic;
        let abstraction = self.config.link.abstraction(direction);
        let backoff = self.config.link.estimation_backoff;
        let k_n = self.fading_samples();
        let slot = tr.slot_duration;
        let n_slots = ((self.config.run.duration_t / slot).round() as usize).max(1);
        let w_res = self.resource_bandwidth(direction);
        let mut bits = vec![0.0f64; ls.ues.len()];
        let (mut mux_sum, mut mux_count) = (0u64, 0u64);
        let mut rates = Vec::new();
        for m in &ls.members {
            if m.is_empty() {
                continue;
            }
            let local: Vec<u32> = (0..m.len() as u32).collect();
            let mut state = SchedulerState::new(m.len(), tr.pf_constant);
            for j in 0..n_slots {
                let k = j * k_n / n_slots;
                rates.clear();
                rates.extend(
                    m.iter()
                        .map(|&u| abstraction.sinr_to_se(sinr[u as usize * k_n + k] - backoff) * w_res),
                );
                for r in schedule_pf(&local, &rates, &mut state, tr.resources) {
                    bits[m[r as usize] as usize] += rates[r as usize] * slot;
                }
            }
            mux_sum += state.multiplexed.iter().map(|&x| x as u64).sum::<u64>();
            mux_count += state.multiplexed.len() as u64;
        }
        Scheduled {
            bits: bits.into_iter().map(|b| b.floor() as u64).collect(),
            mux_sum,
            mux_count,
        }
    }
}

struct Scheduled {
    bits: Vec<u64>,
    mux_sum: u64,
    mux_count: u64,
}

/// Uplink interference at every TRxP from the other TRxPs' chosen UEs, mW.
pub(crate) fn uplink_interference(ls: &LargeScale, powers: &[f64], picks: &[Option<u32>]) -> Vec<f64> {
    let n_t = ls.n_trxps();
    (0..n_t)
        .map(|t| {
            picks
                .iter()
                .enumerate()
                .filter(|&(src, _)| src != t)
                .filter_map(|(_, p)| *p)
                .map(|i| db_to_lin(powers[i as usize] - ls.link(i as usize, t).coupling))
                .sum()
        })
        .collect()
}

/// Runs one drop of `config` on `layout` with the configured P0.
pub fn run_drop(config: &EvaluationConfig, layout: &NetworkLayout, drop_index: u32) -> Result<DropResult> {
    config.validate()?;
    DropContext::new(config, layout, config.link.pc_p0)?.run(drop_index)
}
