use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::lsp::LargeScaleParams;
use super::profiles::ConditionParams;

/// Intra-cluster ray offsets for a unit cluster spread, degrees.
pub const RAY_OFFSETS: [f64; 20] = [
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129, 0.6797, -0.6797, 0.8844,
    -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
];

const C_PHI: [(f64, f64); 12] = [
    (4.0, 0.779),
    (5.0, 0.860),
    (8.0, 1.018),
    (10.0, 1.090),
    (11.0, 1.123),
    (12.0, 1.146),
    (14.0, 1.190),
    (15.0, 1.211),
    (16.0, 1.226),
    (19.0, 1.273),
    (20.0, 1.289),
    (25.0, 1.358),
];

const C_THETA: [(f64, f64); 8] = [
    (8.0, 0.889),
    (10.0, 0.957),
    (11.0, 1.031),
    (12.0, 1.104),
    (15.0, 1.1088),
    (19.0, 1.184),
    (20.0, 1.178),
    (25.0, 1.282),
];

fn interpolate(table: &[(f64, f64)], n: f64) -> f64 {
    if n <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        if n <= w[1].0 {
            let t = (n - w[0].0) / (w[1].0 - w[0].0);
            return w[0].1 + t * (w[1].1 - w[0].1);
        }
    }
    table[table.len() - 1].1
}

/// Global LOS directions of a link, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosAngles {
    pub aod: f64,
    pub zod: f64,
    pub aoa: f64,
    pub zoa: f64,
}

impl LosAngles {
    /// Directions between a transmitter and receiver position.
    pub fn between(tx: [f64; 3], rx: [f64; 3]) -> Self {
        let (dx, dy, dz) = (rx[0] - tx[0], rx[1] - tx[1], rx[2] - tx[2]);
        let d2 = (dx * dx + dy * dy).sqrt();
        let aod = dy.atan2(dx).to_degrees();
        let zod = d2.atan2(dz).to_degrees();
        LosAngles {
            aod,
            zod,
            aoa: crate::antenna::wrap_deg(aod + 180.0),
            zoa: 180.0 - zod,
        }
    }
}

/// Cluster and ray structure of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    /// Seconds, ascending, first is zero.
    pub delays: Vec<f64>,
    /// Total power per cluster including the specular LOS share; sums to 1.
    pub powers: Vec<f64>,
    /// Scattered power per cluster; sums to 1.
    pub nlos_powers: Vec<f64>,
    /// Linear Ricean K; zero for NLOS.
    pub k_factor: f64,
    pub aoa: Vec<f64>,
    pub aod: Vec<f64>,
    pub zoa: Vec<f64>,
    pub zod: Vec<f64>,
    /// Per ray, flattened as cluster * rays_per_cluster + ray, after coupling.
    pub ray_aoa: Vec<f64>,
    pub ray_aod: Vec<f64>,
    pub ray_zoa: Vec<f64>,
    pub ray_zod: Vec<f64>,
    /// Linear cross-polarization power ratio per ray.
    pub xpr: Vec<f64>,
    /// Initial phases (θθ, θφ, φθ, φφ) per ray, radians in (−π, π].
    pub phases: Vec<[f64; 4]>,
    pub los_angles: LosAngles,
}

impl ClusterSet {
    /// Power-weighted rms delay spread, seconds.
    pub fn rms_delay_spread(&self) -> f64 {
        let mean: f64 = self.delays.iter().zip(&self.powers).map(|(t, p)| t * p).sum();
        let second: f64 = self.delays.iter().zip(&self.powers).map(|(t, p)| t * t * p).sum();
        (second - mean * mean).max(0.0).sqrt()
    }
}

fn wrap_zenith(theta: f64) -> f64 {
    let t = theta.rem_euclid(360.0);
    if t > 180.0 {
        360.0 - t
    } else {
        t
    }
}

fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (−π, π]
    PI - rng.random::<f64>() * 2.0 * PI
}

/// Cluster delays, powers, angles, coupling, XPR and phases.
///
/// `zsd_mu_lg` is the mean log10 ZSD of the condition, which sets the ZOD ray
/// spread. `indoor` centres arrival zenith angles on the horizon.
#[allow(clippy::too_many_arguments)]
pub fn gen_clusters<R: Rng + ?Sized>(
    params: &ConditionParams,
    lsp: &LargeScaleParams,
    n_clusters: usize,
    n_rays: usize,
    zsd_mu_lg: f64,
    los_angles: LosAngles,
    indoor: bool,
    rng: &mut R,
) -> ClusterSet {
    let n = n_clusters.max(1);
    let m = n_rays.clamp(1, 20);
    let r_tau = params.r_tau;
    let k_db = lsp.k;
    let k_lin = if lsp.los { 10f64.powf(k_db / 10.0) } else { 0.0 };

    // delays
    let mut raw: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -r_tau * lsp.ds * (1.0 - u).ln()
        })
        .collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    for t in raw.iter_mut() {
        *t -= min;
    }
    raw.sort_by(f64::total_cmp);

    // powers
    let zeta = Normal::new(0.0, params.zeta.max(0.0)).expect("finite zeta");
    let mut nlos_powers: Vec<f64> = raw
        .iter()
        .map(|&t| {
            let z: f64 = zeta.sample(rng);
            (-t * (r_tau - 1.0) / (r_tau * lsp.ds)).exp() * 10f64.powf(-z / 10.0)
        })
        .collect();
    let total: f64 = nlos_powers.iter().sum();
    for p in nlos_powers.iter_mut() {
        *p /= total;
    }
    let mut powers: Vec<f64> = nlos_powers.iter().map(|p| p / (k_lin + 1.0)).collect();
    powers[0] += k_lin / (k_lin + 1.0);
    // re-normalize so the sum is 1 to rounding
    let s: f64 = powers.iter().sum();
    for p in powers.iter_mut() {
        *p /= s;
    }

    let delays = if lsp.los {
        let c_tau = 0.7705 - 0.0433 * k_db + 0.0002 * k_db.powi(2) + 0.000017 * k_db.powi(3);
        raw.iter().map(|t| t / c_tau).collect()
    } else {
        raw
    };

    // angles
    let pmax = powers.iter().copied().fold(0.0, f64::max);
    let nf = n as f64;
    let (mut c_phi, mut c_theta) = (interpolate(&C_PHI, nf), interpolate(&C_THETA, nf));
    if lsp.los {
        c_phi *= 1.1035 - 0.028 * k_db - 0.002 * k_db.powi(2) + 0.0001 * k_db.powi(3);
        c_theta *= 1.3086 + 0.0339 * k_db - 0.0077 * k_db.powi(2) + 0.0002 * k_db.powi(3);
    }
    let ln_rel: Vec<f64> = powers.iter().map(|&p| (p / pmax).max(1e-300).ln()).collect();

    let azimuths = |spread: f64, centre: f64, rng: &mut R| -> Vec<f64> {
        let y = Normal::new(0.0, spread / 7.0).expect("finite spread");
        let v: Vec<f64> = ln_rel
            .iter()
            .map(|&lr| {
                let base = 2.0 * (spread / 1.4) * (-lr).sqrt() / c_phi;
                let x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x * base + y.sample(rng)
            })
            .collect();
        let shift = if lsp.los { v[0] } else { 0.0 };
        v.iter().map(|a| crate::antenna::wrap_deg(a - shift + centre)).collect()
    };
    let aoa = azimuths(lsp.asa, los_angles.aoa, rng);
    let aod = azimuths(lsp.asd, los_angles.aod, rng);

    let zeniths = |spread: f64, centre: f64, rng: &mut R| -> Vec<f64> {
        let y = Normal::new(0.0, spread / 7.0).expect("finite spread");
        let v: Vec<f64> = ln_rel
            .iter()
            .map(|&lr| {
                let base = -spread * lr / c_theta;
                let x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x * base + y.sample(rng)
            })
            .collect();
        let shift = if lsp.los { v[0] } else { 0.0 };
        v.iter().map(|a| a - shift + centre).collect()
    };
    let zoa_centre = if indoor && !lsp.los { 90.0 } else { los_angles.zoa };
    let zoa = zeniths(lsp.zsa, zoa_centre, rng);
    let zod = zeniths(lsp.zsd, los_angles.zod, rng);
    let zoa: Vec<f64> = zoa.into_iter().map(wrap_zenith).collect();
    let zod: Vec<f64> = zod.into_iter().map(wrap_zenith).collect();

    // rays and coupling
    let offsets: Vec<f64> = if m == 1 { vec![0.0] } else { RAY_OFFSETS[..m].to_vec() };
    let zod_ray_spread = 0.375 * 10f64.powf(zsd_mu_lg);
    let xpr_law = Normal::new(params.xpr_mu, params.xpr_sigma.max(0.0)).expect("finite XPR law");
    let mut ray_aoa = Vec::with_capacity(n * m);
    let mut ray_aod = Vec::with_capacity(n * m);
    let mut ray_zoa = Vec::with_capacity(n * m);
    let mut ray_zod = Vec::with_capacity(n * m);
    let mut xpr = Vec::with_capacity(n * m);
    let mut phases = Vec::with_capacity(n * m);
    let mut perm: Vec<usize> = (0..m).collect();
    for c in 0..n {
        let base = &offsets;
        for &o in base {
            ray_aoa.push(crate::antenna::wrap_deg(aoa[c] + params.c_asa * o));
        }
        perm.shuffle(rng);
        for &i in &perm {
            ray_aod.push(crate::antenna::wrap_deg(aod[c] + params.c_asd * base[i]));
        }
        perm.shuffle(rng);
        for &i in &perm {
            ray_zoa.push(wrap_zenith(zoa[c] + params.c_zsa * base[i]));
        }
        perm.shuffle(rng);
        for &i in &perm {
            ray_zod.push(wrap_zenith(zod[c] + zod_ray_spread * base[i]));
        }
        for _ in 0..m {
            let x: f64 = xpr_law.sample(rng);
            xpr.push(10f64.powf(x / 10.0));
        }
        for _ in 0..m {
            phases.push([uniform_phase(rng), uniform_phase(rng), uniform_phase(rng), uniform_phase(rng)]);
        }
    }
    ClusterSet {
        n_clusters: n,
        rays_per_cluster: m,
        delays,
        powers,
        nlos_powers,
        k_factor: k_lin,
        aoa,
        aod,
        zoa,
        zod,
        ray_aoa,
        ray_aod,
        ray_zoa,
        ray_zod,
        xpr,
        phases,
        los_angles,
    }
}
