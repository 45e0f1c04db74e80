use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::profiles::{ChannelProfile, Family};
use crate::error::{Error, Result};
use crate::link::SPEED_OF_LIGHT;

/// Shortest 3D distance the pathloss models accept, meters.
pub const MIN_DISTANCE_3D: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationCondition {
    pub los: bool,
    pub p_los: f64,
}

/// LOS probability as a function of 2D distance.
pub fn p_los(family: Family, d2d: f64) -> f64 {
    match family {
        Family::UMa | Family::UMi => {
            if d2d <= 18.0 {
                1.0
            } else {
                let decay = if family == Family::UMa { 63.0 } else { 36.0 };
                18.0 / d2d + (-d2d / decay).exp() * (1.0 - 18.0 / d2d)
            }
        }
        Family::RMa => {
            if d2d <= 10.0 {
                1.0
            } else {
                (-(d2d - 10.0) / 1000.0).exp()
            }
        }
        Family::InH => {
            if d2d <= 1.2 {
                1.0
            } else if d2d < 6.5 {
                (-(d2d - 1.2) / 4.7).exp()
            } else {
                (-(d2d - 6.5) / 32.6).exp() * 0.32
            }
        }
    }
}

pub fn assign_los<R: Rng + ?Sized>(profile: &ChannelProfile, d2d: f64, rng: &mut R) -> PropagationCondition {
    let p = p_los(profile.family, d2d);
    let u: f64 = rng.random();
    PropagationCondition { los: u < p, p_los: p }
}

/// Free-space loss at 1 m, dB.
pub fn fspl_1m(carrier: f64) -> f64 {
    20.0 * (4.0 * PI * carrier / SPEED_OF_LIGHT).log10()
}

/// LOS breakpoint distance, meters; infinite when the family has none.
pub fn breakpoint(family: Family, carrier: f64, h_bs: f64, h_ut: f64) -> f64 {
    match family {
        Family::UMa | Family::UMi => 4.0 * (h_bs - 1.0).max(0.1) * (h_ut - 1.0).max(0.1) * carrier / SPEED_OF_LIGHT,
        Family::RMa => 2.0 * PI * h_bs * h_ut * carrier / SPEED_OF_LIGHT,
        Family::InH => f64::INFINITY,
    }
}

/// Pathloss in dB from distances and heights.
pub fn pathloss_db(profile: &ChannelProfile, los: bool, carrier: f64, d3d: f64, h_bs: f64, h_ut: f64) -> Result<f64> {
    if !(d3d >= MIN_DISTANCE_3D) {
        return Err(Error::Domain(format!("3D distance {d3d} m below {MIN_DISTANCE_3D} m")));
    }
    Ok(pathloss_unchecked(profile, los, carrier, d3d, h_bs, h_ut))
}

#[inline]
pub(crate) fn pathloss_unchecked(profile: &ChannelProfile, los: bool, carrier: f64, d3d: f64, h_bs: f64, h_ut: f64) -> f64 {
    let d = d3d.max(MIN_DISTANCE_3D);
    let anchor = fspl_1m(carrier);
    let bp = breakpoint(profile.family, carrier, h_bs, h_ut).max(MIN_DISTANCE_3D);
    let pl_los = if d <= bp {
        anchor + 10.0 * profile.n1 * d.log10()
    } else {
        anchor + 10.0 * profile.n1 * bp.log10() + 10.0 * profile.n2 * (d / bp).log10()
    };
    if los {
        return pl_los;
    }
    let [a, n, b] = profile.nlos_pathloss;
    pl_los.max(a + 10.0 * n * d.log10() + b * (carrier / 1e9).log10())
}

/// Pathloss between two positions.
pub fn pathloss(profile: &ChannelProfile, los: bool, carrier: f64, tx: [f64; 3], rx: [f64; 3]) -> Result<f64> {
    let d3d = ((tx[0] - rx[0]).powi(2) + (tx[1] - rx[1]).powi(2) + (tx[2] - rx[2]).powi(2)).sqrt();
    pathloss_db(profile, los, carrier, d3d, tx[2].max(rx[2]), tx[2].min(rx[2]))
}

/// Shadow-fading σ for a link.
pub fn shadow_sigma(profile: &ChannelProfile, los: bool, carrier: f64, d2d: f64, h_bs: f64, h_ut: f64) -> f64 {
    let c = profile.condition(los);
    match c.sf_far {
        Some(far) if los && d2d > breakpoint(profile.family, carrier, h_bs, h_ut) => far,
        _ => c.sf,
    }
}

/// Mean building penetration loss through the wall, dB.
pub fn wall_loss(carrier: f64, high_loss: bool) -> f64 {
    let f = carrier / 1e9;
    let concrete = 5.0 + 4.0 * f;
    let mix = if high_loss {
        let irr_glass = 23.0 + 0.3 * f;
        0.7 * 10f64.powf(-irr_glass / 10.0) + 0.3 * 10f64.powf(-concrete / 10.0)
    } else {
        let glass = 2.0 + 0.2 * f;
        0.3 * 10f64.powf(-glass / 10.0) + 0.7 * 10f64.powf(-concrete / 10.0)
    };
    5.0 - 10.0 * mix.log10()
}

/// Outdoor-to-indoor loss: wall, indoor path and a normal spread (4.4 or 6.5 dB).
pub fn o2i_loss<R: Rng + ?Sized>(carrier: f64, high_loss: bool, indoor_distance: f64, rng: &mut R) -> f64 {
    let sigma = if high_loss { 6.5 } else { 4.4 };
    let z: f64 = StandardNormal.sample(rng);
    wall_loss(carrier, high_loss) + 0.5 * indoor_distance + sigma * z
}
