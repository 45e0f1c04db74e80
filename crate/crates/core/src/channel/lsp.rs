use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::profiles::ChannelProfile;

/// Caps on the angular spreads, degrees.
pub const MAX_AZIMUTH_SPREAD: f64 = 104.0;
pub const MAX_ZENITH_SPREAD: f64 = 52.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleParams {
    pub los: bool,
    /// Shadow fading, dB (positive is extra loss).
    pub sf: f64,
    /// Ricean K, dB. Meaningful only for LOS.
    pub k: f64,
    /// Delay spread, seconds.
    pub ds: f64,
    /// Angular spreads, degrees.
    pub asd: f64,
    pub asa: f64,
    pub zsd: f64,
    pub zsa: f64,
}

/// LSPs from seven independent standard normals, SF first.
pub fn lsp_from_normals(profile: &ChannelProfile, los: bool, carrier: f64, sf_sigma: f64, xi: &[f64; 7]) -> LargeScaleParams {
    let c = profile.condition(los);
    let x = profile.lsp_x(carrier);
    let l = &c.cholesky;
    let mut z = [0.0; 7];
    for (i, zi) in z.iter_mut().enumerate() {
        *zi = (0..=i).map(|j| l[i][j] * xi[j]).sum();
    }
    let lg = |law: &super::profiles::LspLaw, zi: f64| 10f64.powf(law.mean(x) + law.std(x) * zi);
    LargeScaleParams {
        los,
        sf: sf_sigma * z[0],
        k: c.k.mean(x) + c.k.std(x) * z[1],
        ds: lg(&c.ds, z[2]),
        asd: lg(&c.asd, z[3]).min(MAX_AZIMUTH_SPREAD),
        asa: lg(&c.asa, z[4]).min(MAX_AZIMUTH_SPREAD),
        zsd: lg(&c.zsd, z[5]).min(MAX_ZENITH_SPREAD),
        zsa: lg(&c.zsa, z[6]).min(MAX_ZENITH_SPREAD),
    }
}

/// Correlated LSPs given the already drawn SF normal `xi0`.
pub fn gen_lsp_given_sf<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    los: bool,
    carrier: f64,
    sf_sigma: f64,
    xi0: f64,
    rng: &mut R,
) -> LargeScaleParams {
    let mut xi = [xi0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for v in xi.iter_mut().skip(1) {
        *v = StandardNormal.sample(rng);
    }
    lsp_from_normals(profile, los, carrier, sf_sigma, &xi)
}

/// Correlated LSPs with the condition's nominal SF σ.
pub fn gen_lsp<R: Rng + ?Sized>(profile: &ChannelProfile, los: bool, carrier: f64, rng: &mut R) -> LargeScaleParams {
    let xi0: f64 = StandardNormal.sample(rng);
    gen_lsp_given_sf(profile, los, carrier, profile.condition(los).sf, xi0, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ProfileLibrary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn zero_sigma_gives_means() {
        let mut p = ProfileLibrary::builtin().get("UMa_A").unwrap().clone();
        for law in [&mut p.los.ds, &mut p.los.asd, &mut p.los.asa, &mut p.los.zsa, &mut p.los.zsd, &mut p.los.k] {
            law.sigma = [0.0, 0.0];
        }
        p.los.sf = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = gen_lsp(&p, true, 4e9, &mut rng);
        let x = p.lsp_x(4e9);
        assert_eq!(l.sf, 0.0);
        assert_eq!(l.k, 9.0);
        assert_eq!(l.ds, 10f64.powf(p.los.ds.mean(x)));
        assert_eq!(l.asa, 10f64.powf(p.los.asa.mean(x)));
    }

    #[test]
    fn ds_sf_correlation_matches_table() {
        let p = ProfileLibrary::builtin().get("UMa_A").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let (mut ds, mut sf) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let l = gen_lsp(p, true, 4e9, &mut rng);
            ds.push(l.ds.log10());
            sf.push(l.sf);
        }
        let r = corr(&ds, &sf);
        assert!((r - p.los.correlation[2][0]).abs() < 0.03, "{r}");
        let mean_sf = sf.iter().sum::<f64>() / n as f64;
        assert!(mean_sf.abs() < 3.0 * p.los.sf / (n as f64).sqrt());
    }

    #[test]
    fn spreads_positive_and_capped() {
        let p = ProfileLibrary::builtin().get("UMi_A").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            for los in [true, false] {
                let l = gen_lsp(p, los, 4e9, &mut rng);
                assert!(l.ds > 0.0 && l.asd > 0.0 && l.asa > 0.0 && l.zsd > 0.0 && l.zsa > 0.0);
                assert!(l.asa <= MAX_AZIMUTH_SPREAD && l.zsa <= MAX_ZENITH_SPREAD);
            }
        }
    }
}
