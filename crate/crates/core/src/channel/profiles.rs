use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/profiles.toml");

/// Propagation family; selects the LOS-probability curve and pathloss shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    UMa,
    UMi,
    RMa,
    InH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyScale {
    Log10Fc,
    #[serde(rename = "log10_1_plus_fc")]
    Log10OnePlusFc,
}

/// A log-normal (or normal, for K) parameter: mean and σ are `a + b·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LspLaw {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
}

impl LspLaw {
    pub fn mean(&self, x: f64) -> f64 {
        self.mu[0] + self.mu[1] * x
    }

    pub fn std(&self, x: f64) -> f64 {
        (self.sigma[0] + self.sigma[1] * x).max(0.0)
    }
}

/// Parameters of one propagation condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionParams {
    pub ds: LspLaw,
    pub asd: LspLaw,
    pub asa: LspLaw,
    pub zsa: LspLaw,
    pub zsd: LspLaw,
    pub k: LspLaw,
    /// Shadow-fading σ, dB.
    pub sf: f64,
    /// Shadow-fading σ beyond the LOS breakpoint, when it differs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sf_far: Option<f64>,
    pub r_tau: f64,
    pub xpr_mu: f64,
    pub xpr_sigma: f64,
    pub c_asd: f64,
    pub c_asa: f64,
    pub c_zsa: f64,
    /// Per-cluster shadowing σ, dB.
    pub zeta: f64,
    pub clusters: u32,
    pub rays: u32,
    /// Order SF, K, DS, ASD, ASA, ZSD, ZSA.
    pub correlation: [[f64; 7]; 7],
    #[serde(skip)]
    pub cholesky: [[f64; 7]; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    #[serde(skip)]
    pub name: String,
    pub family: Family,
    pub lsp_frequency: FrequencyScale,
    /// LSP tables use max(fc, this) in GHz.
    pub min_lsp_frequency_ghz: f64,
    /// Outdoor-to-indoor penetration applies to indoor UEs.
    pub o2i: bool,
    pub n1: f64,
    pub n2: f64,
    /// `[A, n, B]` of the NLOS formula.
    pub nlos_pathloss: [f64; 3],
    pub los: ConditionParams,
    pub nlos: ConditionParams,
}

impl ChannelProfile {
    pub fn condition(&self, los: bool) -> &ConditionParams {
        if los {
            &self.los
        } else {
            &self.nlos
        }
    }

    /// Frequency variable of the LSP tables.
    pub fn lsp_x(&self, carrier: f64) -> f64 {
        let ghz = (carrier / 1e9).max(self.min_lsp_frequency_ghz);
        match self.lsp_frequency {
            FrequencyScale::Log10Fc => ghz.log10(),
            FrequencyScale::Log10OnePlusFc => (1.0 + ghz).log10(),
        }
    }
}

/// Lower Cholesky factor of a symmetric matrix; fails unless positive definite.
pub fn cholesky7(m: &[[f64; 7]; 7]) -> Option<[[f64; 7]; 7]> {
    let mut l = [[0.0; 7]; 7];
    for i in 0..7 {
        for j in 0..=i {
            if (m[i][j] - m[j][i]).abs() > 1e-12 {
                return None;
            }
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn prepare(name: &str, cond: &str, c: &mut ConditionParams) -> Result<()> {
    let field = format!("{name}.{cond}");
    c.cholesky = cholesky7(&c.correlation).ok_or_else(|| {
        Error::invalid(format!("{field}.correlation"), "matrix is not symmetric positive definite")
    })?;
    if c.clusters == 0 || c.rays == 0 || c.rays > 20 {
        return Err(Error::invalid(format!("{field}.clusters"), "need at least one cluster and 1..=20 rays"));
    }
    if !(c.r_tau > 0.0) || c.sf < 0.0 || c.zeta < 0.0 {
        return Err(Error::invalid(field, "r_tau must be positive, sf and zeta non-negative"));
    }
    Ok(())
}

/// Named channel profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileLibrary {
    profiles: BTreeMap<String, ChannelProfile>,
}

impl ProfileLibrary {
    pub fn builtin() -> &'static ProfileLibrary {
        static LIB: OnceLock<ProfileLibrary> = OnceLock::new();
        LIB.get_or_init(|| ProfileLibrary::from_toml_str(BUILTIN).expect("shipped profiles are valid"))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, ChannelProfile> =
            toml::from_str(text).map_err(|e| Error::ConfigSyntax(e.to_string()))?;
        let mut profiles = BTreeMap::new();
        for (name, mut p) in raw {
            p.name = name.clone();
            prepare(&name, "los", &mut p.los)?;
            prepare(&name, "nlos", &mut p.nlos)?;
            profiles.insert(name, p);
        }
        Ok(ProfileLibrary { profiles })
    }

    pub fn get(&self, name: &str) -> Option<&ChannelProfile> {
        self.profiles.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    /// TOML text of one profile in the data-file layout.
    pub fn dump(&self, name: &str) -> Option<String> {
        let p = self.get(name)?;
        let mut outer = toml::Table::new();
        outer.insert(name.to_string(), toml::Value::try_from(p).expect("profile serializes"));
        Some(toml::to_string(&outer).expect("profile serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_load() {
        let lib = ProfileLibrary::builtin();
        let names: Vec<_> = lib.names().collect();
        for n in ["UMa_A", "UMa_B", "UMi_A", "UMi_B", "RMa_A", "RMa_B", "InH_A", "InH_B"] {
            assert!(names.contains(&n), "{n}");
        }
        assert!(lib.get("nope").is_none());
    }

    #[test]
    fn every_correlation_matrix_factors() {
        for n in ProfileLibrary::builtin().names() {
            let p = ProfileLibrary::builtin().get(n).unwrap();
            for c in [&p.los, &p.nlos] {
                let l = c.cholesky;
                for i in 0..7 {
                    for j in 0..7 {
                        let s: f64 = (0..7).map(|k| l[i][k] * l[j][k]).sum();
                        assert!((s - c.correlation[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn non_definite_matrix_is_rejected() {
        let mut c = ProfileLibrary::builtin().get("UMa_A").unwrap().los.clone();
        // SF-ZSA and ASA-ZSA near one while SF-ASA is negative
        c.correlation[0][6] = -0.99;
        c.correlation[6][0] = -0.99;
        c.correlation[4][6] = 0.99;
        c.correlation[6][4] = 0.99;
        assert!(matches!(prepare("X", "los", &mut c), Err(Error::ConfigInvalid { .. })));
    }

    #[test]
    fn dump_round_trips() {
        let lib = ProfileLibrary::builtin();
        let text = lib.dump("RMa_A").unwrap();
        let again = ProfileLibrary::from_toml_str(&text).unwrap();
        assert_eq!(again.get("RMa_A"), lib.get("RMa_A"));
    }

    #[test]
    fn frequency_floor() {
        let p = ProfileLibrary::builtin().get("UMa_A").unwrap();
        assert_eq!(p.lsp_x(700e6), 6f64.log10());
        assert_eq!(p.lsp_x(28e9), 28f64.log10());
    }
}
