//! Propagation: pathloss, large-scale parameters, clusters and fast fading.

pub mod clusters;
pub mod coefficients;
pub mod lsp;
pub mod pathloss;
pub mod profiles;

pub use clusters::{gen_clusters, ClusterSet, LosAngles};
pub use coefficients::{apply_pl_sf, channel_coeff, ChannelRealization, CoefficientGenerator};
pub use lsp::{gen_lsp, gen_lsp_given_sf, LargeScaleParams};
pub use pathloss::{assign_los, o2i_loss, p_los, pathloss, pathloss_db, shadow_sigma, PropagationCondition};
pub use profiles::{ChannelProfile, Family, ProfileLibrary};
