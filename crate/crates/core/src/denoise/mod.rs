//! Per-stage denoisers `𝒟_k`.

use alloc::sync::Arc;
use core::fmt;

use crate::error::Result;
use crate::tensor::DataCube;

pub mod generative;
pub mod network;
pub mod subspace;
pub mod tv;

pub use generative::{generative_project, lipschitz_estimate, DescentSettings, GenerativeModel};
pub use network::{run_network, NetworkWeights};
pub use subspace::SubspaceBasis;
pub use tv::{tv_denoise, TvParams};

/// Anything that maps a cube to a same-shaped cube.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, x: &DataCube) -> Result<DataCube>;
}

#[derive(Clone)]
pub enum DenoiserStage {
    Identity,
    Tv(TvParams),
    Network(NetworkWeights),
    Subspace(SubspaceBasis),
    Generative(GenerativeModel, DescentSettings),
    Custom(Arc<dyn Denoiser>),
}

impl fmt::Debug for DenoiserStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserStage::Identity => f.write_str("Identity"),
            DenoiserStage::Tv(p) => f.debug_tuple("Tv").field(p).finish(),
            DenoiserStage::Network(w) => write!(f, "Network({} layers, stage {})", w.layers.len(), w.stage),
            DenoiserStage::Subspace(q) => write!(f, "Subspace(rank {})", q.rank()),
            DenoiserStage::Generative(m, _) => write!(f, "Generative(latent {})", m.latent_dim()),
            DenoiserStage::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl DenoiserStage {
    pub fn denoise(&self, x: &DataCube) -> Result<DataCube> {
        match self {
            DenoiserStage::Identity => Ok(x.clone()),
            DenoiserStage::Tv(p) => Ok(tv_denoise(x, p.weight, p.iters)),
            DenoiserStage::Network(w) => run_network(w, x),
            DenoiserStage::Subspace(q) => q.project(x),
            DenoiserStage::Generative(m, s) => Ok(generative_project(m, x, s)?.v),
            DenoiserStage::Custom(d) => d.denoise(x),
        }
    }
}

impl Denoiser for DenoiserStage {
    fn denoise(&self, x: &DataCube) -> Result<DataCube> {
        DenoiserStage::denoise(self, x)
    }
}
