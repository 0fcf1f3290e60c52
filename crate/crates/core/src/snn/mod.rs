//! Spiking actor network: LIF layers joined by dense or dendritic connections,
//! with optional lateral interaction inside each layer.

mod actor;
mod dendritic;
mod lateral;
mod lif;

pub use actor::{ActorVariant, Inter, SnnConfig, SpikingActor, SpikingLayer, SpikingTrace};
pub use dendritic::{
    build_mask, dendritic_var, inter_dendritic, inter_dense, BranchMask, DendriticLayer,
};
pub use lateral::{intra_lateral, lateral_var, neighbour, LateralConnection};
pub use lif::{lif_step, lif_step_var, LifConfig, LifLayerState, LifVars};
