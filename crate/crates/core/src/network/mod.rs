//! The GIG network: GVU and GGU modules, hidden and output layers, and the
//! embedding and readout around them.

mod check;
mod layers;
mod layout;
mod model;

pub use check::{random_network_gradcheck, CHECK_FEATURE_DIM, CHECK_GIG_VERTICES, CHECK_HIDDEN_DIM, CHECK_MAX_VERTICES, CHECK_STEP};
pub use layers::{
    ggu_forward, gvu_forward, hidden_layer_forward, output_layer_forward, output_refresh, GigState, LayerFlags,
};
pub use layout::{PreparedSample, SampleLayout};
pub use model::{GigNetwork, ModelDims, NetworkConfig, Readout};
