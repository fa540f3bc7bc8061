//! Dense arrays, reverse-mode differentiation, dropout and Adam.

mod adam;
mod graph;
mod param;
mod tensor;

pub use adam::Adam;
pub use graph::{cosine_value, Gradients, Graph, GraphConfig, NodeId};
pub use param::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
