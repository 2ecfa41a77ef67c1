//! Small neural-network toolkit with hand-written backward passes.
//!
//! Parameters are stored as `f32` and mirrored as `f64` for computation. Every
//! layer exposes `forward` returning its output plus a cache, and `backward`
//! that accumulates parameter gradients and returns the input gradient.

mod attention;
mod conv;
mod encoder;
mod gru;
mod layers;
mod linalg;
mod mat;
mod params;

pub use attention::{AttentionCache, MultiHeadAttention};
pub use conv::Conv1d;
pub use encoder::{Encoder, EncoderCache, EncoderKind, EncoderSpec};
pub use gru::{GruCache, GruCell};
pub use layers::{relu_backward_in_place, relu_in_place, Embedding, LayerNorm, Linear, LnCache};
pub use linalg::{add_matmul, add_matmul_at, matmul_bt};
pub use mat::Mat;
pub use params::{Gradients, Init, ParamId, ParamStore};
