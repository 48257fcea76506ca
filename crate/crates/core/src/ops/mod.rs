//! Dense kernels with hand-written vector-Jacobian products.
//!
//! Every forward op here has a companion `*_vjp` that maps a cotangent on the
//! output back to cotangents on the inputs. Reductions accumulate in `f64`
//! in a fixed left-to-right order so results are bit-reproducible.

mod channels;
mod classify;
mod conv;
mod elementwise;
mod pool;

pub use channels::{concat_channels, split_channels};
pub use classify::{dot_rows, dot_rows_vjp, log_softmax_nll, log_softmax_nll_vjp, softmax_rows};
pub use conv::{conv1d, conv1d_vjp, Conv1dGrads, Conv1dSpec};
pub use elementwise::{map_unary, map_unary_vjp, reduce, reduce_vjp, Reduction, UnaryFn};
pub use pool::{avg_pool1d, avg_pool1d_vjp, pooled_len};
