//! Differentially private synthetic tabular data with an autoregressive
//! transformer.
//!
//! Rows are encoded column by column into disjoint token ranges, a small
//! decoder-only transformer learns the chain-rule factorization of the row
//! distribution, and training uses per-example clipping, Gaussian noise and
//! Poisson subsampling with Rényi accounting. Alongside the generator the
//! crate carries an evaluation suite, a maximum-entropy laboratory for
//! marginal-based models, and a Dyck-language benchmark.

pub mod autodiff;
pub mod data;
pub mod model;
pub mod privacy;
pub mod train;
pub mod dyck;
pub mod maxent;
pub mod metrics;
