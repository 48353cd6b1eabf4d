pub mod data;
pub mod error;
pub mod seed;
pub mod transforms;

pub use error::{Error, Result};
pub mod models;
pub mod metrics;
pub mod ga;
pub mod baselines;
pub mod stats;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/practices.md")]
    mod practices {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
}
