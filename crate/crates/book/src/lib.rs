//! Compiles the guide's snippets as doc-tests, one module per chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/gridworlds.md")]
pub mod gridworlds {}
#[doc = include_str!("../../../book/src/low_level.md")]
pub mod low_level {}
#[doc = include_str!("../../../book/src/high_level.md")]
pub mod high_level {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/interpreting.md")]
pub mod interpreting {}
#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
