//! Guide listings compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/phm.md")]
pub mod phm {}
#[doc = include_str!("../../../book/src/kinetic.md")]
pub mod kinetic {}
#[doc = include_str!("../../../book/src/structured.md")]
pub mod structured {}
#[doc = include_str!("../../../book/src/unstructured.md")]
pub mod unstructured {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
