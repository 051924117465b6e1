//! The guide in `book/` is built with mdbook, which cannot run snippets that
//! depend on workspace crates. Each chapter is included here as the docs of
//! an empty module so `cargo test --doc` runs its code blocks instead.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/bsplines.md")]
pub mod bsplines {}
#[doc = include_str!("../../../book/src/coefficients.md")]
pub mod coefficients {}
#[doc = include_str!("../../../book/src/adaptive.md")]
pub mod adaptive {}
#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}
#[doc = include_str!("../../../book/src/estimation.md")]
pub mod estimation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
