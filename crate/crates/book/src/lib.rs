//! Compiles the user guide's code snippets as doc-tests.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/intro.md")]
pub struct Intro;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ambiguity.md")]
pub struct Ambiguity;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/dividend.md")]
pub struct Dividend;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/american.md")]
pub struct American;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/oracles.md")]
pub struct Oracles;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;
