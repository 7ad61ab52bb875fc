//! Finite-precision state-space models over `ℤ/2ᵖ`, the K-function
//! composition task, communication-protocol simulation of multi-layer
//! models, and chain-of-thought/streaming equivalences.

pub mod constructions;
pub mod cot;
pub mod error;
pub mod protocol;
pub mod random;
pub mod ring;
pub mod rules;
pub mod ssm;
pub mod streaming;
pub mod task;
pub mod verify;

pub use error::{Error, Result};
pub use ring::{AffineMap, BitString, Budget, Order, Precision, RingMatrix, RingScalar, RingVector};
pub use ssm::{Embed, InputAlphabet, LayerRule, RunTrace, SSMachine, StepContext, Token, TokenKind};
pub use task::{CompositionInstance, PCInstance, TokenStream};

// The guide's snippets run as doc-tests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ring.md")]
    mod ring {}
    #[doc = include_str!("../../../book/src/machines.md")]
    mod machines {}
    #[doc = include_str!("../../../book/src/composition.md")]
    mod composition {}
    #[doc = include_str!("../../../book/src/protocols.md")]
    mod protocols {}
    #[doc = include_str!("../../../book/src/cot.md")]
    mod cot {}
    #[doc = include_str!("../../../book/src/algebra.md")]
    mod algebra {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
