//! Coloring classes over relational languages.
//!
//! A coloring structure assigns to every `n`-element subset of its universe
//! one `n`-ary relation symbol. A class of such structures is cut out by a
//! prefix-closed tree `W` of allowed diagrams: a structure belongs to `K(W)`
//! when every finite monochromatic subset has its diagram in `W`. This crate
//! computes existence ranks of such trees, decides amalgamation for small
//! one-point systems, and builds the models that witness rank/size bounds.
//!
//! Everything here is `no_std` (with `alloc`); file formats, the command line
//! and thread pools live in the `chroma` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod amalgamation;
pub mod constructions;
pub mod diagrams;
pub mod ordinal;
pub mod rank;
pub mod search;
pub mod structures;
pub mod walpha;

pub use diagrams::{Diagram, DiagramSet, Language, RelSymbol};
pub use ordinal::{CardinalExpr, Ordinal};
