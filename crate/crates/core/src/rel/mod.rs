//! Relational semantics on finite prefixes, used as an executable oracle: whole-stream
//! evaluation under explicit random streams, equivalence checking up to a seed
//! permutation, agreement with the co-iterative interpreter and grid quadrature of
//! the posterior.

mod equiv;
mod eval;
mod grid;

pub use equiv::{coit_rel_agree, equiv_check, random_prefix, Counterexample, Report};
pub use eval::{rel_eval, Rel, SeedSource, Streams};
pub use grid::{grid_infer, total_variation, Measure, GRID_BUDGET};

#[cfg(test)]
mod tests;
