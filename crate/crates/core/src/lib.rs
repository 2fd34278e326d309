//! Exact desk-scale simulation of noise-tolerant public-key quantum money.
//!
//! Banknotes are subspace states `|C⟩` of a half-dimensional code `C ⊆ F₂ⁿ`
//! whose primal and dual distances both reach `2q+1`. Verification projects
//! onto the span of every coset state `X^e Z^{e′}|C⟩` with `wt(e), wt(e′) ≤ q`,
//! using only membership oracles for the unions of tolerated cosets.
//!
//! Layers, bottom to top:
//!
//! - [`gf2`]: packed vectors, matrices, subspaces, duals, basis maps.
//! - [`codes`]: searching and certifying applicable codes, syndrome tables,
//!   tolerated error sets, bound formulas.
//! - [`statesim`]: dense amplitude vectors, symbolic coset labels, Pauli and
//!   Hadamard actions, fidelities.
//! - [`oracles`]: membership predicates, phase oracles, the combined tagged
//!   oracle and query accounting.
//! - [`scheme`]: the bank registry, both minting routes, verification, double
//!   verification, corruption and correction.
//! - [`labx`]: completeness sweeps, attack baselines, bound tables, CSV reports.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default) is
//! enabled; see [`exec::Exec`].

pub mod codes;
pub mod exec;
pub mod fmt;
pub mod gf2;
pub mod labx;
pub mod oracles;
pub mod reference;
pub mod scheme;
pub mod seed;
pub mod statesim;

pub use exec::Exec;
pub use gf2::{BitVec, Gf2Matrix, SubspaceBasis};
pub use seed::Seed;
