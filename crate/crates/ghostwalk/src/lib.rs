//! Exact probabilities for annihilating and coalescing walkers on weighted
//! spacetime DAGs.
//!
//! When two walkers collide they annihilate, emitting a twin pair of
//! non-interacting ghost walkers. Keeping the ghosts preserves the entity
//! count and makes the final-state distribution a determinant of transition
//! weights with sign bookkeeping per ghost pair; complete annihilation
//! collapses to a Pfaffian of pairwise quantities, which also gives the
//! pairwise-coalescence probability after reclassifying entities by the
//! parity of their multiplicity.
//!
//! Everything runs in exact rational arithmetic, and every formula is
//! checked against an independent brute-force enumeration oracle:
//!
//! * [`spacetime`]: exact rationals live in [`rat`]; weighted DAGs, the
//!   path generating function `W(x -> y)`, exhaustive path enumeration,
//!   and the structural (crossing / consecutive-collision) checkers.
//! * [`ghostdet`]: final states, the ghost matrix, the annihilation-weight
//!   determinant, and an independent single-collision cross-check via
//!   Laplace expansion.
//! * [`pfaffian`]: pairwise annihilation weights, the antisymmetric matrix,
//!   and the Pfaffian of the pairwise-coalescence event.
//! * [`dynamics`]: brute-force oracles that enumerate every elementary
//!   evolution: annihilation final-state distributions, coalescence with
//!   multiplicities, parity reclassification, and prescribed-annihilation
//!   weights.
//! * [`involution`]: executable proof machinery relating castings to
//!   performances (attribution, rehearsal, segment swap, the global
//!   sign-reversing involution) with a six-part audit.
//! * [`prescribed`]: the exact linear system asking whether prescribed
//!   annihilation is a rational combination of non-colliding products, with
//!   an inconsistency certificate.
//!
//! ```
//! use ghostwalk::dynamics;
//! use ghostwalk::instance::LatticeInstance;
//! use ghostwalk::Rat;
//!
//! // two walkers at 0 and 2, two time steps, both surviving in place
//! let instance = LatticeInstance::new(&[0, 2], 2)?;
//! let state = instance.state_from_positions(&[0, 2], &[])?;
//! assert_eq!(instance.formula_weight(&state)?, Rat::new(3, 16));
//!
//! // the enumeration oracle agrees exactly
//! let table = dynamics::annihilation_distribution(&instance, 24)?;
//! assert_eq!(table.probability(&state), Rat::new(3, 16));
//! assert_eq!(table.total(), Rat::one());
//! # Ok::<(), ghostwalk::Error>(())
//! ```

pub mod dynamics;
pub mod error;
pub mod ghostdet;
pub mod instance;
pub mod involution;
pub mod linalg;
pub mod pfaffian;
pub mod prescribed;
pub mod rat;
pub mod spacetime;

pub use error::{Error, Result};
pub use rat::Rat;
