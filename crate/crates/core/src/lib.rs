//! Correlation-rounding toolkit.
//!
//! The crate bundles four cooperating subsystems:
//!
//! * [`numerics`] — dense matrices, entrywise norms, grids, a one-sided
//!   Jacobi SVD, and exhaustive brute-force oracles that certify the
//!   approximation algorithms at desk scale.
//! * [`pseudodist`] — degree-bounded families of consistent local
//!   distributions over discrete alphabets, built and optimized as linear
//!   programs (a bundled dense revised simplex does the solving), together
//!   with the conditioning / sampling operations used by correlation
//!   rounding.
//! * [`pinning`] — potential functions (variance, entropy, Bregman
//!   uncertainty), the potential-decrease inequalities behind correlation
//!   rounding, four pinning procedures, and a paired heavy-tailed
//!   counterexample family.
//! * [`lra`] / [`pqnorm`] — the entrywise lp low-rank approximation
//!   algorithms (additive scheme, rank-1 and rank-k multiplicative schemes)
//!   and the additive p->q operator-norm approximation, all checked against
//!   the oracles.
//!
//! Calibrated inequality constants live in a ledger (see [`constants`]);
//! every experiment emits a replayable [`records::RunRecord`].

pub mod cli;
pub mod constants;
pub mod exec;
pub mod io;
pub mod lra;
pub mod numerics;
pub mod pinning;
pub mod pqnorm;
pub mod pseudodist;
pub mod records;
