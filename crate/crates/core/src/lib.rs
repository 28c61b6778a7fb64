//! Cournot equilibria of multimarket oligopolies, price shocks and worst-case
//! comparative statics.
//!
//! Games have affine inverse demand `p_m − r_m·q_m` per market and convex costs
//! `a·q² + b·q`, optionally capped. [`solve_equilibrium`] computes the unique
//! equilibrium, [`shock_report`] compares the equilibria before and after a price
//! shock, and the [`certify`] module checks structural properties over seeded sweeps.

pub mod analysis;
pub mod certify;
pub mod error;
pub mod instances;
pub mod model;
pub mod solver;

pub use analysis::{
    negative_shock_ratio, negative_shock_ratio_by_reapplication, profit_bound, shock_report,
    surplus_bound, surplus_ratio_formula, take_back_shock, welfare_ratio_formula, Objective, Ratio,
    ShockReport, TakenBack,
};
pub use certify::{certify_suite, verify_named_instance, CertificateReport};
pub use error::{Error, Result};
pub use instances::anchor::{Anchor, ConcaveAnchorPrice};
pub use instances::{NamedInstance, RandomGameConfig};
pub use model::{
    CostKind, CostSpec, Firm, FirmId, Game, Market, MarketId, PriceFunction, PriceShock,
    QuantityProfile,
};
pub use solver::{
    best_response, kkt_residual, solve_equilibrium, EquilibriumResult, Method, SolveOptions,
};
