//! Markets, firms, cost functions, quantity profiles and price shocks.

mod cost;
mod eval;
mod game;
mod profile;

pub use cost::{CostKind, CostSpec};
pub use game::{Firm, FirmId, Game, Market, MarketId, PriceFunction};
pub use profile::{PriceShock, QuantityProfile, ShockSign};

pub(crate) use profile::{resolve_deltas, Layout};
