pub mod error;
pub mod forcing;
pub mod forest;
pub mod gf2;
pub mod model_rank;
pub mod ndrk;
pub mod structures;

/// Version tag written into every JSON document the crate emits.
pub const SCHEMA: &str = "overlap-lab/1";
