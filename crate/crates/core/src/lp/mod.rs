pub mod format;
pub mod simplex;
pub mod synthetic;
pub mod system;
pub mod tail;

pub use format::{export_lp, parse_lp};
pub use simplex::{LinearProgram, Row, Status};
pub use system::{build_lp_system, check_dual, solve_lp, DEFAULT_NODE_BUDGET, Direction, LPSolution, LPSystem, RhsTerm};
pub use tail::{tail_bound, tail_bound_with, Envelope, TailBound};
