//! Sizing, construction and auditing of two-level-lattice (TLL) ReLU networks
//! that control or identify Lipschitz continuous control systems.
//!
//! The pipeline is: pick `(delta, tau)` and Lipschitz constants, derive the
//! controller error budget and grid spacing ([`sizing`]), lay an eta-grid over
//! the state box ([`geometry`]), interpolate a controller on it with a
//! continuous piecewise-affine function ([`cpwa`]), compile that into a
//! max-of-mins network ([`tll`]) and audit the closed loop ([`dynamics`]).

pub mod cpwa;
pub mod dynamics;
pub mod geometry;
pub mod hexfloat;
pub mod linalg;
pub mod probe;
pub mod sizing;
pub mod tll;
