//! Stationary collapse objects: ground state, P_b, the assembled core and its
//! corrections.

pub mod assemble;
pub mod family;
mod bvp;
pub mod ground_state;
pub mod pb;
pub mod pohozaev;
pub mod tb;

pub use assemble::{assemble_profile, Fidelity, SolitonProfile};
pub use ground_state::{closed_form_1d, solve_ground_state, GroundState};
pub use pb::{radii, solve_pb, PbSolution};
pub use tb::{interior_residual, solve_tb};
pub use pohozaev::{pohozaev_report, pohozaev_residual, PohozaevReport};
pub use family::{build_family, tail_slopes, TailSlopes, FamilySpec, ProfileFamily};
