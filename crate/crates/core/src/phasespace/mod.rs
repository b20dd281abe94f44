//! Phase-space tools: coherent states, the FBI transform, discrete
//! scale-`R` wavepackets and Whitney cubes for frequency pairs.

mod coherent;
mod fbi;
mod wavepackets;
mod whitney;

pub use coherent::{check_resolvable, coherent_constant, coherent_state, dilate, phase_shift, phase_unshift};
pub use fbi::{fbi_adjoint, fbi_forward, FbiField, PhaseSpaceGrid};
pub use wavepackets::{
    decompose_scale_r, propagate_atoms, subcollection_ratio, Atom, Decomposition, PropagatedAtom, Tube,
    FREQUENCY_RADIUS,
};
pub use whitney::{whitney_cell, whitney_cubes, Cube, WhitneyCube};
