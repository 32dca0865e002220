//! Finite-element simulation of bone regeneration inside a porous scaffold.

pub mod diffusion;
pub mod elasticity;
pub mod fields;
pub mod mesh;
pub mod ode;
pub mod report;
pub mod sparse;
pub mod coupling;
pub mod scenario;
pub mod io;
