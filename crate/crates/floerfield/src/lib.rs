//! Finite-dimensional skeleton of a 2+1 field theory valued in symplectic data:
//! Cerf words for 3-dimensional bordisms between closed surfaces, numerical
//! moduli of centrally twisted SU(r) representations, Lagrangian
//! correspondences in holonomy coordinates, and intersection counting.

pub mod bordism;
pub mod cli;
pub mod config;
pub mod dsl;
pub mod functor;
pub mod intersect;
pub mod lie;
pub mod moduli;
pub mod report;
pub mod symplectic;
