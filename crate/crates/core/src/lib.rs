//! Spectral computations on "open books": compact surfaces whose pages meet
//! along one-dimensional bindings, glued by junction conditions
//! `A u|_B + C ∂u/∂ν = 0`.

pub mod bookfile;
pub mod cli;
pub mod complex;
pub mod conditions;
pub mod discretize;
pub mod eigensolve;
pub mod linalg;
pub mod oracles;
pub mod pages;
pub mod sparse;
