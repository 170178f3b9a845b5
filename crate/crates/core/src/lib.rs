pub mod calculus;
pub mod dump;
pub mod error;
pub mod fft;
pub mod forms;
pub mod gauduchon;
pub mod geometries;
pub mod geometry;
pub mod grid;
pub mod hermitian;
pub mod krylov;
pub mod operators;
pub mod solver;
pub mod stencil_op;
pub mod trig;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{diff, diff2, integrate, ComplexField, Grid, ScalarField, StencilOrder};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/calculus.md")]
    mod calculus {}
    #[doc = include_str!("../../../book/src/geometries.md")]
    mod geometries {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/gauduchon.md")]
    mod gauduchon {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/verify.md")]
    mod verify {}
}
