pub mod error;
pub mod evolution;
pub mod field;
pub mod functionals;
pub mod ground_state;
pub mod harness;
pub mod morawetz;
pub mod hermite;
pub mod io;
mod sum;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hermite.md")]
    mod hermite {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/functionals.md")]
    mod functionals {}
    #[doc = include_str!("../../../book/src/ground_state.md")]
    mod ground_state {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/dichotomy.md")]
    mod dichotomy {}
    #[doc = include_str!("../../../book/src/morawetz.md")]
    mod morawetz {}
    #[doc = include_str!("../../../book/src/caveats.md")]
    mod caveats {}
}
