//! Numerical toolkit for p-Hessian equations σ_p^{1/p}(λ(A + D²u)) = φ.
//!
//! * [`symfun`]: elementary symmetric polynomials and their identities.
//! * [`cone`]: Gårding cones and the inequalities that hold on them.
//! * [`spectral`]: eigenvalues of symmetric pencils and their derivatives.
//! * [`concavity`]: the complex-weighted concavity inequalities and threshold search.
//! * [`subsolution`]: explicit subsolutions on balls and the key-lemma checker.
//! * [`solver`]: residual, Newton solver and diagnostics on a flat periodic grid.

pub mod concavity;
pub mod cone;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod subsolution;
pub mod symfun;

pub use cone::{ConeSpec, ConeVerdict, Region};
pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use solver::{EquationSpec, GridFn, TorusGrid};
pub use spectral::{Pencil, SpectralDerivs};
pub use symfun::SymVec;
