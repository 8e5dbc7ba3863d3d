//! P1 finite elements: assembly, Dirichlet elimination and linear solvers.

pub mod assembly;
pub mod dirichlet;
pub mod eigen;
pub mod solver;
pub mod sparse;

pub use assembly::{assemble_convection_rhs, assemble_stiffness, assemble_weighted_mass, Assembler};
pub use dirichlet::{apply_dirichlet, Constraints, LinearSystem};
pub use eigen::{solve_dense_generalized_eig, GeneralizedEigen};
pub use solver::{solve_spd, SpdFactor};
pub use sparse::{dot, norm2, CsrMatrix, SparseVector};
