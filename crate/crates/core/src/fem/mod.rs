//! P2 finite elements: assembly, the mixed torsion solve, and the
//! generalized eigenproblems behind the Poincaré and trace constants.

pub mod assembly;
pub mod cg;
pub mod eigen;
pub mod element;
pub mod solution;
pub mod sparse;

pub use assembly::{assemble, Assembled};
pub use eigen::{
    neumann_poincare, trace_constant, vector_poincare, wall_trace_constant, zero_trace_poincare, EigenResult,
};
pub use solution::{solve_torsion, FemSolution};
pub use sparse::SparseMatrix;
