//! Model spectral problems: the Dirichlet-to-Neumann operator of a cut
//! cylinder, cylinder and cone heat kernels, and finite-element Dirichlet
//! eigenvalues of slit domains.

pub mod dtn;
pub mod eigen;
pub mod fem;
pub mod heat;
pub mod mesh;

pub use dtn::{dtn_blocks, dtn_det, dtn_det_ratio, dtn_det_star, dtn_table, lowest_eigenvalue, DtnBlock, DtnRow};
pub use fem::{
    dirichlet_eigs, embedded_mode_extension, slit_strip_eigs, test_function_rayleigh_quotient, truncation_study,
    EigenReport, OddExtension, SolverControls, TruncationRow, CONTINUUM_THRESHOLD,
};
pub use heat::{cone_defect, cone_kernel, cylinder_check, heat_kernel_cylinder, relative_trace_constant, CylinderCheck};
pub use mesh::{Geometry, Mesh, MeshControls, MeshStats};

#[cfg(test)]
mod tests;
