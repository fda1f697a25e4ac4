//! Symmetric and SPD matrix primitives and the Riemannian geometry of the
//! SPD cone under the affine-invariant metric.

mod decomp;
mod geometry;
mod matrix;

pub use geometry::{
    congruence, distance, exp_map, from_whitened_tangent, geodesic, geodesic_velocity,
    inner_product, log_map, whitened_tangent, Endpoint, TangentVector,
};
pub(crate) use geometry::{color_sym, half_svd, whiten_sym, whitened_log_spectrum};
pub use matrix::{
    regularize, spd_exp, spd_inv_sqrt, spd_log, spd_power, spd_sqrt, sym_eig,
    EigenDecomposition, SpdMatrix, SymMatrix, EIG_TOLERANCE, SPD_TOLERANCE,
};
pub(crate) use matrix::check_same_dim;
