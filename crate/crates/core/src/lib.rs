//! Warped products, mapping cylinders and graph-of-spaces quotients as
//! computable length spaces.
//!
//! Spaces are described by [`SpaceDescriptor`] trees.  Single-chart spaces
//! (lines, intervals, circles, products, rescalings and multiwarped
//! products) are measured directly through a compiled chart; glued spaces
//! are measured on ε-nets.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod chart;
pub mod complexes;
pub mod error;
pub mod geodesic;
pub mod groups;
pub mod metric;
pub mod quotient;
pub mod warp;

pub use error::{Error, Result};
pub use geodesic::{distance, hyperbolic_oracle, project_to_base, GeodesicResult, NetConfig, SolverConfig};
pub use metric::{
    base_distance, induced_length_metric, partition_sum, path_length, PointCoord, PolyPath, SpaceDescriptor,
};
pub use warp::{shift_map, shift_path, warp_factor, warped_path_length, WarpFiberCoord, WarpVector};
