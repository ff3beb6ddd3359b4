//! Tree tensor network states: topology, canonical gauge, environments and
//! snapshots.

mod env;
mod kernels;
mod snapshot;
mod topology;
mod tree;

pub use env::{bond_operator, collective_moments, expectation, BondOperator, EnvCache, LocalOperator, SiteMatrix};
pub(crate) use env::{LocalHamiltonian, OverlapCache};
pub use snapshot::{load_snapshot, save_snapshot, SnapshotMeta, SNAPSHOT_MAGIC};
pub use topology::{Bond, Child, Layout, Neighbor, TreeNode, TreeTopology};
pub use tree::{Center, Gauge, SchmidtData, TreeNetwork, DENSE_STATE_MAX_SITES, SCHMIDT_CUTOFF};

use crate::error::Result;
use crate::models::LatticeGeometry;

/// Tree layout for a lattice (recursive bisection; see [`Layout`]).
pub fn build_topology(geometry: LatticeGeometry) -> Result<TreeTopology> {
    TreeTopology::build(geometry, Layout::Tree)
}
