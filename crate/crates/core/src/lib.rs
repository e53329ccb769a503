//! ADMM heuristics for binary network design under spanning-tree and
//! rooted-arborescence constraints.
//!
//! The centralized and distributed drivers alternate a convex subproblem
//! ([`qp`]) with an exact projection onto the tree set ([`projection`]), and
//! are applied to hop-constrained multicommodity-flow tree design
//! ([`model`]). [`oracle`] holds exhaustive exact solvers for desk-scale
//! validation and [`experiment`] the sweep harness behind the CLI.

pub mod central;
pub mod distributed;
pub mod dsu;
pub mod error;
pub mod experiment;
pub mod full_dual;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod projection;
pub mod qp;
pub mod report;

pub use central::{solve_central, CentralState, InitialW, SolverConfig};
pub use distributed::{solve_distributed, AgentState, ConsensusForm, World};
pub use error::{Error, Result};
pub use graph::{bidirect, DirectedArcSet, TreeIndicator, UndirectedGraph};
pub use model::{Commodity, FlowAssignment, Instance};
pub use projection::{project_binary, project_tree, EdgeWeights, Topology};
pub use qp::{solve_qp, QpSolution, QpStatus, QuadraticProgram};
pub use report::{Mode, SolveReport};
