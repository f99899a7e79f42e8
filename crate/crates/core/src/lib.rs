//! Simulation of a single photon travelling through a grating/delay-line
//! network compiled from a graph, where the arrival time `Σ ln p_j` of a
//! photon that visited every vertex exactly once is distinct from every
//! other arrival time.
//!
//! * [`graph`]: graphs, the edge-list format, exhaustive oracles.
//! * [`delay`]: prime-logarithm delays and exact arrival keys.
//! * [`network`]: feedforward and recurrent network compilation.
//! * [`sim`]: incoherent, coherent and classical propagation; sampling.
//! * [`procedures`]: detection and path construction.
//! * [`cli`]: the `photonpath` command-line tool.

pub mod cli;
pub mod delay;
pub mod graph;
pub mod network;
pub mod procedures;
pub mod sim;

pub use delay::{ArrivalKey, DelayTable};
pub use graph::{Graph, parse_graph};
pub use network::{Network, Topology};
pub use sim::{Mode, TerminalDistribution};
