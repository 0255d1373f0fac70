//! Developmental networks next to error-backprop baselines, and the
//! statistics needed to audit how either kind of system was selected.
//!
//! * [`lca`]: the age-dependent Hebbian neuron update and top-k competition.
//! * [`dn`]: the X/Y/Z developmental network and its lifetime error log.
//! * [`automata`]: finite automata, Turing machines and teaching them to a DN.
//! * [`backprop`]: a small logistic MLP trained by batch gradient descent.
//! * [`nn_threshold`]: nearest neighbor with a rejection distance.
//! * [`postselect`]: partitions, error grids, selectors, cross-validation
//!   and the luckiest-network audit.
//!
//! All randomness derives from a master seed via [`rng::derive_seed`].

pub mod automata;
pub mod backprop;
pub mod data;
pub mod dn;
pub mod error;
pub mod lca;
pub mod nn_threshold;
pub mod postselect;
pub mod rng;
pub mod trainers;

pub use automata::{FiniteAgentAutomaton, MachineSpec, OneHotCodec, TuringMachine};
pub use backprop::{Mlp, TrainConfig};
pub use data::Dataset;
pub use dn::{DevNetwork, DnConfig, Motor};
pub use error::{Error, Result};
pub use lca::{MatchSchedule, NeuronState};
pub use nn_threshold::NnClassifier;
pub use postselect::{ErrorTable, Partition, Trainer};
