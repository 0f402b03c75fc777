//! The interaction interface shared by the Four-Room gridworld and the exact
//! tabular CMDPs used as test oracles.

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::algebra::FeatureVector;
use crate::error::Result;

/// Notable things that happened during a step. Only the gridworld emits them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Event {
    TrapEntered,
    GoalReached,
    ObjectPicked { class: usize, unsafe_object: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<S> {
    pub next: S,
    pub phi: FeatureVector,
    pub done: bool,
    pub events: Vec<Event>,
}

/// A finite-action environment whose per-step signal is a feature vector.
///
/// Rewards and utilities are never produced here: a task turns `phi` into
/// `(r, c)` through its weight vectors.
pub trait Environment {
    type State: Clone + Eq + Hash + Ord + Debug + Serialize + DeserializeOwned + Send + Sync;

    fn n_actions(&self) -> usize;

    fn feature_dim(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    fn sample<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Result<Outcome<Self::State>>;
}
