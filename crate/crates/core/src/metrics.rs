use serde::{Deserialize, Serialize};

/// Exact CSV header of the metrics stream.
pub const METRICS_HEADER: [&str; 9] = [
    "task",
    "episode",
    "step",
    "failures",
    "total_reward",
    "safe_reward",
    "unsafe_reward",
    "v_c_hat",
    "lambda",
];

/// Per-episode counters. `step` is the number of interactions completed in the
/// current task when the episode ended; `v_c_hat` is the learner's estimate of
/// the utility value of its behaviour at the episode's start state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub task: usize,
    pub episode: usize,
    pub step: usize,
    pub failures: u64,
    pub total_reward: f64,
    pub safe_reward: f64,
    pub unsafe_reward: f64,
    pub v_c_hat: f64,
    pub lambda: f64,
}

/// Running sums for one episode.
#[derive(Clone, Debug, Default)]
pub(crate) struct EpisodeTally {
    pub failures: u64,
    pub total_reward: f64,
    pub safe_reward: f64,
    pub unsafe_reward: f64,
}

impl EpisodeTally {
    pub fn observe(&mut self, r: f64, events: &[crate::env::Event], reward_weights: &[f64], phi: &[f64]) {
        use crate::env::Event;
        self.total_reward += r;
        for e in events {
            match *e {
                Event::TrapEntered => self.failures += 1,
                Event::ObjectPicked {
                    class,
                    unsafe_object,
                } => {
                    let v = reward_weights[class] * phi[class];
                    if unsafe_object {
                        self.unsafe_reward += v;
                    } else {
                        self.safe_reward += v;
                    }
                }
                Event::GoalReached => {}
            }
        }
    }

    pub fn finish(
        self,
        task: usize,
        episode: usize,
        step: usize,
        v_c_hat: f64,
        lambda: f64,
    ) -> MetricsRecord {
        MetricsRecord {
            task,
            episode,
            step,
            failures: self.failures,
            total_reward: self.total_reward,
            safe_reward: self.safe_reward,
            unsafe_reward: self.unsafe_reward,
            v_c_hat,
            lambda,
        }
    }
}
