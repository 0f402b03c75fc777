//! Tabular successor features and the constrained transfer learner.

mod learner;
mod table;

pub use learner::{
    gpi_action, sf_td_update, train_task, weight_update, LambdaControl, LearnerConfig, StreamKey, TdSample,
};
#[allow(unused_imports)]
pub(crate) use learner::{gpi_choose, Score};
pub use table::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, PolicyEntry, PolicyView, SfTable,
};
