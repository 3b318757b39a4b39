//! Layer-wise training: `K + 1` MLPs trained one after another with FedSGD,
//! separated by single asynchronous embedding exchanges.

mod cache;
mod early_stop;
mod protocol;

pub use cache::EmbeddingCache;
pub use early_stop::{early_stop_check, EarlyStopTracker, StopDecision};
pub use protocol::{
    federated_learning, message_passing_round, train_retexo, ClientState, ModelCurve, RetexoConfig,
    RetexoRun, ServerState, TaskKind, TrainTask,
};
