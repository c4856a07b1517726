//! Training stages, the three-stage orchestrator and evaluation.

mod config;
mod eval;
mod report;
mod stc;
mod train;

pub use config::{StcConfig, TrainConfig};
pub use eval::{evaluate, evaluate_masks, ConfusionMatrix, Evaluation};
pub use report::{RunReport, StageReport};
pub use stc::{
    network_for, relabel_complex_all, relabel_simple_all, run_enhanced, run_initial, run_powerful,
    run_stc, saliency_maps, NamedMask, StcOutcome, TrainedStage,
};
pub use train::{train_stage, Stage, Supervision, TrainItem};

/// Caps the global rayon pool at `threads` workers. Only the first call in a
/// process has an effect.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Reads a worker cap from `STC_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("STC_THREADS").ok()?.trim().parse().ok()
}
