//! Sample-quality metrics, mode statistics, label readout and embedding.

pub mod classify;
pub mod isl;
pub mod modes;
pub mod tsne;

pub use classify::{classify, clamped_trace, mean_activity, mean_interaction_strength, Readout};
pub use isl::{isl_curve, isl_log_likelihood, isl_log_probs, opt_baseline, pom_baseline, IslConfig};
pub use modes::{
    class_prototypes, label_mode_trace, mode_dwell_histogram, mode_occupancy, prototype_mode_trace, DwellHistogram,
    DwellRun, ModeTrace,
};
pub use tsne::{tsne_affinities, tsne_cost, tsne_cost_gradient, tsne_embed, Embedding, TsneConfig};

use std::io::Write;

use crate::error::Result;

/// `checkpoint,value` rows.
pub fn write_curve_csv<W: Write>(mut w: W, curve: &[(usize, f64)]) -> Result<()> {
    writeln!(w, "checkpoint,value")?;
    for (n, v) in curve {
        writeln!(w, "{n},{v}")?;
    }
    Ok(())
}
