//! Classical reference samplers and the CAST trainer.

mod ast;
mod cast;
mod gibbs;
mod layout;

pub use ast::{
    ast_accept_probability, ast_effective_rate, ast_step, AstSampler, AstState, AstStep, RateSchedule,
    TemperatureLadder,
};
pub use cast::{cast_train, CastTrainer, Gradient, LadderSpec, TrainingSchedule};
pub use gibbs::{block_gibbs_sweep, gibbs_sweep, GibbsSampler, SweepSchedule};
pub use layout::RbmLayout;

use crate::error::{Error, Result};
use crate::state::SampleTrace;

/// A Markov chain or simulation that emits one recorded sample per period.
///
/// One period is a full sweep for classical samplers and the sampling
/// interval for spiking networks.
pub trait Sampler {
    fn n_units(&self) -> usize;

    /// Advance by one period and append the recorded sample to `trace`.
    fn step_into(&mut self, trace: &mut SampleTrace) -> Result<()>;

    /// Run `n` periods.
    fn collect(&mut self, n: usize) -> Result<SampleTrace> {
        let mut trace = SampleTrace::with_capacity(self.n_units(), n);
        for _ in 0..n {
            self.step_into(&mut trace)?;
        }
        Ok(trace)
    }

    /// Run until `n_valid` valid samples were recorded, giving up after `max_periods`.
    fn collect_valid(&mut self, n_valid: usize, max_periods: usize) -> Result<SampleTrace> {
        let mut trace = SampleTrace::with_capacity(self.n_units(), n_valid);
        let mut valid = 0;
        for _ in 0..max_periods {
            if valid >= n_valid {
                break;
            }
            let before = trace.len();
            self.step_into(&mut trace)?;
            if trace.len() > before && trace.is_valid(before) {
                valid += 1;
            }
        }
        if valid < n_valid {
            return Err(Error::InvalidParameter(format!(
                "only {valid} of {n_valid} valid samples within {max_periods} periods"
            )));
        }
        Ok(trace)
    }
}
