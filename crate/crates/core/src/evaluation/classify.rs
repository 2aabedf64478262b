//! Label readout from clamped sampling and population interaction strengths.

use rand::SeedableRng;

use crate::boltzmann::BoltzmannMachine;
use crate::error::{check_len, invalid, Error, Result};
use crate::lif::LifSetup;
use crate::rng::SimRng;
use crate::samplers::{GibbsSampler, RbmLayout, Sampler, SweepSchedule};
use crate::state::{ClampMask, SampleTrace};

/// How the clamped network is sampled during readout.
#[derive(Debug, Clone)]
pub enum Readout<'a> {
    Gibbs { sweeps: usize },
    Lif { setup: &'a LifSetup, duration: f64 },
}

/// Mean of each unit in `units` over the valid samples of `trace`.
pub fn mean_activity(trace: &SampleTrace, units: std::ops::Range<usize>) -> Result<Vec<f64>> {
    if units.end > trace.n_units() {
        return Err(Error::DimensionMismatch { expected: trace.n_units(), got: units.end });
    }
    let mut sum = vec![0.0; units.len()];
    let mut n = 0usize;
    for z in trace.valid_states() {
        n += 1;
        for (s, &b) in sum.iter_mut().zip(&z[units.clone()]) {
            *s += b as f64;
        }
    }
    if n == 0 {
        return Err(Error::Empty("trace without valid samples"));
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    Ok(sum)
}

/// Run the machine with its visible units clamped to `image`.
pub fn clamped_trace(
    machine: &BoltzmannMachine,
    layout: &RbmLayout,
    image: &[u8],
    readout: &Readout<'_>,
    rng: &mut SimRng,
) -> Result<SampleTrace> {
    layout.check(machine)?;
    check_len(layout.n_visible, image.len())?;
    let mask = ClampMask::from_bits(image);
    match readout {
        Readout::Gibbs { sweeps } => {
            let mut s = GibbsSampler::new(machine, SweepSchedule::Bipartite(*layout), SimRng::from_rng(rng))?
                .with_clamp(&mask)?;
            s.collect(*sweeps)
        }
        Readout::Lif { setup, duration } => {
            let mut s = setup.sampler(machine, Some(&mask), SimRng::from_rng(rng))?;
            let n = (duration / setup.sample_interval).round() as usize;
            s.collect(n)
        }
    }
}

/// Label unit with the highest mean activity; ties go to the lowest index.
pub fn classify(
    machine: &BoltzmannMachine,
    layout: &RbmLayout,
    image: &[u8],
    readout: &Readout<'_>,
    rng: &mut SimRng,
) -> Result<u8> {
    if layout.n_label == 0 {
        return Err(invalid("layout has no label units"));
    }
    let trace = clamped_trace(machine, layout, image, readout, rng)?;
    let act = mean_activity(&trace, layout.labels())?;
    let best = act.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(act.iter().position(|&a| a == best).unwrap_or(0) as u8)
}

/// `w̄_ij = a_iᵀ W a_j` for population activity vectors `a_i`.
pub fn mean_interaction_strength(machine: &BoltzmannMachine, activities: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = machine.n_units();
    for a in activities {
        check_len(n, a.len())?;
    }
    // W a_j for every pattern
    let wa: Vec<Vec<f64>> = activities
        .iter()
        .map(|a| (0..n).map(|k| machine.row(k).iter().zip(a).map(|(w, x)| w * x).sum()).collect())
        .collect();
    Ok(activities
        .iter()
        .map(|ai| wa.iter().map(|waj| ai.iter().zip(waj).map(|(x, y)| x * y).sum()).collect())
        .collect())
}
