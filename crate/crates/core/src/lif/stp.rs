//! Tsodyks-Markram short-term plasticity.
//!
//! Between spikes the available resources `R` relax towards 1 with `τ_rec`
//! and the utilization `U` decays towards 0 with `τ_fac`. On a spike the
//! utilization is raised first, `U⁺ = U + U₀(1 − U)`, the transmitted
//! efficacy is `U⁺·R`, and the resources are depleted to `R(1 − U⁺)`.
//! A zero time constant means instantaneous relaxation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StpParams {
    pub u0: f64,
    pub tau_rec: f64,
    pub tau_fac: f64,
}

impl StpParams {
    pub fn new(u0: f64, tau_rec: f64, tau_fac: f64) -> Result<Self> {
        let p = Self { u0, tau_rec, tau_fac };
        p.validate()?;
        Ok(p)
    }

    /// `(1, 0, 0)`: every spike transmits with efficacy 1.
    pub const fn static_synapse() -> Self {
        Self { u0: 1.0, tau_rec: 0.0, tau_fac: 0.0 }
    }

    /// `(1, τ_syn, 0)`: resources recover as fast as the PSC decays.
    pub const fn renewing(tau_syn: f64) -> Self {
        Self { u0: 1.0, tau_rec: tau_syn, tau_fac: 0.0 }
    }

    pub fn is_static(&self) -> bool {
        *self == Self::static_synapse()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.u0) {
            return Err(invalid(format!("U0 = {} outside [0, 1]", self.u0)));
        }
        if !(self.tau_rec >= 0.0 && self.tau_fac >= 0.0 && self.tau_rec.is_finite() && self.tau_fac.is_finite()) {
            return Err(invalid("STP time constants must be finite and non-negative"));
        }
        Ok(())
    }
}

impl Default for StpParams {
    fn default() -> Self {
        Self::static_synapse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseState {
    pub r: f64,
    pub u: f64,
    pub last_update: f64,
}

impl SynapseState {
    /// Fully recovered, no residual facilitation.
    pub const fn rested(time: f64) -> Self {
        Self { r: 1.0, u: 0.0, last_update: time }
    }
}

impl Default for SynapseState {
    fn default() -> Self {
        Self::rested(0.0)
    }
}

fn relax_factor(dt: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        0.0
    } else {
        (-dt / tau).exp()
    }
}

/// Closed-form relaxation over `dt_elapsed` ms without spikes.
pub fn stp_advance(s: SynapseState, p: &StpParams, dt_elapsed: f64) -> SynapseState {
    if dt_elapsed <= 0.0 {
        return s;
    }
    SynapseState {
        r: 1.0 - (1.0 - s.r) * relax_factor(dt_elapsed, p.tau_rec),
        u: s.u * relax_factor(dt_elapsed, p.tau_fac),
        last_update: s.last_update + dt_elapsed,
    }
}

/// Apply a presynaptic spike; returns the new state and the efficacy `U⁺R`.
pub fn stp_on_spike(s: SynapseState, p: &StpParams) -> (SynapseState, f64) {
    let u = s.u + p.u0 * (1.0 - s.u);
    let efficacy = u * s.r;
    (SynapseState { r: s.r * (1.0 - u), u, last_update: s.last_update }, efficacy)
}

/// Advance to `time` and then spike.
pub fn stp_spike_at(s: SynapseState, p: &StpParams, time: f64) -> (SynapseState, f64) {
    let advanced = stp_advance(s, p, time - s.last_update);
    stp_on_spike(SynapseState { last_update: time, ..advanced }, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn zero_elapsed_is_identity() {
        let s = SynapseState { r: 0.3, u: 0.7, last_update: 4.0 };
        assert_eq!(stp_advance(s, &StpParams::new(0.5, 0.0, 0.0).unwrap(), 0.0), s);
    }

    #[test]
    fn recovery_closed_form() {
        let s = SynapseState { r: 0.0, u: 0.0, last_update: 0.0 };
        let out = stp_advance(s, &StpParams::new(1.0, 15.0, 0.0).unwrap(), 15.0);
        assert!((out.r - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((out.r - 0.63212).abs() < 1e-5);
    }

    #[test]
    fn static_synapse_always_transmits_one() {
        let p = StpParams::static_synapse();
        let mut s = SynapseState::rested(0.0);
        let mut rng = seeded(1);
        let mut t = 0.0;
        for _ in 0..200 {
            t += rng.random_range(0.1..30.0);
            let (next, eff) = stp_spike_at(s, &p, t);
            assert_eq!(eff, 1.0);
            s = next;
        }
    }

    #[test]
    fn renewing_second_spike() {
        let p = StpParams::renewing(10.0);
        let (s, first) = stp_spike_at(SynapseState::rested(0.0), &p, 0.0);
        assert_eq!(first, 1.0);
        let (_, second) = stp_spike_at(s, &p, 10.0);
        assert!((second - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn weak_depression_envelope() {
        // U0 = 0.01, τ_rec = 280 ms, 100 Hz burst: a few percent per spike at most
        let p = StpParams::new(0.01, 280.0, 0.0).unwrap();
        let mut s = SynapseState::rested(0.0);
        let mut effs = Vec::new();
        for i in 0..10 {
            let (next, eff) = stp_spike_at(s, &p, 10.0 * i as f64);
            effs.push(eff);
            s = next;
        }
        for w in effs.windows(2) {
            let drop = 1.0 - w[1] / w[0];
            assert!(drop > 0.0 && drop < 0.03, "drop {drop}");
        }
    }

    #[test]
    fn facilitation_raises_first_pair() {
        let p = StpParams::new(0.1, 50.0, 200.0).unwrap();
        let (s, e1) = stp_spike_at(SynapseState::rested(0.0), &p, 0.0);
        let (_, e2) = stp_spike_at(s, &p, 10.0);
        assert!(e2 > e1);
    }

    #[test]
    fn invalid_params() {
        assert!(StpParams::new(1.5, 1.0, 1.0).is_err());
        assert!(StpParams::new(0.5, -1.0, 1.0).is_err());
        assert!(StpParams::new(0.5, 1.0, f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn state_stays_in_unit_box(
            u0 in 0.0f64..=1.0,
            tau_rec in prop_oneof![Just(0.0), 0.01f64..500.0],
            tau_fac in prop_oneof![Just(0.0), 0.01f64..500.0],
            gaps in proptest::collection::vec(0.0f64..100.0, 1..60),
        ) {
            let p = StpParams::new(u0, tau_rec, tau_fac).unwrap();
            let mut s = SynapseState::rested(0.0);
            let mut t = 0.0;
            for g in gaps {
                t += g;
                let (next, eff) = stp_spike_at(s, &p, t);
                prop_assert!((0.0..=1.0).contains(&next.r));
                prop_assert!((0.0..=1.0).contains(&next.u));
                prop_assert!((0.0..=1.0).contains(&eff));
                s = next;
            }
        }
    }
}
