//! Activation-function calibration of a single noisy LIF neuron.
//!
//! The probability of being refractory is measured over a grid of leak
//! potentials and fitted with `σ(α·E_l − β̂)`. The fitted slope `α` (1/mV)
//! converts Boltzmann parameters into membrane potential shifts.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::network::{LifNetworkConfig, LifSimulator};
use super::params::{LifParams, NoiseConfig};
use crate::error::{invalid, Error, Result};
use crate::rng::SimRng;
use crate::textfmt::stable_sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Slope of the activation function (1/mV).
    pub alpha: f64,
    /// `α·E₀`, where `E₀` is the leak potential giving p = 1/2.
    pub beta_shift: f64,
    pub residual_rms: f64,
    pub noise: NoiseConfig,
    /// Measured `(E_l, p)` pairs.
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
}

impl Calibration {
    /// Leak potential (mV) at which the neuron is on half the time.
    pub fn midpoint(&self) -> f64 {
        self.beta_shift / self.alpha
    }

    pub fn activation(&self, e_leak: f64) -> f64 {
        stable_sigmoid(self.alpha * e_leak - self.beta_shift)
    }

    /// Leak potential that realises bias `b`.
    pub fn leak_for_bias(&self, b: f64) -> f64 {
        self.midpoint() + b / self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub n_points: usize,
    /// Simulated time per grid point (ms).
    pub duration: f64,
    /// Simulated time per bracketing probe (ms).
    pub probe_duration: f64,
    pub dt: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub max_rms: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            n_points: 21,
            duration: 20_000.0,
            probe_duration: 2_000.0,
            dt: 0.1,
            p_low: 0.01,
            p_high: 0.99,
            max_rms: 0.02,
        }
    }
}

/// Fraction of `[0, duration)` that a lone neuron spends refractory.
pub fn refractory_fraction(
    lif: &LifParams,
    noise: &NoiseConfig,
    e_leak: f64,
    duration: f64,
    dt: f64,
    rng: SimRng,
) -> Result<f64> {
    let mut params = *lif;
    params.e_leak = e_leak;
    let mut cfg = LifNetworkConfig::unconnected(1, params, *noise);
    cfg.dt = dt;
    let mut sim = LifSimulator::new(cfg, rng)?;
    // settle first so the initial condition does not bias the estimate
    sim.advance_by((params.tau_m.max(params.tau_syn) * 5.0 / dt).round() as u64);
    let start = sim.time();
    sim.take_spikes();
    sim.advance_by((duration / dt).round() as u64);
    let end = sim.time();
    let on: f64 = sim.spikes().train(0).iter().map(|&s| (end - s).min(params.tau_ref)).sum();
    Ok(on / (end - start))
}

pub fn calibrate(lif: &LifParams, noise: &NoiseConfig, rng: &mut SimRng) -> Result<Calibration> {
    calibrate_with(lif, noise, &CalibrationOptions::default(), rng)
}

pub fn calibrate_with(
    lif: &LifParams,
    noise: &NoiseConfig,
    opts: &CalibrationOptions,
    rng: &mut SimRng,
) -> Result<Calibration> {
    lif.validate()?;
    noise.validate()?;
    if !(noise.rate_exc > 0.0 || noise.rate_inh > 0.0) {
        return Err(invalid("calibration needs background noise"));
    }
    if opts.n_points < 15 {
        return Err(invalid("calibration needs at least 15 grid points"));
    }
    if !(0.0 < opts.p_low && opts.p_low < 0.5 && 0.5 < opts.p_high && opts.p_high < 1.0) {
        return Err(invalid("calibration probability bounds must straddle 1/2"));
    }
    let probe = |e: f64, duration: f64, rng: &mut SimRng| {
        refractory_fraction(lif, noise, e, duration, opts.dt, SimRng::from_rng(rng))
    };

    // bracket the transition
    let span = 80.0;
    let lo0 = lif.v_thresh - span;
    let hi0 = lif.v_thresh + span;
    if probe(lo0, opts.probe_duration, rng)? > opts.p_low || probe(hi0, opts.probe_duration, rng)? < opts.p_high {
        return Err(Error::Degenerate("activation does not span the requested range".into()));
    }
    let bisect = |target: f64, rng: &mut SimRng| -> Result<f64> {
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if probe(mid, opts.probe_duration, rng)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 0.01 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let e_lo = bisect(opts.p_low, rng)?;
    let e_hi = bisect(opts.p_high, rng)?;
    if !(e_hi > e_lo) {
        return Err(Error::Degenerate("activation function is not increasing".into()));
    }

    let mut points = Vec::with_capacity(opts.n_points);
    for i in 0..opts.n_points {
        let e = e_lo + (e_hi - e_lo) * i as f64 / (opts.n_points - 1) as f64;
        let p = refractory_fraction(lif, noise, e, opts.duration, opts.dt, SimRng::from_rng(&mut *rng))?;
        points.push((e, p));
    }
    let (alpha, e0, rms) = fit_logistic(&points)?;
    if rms >= opts.max_rms {
        return Err(Error::FitFailure { rms, limit: opts.max_rms });
    }
    Ok(Calibration { alpha, beta_shift: alpha * e0, residual_rms: rms, noise: *noise, points })
}

/// Least-squares fit of `σ(α(x − x₀))`; returns `(α, x₀, residual RMS)`.
pub fn fit_logistic(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Empty("logistic fit needs at least three points"));
    }
    // start from a linear fit of the logits
    let clipped: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, p)| (0.005..=0.995).contains(p))
        .map(|&(x, p)| (x, (p / (1.0 - p)).ln()))
        .collect();
    let (mut a, mut x0) = if clipped.len() >= 2 {
        let n = clipped.len() as f64;
        let mx = clipped.iter().map(|c| c.0).sum::<f64>() / n;
        let my = clipped.iter().map(|c| c.1).sum::<f64>() / n;
        let sxy: f64 = clipped.iter().map(|c| (c.0 - mx) * (c.1 - my)).sum();
        let sxx: f64 = clipped.iter().map(|c| (c.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (slope, mx - my / slope)
    } else {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (8.0 / (hi - lo), 0.5 * (lo + hi))
    };
    if !(a.is_finite() && x0.is_finite()) {
        return Err(Error::Degenerate("logistic fit could not be initialised".into()));
    }

    let sse = |a: f64, x0: f64| -> f64 {
        points.iter().map(|&(x, p)| (stable_sigmoid(a * (x - x0)) - p).powi(2)).sum()
    };
    let mut cost = sse(a, x0);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        // normal equations of the Gauss-Newton step
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for &(x, p) in points {
            let s = stable_sigmoid(a * (x - x0));
            let ds = s * (1.0 - s);
            let j = [ds * (x - x0), -ds * a];
            let r = s - p;
            for i in 0..2 {
                jtr[i] += j[i] * r;
                for k in 0..2 {
                    jtj[i][k] += j[i] * j[k];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let m = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let da = -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
            let dx = -(m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
            let c = sse(a + da, x0 + dx);
            if c < cost {
                a += da;
                x0 += dx;
                let done = cost - c < 1e-14 * (1.0 + cost);
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let rms = (cost / points.len() as f64).sqrt();
    Ok((a, x0, rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn logistic_fit_recovers_exact_curve() {
        let pts: Vec<(f64, f64)> =
            (0..21).map(|i| -55.0 + 0.5 * i as f64).map(|x| (x, stable_sigmoid(1.3 * (x + 50.2)))).collect();
        let (a, x0, rms) = fit_logistic(&pts).unwrap();
        assert!((a - 1.3).abs() < 1e-6);
        assert!((x0 + 50.2).abs() < 1e-6);
        assert!(rms < 1e-8);
    }

    #[test]
    fn logistic_fit_tolerates_saturated_points() {
        let pts: Vec<(f64, f64)> = (0..15)
            .map(|i| -60.0 + 1.5 * i as f64)
            .map(|x| (x, stable_sigmoid(2.0 * (x + 50.0)).clamp(0.0, 1.0)))
            .map(|(x, p)| (x, if p < 1e-4 { 0.0 } else if p > 1.0 - 1e-4 { 1.0 } else { p }))
            .collect();
        let (a, x0, _) = fit_logistic(&pts).unwrap();
        assert!((a - 2.0).abs() < 1e-2);
        assert!((x0 + 50.0).abs() < 1e-2);
    }

    #[test]
    fn silent_neuron_is_rejected() {
        let err = calibrate(&LifParams::cuba(), &NoiseConfig::silent(), &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn activation_is_monotone_in_leak() {
        let lif = LifParams::cuba();
        let noise = NoiseConfig::cuba_default();
        let ps: Vec<f64> = [-56.0, -52.0, -50.0, -48.0, -44.0]
            .iter()
            .map(|&e| refractory_fraction(&lif, &noise, e, 5_000.0, 0.1, seeded(2)).unwrap())
            .collect();
        assert!(ps.windows(2).all(|w| w[1] >= w[0]), "{ps:?}");
        assert!(ps[0] < 0.05 && ps[4] > 0.95, "{ps:?}");
    }
}
