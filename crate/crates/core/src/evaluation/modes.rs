//! Mode identification and dwell-time statistics.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;

use crate::error::{check_len, invalid, Error, Result};
use crate::state::SampleTrace;

/// Mode identity over time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeTrace {
    times: Vec<f64>,
    modes: Vec<usize>,
}

impl ModeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, mode: usize) -> Result<()> {
        if self.times.last().is_some_and(|&t| time < t) {
            return Err(invalid("mode timestamps must be nondecreasing"));
        }
        self.times.push(time);
        self.modes.push(mode);
        Ok(())
    }

    pub fn from_modes(modes: Vec<usize>) -> Self {
        Self { times: (0..modes.len()).map(|i| i as f64).collect(), modes }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of changes of mode.
    pub fn switches(&self) -> usize {
        self.modes.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// Argmax over `scores`; ties keep `previous` when it is among the best,
/// otherwise the lowest index wins. All-zero scores keep `previous`.
fn pick(scores: &[f64], previous: Option<usize>) -> usize {
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if let Some(p) = previous {
        if scores[p] == best || best <= 0.0 {
            return p;
        }
    }
    scores.iter().position(|&s| s == best).unwrap_or(0)
}

/// Valid samples summed over a trailing window of `window` samples.
fn windowed_sums(trace: &SampleTrace, units: &Range<usize>, window: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    if window == 0 {
        return Err(invalid("mode window must be at least one sample"));
    }
    if units.end > trace.n_units() || units.is_empty() {
        return Err(Error::DimensionMismatch { expected: trace.n_units(), got: units.end });
    }
    let valid: Vec<(f64, &[u8])> = trace.iter().filter(|(_, v, _)| *v).map(|(t, _, z)| (t, z)).collect();
    let width = units.len();
    let mut sum = vec![0.0; width];
    let mut out = Vec::with_capacity(valid.len());
    for i in 0..valid.len() {
        for (s, &b) in sum.iter_mut().zip(&valid[i].1[units.clone()]) {
            *s += b as f64;
        }
        if i >= window {
            for (s, &b) in sum.iter_mut().zip(&valid[i - window].1[units.clone()]) {
                *s -= b as f64;
            }
        }
        out.push((valid[i].0, sum.clone()));
    }
    Ok(out)
}

/// Mode = label unit with the highest activity over a trailing window.
pub fn label_mode_trace(trace: &SampleTrace, labels: Range<usize>, window: usize) -> Result<ModeTrace> {
    let mut out = ModeTrace::new();
    let mut prev = None;
    for (t, scores) in windowed_sums(trace, &labels, window)? {
        let m = pick(&scores, prev);
        prev = Some(m);
        out.push(t, m)?;
    }
    Ok(out)
}

/// Mode = nearest prototype (squared distance) to the windowed mean of `units`.
pub fn prototype_mode_trace(
    trace: &SampleTrace,
    units: Range<usize>,
    prototypes: &[Vec<f64>],
    window: usize,
) -> Result<ModeTrace> {
    if prototypes.is_empty() {
        return Err(Error::Empty("prototypes"));
    }
    for p in prototypes {
        check_len(units.len(), p.len())?;
    }
    let mut out = ModeTrace::new();
    let mut prev = None;
    for (i, (t, sums)) in windowed_sums(trace, &units, window)?.into_iter().enumerate() {
        let n = (i + 1).min(window) as f64;
        let scores: Vec<f64> = prototypes
            .iter()
            .map(|p| -p.iter().zip(&sums).map(|(a, s)| (a - s / n).powi(2)).sum::<f64>())
            .collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m = match prev {
            Some(p) if scores[p] == best => p,
            _ => scores.iter().position(|&s| s == best).unwrap_or(0),
        };
        prev = Some(m);
        out.push(t, m)?;
    }
    Ok(out)
}

/// Class-mean images as prototypes.
pub fn class_prototypes<T: AsRef<[u8]>>(images: &[T], labels: &[u8], n_classes: usize) -> Result<Vec<Vec<f64>>> {
    check_len(images.len(), labels.len())?;
    let d = images.first().map(|v| v.as_ref().len()).ok_or(Error::Empty("images"))?;
    let mut sums = vec![vec![0.0; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (img, &l) in images.iter().zip(labels) {
        let l = l as usize;
        if l >= n_classes {
            return Err(Error::IndexOutOfRange { index: l, len: n_classes });
        }
        counts[l] += 1;
        for (s, &b) in sums[l].iter_mut().zip(img.as_ref()) {
            *s += b as f64;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c == 0 {
            return Err(Error::Empty("class without images"));
        }
        s.iter_mut().for_each(|x| *x /= c as f64);
    }
    Ok(sums)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellRun {
    pub mode: usize,
    pub start: f64,
    /// Length in samples.
    pub length: usize,
    /// Time from this run's first sample to the next run's first sample.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DwellHistogram {
    pub runs: Vec<DwellRun>,
    /// Run length in samples → number of runs.
    pub counts: BTreeMap<usize, usize>,
}

impl DwellHistogram {
    pub fn median_length(&self) -> Option<f64> {
        let mut l: Vec<usize> = self.runs.iter().map(|r| r.length).collect();
        if l.is_empty() {
            return None;
        }
        l.sort_unstable();
        let m = l.len() / 2;
        Some(if l.len() % 2 == 1 { l[m] as f64 } else { 0.5 * (l[m - 1] + l[m]) as f64 })
    }

    pub fn mean_length(&self) -> Option<f64> {
        if self.runs.is_empty() {
            return None;
        }
        Some(self.runs.iter().map(|r| r.length as f64).sum::<f64>() / self.runs.len() as f64)
    }

    /// `duration,count` rows with durations in units of `time_per_sample`.
    pub fn write_csv<W: Write>(&self, mut w: W, time_per_sample: f64) -> Result<()> {
        writeln!(w, "duration,count")?;
        for (&len, &count) in &self.counts {
            writeln!(w, "{},{count}", len as f64 * time_per_sample)?;
        }
        Ok(())
    }
}

/// Run-length encoding of the mode sequence.
pub fn mode_dwell_histogram(trace: &ModeTrace) -> DwellHistogram {
    let mut hist = DwellHistogram::default();
    let n = trace.len();
    let mut start = 0;
    for i in 1..=n {
        if i == n || trace.modes[i] != trace.modes[start] {
            let end_time = if i < n {
                trace.times[i]
            } else {
                // extend the final run by the typical spacing
                let step = if n > 1 { (trace.times[n - 1] - trace.times[0]) / (n - 1) as f64 } else { 0.0 };
                trace.times[n - 1] + step
            };
            let run = DwellRun {
                mode: trace.modes[start],
                start: trace.times[start],
                length: i - start,
                duration: end_time - trace.times[start],
            };
            *hist.counts.entry(run.length).or_insert(0) += 1;
            hist.runs.push(run);
            start = i;
        }
    }
    hist
}

/// Fraction of samples spent in each mode.
pub fn mode_occupancy(trace: &ModeTrace, n_modes: usize) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::Empty("mode trace"));
    }
    let mut occ = vec![0.0; n_modes];
    for &m in &trace.modes {
        if m >= n_modes {
            return Err(Error::IndexOutOfRange { index: m, len: n_modes });
        }
        occ[m] += 1.0;
    }
    occ.iter_mut().for_each(|o| *o /= trace.len() as f64);
    Ok(occ)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(rows: &[[u8; 3]]) -> SampleTrace {
        let mut t = SampleTrace::new(3);
        for (i, r) in rows.iter().enumerate() {
            t.push(i as f64, true, r).unwrap();
        }
        t
    }

    #[test]
    fn label_modes_follow_windowed_argmax() {
        let t = trace_of(&[[1, 0, 0], [0, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 0], [0, 0, 0]]);
        let m = label_mode_trace(&t, 0..3, 2).unwrap();
        assert_eq!(m.modes(), &[0, 0, 1, 1, 1, 1]);
        assert_eq!(m.switches(), 1);
    }

    #[test]
    fn dwell_runs_and_histogram() {
        let m = ModeTrace::from_modes(vec![0, 0, 0, 1, 1, 0, 2, 2, 2]);
        let h = mode_dwell_histogram(&m);
        let lengths: Vec<usize> = h.runs.iter().map(|r| r.length).collect();
        assert_eq!(lengths, vec![3, 2, 1, 3]);
        assert_eq!(h.counts, BTreeMap::from([(1, 1), (2, 1), (3, 2)]));
        assert_eq!(h.runs[3].duration, 3.0);
        assert_eq!(h.median_length(), Some(2.5));
        let mut buf = Vec::new();
        h.write_csv(&mut buf, 10.0).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "duration,count\n10,1\n20,1\n30,2\n");
    }

    #[test]
    fn single_mode_dwells_for_whole_trace() {
        let m = ModeTrace::from_modes(vec![1; 50]);
        let h = mode_dwell_histogram(&m);
        assert_eq!(h.median_length(), Some(50.0));
        assert_eq!(mode_occupancy(&m, 2).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn prototypes_pick_nearest_class() {
        let imgs = vec![vec![1u8, 1, 0], vec![1, 0, 0], vec![0, 0, 1]];
        let protos = class_prototypes(&imgs, &[0, 0, 1], 2).unwrap();
        assert_eq!(protos[0], vec![1.0, 0.5, 0.0]);
        let t = trace_of(&[[1, 0, 0], [0, 0, 1], [0, 1, 1]]);
        let m = prototype_mode_trace(&t, 0..3, &protos, 1).unwrap();
        assert_eq!(m.modes(), &[0, 1, 1]);
    }

    #[test]
    fn invalid_samples_are_skipped() {
        let mut t = SampleTrace::new(2);
        t.push(0.0, true, &[1, 0]).unwrap();
        t.push(1.0, false, &[0, 1]).unwrap();
        t.push(2.0, true, &[1, 0]).unwrap();
        let m = label_mode_trace(&t, 0..2, 1).unwrap();
        assert_eq!(m.modes(), &[0, 0]);
        assert_eq!(m.times(), &[0.0, 2.0]);
    }
}
