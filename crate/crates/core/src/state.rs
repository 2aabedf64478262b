//! Binary network states, sample traces and clamp masks shared by every sampler.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{check_len, invalid, Error, Result};

/// A configuration `z ∈ {0,1}^n`.
///
/// Bit `i` of the state index is `z_i`, so `from_index(0b011, 3)` is `z = (1, 1, 0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryState(Vec<u8>);

impl BinaryState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(invalid(format!("state entry {b} is not binary")));
        }
        Ok(Self(bits))
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random::<bool>() as u8).collect())
    }

    pub fn index(&self) -> usize {
        state_index(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Display for BinaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bitstring(f, &self.0)
    }
}

/// Little-endian state index of a bit slice (bit `i` is `bits[i]`).
pub fn state_index(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0usize, |acc, (i, &b)| acc | ((b as usize & 1) << i))
}

fn write_bitstring(f: &mut impl fmt::Write, bits: &[u8]) -> fmt::Result {
    for &b in bits {
        f.write_char(if b == 0 { '0' } else { '1' })?;
    }
    Ok(())
}

fn parse_bitstring(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Format(format!("invalid bit character {other:?}"))),
        })
        .collect()
}

/// Time-ordered binary states produced by a sampler.
///
/// States are stored flat with stride `n_units`. Timestamps are the sweep or
/// step index for classical samplers and simulation time (ms) for spiking
/// networks. The validity flag marks samples drawn from the target
/// distribution; tempered samplers only flag those taken at inverse temperature 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    n_units: usize,
    bits: Vec<u8>,
    valid: Vec<bool>,
    times: Vec<f64>,
}

impl SampleTrace {
    pub fn new(n_units: usize) -> Self {
        Self { n_units, bits: Vec::new(), valid: Vec::new(), times: Vec::new() }
    }

    pub fn with_capacity(n_units: usize, capacity: usize) -> Self {
        Self {
            n_units,
            bits: Vec::with_capacity(n_units * capacity),
            valid: Vec::with_capacity(capacity),
            times: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, time: f64, valid: bool, state: &[u8]) -> Result<()> {
        check_len(self.n_units, state.len())?;
        if let Some(&last) = self.times.last() {
            if time < last {
                return Err(invalid(format!("timestamp {time} precedes {last}")));
            }
        }
        self.bits.extend_from_slice(state);
        self.valid.push(valid);
        self.times.push(time);
        Ok(())
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.bits[i * self.n_units..(i + 1) * self.n_units]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// `(time, valid, state)` for every sample.
    pub fn iter(&self) -> impl Iterator<Item = (f64, bool, &[u8])> + '_ {
        let n = self.n_units.max(1);
        self.times
            .iter()
            .zip(&self.valid)
            .zip(self.bits.chunks(n).chain(std::iter::repeat(&[][..])))
            .map(|((&t, &v), s)| (t, v, s))
    }

    pub fn valid_states(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.iter().filter(|(_, v, _)| *v).map(|(_, _, s)| s)
    }

    /// Keep only valid samples, at most `limit` of them.
    pub fn valid_prefix(&self, limit: usize) -> SampleTrace {
        let mut out = SampleTrace::with_capacity(self.n_units, limit.min(self.len()));
        for (t, _, s) in self.iter().filter(|(_, v, _)| *v).take(limit) {
            out.bits.extend_from_slice(s);
            out.valid.push(true);
            out.times.push(t);
        }
        out
    }

    /// Restrict every state to a subset of units.
    pub fn project(&self, units: &[usize]) -> Result<SampleTrace> {
        if let Some(&bad) = units.iter().find(|&&u| u >= self.n_units) {
            return Err(Error::IndexOutOfRange { index: bad, len: self.n_units });
        }
        let mut out = SampleTrace::with_capacity(units.len(), self.len());
        for (t, v, s) in self.iter() {
            out.bits.extend(units.iter().map(|&u| s[u]));
            out.valid.push(v);
            out.times.push(t);
        }
        Ok(out)
    }

    /// One line per sample: `timestamp valid bitstring`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::with_capacity(self.n_units + 32);
        for (t, v, s) in self.iter() {
            line.clear();
            use std::fmt::Write as _;
            let _ = write!(line, "{t} {} ", v as u8);
            let _ = write_bitstring(&mut line, s);
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, n_units: usize) -> Result<SampleTrace> {
        let mut trace = SampleTrace::new(n_units);
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("trace line {}: {line:?}", lineno + 1));
            let mut fields = line.split_whitespace();
            let t: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            let v = match fields.next() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(bad()),
            };
            let bits = parse_bitstring(fields.next().unwrap_or(""))?;
            if fields.next().is_some() {
                return Err(bad());
            }
            trace.push(t, v, &bits)?;
        }
        Ok(trace)
    }
}

/// Per-unit clamp entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Clamp {
    #[default]
    Free,
    Zero,
    One,
}

impl Clamp {
    pub fn value(self) -> Option<u8> {
        match self {
            Clamp::Free => None,
            Clamp::Zero => Some(0),
            Clamp::One => Some(1),
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Clamp::Zero
        } else {
            Clamp::One
        }
    }
}

/// Clamp entries over a set of units (typically the visible layer).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClampMask(pub Vec<Clamp>);

impl ClampMask {
    pub fn free(n: usize) -> Self {
        Self(vec![Clamp::Free; n])
    }

    /// Clamp every unit to the given bits.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| Clamp::from_bit(b)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Clamp] {
        &self.0
    }

    pub fn n_clamped(&self) -> usize {
        self.0.iter().filter(|c| **c != Clamp::Free).count()
    }

    /// Extend with free entries up to `n` units.
    pub fn padded(&self, n: usize) -> Result<ClampMask> {
        if self.0.len() > n {
            return Err(Error::DimensionMismatch { expected: n, got: self.0.len() });
        }
        let mut v = self.0.clone();
        v.resize(n, Clamp::Free);
        Ok(ClampMask(v))
    }

    /// Overwrite clamped entries of `state` with their clamp values.
    pub fn apply(&self, state: &mut [u8]) {
        for (z, c) in state.iter_mut().zip(&self.0) {
            if let Some(v) = c.value() {
                *z = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_little_endian() {
        let s = BinaryState::from_index(0b110, 3);
        assert_eq!(s.bits(), &[0, 1, 1]);
        assert_eq!(s.index(), 6);
        assert_eq!(s.to_string(), "011");
    }

    #[test]
    fn trace_rejects_decreasing_time() {
        let mut t = SampleTrace::new(2);
        t.push(1.0, true, &[0, 1]).unwrap();
        assert!(t.push(0.5, true, &[0, 1]).is_err());
        assert!(matches!(t.push(2.0, true, &[0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn trace_text_round_trip() {
        let mut t = SampleTrace::new(3);
        t.push(0.0, true, &[1, 0, 1]).unwrap();
        t.push(1.0, false, &[0, 0, 1]).unwrap();
        t.push(12.5, true, &[1, 1, 1]).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 1 101\n1 0 001\n12.5 1 111\n");
        let back = SampleTrace::read_text(&buf[..], 3).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.valid_count(), 2);
    }

    #[test]
    fn malformed_trace_lines_are_rejected() {
        assert!(SampleTrace::read_text(&b"0 2 101\n"[..], 3).is_err());
        assert!(SampleTrace::read_text(&b"0 1 1x1\n"[..], 3).is_err());
        assert!(SampleTrace::read_text(&b"0 1 10\n"[..], 3).is_err());
    }

    #[test]
    fn clamp_mask_applies_values() {
        let m = ClampMask(vec![Clamp::One, Clamp::Free, Clamp::Zero]);
        let mut s = vec![0, 1, 1];
        m.apply(&mut s);
        assert_eq!(s, vec![1, 1, 0]);
        assert_eq!(m.n_clamped(), 2);
        assert_eq!(m.padded(4).unwrap().0[3], Clamp::Free);
    }
}
