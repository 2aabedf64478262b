use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::boltzmann::BoltzmannMachine;
use crate::error::{check_len, invalid, Result};

/// Layer sizes of a restricted Boltzmann machine.
///
/// Units are ordered `[visible | label | hidden]`. Label units belong to the
/// visible side for training, so the machine is bipartite between
/// `visible ∪ label` and `hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbmLayout {
    pub n_visible: usize,
    #[serde(default)]
    pub n_label: usize,
    pub n_hidden: usize,
}

impl RbmLayout {
    pub fn new(n_visible: usize, n_hidden: usize, n_label: usize) -> Self {
        Self { n_visible, n_label, n_hidden }
    }

    pub fn n_units(&self) -> usize {
        self.n_visible + self.n_label + self.n_hidden
    }

    /// Visible plus label units.
    pub fn n_visible_side(&self) -> usize {
        self.n_visible + self.n_label
    }

    pub fn visible(&self) -> Range<usize> {
        0..self.n_visible
    }

    pub fn labels(&self) -> Range<usize> {
        self.n_visible..self.n_visible + self.n_label
    }

    pub fn hidden(&self) -> Range<usize> {
        self.n_visible_side()..self.n_units()
    }

    pub fn visible_side(&self) -> Range<usize> {
        0..self.n_visible_side()
    }

    /// Size match and no couplings inside either side of the bipartition.
    pub fn check(&self, machine: &BoltzmannMachine) -> Result<()> {
        check_len(self.n_units(), machine.n_units())?;
        let vs = self.n_visible_side();
        let n = self.n_units();
        for i in 0..n {
            let row = machine.row(i);
            let same_side = if i < vs { 0..vs } else { vs..n };
            if let Some(j) = same_side.into_iter().find(|&j| row[j] != 0.0) {
                return Err(invalid(format!("within-layer coupling between units {i} and {j}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_partition_units() {
        let l = RbmLayout::new(4, 2, 3);
        assert_eq!(l.n_units(), 9);
        assert_eq!(l.visible(), 0..4);
        assert_eq!(l.labels(), 4..7);
        assert_eq!(l.hidden(), 7..9);
    }

    #[test]
    fn rejects_within_layer_weights() {
        let l = RbmLayout::new(2, 1, 0);
        let mut m = BoltzmannMachine::zeros(3);
        m.set_weight(0, 2, 1.0).unwrap();
        assert!(l.check(&m).is_ok());
        m.set_weight(0, 1, 0.5).unwrap();
        assert!(l.check(&m).is_err());
        assert!(RbmLayout::new(1, 1, 0).check(&m).is_err());
    }
}
