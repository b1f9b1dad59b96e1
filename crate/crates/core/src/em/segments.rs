//! Non-overlapping length-`L` windows of the measurement.

use crate::error::{MtdError, Result};
use crate::model::{Measurement, Signal};

/// `N_d = ⌊N/L⌋` consecutive segments; the trailing `N mod L` samples are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    l: usize,
    sigma: f64,
    data: Vec<f64>,
}

impl SegmentSet {
    pub fn from_measurement(y: &Measurement) -> Self {
        let l = y.signal_len();
        let n_d = y.len() / l;
        SegmentSet {
            l,
            sigma: y.sigma(),
            data: y.samples()[..n_d * l].to_vec(),
        }
    }

    /// Segments given directly, one length-`L` slice after another.
    pub fn from_flat(data: Vec<f64>, l: usize, sigma: f64) -> Result<Self> {
        if l == 0 || data.is_empty() || data.len() % l != 0 {
            return Err(MtdError::invalid(format!(
                "{} samples do not split into length-{l} segments",
                data.len()
            )));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(MtdError::invalid("sigma must be finite and nonnegative"));
        }
        Ok(SegmentSet { l, sigma, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.l
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.l
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn segment(&self, m: usize) -> &[f64] {
        &self.data[m * self.l..(m + 1) * self.l]
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Same segments with a different noise level.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        SegmentSet {
            sigma,
            ..self.clone()
        }
    }
}

/// First `L` entries of the left-zero-padded `x` circularly shifted by `l`:
/// entry `i` is `x[i + l - L]` where that index is valid, else 0.
pub fn shift_template(x: &Signal, l: usize) -> Result<Vec<f64>> {
    let len = x.len();
    if l >= 2 * len {
        return Err(MtdError::invalid(format!("shift {l} outside 0..{}", 2 * len)));
    }
    let v = x.values();
    Ok((0..len)
        .map(|i| {
            let j = i + l;
            if j >= len && j < 2 * len {
                v[j - len]
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_examples() {
        let x = Signal::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(shift_template(&x, 0).unwrap(), vec![0.0; 3]);
        assert_eq!(shift_template(&x, 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(shift_template(&x, 4).unwrap(), vec![2.0, 3.0, 0.0]);
        assert_eq!(shift_template(&x, 1).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(shift_template(&x, 5).unwrap(), vec![3.0, 0.0, 0.0]);
        assert!(shift_template(&x, 6).is_err());
    }

    #[test]
    fn segmentation_drops_remainder() {
        let y = Measurement::new((0..23).map(f64::from).collect(), 5, 1.0).unwrap();
        let s = SegmentSet::from_measurement(&y);
        assert_eq!(s.len(), 4);
        assert_eq!(s.segment(3), &[15.0, 16.0, 17.0, 18.0, 19.0]);
    }
}
