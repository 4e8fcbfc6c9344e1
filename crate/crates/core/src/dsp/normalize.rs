use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted min-max scaling range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxBounds {
    pub min: f64,
    pub max: f64,
}

impl MinMaxBounds {
    pub fn fit(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Parameter("cannot fit bounds on an empty sequence".into()));
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::DegenerateRange(min));
        }
        Ok(Self { min, max })
    }

    /// Scale one value, clamped to `[0, 1]`.
    pub fn transform(&self, x: f64) -> f64 {
        ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Min-max scale `samples`, fitting the bounds when none are given.
pub fn min_max_normalize(
    samples: &[f64],
    bounds: Option<MinMaxBounds>,
) -> Result<(Vec<f64>, MinMaxBounds)> {
    let bounds = match bounds {
        Some(b) if b.max > b.min => b,
        Some(b) => return Err(Error::DegenerateRange(b.min)),
        None => MinMaxBounds::fit(samples)?,
    };
    Ok((samples.iter().map(|&x| bounds.transform(x)).collect(), bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fitted_examples() {
        let (y, b) = min_max_normalize(&[0.0, 5.0, 10.0], None).unwrap();
        assert_eq!(y, vec![0.0, 0.5, 1.0]);
        assert_eq!(b, MinMaxBounds { min: 0.0, max: 10.0 });
    }

    #[test]
    fn given_bounds_clamp() {
        let b = MinMaxBounds { min: 0.0, max: 10.0 };
        let (y, _) = min_max_normalize(&[-2.0, 12.0], Some(b)).unwrap();
        assert_eq!(y, vec![0.0, 1.0]);
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(matches!(
            min_max_normalize(&[3.0, 3.0, 3.0], None),
            Err(Error::DegenerateRange(_))
        ));
    }

    proptest! {
        #[test]
        fn normalizing_twice_is_identity(xs in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(xs.iter().any(|&x| x != xs[0]));
            let (once, _) = min_max_normalize(&xs, None).unwrap();
            let (twice, b) = min_max_normalize(&once, None).unwrap();
            prop_assert_eq!(b, MinMaxBounds { min: 0.0, max: 1.0 });
            for (a, c) in once.iter().zip(&twice) {
                prop_assert!((a - c).abs() <= 1e-15);
            }
        }
    }
}
