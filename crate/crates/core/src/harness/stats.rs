use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile (the common spreadsheet definition):
/// position `q·(n−1)` in the sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Box-plot summary of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            count: v.len(),
            min: v.first().copied(),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v.last().copied(),
            mean: (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spreadsheet_reference_values() {
        // QUARTILE.INC / PERCENTILE.INC results for 1, 2, 4, 7, 11
        let s = Summary::of(&[7.0, 1.0, 11.0, 2.0, 4.0]);
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (Some(1.0), Some(2.0), Some(4.0), Some(7.0), Some(11.0))
        );
        assert_eq!(s.mean, Some(5.0));
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((s.q1, s.median, s.q3), (Some(1.75), Some(2.5), Some(3.25)));
        assert_eq!(Summary::of(&[]).count, 0);
        assert_eq!(median(&[]), None);
    }

    proptest! {
        #[test]
        fn quartiles_are_ordered(v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let s = Summary::of(&v);
            let (a, b, c, d, e) = (s.min.unwrap(), s.q1.unwrap(), s.median.unwrap(), s.q3.unwrap(), s.max.unwrap());
            prop_assert!(a <= b && b <= c && c <= d && d <= e);
        }
    }
}
