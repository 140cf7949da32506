use super::TransformError;
use crate::corpus::{Day, UserId};

/// One user's ordered `(day, value)` stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub user: UserId,
    points: Vec<(Day, f64)>,
}

impl LabeledSeries {
    pub fn new(user: UserId, points: Vec<(Day, f64)>) -> Result<Self, TransformError> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(TransformError::NotIncreasing(user));
        }
        Ok(LabeledSeries { user, points })
    }

    pub fn points(&self) -> &[(Day, f64)] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn with_values(&self, values: Vec<f64>) -> LabeledSeries {
        LabeledSeries {
            user: self.user.clone(),
            points: self.points.iter().zip(values).map(|(p, v)| (p.0, v)).collect(),
        }
    }
}

fn non_empty(s: &LabeledSeries) -> Result<(), TransformError> {
    if s.is_empty() {
        return Err(TransformError::EmptySeries(s.user.clone()));
    }
    Ok(())
}

/// Trailing moving average over calendar days `[t - window + 1, t]`,
/// averaging only the observed days.
pub fn moving_average_filter(s: &LabeledSeries, window_days: usize) -> Result<LabeledSeries, TransformError> {
    non_empty(s)?;
    let pts = s.points();
    let w = window_days.max(1) as Day;
    let mut out = Vec::with_capacity(pts.len());
    let mut start = 0;
    for (i, &(day, _)) in pts.iter().enumerate() {
        while pts[start].0 <= day - w {
            start += 1;
        }
        let window = &pts[start..=i];
        out.push(window.iter().map(|p| p.1).sum::<f64>() / window.len() as f64);
    }
    Ok(s.with_values(out))
}

/// Subtracts from each value the user's mean over all days sharing its
/// weekday (`day mod 7`).
pub fn weekday_detrend(s: &LabeledSeries) -> Result<LabeledSeries, TransformError> {
    non_empty(s)?;
    let mut sums = [0.0f64; 7];
    let mut counts = [0usize; 7];
    for &(day, v) in s.points() {
        let wd = day.rem_euclid(7) as usize;
        sums[wd] += v;
        counts[wd] += 1;
    }
    let values = s
        .points()
        .iter()
        .map(|&(day, v)| {
            let wd = day.rem_euclid(7) as usize;
            v - sums[wd] / counts[wd] as f64
        })
        .collect();
    Ok(s.with_values(values))
}

/// Labels a day `true` iff its value exceeds the series mean by more than
/// one population standard deviation.
pub fn binarize_one_std(s: &LabeledSeries) -> Result<Vec<bool>, TransformError> {
    if s.len() < 2 {
        return Err(TransformError::SeriesTooShort { user: s.user.clone(), needed: 2, len: s.len() });
    }
    let values = s.values();
    if values.iter().all(|&v| v == values[0]) {
        return Ok(vec![false; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(values.iter().map(|&v| v > mean + std).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(points: &[(Day, f64)]) -> LabeledSeries {
        LabeledSeries::new(UserId::from("u"), points.to_vec()).unwrap()
    }

    fn consecutive(values: &[f64]) -> LabeledSeries {
        series(&values.iter().enumerate().map(|(i, &v)| (i as Day + 1, v)).collect::<Vec<_>>())
    }

    #[test]
    fn moving_average_cases() {
        let c = consecutive(&[5.0; 4]);
        assert_eq!(moving_average_filter(&c, 14).unwrap(), c);
        let r = moving_average_filter(&consecutive(&[1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(r.values(), vec![1.0, 1.5, 2.5, 3.5]);
        let sparse = moving_average_filter(&series(&[(1, 2.0), (10, 8.0)]), 14).unwrap();
        assert_eq!(sparse.values(), vec![2.0, 5.0]);
        assert_eq!(sparse.points()[1].0, 10);
        let gap = moving_average_filter(&series(&[(1, 2.0), (20, 8.0)]), 14).unwrap();
        assert_eq!(gap.values(), vec![2.0, 8.0]);
    }

    #[test]
    fn weekday_detrend_cases() {
        // days 0, 7, 14 share a weekday, as do 1, 8, 15
        let s = series(&[(0, 5.0), (1, 3.0), (7, 5.0), (8, 3.0), (14, 5.0), (15, 3.0)]);
        assert!(weekday_detrend(&s).unwrap().values().iter().all(|v| *v == 0.0));
        let single = consecutive(&[1.0, 7.0, 2.0, 9.0, 4.0, 4.0, 0.5]);
        assert!(weekday_detrend(&single).unwrap().values().iter().all(|v| *v == 0.0));
        let pair = series(&[(2, 4.0), (9, 6.0)]);
        assert_eq!(weekday_detrend(&pair).unwrap().values(), vec![-1.0, 1.0]);
    }

    #[test]
    fn binarize_cases() {
        assert_eq!(
            binarize_one_std(&consecutive(&[0.0, 0.0, 0.0, 0.0, 10.0])).unwrap(),
            vec![false, false, false, false, true]
        );
        assert_eq!(binarize_one_std(&consecutive(&[3.0; 3])).unwrap(), vec![false; 3]);
        assert_eq!(binarize_one_std(&consecutive(&[-1.0, 1.0])).unwrap(), vec![false, false]);
        assert!(matches!(binarize_one_std(&consecutive(&[1.0])), Err(TransformError::SeriesTooShort { .. })));
    }

    #[test]
    fn empty_and_unordered_series_are_rejected() {
        let empty = series(&[]);
        assert!(moving_average_filter(&empty, 14).is_err());
        assert!(weekday_detrend(&empty).is_err());
        assert!(LabeledSeries::new(UserId::from("u"), vec![(2, 1.0), (2, 1.0)]).is_err());
    }

    fn arb_series() -> impl Strategy<Value = LabeledSeries> {
        proptest::collection::btree_map(0i64..120, -10.0f64..10.0, 1..60)
            .prop_map(|m| series(&m.into_iter().collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn moving_average_preserves_days_and_constants(s in arb_series(), c in -5.0f64..5.0, w in 1usize..20) {
            let out = moving_average_filter(&s, w).unwrap();
            let days: Vec<Day> = out.points().iter().map(|p| p.0).collect();
            let orig: Vec<Day> = s.points().iter().map(|p| p.0).collect();
            prop_assert_eq!(days, orig);
            let constant = s.with_values(vec![c; s.len()]);
            let smoothed = moving_average_filter(&constant, w).unwrap();
            prop_assert!(smoothed.values().iter().all(|v| (v - c).abs() < 1e-12));
        }

        #[test]
        fn detrended_weekday_means_vanish(s in arb_series()) {
            let out = weekday_detrend(&s).unwrap();
            for wd in 0..7 {
                let vals: Vec<f64> = out.points().iter().filter(|p| p.0.rem_euclid(7) == wd).map(|p| p.1).collect();
                if !vals.is_empty() {
                    let m = vals.iter().sum::<f64>() / vals.len() as f64;
                    prop_assert!(m.abs() < 1e-12);
                }
            }
        }

        #[test]
        fn binarize_marks_at_most_half(s in arb_series()) {
            prop_assume!(s.len() >= 2);
            let labels = binarize_one_std(&s).unwrap();
            let ones = labels.iter().filter(|b| **b).count();
            prop_assert!(ones <= s.len().div_ceil(2));
        }
    }
}
