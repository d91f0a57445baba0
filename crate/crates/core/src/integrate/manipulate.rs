use super::spec::{AggFn, ValueRange};
use super::{IntegrationError, Result};
use crate::iot::NormalizedReading;

/// Reduces a numeric list.
///
/// `min`/`max` return an element exactly. `median` averages the two middle
/// elements of an even-length list. `average` sums the sorted values with
/// Neumaier compensation so the result does not depend on input order.
pub fn aggregate(values: &[f64], f: AggFn) -> Result<f64> {
    if values.is_empty() {
        return Err(IntegrationError::EmptyAggregation);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(IntegrationError::TypeMismatch(format!("non-finite value {bad}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(match f {
        AggFn::Min => sorted[0],
        AggFn::Max => sorted[n - 1],
        AggFn::Median if n % 2 == 1 => sorted[n / 2],
        AggFn::Median => {
            let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
            // a/2 + b/2 cannot overflow; exact unless a subnormal half is lost.
            if (a + b).is_finite() { (a + b) / 2.0 } else { a / 2.0 + b / 2.0 }
        }
        AggFn::Average => neumaier_sum(&sorted) / n as f64,
    })
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Keeps readings whose numeric result lies in the closed `range`, in order.
pub fn filter_range<'a, I>(readings: I, range: &ValueRange) -> Result<Vec<&'a NormalizedReading>>
where
    I: IntoIterator<Item = &'a NormalizedReading>,
{
    range.validate()?;
    let mut kept = Vec::new();
    for r in readings {
        let v = r.result.as_f64().ok_or_else(|| {
            IntegrationError::TypeMismatch(format!(
                "property {:?} of device {:?} is not numeric",
                r.property.name, r.device.device_id
            ))
        })?;
        if range.contains(v) {
            kept.push(r);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let v = [3.0, 1.0, 2.0, 10.0];
        assert_eq!(aggregate(&v, AggFn::Min).unwrap(), 1.0);
        assert_eq!(aggregate(&v, AggFn::Max).unwrap(), 10.0);
        assert_eq!(aggregate(&v, AggFn::Median).unwrap(), 2.5);
        assert_eq!(aggregate(&v, AggFn::Average).unwrap(), 4.0);
        assert!(matches!(aggregate(&[], AggFn::Min), Err(IntegrationError::EmptyAggregation)));
    }

    #[test]
    fn average_is_order_independent() {
        let a = [1e16, 1.0, -1e16, 3.0];
        let b = [3.0, -1e16, 1.0, 1e16];
        assert_eq!(aggregate(&a, AggFn::Average).unwrap(), 1.0);
        assert_eq!(aggregate(&a, AggFn::Average).unwrap(), aggregate(&b, AggFn::Average).unwrap());
    }

    #[test]
    fn median_of_extremes_does_not_overflow() {
        assert_eq!(aggregate(&[f64::MAX, f64::MAX], AggFn::Median).unwrap(), f64::MAX);
    }
}
