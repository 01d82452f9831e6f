use statrs::distribution::{ContinuousCDF, StudentsT};

use super::TrainError;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample mean and the half-width of its two-sided 95% Student-t interval.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64), TrainError> {
    let n = values.len();
    if n < 2 {
        return Err(TrainError::Input(format!("confidence interval needs at least 2 values, got {n}")));
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((m, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| TrainError::Input(e.to_string()))?.inverse_cdf(0.975);
    Ok((m, t * var.sqrt() / (n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_intervals() {
        let (m, h) = confidence_interval(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m, 3.0);
        assert!((h - 1.963).abs() < 5e-4, "{h}");
        let (m, h) = confidence_interval(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((h - 6.353).abs() < 5e-4, "{h}");
    }

    #[test]
    fn constant_values_have_zero_width() {
        assert_eq!(confidence_interval(&[0.5; 4]).unwrap(), (0.5, 0.0));
    }

    #[test]
    fn single_value_rejected() {
        assert!(confidence_interval(&[1.0]).is_err());
        assert!(confidence_interval(&[]).is_err());
    }
}
