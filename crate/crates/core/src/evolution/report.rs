//! Two-sided estimate reports aggregated over an ensemble.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Left and right sides of one weighted estimate, averaged over paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: String,
    pub lhs_terms: BTreeMap<String, f64>,
    pub rhs_terms: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_std_error: f64,
    pub rhs_std_error: f64,
    /// `lhs/rhs`, `0` when both vanish, absent when only the right side does
    pub ratio: Option<f64>,
    pub n_paths: usize,
    pub excluded_paths: usize,
    pub dt: f64,
    pub flags: Vec<String>,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-path term values in a fixed order.
pub(crate) struct PathTerms {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub(crate) fn assemble(
    estimate: &str,
    lhs_names: &[&str],
    rhs_names: &[&str],
    paths: &[PathTerms],
    excluded: usize,
    dt: f64,
    mut flags: Vec<String>,
) -> EstimateReport {
    let column = |side: bool, i: usize| -> Vec<f64> {
        paths.iter().map(|p| if side { p.lhs[i] } else { p.rhs[i] }).collect()
    };
    let mut lhs_terms = BTreeMap::new();
    for (i, name) in lhs_names.iter().enumerate() {
        lhs_terms.insert(name.to_string(), mean_and_error(&column(true, i)).0);
    }
    let mut rhs_terms = BTreeMap::new();
    for (i, name) in rhs_names.iter().enumerate() {
        rhs_terms.insert(name.to_string(), mean_and_error(&column(false, i)).0);
    }
    let lhs_tot: Vec<f64> = paths.iter().map(|p| p.lhs.iter().sum()).collect();
    let rhs_tot: Vec<f64> = paths.iter().map(|p| p.rhs.iter().sum()).collect();
    let (lhs, lhs_std_error) = mean_and_error(&lhs_tot);
    let (rhs, rhs_std_error) = mean_and_error(&rhs_tot);
    let ratio = if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs == 0.0 {
        Some(0.0)
    } else {
        flags.push("right side vanishes while the left side is positive".into());
        None
    };
    if excluded > 0 {
        flags.push(format!("{excluded} diverged path(s) excluded"));
    }
    EstimateReport {
        estimate: estimate.to_string(),
        lhs_terms,
        rhs_terms,
        lhs,
        rhs,
        lhs_std_error,
        rhs_std_error,
        ratio,
        n_paths: paths.len(),
        excluded_paths: excluded,
        dt,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_over_zero_is_zero() {
        let p = vec![PathTerms { lhs: vec![0.0], rhs: vec![0.0] }];
        let r = assemble("x", &["a"], &["b"], &p, 0, 0.1, vec![]);
        assert_eq!(r.ratio, Some(0.0));
        let p = vec![PathTerms { lhs: vec![1.0], rhs: vec![0.0] }];
        let r = assemble("x", &["a"], &["b"], &p, 1, 0.1, vec![]);
        assert_eq!(r.ratio, None);
        assert_eq!(r.flags.len(), 2);
        let back: EstimateReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
