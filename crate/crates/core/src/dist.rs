//! Reference distributions for p-values (backed by `statrs`).

use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let n = Normal::new(0.0, 1.0).unwrap();
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Upper-tail probability of F(d1, d2).
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() || d1 <= 0.0 || d2 <= 0.0 {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(d1, d2).unwrap().sf(f).clamp(0.0, 1.0)
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let d = StudentsT::new(0.0, 1.0, df).unwrap();
    (2.0 * d.sf(t.abs())).clamp(0.0, 1.0)
}
