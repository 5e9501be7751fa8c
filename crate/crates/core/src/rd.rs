//! Sharp regression discontinuity in time: MSE-optimal bandwidth selection and
//! the conventional / bias-corrected / robust estimate triple.
//!
//! The running variable is months relative to the cutoff; the cutoff month is
//! treated. Bias correction and the robust variance follow the usual
//! local-polynomial recipe: the order-`p` fit at bandwidth `h` is corrected by
//! the plug-in leading bias computed from an order-`q` fit at pilot bandwidth
//! `b`, and the robust variance accounts for the noise in that correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::data::MonthlyPanel;
use crate::dist::normal_two_sided;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::localpoly::{nearest_neighbor_variances, poly_row, Kernel, VarianceKind};
use crate::month::YearMonth;
use crate::scalar::Scalar;

/// Monthly outcome fed to the estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    CivilianCasualties,
    StrikePrecision,
    CivPerStrike,
    StrikeCount,
    CombatantCasualties,
    /// User-supplied series joined on month; every panel month must be present.
    Custom {
        name: String,
        values: BTreeMap<YearMonth, f64>,
    },
}

impl Outcome {
    pub fn name(&self) -> &str {
        match self {
            Outcome::CivilianCasualties => "civilian_casualties",
            Outcome::StrikePrecision => "strike_precision",
            Outcome::CivPerStrike => "civ_per_strike",
            Outcome::StrikeCount => "strike_count",
            Outcome::CombatantCasualties => "combatant_casualties",
            Outcome::Custom { name, .. } => name,
        }
    }

    pub fn from_name(name: &str) -> Option<Outcome> {
        Some(match name {
            "civilian_casualties" | "civilian" | "civ_cas" => Outcome::CivilianCasualties,
            "strike_precision" | "precision" => Outcome::StrikePrecision,
            "civ_per_strike" => Outcome::CivPerStrike,
            "strike_count" | "strike_frequency" => Outcome::StrikeCount,
            "combatant_casualties" | "combatant" => Outcome::CombatantCasualties,
            _ => return None,
        })
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// `(month, value)` pairs for the outcome, skipping months where it is undefined.
pub fn outcome_series(panel: &MonthlyPanel, outcome: &Outcome) -> Result<Vec<(YearMonth, f64)>> {
    if let Outcome::Custom { name, values } = outcome {
        let missing: Vec<String> = panel
            .observations
            .iter()
            .filter(|o| !values.contains_key(&o.month))
            .map(|o| o.month.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Join { missing });
        }
        let series = panel.observations.iter().map(|o| (o.month, values[&o.month])).collect::<Vec<_>>();
        if series.is_empty() {
            return Err(Error::MissingOutcome(name.clone()));
        }
        return Ok(series);
    }
    let series: Vec<(YearMonth, f64)> = panel
        .observations
        .iter()
        .filter_map(|o| {
            let v = match outcome {
                Outcome::CivilianCasualties => Some(o.civilian_sum),
                Outcome::StrikePrecision => o.precision_mean,
                Outcome::CivPerStrike => o.civ_per_strike,
                Outcome::StrikeCount => Some(o.strike_count as f64),
                Outcome::CombatantCasualties => Some(o.combatant_sum()),
                Outcome::Custom { .. } => unreachable!(),
            };
            v.map(|v| (o.month, v))
        })
        .collect();
    if series.is_empty() {
        return Err(Error::MissingOutcome(format!("{} is undefined in every month", outcome.name())));
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    Mserd,
    /// Common bandwidth in months for both the estimate and the bias fit.
    Manual(f64),
}

impl BandwidthChoice {
    pub fn label(&self) -> &'static str {
        match self {
            BandwidthChoice::Mserd => "mserd",
            BandwidthChoice::Manual(_) => "Manual",
        }
    }
}

impl std::str::FromStr for BandwidthChoice {
    type Err = Error;

    /// `mserd` or `manual:N`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mserd") {
            return Ok(BandwidthChoice::Mserd);
        }
        s.strip_prefix("manual:")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v > 0.0)
            .map(BandwidthChoice::Manual)
            .ok_or_else(|| Error::Config(format!("invalid bandwidth `{s}` (expected mserd or manual:N)")))
    }
}

/// Estimator settings independent of the data source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdSettings {
    pub p: usize,
    pub q: usize,
    pub kernel: Kernel,
    pub bandwidth: BandwidthChoice,
    pub variance: VarianceKind,
}

impl Default for RdSettings {
    fn default() -> Self {
        RdSettings {
            p: 1,
            q: 2,
            kernel: Kernel::Triangular,
            bandwidth: BandwidthChoice::Mserd,
            variance: VarianceKind::default(),
        }
    }
}

impl RdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.q <= self.p {
            return Err(Error::Config(format!(
                "bias order q ({}) must exceed polynomial order p ({})",
                self.q, self.p
            )));
        }
        if let BandwidthChoice::Manual(h) = self.bandwidth {
            if h < (self.p + 2) as f64 {
                return Err(Error::Config(format!(
                    "manual bandwidth {h} below the minimum of p + 2 = {} months",
                    self.p + 2
                )));
            }
        }
        if let VarianceKind::NearestNeighbor(0) = self.variance {
            return Err(Error::Config("nearest-neighbor variance needs at least one neighbor".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdConfig {
    pub cutoff: YearMonth,
    pub outcome: Outcome,
    #[serde(flatten)]
    pub settings: RdSettings,
}

impl RdConfig {
    pub fn new(cutoff: YearMonth, outcome: Outcome) -> Self {
        RdConfig { cutoff, outcome, settings: RdSettings::default() }
    }

    pub fn with_bandwidth(mut self, bandwidth: BandwidthChoice) -> Self {
        self.settings.bandwidth = bandwidth;
        self
    }

    pub fn with_orders(mut self, p: usize, q: usize) -> Self {
        self.settings.p = p;
        self.settings.q = q;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.settings.kernel = kernel;
        self
    }
}

/// Running variable (months from cutoff) and outcome in the requested scalar.
pub fn design_from_panel<T: Scalar>(panel: &MonthlyPanel, config: &RdConfig) -> Result<(Vec<T>, Vec<T>)> {
    let series = outcome_series(panel, &config.outcome)?;
    Ok(series
        .into_iter()
        .map(|(m, v)| (T::of(f64::from(m.months_since(config.cutoff))), T::of(v)))
        .unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bandwidths<T> {
    /// Bandwidth of the point estimator.
    pub h: T,
    /// Pilot bandwidth of the bias fit.
    pub b: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdEstimate<T> {
    pub cutoff: Option<YearMonth>,
    pub outcome: Option<String>,
    pub tau_conventional: T,
    pub tau_bias_corrected: T,
    pub tau_robust: T,
    pub se_conventional: T,
    /// Standard error reported beside the bias-corrected point estimate
    /// (the conventional one; the robust row carries the inflated one).
    pub se_bias_corrected: T,
    pub se_robust: T,
    pub p_conventional: T,
    pub p_bias_corrected: T,
    pub p_robust: T,
    pub bandwidth_used: T,
    pub bias_bandwidth_used: T,
    pub bandwidth_type: String,
    pub n_left: usize,
    pub n_right: usize,
    pub p: usize,
    pub q: usize,
    pub kernel: Kernel,
    pub warnings: Vec<String>,
}

impl<T: Scalar> RdEstimate<T> {
    pub fn z_conventional(&self) -> T {
        ratio(self.tau_conventional, self.se_conventional)
    }

    pub fn z_robust(&self) -> T {
        ratio(self.tau_robust, self.se_robust)
    }

    /// `(label, estimate, se, p)` for the three rows.
    pub fn rows(&self) -> [(&'static str, T, T, T); 3] {
        [
            ("Conventional", self.tau_conventional, self.se_conventional, self.p_conventional),
            ("Bias-Corrected", self.tau_bias_corrected, self.se_bias_corrected, self.p_bias_corrected),
            ("Robust", self.tau_robust, self.se_robust, self.p_robust),
        ]
    }
}

fn ratio<T: Scalar>(tau: T, se: T) -> T {
    if se > T::zero() {
        tau / se
    } else if tau == T::zero() {
        T::zero()
    } else {
        T::infinity() * tau.signum()
    }
}

fn p_value<T: Scalar>(tau: T, se: T) -> T {
    T::of(normal_two_sided(ratio(tau, se).as_f64()))
}

/// Observations on one side of the cutoff with absolute distances sorted.
struct SideData<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> SideData<T> {
    fn sorted_distances(&self) -> Vec<T> {
        let mut d: Vec<T> = self.x.iter().map(|v| v.abs()).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d
    }

    fn count_in(&self, h: T, kernel: Kernel) -> usize {
        self.x.iter().filter(|&&x| kernel.weight(x / h) > T::zero()).count()
    }
}

fn split<T: Scalar>(x: &[T], y: &[T]) -> (SideData<T>, SideData<T>) {
    let mut left = SideData { x: vec![], y: vec![] };
    let mut right = SideData { x: vec![], y: vec![] };
    for (&xi, &yi) in x.iter().zip(y) {
        let s = if xi >= T::zero() { &mut right } else { &mut left };
        s.x.push(xi);
        s.y.push(yi);
    }
    (left, right)
}

/// Smallest bandwidth giving at least `k` positively weighted points, or
/// `None` when the side has fewer than `k` points.
fn min_bandwidth<T: Scalar>(sorted: &[T], k: usize, kernel: Kernel) -> Option<T> {
    if k == 0 {
        return Some(T::min_positive_value());
    }
    let dk = *sorted.get(k - 1)?;
    if kernel == Kernel::Uniform && dk > T::zero() {
        return Some(dk);
    }
    match sorted[k..].iter().find(|&&d| d > dk) {
        Some(&next) => Some(next),
        None if dk > T::zero() => Some(dk * (T::one() + T::one() / T::of_usize(k))),
        None => Some(T::one()),
    }
}

/// Widens `h` until each side has `k` weighted points; notes any change.
fn ensure_window<T: Scalar>(
    h: T,
    k: usize,
    kernel: Kernel,
    sides: [&SideData<T>; 2],
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<T> {
    let mut out = h;
    for s in sides {
        if s.count_in(out, kernel) < k {
            let need = min_bandwidth(&s.sorted_distances(), k, kernel).ok_or(Error::ThinWindow {
                left: sides[0].x.len(),
                right: sides[1].x.len(),
                required: k,
            })?;
            out = out.max(need);
        }
    }
    if out > h {
        warnings.push(format!(
            "{what} inflated from {:.3} to {:.3} months to keep {k} observations per side",
            h.as_f64(),
            out.as_f64()
        ));
    }
    Ok(out)
}

/// Weighted polynomial regression on one side: `(XᵀWX)⁻¹`, coefficients and
/// the kernel weights of every point (zero outside the window).
struct SideFit<T> {
    gram_inv: Matrix<T>,
    coef: Vec<T>,
    weights: Vec<T>,
}

fn side_fit<T: Scalar>(x: &[T], y: &[T], h: T, order: usize, kernel: Kernel) -> Result<SideFit<T>> {
    let weights: Vec<T> = x.iter().map(|&xi| kernel.weight(xi / h) / h).collect();
    let active: Vec<usize> = (0..x.len()).filter(|&i| weights[i] > T::zero()).collect();
    if active.len() < order + 1 {
        return Err(Error::ThinWindow { left: active.len(), right: active.len(), required: order + 1 });
    }
    let k = order + 1;
    let mut data = Vec::with_capacity(active.len() * k);
    let mut rhs = Vec::with_capacity(active.len());
    let mut row = Vec::with_capacity(k);
    for &i in &active {
        let sw = weights[i].sqrt();
        row.clear();
        poly_row(x[i], order, &mut row);
        data.extend(row.iter().map(|&v| v * sw));
        rhs.push(y[i] * sw);
    }
    let qr = Qr::new(&Matrix::from_row_major(active.len(), k, data))?;
    qr.ensure_full_rank()?;
    Ok(SideFit { gram_inv: qr.gram_inverse(), coef: qr.solve(&rhs), weights })
}

impl<T: Scalar> SideFit<T> {
    /// Row `j` of `(XᵀWX)⁻¹ r(x) w(x)` for every point: the linear weights
    /// that produce coefficient `j` from the outcomes.
    fn coefficient_weights(&self, x: &[T], order: usize, j: usize) -> Vec<T> {
        let mut row = Vec::with_capacity(order + 1);
        x.iter()
            .zip(&self.weights)
            .map(|(&xi, &w)| {
                if w == T::zero() {
                    return T::zero();
                }
                row.clear();
                poly_row(xi, order, &mut row);
                let g = self.gram_inv.row(j);
                g.iter().zip(&row).map(|(&a, &b)| a * b).sum::<T>() * w
            })
            .collect()
    }

    fn residual_variances(&self, x: &[T], y: &[T], order: usize, variance: VarianceKind) -> Vec<T> {
        match variance {
            VarianceKind::NearestNeighbor(j) => {
                let active: Vec<usize> = (0..x.len()).filter(|&i| self.weights[i] > T::zero()).collect();
                let xs: Vec<T> = active.iter().map(|&i| x[i]).collect();
                let ys: Vec<T> = active.iter().map(|&i| y[i]).collect();
                let s = nearest_neighbor_variances(&xs, &ys, &vec![true; xs.len()], j);
                let mut out = vec![T::zero(); x.len()];
                for (k, &i) in active.iter().enumerate() {
                    out[i] = s[k];
                }
                out
            }
            VarianceKind::Hc0 => {
                let mut row = Vec::with_capacity(order + 1);
                x.iter()
                    .zip(y)
                    .map(|(&xi, &yi)| {
                        row.clear();
                        poly_row(xi, order, &mut row);
                        let fitted: T = row.iter().zip(&self.coef).map(|(&a, &b)| a * b).sum();
                        (yi - fitted) * (yi - fitted)
                    })
                    .collect()
            }
        }
    }
}

/// One side's contribution to the bandwidth formula.
struct BwTerms<T> {
    v: T,
    b: T,
    r: T,
}

#[allow(clippy::too_many_arguments)]
fn bw_terms<T: Scalar>(
    side: &SideData<T>,
    o: usize,
    nu: usize,
    o_b: usize,
    h_v: T,
    h_b: T,
    kernel: Kernel,
    variance: VarianceKind,
) -> Result<BwTerms<T>> {
    let fv = side_fit(&side.x, &side.y, h_v, o, kernel)?;
    let sig = fv.residual_variances(&side.x, &side.y, o, variance);
    let a = fv.coefficient_weights(&side.x, o, nu);
    let v_v: T = a.iter().zip(&sig).map(|(&ai, &s)| ai * ai * s).sum();

    // projection of (x/h_V)^(o+1) on the order-o basis
    let mut lvec = vec![T::zero(); o + 1];
    let mut row = Vec::with_capacity(o + 1);
    for (&xi, &w) in side.x.iter().zip(&fv.weights) {
        if w == T::zero() {
            continue;
        }
        row.clear();
        poly_row(xi, o, &mut row);
        let u = (xi / h_v).powi(o as i32 + 1);
        for (l, &r) in lvec.iter_mut().zip(&row) {
            *l += w * r * u;
        }
    }
    let proj: T = fv.gram_inv.row(nu).iter().zip(&lvec).map(|(&g, &l)| g * l).sum();
    let b_const = h_v.powi(nu as i32) * proj;

    let fb = side_fit(&side.x, &side.y, h_b, o_b, kernel)?;
    let sig_b = fb.residual_variances(&side.x, &side.y, o_b, variance);
    let cb = fb.coefficient_weights(&side.x, o_b, o + 1);
    let v_b: T = cb.iter().zip(&sig_b).map(|(&c, &s)| c * c * s).sum();

    let two = T::of(2.0);
    let gap = T::of_usize(o + 1 - nu);
    Ok(BwTerms {
        v: T::of_usize(2 * nu + 1) * h_v.powi(2 * nu as i32 + 1) * v_v,
        b: (two * gap).sqrt() * b_const * fb.coef[o + 1],
        r: two * gap * T::of(3.0) * b_const * b_const * v_b,
    })
}

/// `regularize` adds the variance-of-bias terms; the derivative pilot omits them.
fn combine<T: Scalar>(l: &BwTerms<T>, r: &BwTerms<T>, o: usize, regularize: bool) -> T {
    let num = l.v + r.v;
    let bias = r.b - l.b;
    let mut den = bias * bias;
    if regularize {
        den += l.r + r.r;
    }
    if den <= T::zero() {
        // no detectable bias: callers cap this at the running-variable range
        return T::infinity();
    }
    (num / den).powf(T::one() / T::of_usize(2 * o + 3))
}

/// Type-2 sample quantile (average at discontinuities of the empirical CDF).
fn quantile_type2<T: Scalar>(sorted: &[T], prob: f64) -> T {
    let n = sorted.len();
    let np = n as f64 * prob;
    let j = np.floor() as usize;
    if (np - j as f64).abs() < 1e-12 {
        if j == 0 {
            sorted[0]
        } else if j >= n {
            sorted[n - 1]
        } else {
            (sorted[j - 1] + sorted[j]) / T::of(2.0)
        }
    } else {
        sorted[j.min(n - 1)]
    }
}

fn check_variation<T: Scalar>(y: &[T]) -> Result<()> {
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        Err(Error::ZeroVariance)
    } else {
        Ok(())
    }
}

/// MSE-optimal common bandwidth `h` and pilot `b` for running variable `x`
/// (cutoff at zero).
pub fn select_bandwidth_mserd_xy<T: Scalar>(x: &[T], y: &[T], settings: &RdSettings) -> Result<Bandwidths<T>> {
    let mut warnings = Vec::new();
    select_mserd(x, y, settings, &mut warnings)
}

fn select_mserd<T: Scalar>(
    x: &[T],
    y: &[T],
    settings: &RdSettings,
    warnings: &mut Vec<String>,
) -> Result<Bandwidths<T>> {
    settings.validate()?;
    let (p, q, kernel, var) = (settings.p, settings.q, settings.kernel, settings.variance);
    let (left, right) = split(x, y);
    let required = (p + 3).max(q + 3);
    if left.x.len() < required || right.x.len() < required {
        return Err(Error::ThinWindow { left: left.x.len(), right: right.x.len(), required });
    }
    check_variation(y)?;

    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = x.iter().copied().sum::<T>() / T::of_usize(n);
    let sd = (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::of_usize(n - 1)).sqrt();
    let iqr = quantile_type2(&sorted, 0.75) - quantile_type2(&sorted, 0.25);
    let spread = if iqr > T::zero() { sd.min(iqr / T::of(1.349)) } else { sd };
    let range_l = sorted[0].abs();
    let range_r = sorted[n - 1].abs();
    let bw_max = range_l.max(range_r);
    let mut c_bw = T::of(kernel.pilot_constant()) * spread * T::of_usize(n).powf(T::of(-0.2));
    c_bw = c_bw.min(bw_max);
    // every pilot fit below uses at most order q + 1 at bandwidth c_bw
    c_bw = ensure_window(c_bw, q + 3, kernel, [&left, &right], "pilot bandwidth", warnings)?;

    // padded so the outermost observation keeps a positive weight
    let pad = T::one() + T::of(f64::EPSILON.sqrt());
    let d_l = bw_terms(&left, q + 1, q + 1, q + 2, c_bw, range_l * pad, kernel, var)?;
    let d_r = bw_terms(&right, q + 1, q + 1, q + 2, c_bw, range_r * pad, kernel, var)?;
    if d_l.v + d_r.v == T::zero() {
        return Err(Error::ZeroVariance);
    }
    let mut d_bw = combine(&d_l, &d_r, q + 1, false).min(bw_max);
    d_bw = ensure_window(d_bw, q + 3, kernel, [&left, &right], "derivative pilot", warnings)?;

    let b_l = bw_terms(&left, q, p + 1, q + 1, c_bw, d_bw, kernel, var)?;
    let b_r = bw_terms(&right, q, p + 1, q + 1, c_bw, d_bw, kernel, var)?;
    let mut b_bw = combine(&b_l, &b_r, q, true).min(bw_max);
    b_bw = ensure_window(b_bw, q + 2, kernel, [&left, &right], "bias bandwidth", warnings)?;

    let h_l = bw_terms(&left, p, 0, q, c_bw, b_bw, kernel, var)?;
    let h_r = bw_terms(&right, p, 0, q, c_bw, b_bw, kernel, var)?;
    let mut h = combine(&h_l, &h_r, p, true).min(bw_max);
    h = ensure_window(h, p + 2, kernel, [&left, &right], "bandwidth", warnings)?;
    let b = b_bw.max(h);
    Ok(Bandwidths { h, b })
}

/// Bandwidths for a monthly panel.
pub fn select_bandwidth_mserd<T: Scalar>(panel: &MonthlyPanel, config: &RdConfig) -> Result<Bandwidths<T>> {
    let (x, y) = design_from_panel::<T>(panel, config)?;
    match config.settings.bandwidth {
        BandwidthChoice::Manual(h) => Ok(Bandwidths { h: T::of(h), b: T::of(h) }),
        BandwidthChoice::Mserd => select_bandwidth_mserd_xy(&x, &y, &config.settings),
    }
}

struct SideEstimate<T> {
    conventional: T,
    bias_corrected: T,
    var_conventional: T,
    var_robust: T,
    n_h: usize,
}

fn side_estimate<T: Scalar>(side: &SideData<T>, ybar: T, h: T, b: T, s: &RdSettings) -> Result<SideEstimate<T>> {
    let (p, q, kernel) = (s.p, s.q, s.kernel);
    let reach = h.max(b);
    let (x, y): (Vec<T>, Vec<T>) = side
        .x
        .iter()
        .zip(&side.y)
        .filter(|(&xi, _)| kernel.weight(xi / reach) > T::zero())
        .map(|(&xi, &yi)| (xi, yi - ybar))
        .unzip();

    let fp = side_fit(&x, &y, h, p, kernel)?;
    let fq = side_fit(&x, &y, b, q, kernel)?;
    let a = fp.coefficient_weights(&x, p, 0);
    let c = fq.coefficient_weights(&x, q, p + 1);

    let mut lvec = vec![T::zero(); p + 1];
    let mut row = Vec::with_capacity(p + 1);
    for (&xi, &w) in x.iter().zip(&fp.weights) {
        if w == T::zero() {
            continue;
        }
        row.clear();
        poly_row(xi, p, &mut row);
        let xp = xi.powi(p as i32 + 1);
        for (l, &r) in lvec.iter_mut().zip(&row) {
            *l += w * r * xp;
        }
    }
    let lambda: T = fp.gram_inv.row(0).iter().zip(&lvec).map(|(&g, &l)| g * l).sum();

    let (sig_h, sig_b) = match s.variance {
        VarianceKind::NearestNeighbor(j) => {
            let all = nearest_neighbor_variances(&x, &y, &vec![true; x.len()], j);
            (all.clone(), all)
        }
        VarianceKind::Hc0 => (
            fp.residual_variances(&x, &y, p, s.variance),
            fq.residual_variances(&x, &y, q, s.variance),
        ),
    };
    let var_conventional = a.iter().zip(&sig_h).map(|(&ai, &v)| ai * ai * v).sum();
    let var_robust = a
        .iter()
        .zip(&c)
        .zip(&sig_b)
        .map(|((&ai, &ci), &v)| {
            let k = ai - lambda * ci;
            k * k * v
        })
        .sum();
    let conventional = fp.coef[0];
    Ok(SideEstimate {
        conventional,
        bias_corrected: conventional - lambda * fq.coef[p + 1],
        var_conventional,
        var_robust,
        n_h: fp.weights.iter().filter(|&&w| w > T::zero()).count(),
    })
}

/// RD estimate on raw `(x, y)` with the cutoff at `x = 0`.
pub fn estimate_rd_xy<T: Scalar>(x: &[T], y: &[T], settings: &RdSettings) -> Result<RdEstimate<T>> {
    settings.validate()?;
    if x.len() != y.len() {
        return Err(Error::Config(format!("{} running values but {} outcomes", x.len(), y.len())));
    }
    let mut warnings = Vec::new();
    let (left, right) = split(x, y);
    let (p, q, kernel) = (settings.p, settings.q, settings.kernel);

    let bw = match settings.bandwidth {
        BandwidthChoice::Manual(h) => {
            let h = T::of(h);
            let (nl, nr) = (left.count_in(h, kernel), right.count_in(h, kernel));
            if nl < p + 2 || nr < p + 2 {
                return Err(Error::ThinWindow { left: nl, right: nr, required: p + 2 });
            }
            if nl < q + 1 || nr < q + 1 {
                return Err(Error::ThinWindow { left: nl, right: nr, required: q + 1 });
            }
            Bandwidths { h, b: h }
        }
        BandwidthChoice::Mserd => select_mserd(x, y, settings, &mut warnings)?,
    };
    let Bandwidths { h, b } = bw;

    let reach = h.max(b);
    let window: Vec<T> = x
        .iter()
        .zip(y)
        .filter(|(&xi, _)| xi.abs() <= reach)
        .map(|(_, &yi)| yi)
        .collect();
    let ybar = if window.is_empty() {
        T::zero()
    } else {
        window.iter().copied().sum::<T>() / T::of_usize(window.len())
    };

    let (l, r) = match (side_estimate(&left, ybar, h, b, settings), side_estimate(&right, ybar, h, b, settings)) {
        (Ok(l), Ok(r)) => (l, r),
        (Err(Error::ThinWindow { .. }), _) | (_, Err(Error::ThinWindow { .. })) => {
            return Err(Error::ThinWindow {
                left: left.count_in(h, kernel),
                right: right.count_in(h, kernel),
                required: p + 2,
            })
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };

    let tau_cl = r.conventional - l.conventional;
    let tau_bc = r.bias_corrected - l.bias_corrected;
    let se_cl = (l.var_conventional + r.var_conventional).max(T::zero()).sqrt();
    let se_rb = (l.var_robust + r.var_robust).max(T::zero()).sqrt();
    Ok(RdEstimate {
        cutoff: None,
        outcome: None,
        tau_conventional: tau_cl,
        tau_bias_corrected: tau_bc,
        tau_robust: tau_bc,
        se_conventional: se_cl,
        se_bias_corrected: se_cl,
        se_robust: se_rb,
        p_conventional: p_value(tau_cl, se_cl),
        p_bias_corrected: p_value(tau_bc, se_cl),
        p_robust: p_value(tau_bc, se_rb),
        bandwidth_used: h,
        bias_bandwidth_used: b,
        bandwidth_type: settings.bandwidth.label().to_string(),
        n_left: l.n_h,
        n_right: r.n_h,
        p,
        q,
        kernel,
        warnings,
    })
}

/// RD estimate for a monthly panel.
pub fn estimate_rd<T: Scalar>(panel: &MonthlyPanel, config: &RdConfig) -> Result<RdEstimate<T>> {
    let (x, y) = design_from_panel::<T>(panel, config)?;
    let mut est = estimate_rd_xy(&x, &y, &config.settings)?;
    est.cutoff = Some(config.cutoff);
    est.outcome = Some(config.outcome.name().to_string());
    Ok(est)
}
