//! Kernel-weighted least squares and local polynomial fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Triangular,
    Uniform,
    Epanechnikov,
}

impl Kernel {
    /// Kernel density at `u`; zero outside `[-1, 1]`. At `|u| = 1` the
    /// triangular and Epanechnikov weights are zero, the uniform weight is not.
    pub fn weight<T: Scalar>(self, u: T) -> T {
        let a = u.abs();
        if a > T::one() || a.is_nan() {
            return T::zero();
        }
        match self {
            Kernel::Triangular => T::one() - a,
            Kernel::Uniform => T::of(0.5),
            Kernel::Epanechnikov => T::of(0.75) * (T::one() - a * a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Triangular => "Triangular",
            Kernel::Uniform => "Uniform",
            Kernel::Epanechnikov => "Epanechnikov",
        }
    }

    /// Rule-of-thumb constant for the pilot bandwidth.
    pub(crate) fn pilot_constant(self) -> f64 {
        match self {
            Kernel::Triangular => 2.576,
            Kernel::Uniform => 1.843,
            Kernel::Epanechnikov => 2.34,
        }
    }
}

/// Residual variance estimator used in the sandwich covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    Hc0,
    NearestNeighbor(usize),
}

impl Default for VarianceKind {
    fn default() -> Self {
        VarianceKind::NearestNeighbor(3)
    }
}

/// Variance estimator together with the data it needs.
#[derive(Debug, Clone, Copy)]
pub enum Variance<'a, T> {
    Hc0,
    /// Neighbors are searched by `running` within equal `group` labels.
    NearestNeighbor {
        running: &'a [T],
        group: &'a [bool],
        neighbors: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WlsFit<T> {
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    pub covariance: Matrix<T>,
    /// `(XᵀWX)⁻¹`.
    pub bread: Matrix<T>,
    pub dof: usize,
    pub sse: T,
    pub n_effective: usize,
}

impl<T: Scalar> WlsFit<T> {
    pub fn se(&self, j: usize) -> T {
        self.covariance.get(j, j).max(T::zero()).sqrt()
    }
}

/// Nearest-neighbor residual variances: for each active observation, the
/// scaled squared deviation from the mean of its `neighbors` closest
/// same-group observations (ties at the boundary distance are all included).
pub fn nearest_neighbor_variances<T: Scalar>(
    running: &[T],
    y: &[T],
    group: &[bool],
    neighbors: usize,
) -> Vec<T> {
    let n = running.len();
    let mut out = vec![T::zero(); n];
    for g in [false, true] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| group[i] == g).collect();
        if idx.len() < 2 {
            continue;
        }
        idx.sort_by(|&a, &b| running[a].partial_cmp(&running[b]).unwrap());
        let want = neighbors.min(idx.len() - 1).max(1);
        let mut dist: Vec<(T, usize)> = Vec::with_capacity(idx.len());
        for &i in &idx {
            dist.clear();
            dist.extend(idx.iter().filter(|&&j| j != i).map(|&j| ((running[j] - running[i]).abs(), j)));
            dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let cut = dist[want - 1].0;
            let (mut s, mut k) = (T::zero(), 0usize);
            for &(d, j) in dist.iter() {
                if d > cut {
                    break;
                }
                s += y[j];
                k += 1;
            }
            let kf = T::of_usize(k);
            let dev = y[i] - s / kf;
            out[i] = kf / (kf + T::one()) * dev * dev;
        }
    }
    out
}

/// Minimizes `Σ wᵢ (yᵢ − Xᵢβ)²` via QR of `√W X`, with a sandwich covariance.
pub fn weighted_least_squares<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    variance: Variance<'_, T>,
) -> Result<WlsFit<T>> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n || w.len() != n {
        return Err(Error::Config(format!(
            "dimension mismatch: {n} design rows, {} outcomes, {} weights",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|&v| v < T::zero() || !v.is_finite()) {
        return Err(Error::Config("weights must be finite and nonnegative".into()));
    }
    let active: Vec<usize> = (0..n).filter(|&i| w[i] > T::zero()).collect();
    if active.is_empty() {
        return Err(Error::EmptyWindow);
    }

    let mut a = Matrix::zeros(active.len(), k);
    let mut b = Vec::with_capacity(active.len());
    for (r, &i) in active.iter().enumerate() {
        let sw = w[i].sqrt();
        for j in 0..k {
            a.set(r, j, sw * x.get(i, j));
        }
        b.push(sw * y[i]);
    }
    let qr = Qr::new(&a)?;
    qr.ensure_full_rank()?;
    let coefficients = qr.solve(&b);
    let residuals: Vec<T> = (0..n)
        .map(|i| y[i] - x.row(i).iter().zip(&coefficients).map(|(&a, &c)| a * c).sum::<T>())
        .collect();
    let sse = active.iter().map(|&i| w[i] * residuals[i] * residuals[i]).sum();
    let bread = qr.gram_inverse();

    let sigma2: Vec<T> = match variance {
        Variance::Hc0 => active.iter().map(|&i| residuals[i] * residuals[i]).collect(),
        Variance::NearestNeighbor { running, group, neighbors } => {
            let xs: Vec<T> = active.iter().map(|&i| running[i]).collect();
            let ys: Vec<T> = active.iter().map(|&i| y[i]).collect();
            let gs: Vec<bool> = active.iter().map(|&i| group[i]).collect();
            nearest_neighbor_variances(&xs, &ys, &gs, neighbors)
        }
    };
    let mut meat = Matrix::zeros(k, k);
    for (r, &i) in active.iter().enumerate() {
        let s = w[i] * w[i] * sigma2[r];
        let xi = x.row(i);
        for p in 0..k {
            for q in 0..k {
                meat.set(p, q, meat.get(p, q) + s * xi[p] * xi[q]);
            }
        }
    }
    let mut covariance = bread.matmul(&meat).matmul(&bread);
    for p in 0..k {
        for q in 0..p {
            let avg = (covariance.get(p, q) + covariance.get(q, p)) / T::of(2.0);
            covariance.set(p, q, avg);
            covariance.set(q, p, avg);
        }
    }

    Ok(WlsFit {
        coefficients,
        residuals,
        covariance,
        bread,
        dof: active.len().saturating_sub(k),
        sse,
        n_effective: active.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Observations strictly below the center.
    Left,
    /// Observations at or above the center.
    Right,
    /// Both sides with a treatment indicator fully interacted with the polynomial.
    BothWithInteraction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalFit<T> {
    pub fit: WlsFit<T>,
    pub side: Side,
    pub order: usize,
    pub n_left: usize,
    pub n_right: usize,
}

impl<T: Scalar> LocalFit<T> {
    /// Index of the treatment-indicator coefficient, if the fit has one.
    pub fn indicator_index(&self) -> Option<usize> {
        (self.side == Side::BothWithInteraction).then_some(self.order + 1)
    }

    /// Jump at the center: indicator coefficient and its standard error.
    pub fn discontinuity(&self) -> Option<(T, T)> {
        self.indicator_index().map(|j| (self.fit.coefficients[j], self.fit.se(j)))
    }

    pub fn intercept(&self) -> T {
        self.fit.coefficients[0]
    }
}

/// Polynomial basis `1, d, ..., d^p`.
pub(crate) fn poly_row<T: Scalar>(d: T, p: usize, out: &mut Vec<T>) {
    let mut v = T::one();
    for _ in 0..=p {
        out.push(v);
        v *= d;
    }
}

/// Local polynomial regression of `y` on `(x − center)` with kernel weights
/// `K((x − center)/h)`.
#[allow(clippy::too_many_arguments)]
pub fn local_polynomial_fit<T: Scalar>(
    x: &[T],
    y: &[T],
    center: T,
    h: T,
    p: usize,
    kernel: Kernel,
    side: Side,
    variance: VarianceKind,
) -> Result<LocalFit<T>> {
    if x.len() != y.len() {
        return Err(Error::Config(format!("{} running values but {} outcomes", x.len(), y.len())));
    }
    if !(h > T::zero()) {
        return Err(Error::Config("bandwidth must be positive".into()));
    }
    let mut rows = Vec::new();
    let (mut n_left, mut n_right) = (0, 0);
    for i in 0..x.len() {
        let d = x[i] - center;
        let w = kernel.weight(d / h);
        if w <= T::zero() {
            continue;
        }
        let right = d >= T::zero();
        let keep = match side {
            Side::Left => !right,
            Side::Right => right,
            Side::BothWithInteraction => true,
        };
        if keep {
            if right {
                n_right += 1;
            } else {
                n_left += 1;
            }
            rows.push((i, d, w, right));
        }
    }
    let required = p + 2;
    let thin = match side {
        Side::Left => n_left < required,
        Side::Right => n_right < required,
        Side::BothWithInteraction => n_left < required || n_right < required,
    };
    if thin {
        return Err(Error::ThinWindow { left: n_left, right: n_right, required });
    }

    let k = if side == Side::BothWithInteraction { 2 * (p + 1) } else { p + 1 };
    let mut data = Vec::with_capacity(rows.len() * k);
    let (mut ys, mut ws, mut ds, mut gs) = (vec![], vec![], vec![], vec![]);
    for &(i, d, w, right) in &rows {
        let start = data.len();
        poly_row(d, p, &mut data);
        if side == Side::BothWithInteraction {
            for j in 0..=p {
                let v = data[start + j];
                data.push(if right { v } else { T::zero() });
            }
        }
        ys.push(y[i]);
        ws.push(w);
        ds.push(d);
        gs.push(right);
    }
    let design = Matrix::from_row_major(rows.len(), k, data);
    let var = match variance {
        VarianceKind::Hc0 => Variance::Hc0,
        VarianceKind::NearestNeighbor(j) => Variance::NearestNeighbor { running: &ds, group: &gs, neighbors: j },
    };
    let fit = weighted_least_squares(&design, &ys, &ws, var)?;
    Ok(LocalFit { fit, side, order: p, n_left, n_right })
}
