//! Deterministic numeric kernels: tail quadrature on sampled densities,
//! bracketed bisection and a fixed-step fourth-order integrator.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default absolute tolerance for price roots, in currency units.
pub const DEFAULT_PRICE_TOL: f64 = 1e-6;

/// Default number of samples for log-spaced density grids.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Smallest grid accepted by [`DensityGrid::new`].
pub const MIN_GRID_POINTS: usize = 16;

/// Integrand weighting for [`DensityGrid::integrate_tail`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// Plain density: counts firms.
    None,
    /// Density times the axis value: counts firm-weighted size.
    Identity,
}

/// A non-negative density sampled on a strictly increasing axis.
///
/// Tail integrals are pre-accumulated from the right at construction so
/// that [`integrate_tail`](Self::integrate_tail) costs one binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T> {
    axis: Vec<T>,
    values: Vec<T>,
    tail: Vec<T>,
    tail_weighted: Vec<T>,
}

impl<T: Real> DensityGrid<T> {
    pub fn new(axis: Vec<T>, values: Vec<T>) -> Result<Self> {
        if axis.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} axis points but {} values",
                axis.len(),
                values.len()
            )));
        }
        if axis.len() < MIN_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_GRID_POINTS} points, got {}",
                axis.len()
            )));
        }
        if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid("axis must be finite and strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= T::zero() && v.is_finite())) {
            return Err(Error::InvalidGrid(format!(
                "value at index {i} is {} (must be finite and non-negative)",
                values[i]
            )));
        }
        let tail = accumulate_tail(&axis, &values, Weight::None);
        let tail_weighted = accumulate_tail(&axis, &values, Weight::Identity);
        Ok(DensityGrid {
            axis,
            values,
            tail,
            tail_weighted,
        })
    }

    /// Samples `density` at `points` log-spaced positions on `[lower, upper]`.
    pub fn log_spaced(lower: T, upper: T, points: usize, density: impl Fn(T) -> T) -> Result<Self> {
        if !(lower > T::zero() && upper > lower) {
            return Err(Error::InvalidGrid(format!(
                "log-spaced grid needs 0 < lower < upper, got [{lower}, {upper}]"
            )));
        }
        let axis = log_axis(lower, upper, points);
        let values = axis.iter().map(|&x| density(x)).collect();
        Self::new(axis, values)
    }

    pub fn linear(lower: T, upper: T, points: usize, density: impl Fn(T) -> T) -> Result<Self> {
        let last = T::lit(points.saturating_sub(1).max(1) as f64);
        let axis = (0..points)
            .map(|i| {
                if i + 1 == points {
                    upper
                } else {
                    lower + (upper - lower) * T::lit(i as f64) / last
                }
            })
            .collect::<Vec<_>>();
        let values = axis.iter().map(|&x| density(x)).collect();
        Self::new(axis, values)
    }

    pub fn axis(&self) -> &[T] {
        &self.axis
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn lower_bound(&self) -> T {
        self.axis[0]
    }

    pub fn upper_bound(&self) -> T {
        self.axis[self.axis.len() - 1]
    }

    /// Index `i` with `axis[i] <= x < axis[i + 1]`; `None` outside the domain.
    /// The upper bound maps to the last segment.
    fn segment(&self, x: T) -> Option<usize> {
        if !(x >= self.lower_bound() && x <= self.upper_bound()) {
            return None;
        }
        let i = self.axis.partition_point(|&a| a <= x);
        Some(i.saturating_sub(1).min(self.axis.len() - 2))
    }

    /// Piecewise-linear interpolation of the density.
    pub fn interpolate(&self, x: T) -> Result<T> {
        let i = self.segment(x).ok_or_else(|| self.out_of_domain(x))?;
        Ok(lerp(self.axis[i], self.axis[i + 1], self.values[i], self.values[i + 1], x))
    }

    /// Trapezoidal integral of the (optionally axis-weighted) density from
    /// `from` to the upper bound. The integrand is taken piecewise linear
    /// between samples, so a partial first segment is integrated exactly.
    pub fn integrate_tail(&self, from: T, weight: Weight) -> Result<T> {
        let i = self.segment(from).ok_or_else(|| self.out_of_domain(from))?;
        let (x0, x1) = (self.axis[i], self.axis[i + 1]);
        let w = |k: usize| weighted(self.axis[k], self.values[k], weight);
        let tail = match weight {
            Weight::None => &self.tail,
            Weight::Identity => &self.tail_weighted,
        };
        let y_from = lerp(x0, x1, w(i), w(i + 1), from);
        let half = T::lit(0.5);
        Ok(half * (y_from + w(i + 1)) * (x1 - from) + tail[i + 1])
    }

    fn out_of_domain(&self, x: T) -> Error {
        Error::domain(
            "grid position",
            x.as_f64(),
            format!("[{}, {}]", self.lower_bound(), self.upper_bound()),
        )
    }
}

/// `points` log-spaced positions with exact end points.
pub fn log_axis<T: Real>(lower: T, upper: T, points: usize) -> Vec<T> {
    let span = (upper / lower).ln();
    let last = T::lit(points.saturating_sub(1).max(1) as f64);
    (0..points)
        .map(|i| match i {
            0 => lower,
            _ if i + 1 == points => upper,
            _ => lower * (span * T::lit(i as f64) / last).exp(),
        })
        .collect()
}

fn weighted<T: Real>(x: T, v: T, weight: Weight) -> T {
    match weight {
        Weight::None => v,
        Weight::Identity => x * v,
    }
}

fn lerp<T: Real>(x0: T, x1: T, y0: T, y1: T, x: T) -> T {
    let s = (x - x0) / (x1 - x0);
    if s <= T::zero() {
        y0
    } else if s >= T::one() {
        y1
    } else {
        y0 + (y1 - y0) * s
    }
}

fn accumulate_tail<T: Real>(axis: &[T], values: &[T], weight: Weight) -> Vec<T> {
    let mut tail = vec![T::zero(); axis.len()];
    let half = T::lit(0.5);
    for i in (0..axis.len() - 1).rev() {
        let seg = half
            * (weighted(axis[i], values[i], weight) + weighted(axis[i + 1], values[i + 1], weight))
            * (axis[i + 1] - axis[i]);
        tail[i] = tail[i + 1] + seg;
    }
    tail
}

/// An interval on which a residual changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
    pub f_lo: T,
    pub f_hi: T,
}

impl<T: Real> Bracket<T> {
    pub fn new(lo: T, hi: T, f_lo: T, f_hi: T) -> Result<Self> {
        let err = || Error::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            f_lo: f_lo.as_f64(),
            f_hi: f_hi.as_f64(),
        };
        if !(lo < hi) || f_lo.is_nan() || f_hi.is_nan() {
            return Err(err());
        }
        let zero = T::zero();
        if (f_lo > zero && f_hi > zero) || (f_lo < zero && f_hi < zero) {
            return Err(err());
        }
        Ok(Bracket { lo, hi, f_lo, f_hi })
    }

    /// Evaluates `residual` at both ends and checks for a sign change.
    pub fn evaluate(lo: T, hi: T, mut residual: impl FnMut(T) -> T) -> Result<Self> {
        let (f_lo, f_hi) = (residual(lo), residual(hi));
        Self::new(lo, hi, f_lo, f_hi)
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> T {
        self.lo + (self.hi - self.lo) * T::lit(0.5)
    }
}

/// Bisects `bracket` until its width is at most `tol_abs` (or no further
/// floating point progress is possible) and returns the final bracket.
pub fn bisect<T: Real>(
    mut residual: impl FnMut(T) -> T,
    bracket: Bracket<T>,
    tol_abs: T,
) -> Result<Bracket<T>> {
    let mut b = Bracket::new(bracket.lo, bracket.hi, bracket.f_lo, bracket.f_hi)?;
    let zero = T::zero();
    if b.f_lo == zero {
        return Ok(Bracket { hi: b.lo, f_hi: b.f_lo, ..b });
    }
    if b.f_hi == zero {
        return Ok(Bracket { lo: b.hi, f_lo: b.f_hi, ..b });
    }
    while b.width() > tol_abs {
        let mid = b.midpoint();
        if mid <= b.lo || mid >= b.hi {
            break;
        }
        let fm = residual(mid);
        if fm.is_nan() {
            return Err(Error::domain("residual", fm.as_f64(), "a number"));
        }
        if fm == zero {
            return Ok(Bracket {
                lo: mid,
                hi: mid,
                f_lo: fm,
                f_hi: fm,
            });
        }
        if (fm > zero) == (b.f_lo > zero) {
            b.lo = mid;
            b.f_lo = fm;
        } else {
            b.hi = mid;
            b.f_hi = fm;
        }
    }
    Ok(b)
}

/// Root of a residual that changes sign on `bracket`: midpoint of the final
/// bisection interval.
pub fn find_root<T: Real>(residual: impl FnMut(T) -> T, bracket: Bracket<T>, tol_abs: T) -> Result<T> {
    bisect(residual, bracket, tol_abs).map(|b| b.midpoint())
}

/// One classical fourth-order Runge-Kutta step of `dy/dt = slope(t, y)`.
pub fn rk4_step<T: Real, E>(
    mut slope: impl FnMut(T, T) -> Result<T, E>,
    t: T,
    y: T,
    dt: T,
) -> Result<T, E> {
    let half = T::lit(0.5);
    let k1 = slope(t, y)?;
    let k2 = slope(t + half * dt, y + half * dt * k1)?;
    let k3 = slope(t + half * dt, y + half * dt * k2)?;
    let k4 = slope(t + dt, y + dt * k3)?;
    let two = T::lit(2.0);
    Ok(y + dt / T::lit(6.0) * (k1 + two * k2 + two * k3 + k4))
}

/// Integrates a price path with fixed steps. Returns `steps + 1` points
/// including the starting one.
pub fn step_path<T: Real>(
    mut slope_fn: impl FnMut(T, T) -> T,
    t0: T,
    p0: T,
    dt: T,
    steps: usize,
) -> Result<Vec<(T, T)>> {
    if !(dt > T::zero()) || steps == 0 {
        return Err(Error::domain("step", dt.as_f64(), "dt > 0 and steps >= 1"));
    }
    let mut path = Vec::with_capacity(steps + 1);
    path.push((t0, p0));
    let mut price = p0;
    for i in 0..steps {
        let t = t0 + dt * T::lit(i as f64);
        price = rk4_step(
            |s, p| {
                let value = slope_fn(s, p);
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::NonFinite {
                        t: s.as_f64(),
                        price: p.as_f64(),
                        value: value.as_f64(),
                    })
                }
            },
            t,
            price,
            dt,
        )?;
        path.push((t0 + dt * T::lit((i + 1) as f64), price));
    }
    Ok(path)
}
