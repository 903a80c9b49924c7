//! Output photon statistics of a spatially multiplexed heralded source.
//!
//! Each multiplexed unit emits `l` photon pairs with thermal probability
//! `λ^l / (1+λ)^(1+l)`. A unit heralds when its detector (efficiency `V_D`)
//! registers exactly one of the `l` idler photons. Of the heralded units the
//! one with the smallest index is routed to the output, losing each of its
//! `l` signal photons independently with probability `1 - V_n`. Arms are
//! therefore numbered by decreasing transmission.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest input mean photon number accepted by the public entry points.
pub const LAMBDA_MAX: f64 = 2.0;

fn check_probability<T: Scalar>(name: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            name,
            value: value.as_f64(),
        })
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda <= T::lit(LAMBDA_MAX) {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda.as_f64()))
    }
}

/// Router, delay-line and detector efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams<T> {
    /// Transmission-port efficiency of a router (upper input).
    pub v_t: T,
    /// Reflection-port efficiency of a router (lower input).
    pub v_r: T,
    /// Losses between heralding and the multiplexer input.
    pub v_b: T,
    /// Heralding detector efficiency.
    pub v_d: T,
}

impl<T: Scalar> LossParams<T> {
    pub fn new(v_t: T, v_r: T, v_b: T, v_d: T) -> Result<Self> {
        let params = Self { v_t, v_r, v_b, v_d };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("v_t", self.v_t)?;
        check_probability("v_r", self.v_r)?;
        check_probability("v_b", self.v_b)?;
        check_probability("v_d", self.v_d)
    }

    /// Same losses with the two router ports exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            v_t: self.v_r,
            v_r: self.v_t,
            ..*self
        }
    }

    pub fn with_detector(&self, v_d: T) -> Self {
        Self { v_d, ..*self }
    }
}

impl<T: Scalar> Default for LossParams<T> {
    /// Best bulk-optics routers and detectors: `V_t = 0.985`, `V_r = 0.99`,
    /// `V_b = 0.98`, `V_D = 0.95`.
    fn default() -> Self {
        Self {
            v_t: T::lit(0.985),
            v_r: T::lit(0.99),
            v_b: T::lit(0.98),
            v_d: T::lit(0.95),
        }
    }
}

/// Total transmissions of the multiplexer arms, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ArmVector<T> {
    v: Vec<T>,
}

impl<T: Scalar> ArmVector<T> {
    pub fn new(v: Vec<T>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptyArms);
        }
        for &x in &v {
            check_probability("arm transmission", x)?;
        }
        if let Some(index) = v.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::NotDescending { index: index + 1 });
        }
        Ok(Self { v })
    }

    /// Sorts descending first; equal values keep their relative order.
    pub fn from_unsorted(mut v: Vec<T>) -> Result<Self> {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.v
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for ArmVector<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<T>::deserialize(deserializer)?;
        Self::new(v).map_err(serde::de::Error::custom)
    }
}

/// Truncation settings for the photon-number series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig<T> {
    /// Highest output photon number tabulated.
    pub i_max: usize,
    /// Bound on the neglected tail of every pair-number series.
    pub tol: T,
    /// Hard cap on the number of pair-number terms.
    pub l_cap: usize,
}

impl<T: Scalar> Default for SeriesConfig<T> {
    fn default() -> Self {
        Self {
            i_max: 20,
            tol: T::lit(1e-14),
            l_cap: 10_000,
        }
    }
}

impl<T: Scalar> SeriesConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.tol <= T::lit(1e-6)) {
            return Err(Error::InvalidConfig(format!(
                "series tolerance {} outside (0, 1e-6]",
                self.tol
            )));
        }
        if self.i_max == 0 {
            return Err(Error::InvalidConfig("i_max must be positive".into()));
        }
        Ok(())
    }
}

/// Output photon-number distribution at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics<T> {
    /// `P_0 ..= P_imax`.
    pub p: Vec<T>,
    pub p1: T,
    /// `None` when the mean output photon number vanishes.
    pub g2: Option<T>,
    pub lambda: T,
    /// Upper bound on the probability dropped by truncating the pair-number series.
    pub tail_bound: T,
    /// Probability of more than `i_max` output photons.
    pub overflow: T,
    /// Number of pair-number terms used.
    pub l_max: usize,
}

impl<T: Scalar> PhotonStatistics<T> {
    /// `Σ P_i` over the tabulated range plus the overflow bin.
    pub fn total_probability(&self) -> T {
        self.p.iter().fold(self.overflow, |acc, &x| acc + x)
    }
}

/// Thermal pair-number distribution `λ^l / (1+λ)^(1+l)`.
pub fn thermal_pmf<T: Scalar>(l: usize, lambda: T) -> T {
    let one = T::one();
    (lambda / (one + lambda)).powi(l as i32) / (one + lambda)
}

/// Probability that a detector of efficiency `v_d` registers exactly one of `l` photons.
pub fn detect_single_given_l<T: Scalar>(l: usize, v_d: T) -> T {
    if l == 0 {
        return T::zero();
    }
    T::count(l) * v_d * (T::one() - v_d).powi(l as i32 - 1)
}

/// Heralding probability of one unit, `V_D λ / (V_D λ + 1)^2`.
pub fn herald_prob<T: Scalar>(lambda: T, v_d: T) -> T {
    let x = v_d * lambda;
    x / ((x + T::one()) * (x + T::one()))
}

/// Probability that `i` of `l` photons survive a channel of transmission `v_n`.
pub fn binomial_loss<T: Scalar>(i: usize, l: usize, v_n: T) -> Result<T> {
    if i > l {
        return Err(Error::BinomialDomain { i, l });
    }
    let small = i.min(l - i);
    let mut coeff = T::one();
    for m in 1..=small {
        coeff = coeff * T::count(l - small + m) / T::count(m);
    }
    Ok(coeff * v_n.powi(i as i32) * (T::one() - v_n).powi((l - i) as i32))
}

/// Heralding envelope `h(l) = P_D(1|l) P_λ(l)` for `l = 1..=l_max`, chosen so
/// that the neglected tail is below `tol`. Returns the terms (index `l - 1`)
/// and the tail bound.
///
/// `h(l+1)/h(l) = (l+1)/l · (1-V_D) λ/(1+λ)` decreases in `l`, so once the
/// ratio is below one the tail is bounded by `h(l) r / (1 - r)`.
fn herald_envelope<T: Scalar>(lambda: T, v_d: T, tol: T, l_cap: usize) -> Result<(Vec<T>, T)> {
    let one = T::one();
    let q = (one - v_d) * lambda / (one + lambda);
    let small = tol / T::lit(10.0);
    let mut terms = Vec::with_capacity(32);
    let mut h = v_d * lambda / ((one + lambda) * (one + lambda));
    let mut quiet = 0usize;
    for l in 1..=l_cap {
        terms.push(h);
        quiet = if h < small { quiet + 1 } else { 0 };
        let ratio = T::count(l + 1) / T::count(l) * q;
        if ratio < one {
            let tail = h * ratio / (one - ratio);
            if tail < tol && quiet >= 10 {
                return Ok((terms, tail));
            }
        }
        h = h * ratio;
    }
    Err(Error::Convergence {
        tol: tol.as_f64(),
        l_cap,
    })
}

fn check_arms_and_point<T: Scalar>(arms: &ArmVector<T>, lambda: T, v_d: T) -> Result<()> {
    check_lambda(lambda)?;
    check_probability("v_d", v_d)?;
    // ArmVector may have been built by hand in this crate; recheck ordering.
    ArmVector::new(arms.as_slice().to_vec()).map(|_| ())
}

/// Full output distribution `P_0 ..= P_imax` under the priority logic.
pub fn output_distribution<T: Scalar>(
    arms: &ArmVector<T>,
    lambda: T,
    v_d: T,
    cfg: &SeriesConfig<T>,
) -> Result<PhotonStatistics<T>> {
    check_arms_and_point(arms, lambda, v_d)?;
    cfg.validate()?;
    let (envelope, tail) = herald_envelope(lambda, v_d, cfg.tol, cfg.l_cap)?;
    let one = T::one();
    let miss = one - herald_prob(lambda, v_d);
    let i_max = cfg.i_max;

    let mut p = vec![T::zero(); i_max + 1];
    let mut overflow = T::zero();
    let mut tail_bound = T::zero();
    let mut weight = one;
    // row[i] = C(l,i) V^i (1-V)^(l-i) for i <= i_max; `beyond` holds the rest.
    let mut row = vec![T::zero(); i_max + 1];
    for &v in arms.as_slice() {
        row.iter_mut().for_each(|x| *x = T::zero());
        row[0] = one;
        let mut beyond = T::zero();
        let loss = one - v;
        for (idx, &h) in envelope.iter().enumerate() {
            let l = idx + 1;
            beyond = beyond + row[i_max] * v;
            for i in (1..=l.min(i_max)).rev() {
                row[i] = row[i] * loss + row[i - 1] * v;
            }
            row[0] = row[0] * loss;
            let wh = weight * h;
            for (acc, &b) in p.iter_mut().zip(&row) {
                *acc = *acc + wh * b;
            }
            overflow = overflow + wh * beyond;
        }
        tail_bound = tail_bound + weight * tail;
        weight = weight * miss;
    }
    p[0] = p[0] + weight;

    let g2 = g2_of(&p).ok();
    Ok(PhotonStatistics {
        p1: p[1],
        p,
        g2,
        lambda,
        tail_bound,
        overflow,
        l_max: envelope.len(),
    })
}

/// `P_1` alone; the inner loop the λ optimizer calls.
pub fn single_photon_probability<T: Scalar>(
    arms: &ArmVector<T>,
    lambda: T,
    v_d: T,
    tol: T,
    l_cap: usize,
) -> Result<T> {
    check_lambda(lambda)?;
    check_probability("v_d", v_d)?;
    let (envelope, _) = herald_envelope(lambda, v_d, tol, l_cap)?;
    Ok(p1_from_envelope(arms.as_slice(), &envelope, herald_prob(lambda, v_d)))
}

fn p1_from_envelope<T: Scalar>(arms: &[T], envelope: &[T], herald: T) -> T {
    let one = T::one();
    let miss = one - herald;
    let mut weight = one;
    let mut total = T::zero();
    for &v in arms {
        let loss = one - v;
        // s(l) = l V (1-V)^(l-1)
        let mut s = v;
        let mut arm = T::zero();
        for (idx, &h) in envelope.iter().enumerate() {
            let l = idx + 1;
            arm = arm + h * s;
            s = s * loss * T::count(l + 1) / T::count(l);
        }
        total = total + weight * arm;
        weight = weight * miss;
    }
    total
}

/// Normalized second-order autocorrelation at zero delay.
pub fn g2<T: Scalar>(stats: &PhotonStatistics<T>) -> Result<T> {
    g2_of(&stats.p)
}

/// `Σ_{i≥2} P_i i(i-1) / (Σ_{i≥1} P_i i)^2` over a tabulated distribution.
pub fn g2_of<T: Scalar>(p: &[T]) -> Result<T> {
    let mut mean = T::zero();
    let mut second = T::zero();
    for (i, &pi) in p.iter().enumerate().skip(1) {
        let n = T::count(i);
        mean = mean + pi * n;
        second = second + pi * n * (n - T::one());
    }
    if mean <= T::zero() {
        return Err(Error::ZeroMeanPhotonNumber);
    }
    Ok(second / (mean * mean))
}
