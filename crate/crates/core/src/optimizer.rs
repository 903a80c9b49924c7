//! λ optimization for a fixed structure and the search over all structures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::statistics::{
    output_distribution, single_photon_probability, ArmVector, LossParams, SeriesConfig,
    LAMBDA_MAX,
};
use crate::tree::{
    arm_transmissions, build_tree, catalan, distinct_structures, ArmExponents, RouterSequence,
    Structure, TransmissionSet,
};

/// Settings of the one-dimensional search over the input mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch<T> {
    pub lo: T,
    pub hi: T,
    /// Absolute tolerance on λ.
    pub tol: T,
    pub series: SeriesConfig<T>,
}

impl<T: Scalar> Default for LambdaSearch<T> {
    fn default() -> Self {
        Self {
            lo: T::lit(1e-6),
            hi: T::lit(LAMBDA_MAX),
            tol: T::lit(1e-7),
            series: SeriesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaOptimum<T> {
    pub lambda: T,
    pub p1: T,
    /// The maximum sits on the bracket boundary, outside the regime the model targets.
    pub at_edge: bool,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Returns the midpoint of the final bracket (width below `tol`) and `f` there,
/// or the range end if the bracket reached it and `f` is larger there.
pub fn golden_section_max<T, F>(mut f: F, lo: T, hi: T, tol: T) -> Result<(T, T)>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = (a + b) / T::lit(2.0);
    let mut best = (x, f(x)?);
    // Monotone objectives end with a bracket pinned to one end of the range.
    for end in [lo, hi] {
        if end == a || end == b {
            let fe = f(end)?;
            if fe > best.1 {
                best = (end, fe);
            }
        }
    }
    Ok(best)
}

/// `P_1(λ)` for the given arms; shares one heralding envelope across all arms.
pub fn p1_at<T: Scalar>(arms: &ArmVector<T>, lambda: T, v_d: T, series: &SeriesConfig<T>) -> Result<T> {
    single_photon_probability(arms, lambda, v_d, series.tol, series.l_cap)
}

/// Maximizes `P_1` over λ with the default search settings.
pub fn optimize_lambda<T: Scalar>(arms: &ArmVector<T>, v_d: T) -> Result<LambdaOptimum<T>> {
    optimize_lambda_with(arms, v_d, &LambdaSearch::default())
}

pub fn optimize_lambda_with<T: Scalar>(
    arms: &ArmVector<T>,
    v_d: T,
    search: &LambdaSearch<T>,
) -> Result<LambdaOptimum<T>> {
    if !(v_d > T::zero() && v_d <= T::one()) {
        return Err(Error::InvalidProbability {
            name: "v_d",
            value: v_d.as_f64(),
        });
    }
    let (lambda, p1) = golden_section_max(
        |lambda| p1_at(arms, lambda, v_d, &search.series),
        search.lo,
        search.hi,
        search.tol,
    )?;
    let margin = search.tol * T::lit(10.0);
    let at_edge = lambda - search.lo <= margin || search.hi - lambda <= margin;
    Ok(LambdaOptimum { lambda, p1, at_edge })
}

/// Numeric arm transmissions `V_b V_r^j V_t^k`, sorted descending.
pub fn numeric_arms<T: Scalar>(tset: &TransmissionSet, params: &LossParams<T>) -> ArmVector<T> {
    let v = tset
        .arms()
        .iter()
        .map(|a| arm_value(*a, params))
        .collect();
    ArmVector::from_unsorted(v).expect("products of probabilities are probabilities")
}

fn arm_value<T: Scalar>(arm: ArmExponents, params: &LossParams<T>) -> T {
    params.v_b * params.v_r.powi(arm.j as i32) * params.v_t.powi(arm.k as i32)
}

/// Transmission multiset of the chain-like multiplexer with `n_units` inputs
/// whose routers continue through the better port. Ties pick the
/// transmission chain, which enumerates first.
pub fn asym_transmission_set<T: Scalar>(n_units: usize, params: &LossParams<T>) -> TransmissionSet {
    let n_routers = n_units - 1;
    let seq = if params.v_r > params.v_t {
        RouterSequence::reflection_chain(n_routers)
    } else {
        RouterSequence::transmission_chain(n_routers)
    };
    arm_transmissions(&build_tree(&seq).expect("chains are well formed"))
}

/// Arms of the chain-like multiplexer: `V_b V_1 V_2^(n-1)` for `n < N` and
/// `V_b V_2^(N-1)` for the last unit, with `V_1 <= V_2` the two port
/// efficiencies.
pub fn asym_arms<T: Scalar>(n_units: usize, params: &LossParams<T>) -> Result<ArmVector<T>> {
    if n_units < 2 {
        return Err(Error::InvalidConfig(format!(
            "chain multiplexer needs at least 2 units, got {n_units}"
        )));
    }
    Ok(numeric_arms(&asym_transmission_set(n_units, params), params))
}

/// λ-optimized `P_1` of the chain multiplexer for `N = 2..=n_max`.
pub fn asym_saturation_scan<T: Scalar>(
    params: &LossParams<T>,
    n_max: usize,
) -> Result<Vec<(usize, LambdaOptimum<T>)>> {
    if n_max < 2 {
        return Err(Error::InvalidConfig(format!("n_max must be at least 2, got {n_max}")));
    }
    params.validate()?;
    (2..=n_max)
        .into_par_iter()
        .map(|n| Ok((n, optimize_lambda(&asym_arms(n, params)?, params.v_d)?)))
        .collect()
}

/// A structure at its optimal λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureOptimum<T> {
    pub sequence: RouterSequence,
    pub exponents: TransmissionSet,
    /// `V_b` applied, sorted descending.
    pub arms: Vec<T>,
    pub lambda_opt: T,
    pub p1_max: T,
    /// At `lambda_opt`; never optimized separately.
    pub g2: Option<T>,
    pub at_edge: bool,
    /// Position of the structure in the deduplicated enumeration.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport<T> {
    pub n_routers: u32,
    pub params: LossParams<T>,
    pub optimum: StructureOptimum<T>,
    /// Canonical sequences enumerated.
    pub n_sequences: u64,
    /// λ optimizations run, one per distinct transmission multiset.
    pub n_structures_evaluated: usize,
    pub n_distinct_sets: usize,
    /// Next best structures in decreasing `p1_max`.
    pub runner_ups: Vec<StructureOptimum<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions<T> {
    pub top_k: usize,
    pub lambda: LambdaSearch<T>,
}

impl<T: Scalar> Default for SearchOptions<T> {
    fn default() -> Self {
        Self {
            top_k: 0,
            lambda: LambdaSearch::default(),
        }
    }
}

/// Finds the optimal general binary-tree multiplexer for `n_routers` routers.
pub fn find_ogbm<T: Scalar>(n_routers: u32, params: &LossParams<T>) -> Result<SearchReport<T>> {
    find_ogbm_with(n_routers, params, &SearchOptions::default())
}

pub fn find_ogbm_with<T: Scalar>(
    n_routers: u32,
    params: &LossParams<T>,
    opts: &SearchOptions<T>,
) -> Result<SearchReport<T>> {
    params.validate()?;
    let structures = distinct_structures(n_routers)?;
    search_structures(n_routers, &structures, params, opts)
}

/// Searches a precomputed deduplicated structure list. Sweeps reuse one list
/// across all grid cells.
pub fn search_structures<T: Scalar>(
    n_routers: u32,
    structures: &[Structure],
    params: &LossParams<T>,
    opts: &SearchOptions<T>,
) -> Result<SearchReport<T>> {
    params.validate()?;
    if structures.is_empty() {
        return Err(Error::InvalidConfig("no structures to search".into()));
    }
    let optima: Vec<LambdaOptimum<T>> = structures
        .par_iter()
        .map(|s| optimize_lambda_with(&numeric_arms(&s.arms, params), params.v_d, &opts.lambda))
        .collect::<Result<_>>()?;

    // Higher p1 first; equal p1 resolved by enumeration index.
    let better = |a: usize, b: usize| -> bool {
        optima[a].p1 > optima[b].p1 || (optima[a].p1 == optima[b].p1 && a < b)
    };
    let best = (1..optima.len()).fold(0, |best, i| if better(i, best) { i } else { best });

    let mut runner_idx = Vec::new();
    if opts.top_k > 0 {
        let mut order: Vec<usize> = (0..optima.len()).filter(|&i| i != best).collect();
        order.sort_by(|&a, &b| {
            optima[b]
                .p1
                .partial_cmp(&optima[a].p1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order.truncate(opts.top_k);
        runner_idx = order;
    }

    let describe = |i: usize| -> Result<StructureOptimum<T>> {
        let s = &structures[i];
        let arms = numeric_arms(&s.arms, params);
        let opt = optima[i];
        let stats = output_distribution(&arms, opt.lambda, params.v_d, &opts.lambda.series)?;
        Ok(StructureOptimum {
            sequence: s.sequence.clone(),
            exponents: s.arms.clone(),
            arms: arms.into_vec(),
            lambda_opt: opt.lambda,
            p1_max: opt.p1,
            g2: stats.g2,
            at_edge: opt.at_edge,
            index: i,
        })
    };

    Ok(SearchReport {
        n_routers,
        params: *params,
        optimum: describe(best)?,
        n_sequences: catalan(n_routers)?,
        n_structures_evaluated: optima.len(),
        n_distinct_sets: structures.len(),
        runner_ups: runner_idx.into_iter().map(describe).collect::<Result<_>>()?,
    })
}
