//! Parameter maps over the router efficiencies and scans over the number of units.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{
    asym_arms, asym_transmission_set, find_ogbm, optimize_lambda, search_structures, SearchOptions,
    SearchReport,
};
use crate::statistics::{output_distribution, LossParams, SeriesConfig};
use crate::tree::{distinct_structures, Structure, TransmissionSet};

/// Lowest router efficiency for which single-photon heralding stays the best strategy.
pub const GRID_MIN: f64 = 0.9;
pub const GRID_MAX: f64 = 0.99;

/// Evenly spaced axis `lo, ..., hi` with `steps` points. A single point needs `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        let axis = Self { lo, hi, steps };
        axis.validate()?;
        Ok(axis)
    }

    pub fn single(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
            steps: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.lo < GRID_MIN - 1e-12 || self.hi > GRID_MAX + 1e-12 {
            return bad(format!(
                "axis [{}, {}] leaves [{GRID_MIN}, {GRID_MAX}]",
                self.lo, self.hi
            ));
        }
        match self.steps {
            0 => bad("axis needs at least one point".into()),
            1 if self.lo != self.hi => bad("a one-point axis needs lo == hi".into()),
            1 => Ok(()),
            _ if self.lo >= self.hi => bad(format!("axis lo {} must be below hi {}", self.lo, self.hi)),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let span = self.hi - self.lo;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| self.lo + span * i as f64 / last)
            .collect()
    }
}

impl Default for AxisRange {
    /// 46 points, step 0.002.
    fn default() -> Self {
        Self {
            lo: GRID_MIN,
            hi: GRID_MAX,
            steps: 46,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub vt_range: AxisRange,
    pub vr_range: AxisRange,
    pub v_d: f64,
    pub v_b: f64,
    /// Number of multiplexed units, `N = N_R + 1`.
    pub n_units: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            vt_range: AxisRange::default(),
            vr_range: AxisRange::default(),
            v_d: 0.95,
            v_b: 0.98,
            n_units: 11,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.vt_range.validate()?;
        self.vr_range.validate()?;
        LossParams::new(GRID_MAX, GRID_MAX, self.v_b, self.v_d)?;
        if self.n_units < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_units must be at least 2, got {}",
                self.n_units
            )));
        }
        Ok(())
    }

    pub fn n_routers(&self) -> u32 {
        (self.n_units - 1) as u32
    }

    /// Cell coordinates `(v_t, v_r)` in row-major order: `v_r` outer, `v_t` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let vts = self.vt_range.values();
        self.vr_range
            .values()
            .into_iter()
            .flat_map(|vr| vts.iter().map(move |&vt| (vt, vr)))
            .collect()
    }

    pub fn params(&self, v_t: f64, v_r: f64) -> Result<LossParams<f64>> {
        LossParams::new(v_t, v_r, self.v_b, self.v_d)
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Significant digits used for persisted numbers.
pub const OUTPUT_DIGITS: usize = 12;

fn r(x: f64) -> f64 {
    round_sig(x, OUTPUT_DIGITS)
}

fn r_opt(x: Option<f64>) -> Option<f64> {
    x.map(r)
}

/// Runs the structure search for every cell with one shared structure list.
fn search_grid(grid: &GridSpec) -> Result<Vec<SearchReport<f64>>> {
    grid.validate()?;
    let structures = distinct_structures(grid.n_routers())?;
    search_cells(grid, &structures, &grid.cells())
}

fn search_cells(
    grid: &GridSpec,
    structures: &[Structure],
    cells: &[(f64, f64)],
) -> Result<Vec<SearchReport<f64>>> {
    let opts = SearchOptions::default();
    cells
        .iter()
        .map(|&(vt, vr)| search_structures(grid.n_routers(), structures, &grid.params(vt, vr)?, &opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub v_t: f64,
    pub v_r: f64,
    pub p1_max: f64,
    pub g2: Option<f64>,
    pub structure: String,
    pub lambda_opt: f64,
}

/// Optimal `P_1` and `g2` over the `(V_t, V_r)` grid.
pub fn surface_sweep(grid: &GridSpec) -> Result<Vec<SurfaceRow>> {
    Ok(search_grid(grid)?
        .into_iter()
        .map(|rep| SurfaceRow {
            v_t: rep.params.v_t,
            v_r: rep.params.v_r,
            p1_max: rep.optimum.p1_max,
            g2: rep.optimum.g2,
            structure: rep.optimum.sequence.to_string(),
            lambda_opt: rep.optimum.lambda_opt,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub v_t: f64,
    pub v_r: f64,
    pub p1_ogbm: f64,
    pub p1_asym: f64,
    /// `p1_ogbm - p1_asym`.
    pub delta_p1: f64,
    pub g2_ogbm: Option<f64>,
    pub g2_asym: Option<f64>,
    /// `g2_asym - g2_ogbm`.
    pub delta_g2: Option<f64>,
    pub structure: String,
    pub winner_is_chain: bool,
    /// The winner is exactly the chain used as the baseline.
    pub winner_is_baseline: bool,
}

/// Optimal structure against the chain multiplexer with the same number of units.
pub fn diff_vs_asym(grid: &GridSpec) -> Result<Vec<DiffRow>> {
    let reports = search_grid(grid)?;
    let series = SeriesConfig::default();
    reports
        .into_iter()
        .map(|rep| {
            let params = rep.params;
            let arms = asym_arms(grid.n_units, &params)?;
            let asym = optimize_lambda(&arms, params.v_d)?;
            let g2_asym = output_distribution(&arms, asym.lambda, params.v_d, &series)?.g2;
            let baseline: TransmissionSet = asym_transmission_set(grid.n_units, &params);
            let opt = &rep.optimum;
            Ok(DiffRow {
                v_t: params.v_t,
                v_r: params.v_r,
                p1_ogbm: opt.p1_max,
                p1_asym: asym.p1,
                delta_p1: opt.p1_max - asym.p1,
                g2_ogbm: opt.g2,
                g2_asym,
                delta_g2: g2_asym.zip(opt.g2).map(|(a, o)| a - o),
                structure: opt.sequence.to_string(),
                winner_is_chain: opt.exponents.is_chain(),
                winner_is_baseline: opt.exponents == baseline,
            })
        })
        .collect()
}

/// Which triangle of the `(V_t, V_r)` square an occurrence map covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    /// `V_r >= V_t`.
    Upper,
    /// `V_r <= V_t`.
    Lower,
}

impl Half {
    pub fn contains(self, v_t: f64, v_r: f64) -> bool {
        match self {
            Half::Upper => v_r >= v_t,
            Half::Lower => v_r <= v_t,
        }
    }
}

impl std::str::FromStr for Half {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Half::Upper),
            "lower" => Ok(Half::Lower),
            other => Err(Error::InvalidConfig(format!("half must be upper or lower, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceCell {
    pub v_t: f64,
    pub v_r: f64,
    /// `None` outside the selected half.
    pub structure: Option<String>,
    pub exponents: Option<TransmissionSet>,
    pub p1_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceMap {
    pub half: Half,
    /// Row-major, same order as [`GridSpec::cells`].
    pub cells: Vec<OccurrenceCell>,
    /// Structures by decreasing cell count; ties keep first appearance.
    pub ranking: Vec<(String, usize)>,
    pub counts: HashMap<String, usize>,
}

impl OccurrenceMap {
    pub fn n_covered(&self) -> usize {
        self.cells.iter().filter(|c| c.structure.is_some()).count()
    }
}

/// Winning structure per cell of one half of the grid.
pub fn occurrence_map(grid: &GridSpec, half: Half) -> Result<OccurrenceMap> {
    grid.validate()?;
    let structures = distinct_structures(grid.n_routers())?;
    let all = grid.cells();
    let inside: Vec<(f64, f64)> = all
        .iter()
        .copied()
        .filter(|&(vt, vr)| half.contains(vt, vr))
        .collect();
    let mut reports = search_cells(grid, &structures, &inside)?.into_iter();

    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    let mut cells = Vec::with_capacity(all.len());
    for (vt, vr) in all {
        if !half.contains(vt, vr) {
            cells.push(OccurrenceCell {
                v_t: vt,
                v_r: vr,
                structure: None,
                exponents: None,
                p1_max: None,
            });
            continue;
        }
        let rep = reports.next().expect("one report per covered cell");
        let id = rep.optimum.sequence.to_string();
        let count = counts.entry(id.clone()).or_insert(0);
        if *count == 0 {
            first_seen.push(id.clone());
        }
        *count += 1;
        cells.push(OccurrenceCell {
            v_t: vt,
            v_r: vr,
            structure: Some(id),
            exponents: Some(rep.optimum.exponents),
            p1_max: Some(rep.optimum.p1_max),
        });
    }
    let mut ranking: Vec<(String, usize)> = first_seen
        .into_iter()
        .map(|id| {
            let c = counts[&id];
            (id, c)
        })
        .collect();
    ranking.sort_by_key(|r| std::cmp::Reverse(r.1));
    Ok(OccurrenceMap {
        half,
        cells,
        ranking,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceRow {
    pub v_t: f64,
    pub v_r: f64,
    pub structure: String,
    pub rank: Option<usize>,
    pub p1_max: Option<f64>,
}

impl OccurrenceMap {
    /// CSV rows; excluded cells have an empty structure.
    pub fn rows(&self) -> Vec<OccurrenceRow> {
        let rank: HashMap<&str, usize> = self
            .ranking
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.as_str(), i + 1))
            .collect();
        self.cells
            .iter()
            .map(|c| OccurrenceRow {
                v_t: c.v_t,
                v_r: c.v_r,
                structure: c.structure.clone().unwrap_or_default(),
                rank: c.structure.as_deref().map(|s| rank[s]),
                p1_max: c.p1_max,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub p1_max: f64,
    pub g2: Option<f64>,
    pub lambda_opt: f64,
    pub structure: String,
}

/// Optimal structure for each number of units in `n_list`.
pub fn n_scaling(params: &LossParams<f64>, n_list: &[usize]) -> Result<Vec<ScalingRow>> {
    params.validate()?;
    n_list
        .iter()
        .map(|&n| {
            if n < 2 {
                return Err(Error::InvalidConfig(format!("N must be at least 2, got {n}")));
            }
            let rep = find_ogbm((n - 1) as u32, params)?;
            Ok(ScalingRow {
                n,
                p1_max: rep.optimum.p1_max,
                g2: rep.optimum.g2,
                lambda_opt: rep.optimum.lambda_opt,
                structure: rep.optimum.sequence.to_string(),
            })
        })
        .collect()
}

/// Numbers rounded for output.
pub trait Rounded {
    fn rounded(&self) -> Self;
}

impl Rounded for SurfaceRow {
    fn rounded(&self) -> Self {
        Self {
            v_t: r(self.v_t),
            v_r: r(self.v_r),
            p1_max: r(self.p1_max),
            g2: r_opt(self.g2),
            lambda_opt: r(self.lambda_opt),
            ..self.clone()
        }
    }
}

impl Rounded for DiffRow {
    fn rounded(&self) -> Self {
        Self {
            v_t: r(self.v_t),
            v_r: r(self.v_r),
            p1_ogbm: r(self.p1_ogbm),
            p1_asym: r(self.p1_asym),
            delta_p1: r(self.delta_p1),
            g2_ogbm: r_opt(self.g2_ogbm),
            g2_asym: r_opt(self.g2_asym),
            delta_g2: r_opt(self.delta_g2),
            ..self.clone()
        }
    }
}

impl Rounded for OccurrenceRow {
    fn rounded(&self) -> Self {
        Self {
            v_t: r(self.v_t),
            v_r: r(self.v_r),
            p1_max: r_opt(self.p1_max),
            ..self.clone()
        }
    }
}

impl Rounded for ScalingRow {
    fn rounded(&self) -> Self {
        Self {
            p1_max: r(self.p1_max),
            g2: r_opt(self.g2),
            lambda_opt: r(self.lambda_opt),
            ..self.clone()
        }
    }
}

/// Writes rows as CSV with a header, numbers rounded to [`OUTPUT_DIGITS`].
pub fn write_csv<W: Write, R: Serialize + Rounded>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row.rounded())?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata stored next to a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub kind: String,
    pub code_version: String,
    pub grid: Option<GridSpec>,
    pub params: Option<LossParams<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub n_rows: usize,
    pub elapsed_seconds: f64,
}

impl SweepMeta {
    pub fn new(kind: &str, n_rows: usize, started: Instant) -> Self {
        Self {
            kind: kind.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            grid: None,
            params: None,
            n_list: None,
            n_rows,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// `<csv path>.json`.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".json");
    name.into()
}

/// Writes `rows` to `path` and the metadata to its sidecar.
pub fn persist<R: Serialize + Rounded>(path: &Path, rows: &[R], meta: &SweepMeta) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)?;
    let sidecar = std::fs::File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(sidecar, meta)?;
    Ok(())
}
