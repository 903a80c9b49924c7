//! Parameter sweeps: grid consistency, symmetry and persistence.

use std::time::Instant;

use gbm_core::optimizer::{find_ogbm, numeric_arms, optimize_lambda};
use gbm_core::statistics::LossParams;
use gbm_core::sweeps::{
    diff_vs_asym, n_scaling, occurrence_map, persist, sidecar_path, surface_sweep, AxisRange,
    GridSpec, Half, SurfaceRow, SweepMeta,
};

fn grid(steps: usize, n_units: usize) -> GridSpec {
    GridSpec {
        vt_range: AxisRange::new(0.9, 0.99, steps).unwrap(),
        vr_range: AxisRange::new(0.9, 0.99, steps).unwrap(),
        n_units,
        ..GridSpec::default()
    }
}

fn at(rows: &[SurfaceRow], vt: f64, vr: f64) -> &SurfaceRow {
    rows.iter().find(|r| r.v_t == vt && r.v_r == vr).unwrap()
}

#[test]
fn corners_match_direct_search() {
    let g = grid(2, 8);
    let rows = surface_sweep(&g).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let rep = find_ogbm(7, &g.params(r.v_t, r.v_r).unwrap()).unwrap();
        assert_eq!(r.p1_max, rep.optimum.p1_max);
        assert_eq!(r.structure, rep.optimum.sequence.to_string());
    }
}

#[test]
fn mirrored_cells_agree() {
    let g = grid(5, 8);
    let map_rows = surface_sweep(&g).unwrap();
    let upper = occurrence_map(&g, Half::Upper).unwrap();
    let lower = occurrence_map(&g, Half::Lower).unwrap();
    for r in &map_rows {
        let m = at(&map_rows, r.v_r, r.v_t);
        assert!((r.p1_max - m.p1_max).abs() < 1e-10);
    }
    for u in upper.cells.iter().filter(|c| c.structure.is_some()) {
        if u.v_t == u.v_r {
            continue;
        }
        let l = lower.cells.iter().find(|c| c.v_t == u.v_r && c.v_r == u.v_t).unwrap();
        let (ue, le) = (u.exponents.as_ref().unwrap(), l.exponents.as_ref().unwrap());
        if ue.swapped() != *le {
            // Only an exact tie may break the mirror image.
            let params = g.params(l.v_t, l.v_r).unwrap();
            let p = optimize_lambda(&numeric_arms(&ue.swapped(), &params), params.v_d).unwrap().p1;
            assert!((p - l.p1_max.unwrap()).abs() < 1e-10, "({}, {})", u.v_t, u.v_r);
        }
    }
}

#[test]
fn occurrence_counts_cover_the_half() {
    let g = grid(6, 6);
    let map = occurrence_map(&g, Half::Upper).unwrap();
    let expected = g.cells().iter().filter(|&&(vt, vr)| vr >= vt).count();
    assert_eq!(map.n_covered(), expected);
    assert_eq!(map.ranking.iter().map(|r| r.1).sum::<usize>(), expected);
    assert!(map.ranking.windows(2).all(|w| w[0].1 >= w[1].1));
    let rows = map.rows();
    assert_eq!(rows.len(), 36);
    assert!(rows.iter().all(|r| r.structure.is_empty() == r.rank.is_none()));
}

#[test]
fn single_cell_occurrence() {
    let g = GridSpec {
        vt_range: AxisRange::single(0.985),
        vr_range: AxisRange::single(0.99),
        ..GridSpec::default()
    };
    let map = occurrence_map(&g, Half::Upper).unwrap();
    assert_eq!(map.n_covered(), 1);
    assert_eq!(map.ranking[0].1, 1);
}

#[test]
fn optimal_structure_never_loses_to_the_chain() {
    let rows = diff_vs_asym(&grid(4, 9)).unwrap();
    for r in &rows {
        assert!(r.delta_p1 >= -1e-10, "{r:?}");
        if r.winner_is_baseline {
            assert_eq!(r.delta_p1, 0.0);
        }
        assert!(!r.winner_is_baseline || r.winner_is_chain);
    }
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    let g = grid(3, 7);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(one.install(|| surface_sweep(&g).unwrap()), three.install(|| surface_sweep(&g).unwrap()));
}

#[test]
fn more_units_never_hurt() {
    let rows = n_scaling(&LossParams::default(), &[2, 3, 4, 5, 6, 7, 8, 9, 10]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].p1_max >= w[0].p1_max - 1e-12, "N={}", w[1].n);
    }
}

#[test]
fn better_detector_raises_p1() {
    let mut prev = 0.0;
    for v_d in [0.8, 0.85, 0.9, 0.95, 0.98] {
        let p = find_ogbm(10, &LossParams::new(0.985, 0.99, 0.98, v_d).unwrap()).unwrap();
        assert!(p.optimum.p1_max > prev, "V_D={v_d}");
        prev = p.optimum.p1_max;
    }
}

#[test]
fn csv_and_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    let g = grid(2, 4);
    let rows = surface_sweep(&g).unwrap();
    let mut meta = SweepMeta::new("surface", rows.len(), Instant::now());
    meta.grid = Some(g);
    persist(&path, &rows, &meta).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["v_t", "v_r", "p1_max", "g2", "structure", "lambda_opt"]);
    let back: Vec<SurfaceRow> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(back.len(), rows.len());
    for (a, b) in back.iter().zip(&rows) {
        assert!((a.p1_max - b.p1_max).abs() <= 1e-11 * b.p1_max);
        assert_eq!(a.structure, b.structure);
    }

    let side: SweepMeta = serde_json::from_reader(std::fs::File::open(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(side.kind, "surface");
    assert_eq!(side.n_rows, 4);
    assert_eq!(side.grid, Some(g));
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(AxisRange::new(0.85, 0.99, 4).is_err());
    let g = GridSpec { n_units: 1, ..GridSpec::default() };
    assert!(surface_sweep(&g).is_err());
}
