//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use gbm_core::montecarlo::{chi2_compare, simulate, SimConfig};
use gbm_core::optimizer::{asym_arms, find_ogbm, optimize_lambda};
use gbm_core::statistics::{output_distribution, ArmVector, LossParams, SeriesConfig};
use gbm_core::sweeps::{diff_vs_asym, occurrence_map, AxisRange, GridSpec, Half};
use gbm_core::tree::{
    arm_transmissions, build_tree, catalan, dedup_structures, distinct_structures,
    generate_canonical_sequences, ArmExponents, RouterSequence, TransmissionSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn headline(v_d: f64) -> LossParams<f64> {
    LossParams::new(0.985, 0.99, 0.98, v_d).unwrap()
}

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn grid10(v_d: f64) -> GridSpec {
    GridSpec {
        vt_range: AxisRange::new(0.9, 0.99, 10).unwrap(),
        vr_range: AxisRange::new(0.9, 0.99, 10).unwrap(),
        v_d,
        ..GridSpec::default()
    }
}

fn catalan_counts() -> Outcome {
    let start = Instant::now();
    let three = distinct_structures(3).map_err(|e| e.to_string())?.len();
    let ten = generate_canonical_sequences(10).map_err(|e| e.to_string())?.count();
    let elapsed = start.elapsed();
    let c15 = catalan(15).map_err(|e| e.to_string())?;
    check(
        three == 5 && ten == 16796 && c15 == 9_694_845 && elapsed < Duration::from_secs(1),
        format!("N_R=3: {three} structures, N_R=10: {ten} sequences, catalan(15)={c15}, {elapsed:.2?}"),
    )
}

fn four_router_fixtures() -> Outcome {
    let e = ArmExponents::new;
    // V_t^k V_r^j written as (j, k), in port order.
    let want_a = vec![e(0, 2), e(1, 2), e(2, 1), e(1, 1), e(2, 0)];
    let want_b = vec![e(0, 2), e(1, 1), e(1, 2), e(2, 1), e(2, 0)];
    let a = build_tree(&[1, 2, 1, 2]).map_err(|e| e.to_string())?;
    let b = build_tree(&[1, 2, 2, 1]).map_err(|e| e.to_string())?;
    let seqs = vec![
        RouterSequence::new(vec![1, 2, 1, 2]).unwrap(),
        RouterSequence::new(vec![1, 2, 2, 1]).unwrap(),
    ];
    let kept = dedup_structures(seqs);
    let same = arm_transmissions(&a) == TransmissionSet::from_arms(want_a.clone());
    check(
        a.port_exponents() == want_a && b.port_exponents() == want_b && same && kept.len() == 1,
        format!("port sets match, {} structure after dedup", kept.len()),
    )
}

fn headline_optimum() -> Outcome {
    let start = Instant::now();
    let rep = single_thread(|| find_ogbm(10, &headline(0.95))).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (p1, g2) = (rep.optimum.p1_max, rep.optimum.g2.unwrap_or(f64::NAN));
    check(
        (p1 - 0.866).abs() <= 0.001 && (g2 - 0.091).abs() <= 0.002 && elapsed < Duration::from_secs(120),
        format!("P1={p1:.6} g2={g2:.6} {} single-threaded in {elapsed:.2?}", rep.optimum.sequence),
    )
}

fn detector_upgrade() -> Outcome {
    let rep = find_ogbm(10, &headline(0.98)).map_err(|e| e.to_string())?;
    let (p1, g2) = (rep.optimum.p1_max, rep.optimum.g2.unwrap_or(f64::NAN));
    check(
        (p1 - 0.889).abs() <= 0.001 && (g2 - 0.0395).abs() <= 0.001,
        format!("P1={p1:.6} g2={g2:.6} {}", rep.optimum.sequence),
    )
}

fn asym_baseline() -> Outcome {
    let params = headline(0.95);
    let arms = asym_arms(28, &params).map_err(|e| e.to_string())?;
    let p1 = optimize_lambda(&arms, params.v_d).map_err(|e| e.to_string())?.p1;
    check((p1 - 0.905).abs() <= 0.001, format!("N=28 chain P1={p1:.6}"))
}

fn dominance() -> Outcome {
    let rows = diff_vs_asym(&grid10(0.95)).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.delta_p1).fold(f64::INFINITY, f64::min);
    let chains: Vec<_> = rows.iter().filter(|r| r.winner_is_chain).collect();
    let chain_nonzero = chains.iter().filter(|r| r.delta_p1 != 0.0).count();
    check(
        worst >= -1e-10 && chain_nonzero == 0,
        format!(
            "{} cells, min Δ={worst:.3e}, {} chain winners, {chain_nonzero} with Δ≠0",
            rows.len(),
            chains.len()
        ),
    )
}

fn symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let vt: f64 = rng.random_range(0.9..=0.99);
        let vr: f64 = rng.random_range(0.9..=0.99);
        let p = LossParams::new(vt, vr, 0.98, 0.95).unwrap();
        let a = find_ogbm(10, &p).map_err(|e| e.to_string())?.optimum.p1_max;
        let b = find_ogbm(10, &p.swapped()).map_err(|e| e.to_string())?.optimum.p1_max;
        worst = worst.max((a - b).abs());
    }
    check(worst < 1e-10, format!("20 pairs, max |ΔP1|={worst:.3e}"))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let arms: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
        let lambda = rng.random_range(1e-4..=2.0);
        let v_d = rng.random_range(0.05..=1.0);
        let arms = ArmVector::from_unsorted(arms).unwrap();
        let stats = output_distribution(&arms, lambda, v_d, &SeriesConfig::default()).map_err(|e| e.to_string())?;
        worst = worst.max((stats.total_probability() - 1.0).abs());
    }
    check(worst <= 1e-10, format!("100 configurations, max |ΣP-1|={worst:.3e}"))
}

fn monte_carlo() -> Outcome {
    let rep = find_ogbm(10, &headline(0.95)).map_err(|e| e.to_string())?;
    let mut cases = vec![(rep.optimum.arms.clone(), rep.optimum.lambda_opt, 0.95)];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2 {
        let arms: Vec<f64> = (0..3).map(|_| rng.random_range(0.8..=0.99)).collect();
        cases.push((arms, rng.random_range(0.1..=1.5), rng.random_range(0.7..=0.99)));
    }
    let mut notes = Vec::new();
    let mut ok = true;
    for (k, (arms, lambda, v_d)) in cases.into_iter().enumerate() {
        let arms = ArmVector::from_unsorted(arms).unwrap();
        let analytic = output_distribution(&arms, lambda, v_d, &SeriesConfig::default()).map_err(|e| e.to_string())?;
        let sim = simulate(&SimConfig { arms, lambda, v_d, trials: 10_000_000, seed: 1 + k as u64 })
            .map_err(|e| e.to_string())?;
        let z: Vec<f64> = (0..3).map(|i| (sim.p(i) - analytic.p[i]).abs() / sim.se(i)).collect();
        let chi = chi2_compare(&sim, &analytic).map_err(|e| e.to_string())?;
        ok &= z.iter().all(|&z| z <= 3.0) && chi.pass;
        notes.push(format!("z=[{:.2},{:.2},{:.2}] χ²={:.1}/{:.1}", z[0], z[1], z[2], chi.statistic, chi.critical));
    }
    check(ok, notes.join("; "))
}

fn occurrence() -> Outcome {
    let map = occurrence_map(&grid10(0.95), Half::Upper).map_err(|e| e.to_string())?;
    let mut chains = HashSet::new();
    let mut others = HashSet::new();
    for cell in &map.cells {
        if let (Some(id), Some(set)) = (&cell.structure, &cell.exponents) {
            if set.is_chain() {
                chains.insert(id.clone());
            } else {
                others.insert(id.clone());
            }
        }
    }
    let w95 = find_ogbm(10, &headline(0.95)).map_err(|e| e.to_string())?.optimum;
    let w80 = find_ogbm(10, &headline(0.8)).map_err(|e| e.to_string())?.optimum;
    check(
        !chains.is_empty() && others.len() >= 4 && w80.exponents != w95.exponents,
        format!(
            "upper half: {} chain and {} non-chain winners; V_D=0.8 {} vs V_D=0.95 {}",
            chains.len(),
            others.len(),
            w80.sequence,
            w95.sequence
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("catalan counts", catalan_counts),
        ("four-router fixtures", four_router_fixtures),
        ("headline optimum", headline_optimum),
        ("detector upgrade", detector_upgrade),
        ("chain baseline", asym_baseline),
        ("dominance", dominance),
        ("swap symmetry", symmetry),
        ("normalization", normalization),
        ("monte carlo", monte_carlo),
        ("occurrence", occurrence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {name}: {detail} ({:.1?})", i + 1, start.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
