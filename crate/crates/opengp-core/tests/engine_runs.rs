//! Run-level behavior of the generational loop.

use opengp_core::{run, DepthBin, GpParams, TestSuite};

fn sextic() -> TestSuite {
    TestSuite::sextic(48, 2024)
}

#[test]
fn shortcut_on_and_off_agree() {
    // The cost advantage belongs to deep populations and is exercised by
    // the acceptance suite; here only the exactness contract is under
    // test, which must hold in every regime.
    let base = GpParams {
        population_size: 128,
        generations: 30,
        init_height_min: 2,
        init_height_max: 6,
        seed: 41,
        ..GpParams::default()
    };
    let on = GpParams { shortcut_enabled: true, ..base.clone() };
    let off = GpParams { shortcut_enabled: false, ..base };
    let bins = DepthBin::default_bins();
    let suite = sextic();
    let (stats_on, pop_on) = run(&on, &suite, &bins);
    let (stats_off, pop_off) = run(&off, &suite, &bins);

    for (a, b) in stats_on.rows.iter().zip(&stats_off.rows) {
        assert_eq!(a.best_fitness.to_bits(), b.best_fitness.to_bits());
        assert_eq!(a.mean_fitness.to_bits(), b.mean_fitness.to_bits());
        assert_eq!(a.mean_size, b.mean_size);
        assert_eq!(a.silent_bins, b.silent_bins);
    }
    for (a, b) in pop_on.members.iter().zip(&pop_off.members) {
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.fitness.to_bits(), b.fitness.to_bits());
    }
    let hits: u64 = stats_on.rows.iter().map(|r| r.shortcut_hits).sum();
    assert!(hits > 0, "an evolved run should copy at least some fitness");
}

#[test]
fn worker_count_does_not_change_a_bit() {
    let params = GpParams {
        population_size: 64,
        generations: 10,
        init_height_min: 2,
        init_height_max: 5,
        seed: 77,
        ..GpParams::default()
    };
    let bins = DepthBin::default_bins();
    let suite = sextic();

    let run_in_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run(&params, &suite, &bins))
    };
    let (one, pop_one) = run_in_pool(1);
    let (four, pop_four) = run_in_pool(4);
    assert_eq!(one.rows, four.rows);
    for (a, b) in pop_one.members.iter().zip(&pop_four.members) {
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.fitness.to_bits(), b.fitness.to_bits());
    }
}

#[test]
fn unlimited_growth_bloats() {
    // Direction of the size trend over a sustained unlimited run: the mean
    // tree grows.
    let params = GpParams {
        population_size: 500,
        generations: 200,
        height_limit: None,
        seed: 3,
        ..GpParams::default()
    };
    let suite = sextic();
    let (stats, _) = run(&params, &suite, &DepthBin::default_bins());
    let first = stats.rows[0].mean_size;
    let last = stats.rows.last().unwrap().mean_size;
    let late_avg: f64 = stats.rows[150..].iter().map(|r| r.mean_size).sum::<f64>() / 51.0;
    let early_avg: f64 = stats.rows[1..31].iter().map(|r| r.mean_size).sum::<f64>() / 30.0;
    assert!(
        late_avg > early_avg && last > first,
        "no bloat: first {first:.1}, last {last:.1}, early {early_avg:.1}, late {late_avg:.1}"
    );
}
