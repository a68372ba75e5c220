//! File-level behavior of the experiment runner.

use std::fs;

use opengp_cli::config::{parse_config, ExperimentConfig};
use opengp_cli::experiment::{run_analyze, run_experiment, AnalyzeArgs};
use opengp_core::{
    random_tree, summarize_heights, GenMethod, GpRng, Individual, TestSuite,
};
use rand::SeedableRng;

fn small_both_config(out_dir: &std::path::Path) -> ExperimentConfig {
    let text = format!(
        "mode = both\nseed = 5\ngenerations = 6\npopulation_size = 24\ntournament_size = 3\n\
         init_height_max = 5\nmember_count = 5\ndepth_cap = 10\nregister_count = 2\n\
         analysis_fdp = true\nanalysis_entropy = true\nfdp_trials_per_bin = 40\n\
         out_dir = {}\n",
        out_dir.display()
    );
    parse_config(&text).unwrap()
}

#[test]
fn both_mode_writes_all_files_with_pinned_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_both_config(dir.path());
    let files = run_experiment(&cfg).unwrap();
    assert_eq!(files.len(), 4, "manifest, two CSVs, summary");

    let mono = fs::read_to_string(dir.path().join("stats_monolithic.csv")).unwrap();
    assert!(mono.starts_with(
        "generation,best_fitness,mean_fitness,mean_size,mean_height,height_q1,height_median,\
         height_q3,shortcut_hits,nodes_evaluated,silent_frac_d1_5,silent_frac_d6_10,\
         silent_frac_d11_20,silent_frac_d21_50,silent_frac_d51_up\n"
    ));
    assert_eq!(mono.lines().count(), 1 + 7, "header + initial row + 6 generations");

    let open = fs::read_to_string(dir.path().join("stats_open.csv")).unwrap();
    assert!(open.starts_with(
        "generation,best_fitness,mean_fitness,mean_size,member_count_total,member_height_mean,\
         member_height_q1,member_height_median,member_height_q3,max_member_height,\
         shortcut_hits,nodes_evaluated,silent_frac_d1_5,silent_frac_d6_10,silent_frac_d11_20,\
         silent_frac_d21_50,silent_frac_d51_up\n"
    ));

    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("[monolithic]"));
    assert!(summary.contains("[open]"));
    assert!(summary.contains("[comparison]"));
    assert!(summary.contains("fdp on the final population"));
    assert!(summary.contains("per-member fdp"));
    assert!(summary.contains("entropy over the final population"));
}

#[test]
fn reruns_are_byte_identical_and_manifest_reproduces() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let dir_c = tempfile::tempdir().unwrap();

    let cfg_a = small_both_config(dir_a.path());
    run_experiment(&cfg_a).unwrap();
    let cfg_b = small_both_config(dir_b.path());
    run_experiment(&cfg_b).unwrap();

    let read = |d: &std::path::Path, f: &str| fs::read(d.join(f)).unwrap();
    for f in ["stats_monolithic.csv", "stats_open.csv"] {
        assert_eq!(read(dir_a.path(), f), read(dir_b.path(), f), "{f} differs between reruns");
    }

    // Rerun from the manifest: only the output directory changes.
    let manifest = fs::read_to_string(dir_a.path().join("manifest.txt")).unwrap();
    let mut cfg_c = parse_config(&manifest).unwrap();
    cfg_c.out_dir = dir_c.path().to_path_buf();
    run_experiment(&cfg_c).unwrap();
    for f in ["stats_monolithic.csv", "stats_open.csv"] {
        assert_eq!(read(dir_a.path(), f), read(dir_c.path(), f), "{f} differs from manifest rerun");
    }
    let summary_a = fs::read_to_string(dir_a.path().join("summary.txt")).unwrap();
    let summary_c = fs::read_to_string(dir_c.path().join("summary.txt")).unwrap();
    assert_eq!(summary_a, summary_c);
}

#[test]
fn worker_count_leaves_output_bytes_alone() {
    let run_in_pool = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_both_config(dir.path());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg).unwrap());
        (
            fs::read(dir.path().join("stats_monolithic.csv")).unwrap(),
            fs::read(dir.path().join("stats_open.csv")).unwrap(),
        )
    };
    let (m1, o1) = run_in_pool(1);
    let (m3, o3) = run_in_pool(3);
    assert_eq!(m1, m3);
    assert_eq!(o1, o3);
}

#[test]
fn failed_runs_leave_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_both_config(dir.path());
    // Point the output at a path that cannot be a directory.
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "a file").unwrap();
    cfg.out_dir = blocker.join("out");
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!blocker.join("out").exists());
}

#[test]
fn population_summary_matches_hand_values() {
    let suite = TestSuite::sextic(48, 1);
    let tree_of_height = |h: u32| {
        let mut rng = GpRng::seed_from_u64(h as u64);
        random_tree(GenMethod::Full, h, &mut rng)
    };
    let members: Vec<Individual> = [7u32, 9, 11]
        .iter()
        .map(|&h| {
            let tree = tree_of_height(h);
            Individual { fitness: opengp_core::fitness(&tree, &suite), fitness_copied: false, tree }
        })
        .collect();
    let s = opengp_cli::report::summarize_population(&members, &suite, 0.01);
    assert_eq!(s.heights.mean, 9.0);
    assert_eq!(s.heights.median, 9.0);

    let single = &members[..1];
    let s1 = opengp_cli::report::summarize_population(single, &suite, 0.01);
    assert_eq!(s1.heights.q1, 7.0);
    assert_eq!(s1.heights.median, 7.0);
    assert_eq!(s1.heights.q3, 7.0);
    assert_eq!(s1.heights.mean, 7.0);
}

#[test]
fn grow_sample_quartiles_stay_under_the_cap() {
    // 1300 grow trees capped at height 11: every quartile must sit at or
    // under the cap.
    let mut rng = GpRng::seed_from_u64(1300);
    let heights: Vec<u32> = (0..1300)
        .map(|_| random_tree(GenMethod::Grow, 11, &mut rng).height())
        .collect();
    let s = summarize_heights(&heights);
    assert!(s.q1 <= 11.0 && s.median <= 11.0 && s.q3 <= 11.0);
    assert!(s.max <= 11);
}

#[test]
fn wide_organism_snapshot_reports_member_heights() {
    // 1300 depth-capped members per organism: the member-height summary is
    // the side-by-side comparison point against published height figures.
    let suite = TestSuite::sextic(48, 11);
    let gp = opengp_core::GpParams {
        population_size: 4,
        generations: 0,
        tournament_size: 2,
        init_height_min: 2,
        init_height_max: 10,
        seed: 11,
        ..opengp_core::GpParams::default()
    };
    let params = opengp_core::OrganismParams {
        member_count: 1300,
        depth_cap: 10,
        register_count: 8,
        output_register: 0,
    };
    let (stats, pop) = opengp_core::run_open(&gp, &params, &suite, &opengp_core::DepthBin::default_bins());
    assert_eq!(stats.rows[0].member_count_total, 4 * 1300);
    let s = opengp_cli::report::summarize_organisms(&pop, &suite, 0.01);
    assert!(s.heights.max <= 10);
    assert!(s.heights.q1 <= s.heights.median && s.heights.median <= s.heights.q3);
    assert!(s.heights.mean >= 1.0 && s.heights.mean <= 10.0);
    assert_eq!(s.total, 4 * 1300);
}

#[test]
fn k1_wrapped_population_reports_monolithic_statistics() {
    // Wrapping every tree of a monolithic population as a single-member
    // organism must leave every reported statistic identical.
    let suite = TestSuite::sextic(48, 31);
    let params = opengp_core::GpParams {
        population_size: 40,
        generations: 8,
        tournament_size: 3,
        init_height_max: 5,
        seed: 31,
        ..opengp_core::GpParams::default()
    };
    let (_, pop) = opengp_core::run(&params, &suite, &opengp_core::DepthBin::default_bins());
    let mono = opengp_cli::report::summarize_population(&pop.members, &suite, 0.01);
    let wrapped: Vec<opengp_core::OrgIndividual> = pop
        .members
        .iter()
        .map(|m| opengp_core::OrgIndividual {
            organism: opengp_core::Organism::wrap_tree(m.tree.clone()),
            fitness: m.fitness,
            fitness_copied: false,
        })
        .collect();
    let open = opengp_cli::report::summarize_organisms(&wrapped, &suite, 0.01);
    assert_eq!(mono.heights, open.heights);
    assert_eq!(mono.size_mean, open.size_mean);
    assert_eq!(mono.fit_count, open.fit_count);
    for (m, o) in pop.members.iter().zip(&wrapped) {
        assert_eq!(
            m.fitness.to_bits(),
            opengp_core::organism_fitness(&o.organism, &suite).to_bits()
        );
    }
}

#[test]
fn analyze_emits_entropy_and_fdp_tables() {
    let dir = tempfile::tempdir().unwrap();
    let trees_path = dir.path().join("trees.sexpr");
    fs::write(
        &trees_path,
        "# saved trees\n(+ (* x x) 0.5)\n(pdiv x (* x 0.0))\n(* (- (* x (* x x)) x) (- (* x (* x x)) x))\n",
    )
    .unwrap();
    let args = AnalyzeArgs {
        trees_path,
        suite_seed: 17,
        n_cases: 48,
        entropy: true,
        fdp: true,
        trials_per_bin: 30,
    };
    let mut out = Vec::new();
    run_analyze(&args, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("tree,size,height,internal_nodes,root_entropy_bits"));
    assert!(text.contains("depth_lo,depth_hi,trials,silent"));
    // Three data rows in the entropy table.
    assert!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count() >= 3);
}

#[test]
fn analyze_requires_a_task_and_a_readable_file() {
    let args = AnalyzeArgs {
        trees_path: "/definitely/missing".into(),
        suite_seed: 1,
        n_cases: 48,
        entropy: true,
        fdp: false,
        trials_per_bin: 10,
    };
    let err = run_analyze(&args, &mut Vec::new()).unwrap_err();
    assert_eq!(err.exit_code(), 1);

    let dir = tempfile::tempdir().unwrap();
    let trees_path = dir.path().join("trees.sexpr");
    fs::write(&trees_path, "x\n").unwrap();
    let args = AnalyzeArgs {
        trees_path,
        suite_seed: 1,
        n_cases: 48,
        entropy: false,
        fdp: false,
        trials_per_bin: 10,
    };
    let err = run_analyze(&args, &mut Vec::new()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
