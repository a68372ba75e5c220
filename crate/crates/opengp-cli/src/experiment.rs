//! The experiment runner and the standalone tree analyzer.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;

use opengp_core::{
    fdp_open_statistics, fdp_statistics, from_sexpr, run, run_open, value_entropy, DepthBin,
    GpRng, Individual, TestSuite,
};

use crate::config::{ExperimentConfig, Mode};
use crate::report;
use crate::{config_err, CliError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// Analysis sampling must not share the evolution stream, or enabling it
// would change the run itself.
const ANALYSIS_SEED_SALT: u64 = 0x0FD9_5A17;

/// Run the configured experiment, writing `manifest.txt`,
/// `stats_<mode>.csv` and `summary.txt` into the output directory. On any
/// failure the files written so far are removed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| {
        CliError::Runtime(format!("cannot create `{}`: {e}", cfg.out_dir.display()))
    })?;
    let mut written: Vec<PathBuf> = Vec::new();
    match run_experiment_inner(cfg, &mut written) {
        Ok(()) => Ok(written),
        Err(e) => {
            for path in &written {
                let _ = fs::remove_file(path);
            }
            Err(e)
        }
    }
}

fn write_file(
    written: &mut Vec<PathBuf>,
    dir: &Path,
    name: &str,
    contents: &str,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write `{}`: {e}", path.display())))?;
    written.push(path.clone());
    Ok(path)
}

fn run_experiment_inner(cfg: &ExperimentConfig, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let suite = TestSuite::sextic(cfg.suite_n_cases, cfg.suite_seed);
    write_file(written, &cfg.out_dir, "manifest.txt", &cfg.manifest(VERSION))?;

    let mut summary = String::from("opengp experiment summary\n=========================\n");
    let _ = writeln!(summary, "version = {VERSION}");
    let _ = writeln!(summary, "mode = {}", cfg.mode.as_str());
    let _ = writeln!(
        summary,
        "suite = sextic, {} cases, suite_seed {}",
        cfg.suite_n_cases, cfg.suite_seed
    );

    let mut mono_pooled = None;
    let mut open_pooled = None;

    if cfg.mode.runs_monolithic() {
        let (stats, pop) = run(&cfg.gp, &suite, &cfg.depth_bins);
        write_file(written, &cfg.out_dir, "stats_monolithic.csv", &report::monolithic_csv(&stats))?;

        let _ = writeln!(summary, "\n[monolithic]");
        let _ = writeln!(summary, "generations = {} (+ initial row)", cfg.gp.generations);
        let last = stats.rows.last().expect("runs emit at least the initial row");
        let _ = writeln!(summary, "final best fitness = {}", last.best_fitness);
        let s = report::summarize_population(&pop.members, &suite, cfg.gp.hit_threshold);
        report::write_population_summary(&mut summary, &s, "final population");
        let _ = writeln!(
            summary,
            "fit trees (every |error| < {}) = {} of {}",
            cfg.gp.hit_threshold, s.fit_count, s.total
        );
        let pooled = report::pooled_silence(
            &cfg.depth_bins,
            stats.rows.iter().map(|r| r.silent_bins.clone()),
        );
        let _ = writeln!(summary, "operation silence by site depth (pooled over the run):");
        report::write_silence_table(&mut summary, &cfg.depth_bins, &pooled);
        mono_pooled = Some(pooled);

        if cfg.analysis_fdp {
            let mut rng = GpRng::seed_from_u64(cfg.gp.seed ^ ANALYSIS_SEED_SALT);
            let fdp = fdp_statistics(
                &pop.members,
                &suite,
                cfg.fdp_trials_per_bin,
                &cfg.depth_bins,
                &mut rng,
            );
            let _ = writeln!(
                summary,
                "fdp on the final population ({} trials per bin):",
                cfg.fdp_trials_per_bin
            );
            report::write_fdp_table(&mut summary, &fdp);
        }
        if cfg.analysis_entropy {
            let agg =
                report::entropy_aggregate(pop.members.iter().map(|m| &m.tree), &suite);
            let _ = writeln!(summary, "entropy over the final population:");
            report::write_entropy_aggregate(&mut summary, &agg);
        }
    }

    if cfg.mode.runs_open() {
        let org_params = cfg.organism.expect("validated open config carries organism params");
        for warning in org_params.validate().expect("validated") {
            let _ = writeln!(summary, "warning: {warning}");
        }
        let (stats, pop) = run_open(&cfg.gp, &org_params, &suite, &cfg.depth_bins);
        write_file(written, &cfg.out_dir, "stats_open.csv", &report::open_csv(&stats))?;

        let _ = writeln!(summary, "\n[open]");
        let _ = writeln!(
            summary,
            "organisms of {} members, depth cap {}, {} registers, output register {}",
            org_params.member_count,
            org_params.depth_cap,
            org_params.register_count,
            org_params.output_register
        );
        let _ = writeln!(
            summary,
            "interpretation: the member programs form one organism per individual; \
             every mutation site lies within {} levels of the register fabric",
            org_params.depth_cap
        );
        let last = stats.rows.last().expect("runs emit at least the initial row");
        let _ = writeln!(summary, "final best fitness = {}", last.best_fitness);
        let s = report::summarize_organisms(&pop, &suite, cfg.gp.hit_threshold);
        report::write_population_summary(&mut summary, &s, "final member");
        let _ = writeln!(
            summary,
            "fit organisms (every |error| < {}) = {} of {}",
            cfg.gp.hit_threshold,
            s.fit_count,
            pop.len()
        );
        let pooled = report::pooled_silence(
            &cfg.depth_bins,
            stats.rows.iter().map(|r| r.silent_bins.clone()),
        );
        let _ = writeln!(
            summary,
            "member-output silence by site depth (pooled over the run):"
        );
        report::write_silence_table(&mut summary, &cfg.depth_bins, &pooled);
        open_pooled = Some(pooled);

        if cfg.analysis_fdp {
            let organisms: Vec<_> = pop.iter().map(|o| o.organism.clone()).collect();
            let mut rng = GpRng::seed_from_u64(cfg.gp.seed ^ ANALYSIS_SEED_SALT);
            let fdp = fdp_open_statistics(
                &organisms,
                &suite,
                cfg.fdp_trials_per_bin,
                &cfg.depth_bins,
                &mut rng,
            );
            let _ = writeln!(
                summary,
                "per-member fdp on the final population ({} trials per bin):",
                cfg.fdp_trials_per_bin
            );
            report::write_fdp_table(&mut summary, &fdp);
        }
        if cfg.analysis_entropy {
            let agg = report::entropy_aggregate(
                pop.iter().flat_map(|o| o.organism.members.iter().map(|m| &m.tree)),
                &suite,
            );
            let _ = writeln!(summary, "entropy over the final members:");
            report::write_entropy_aggregate(&mut summary, &agg);
        }
    }

    if cfg.mode == Mode::Both {
        let _ = writeln!(summary, "\n[comparison]");
        let _ = writeln!(
            summary,
            "silent fraction by site depth, pooled over each run \
             (monolithic: whole-tree fitness; open: member output):"
        );
        let mono = mono_pooled.expect("both mode ran monolithic");
        let open = open_pooled.expect("both mode ran open");
        let _ = writeln!(summary, "  {:<9} {:<22} {:<22}", "bin", "monolithic", "open");
        for ((bin, m), o) in cfg.depth_bins.iter().zip(&mono).zip(&open) {
            let cell = |t: &opengp_core::BinTally| match t.fraction() {
                Some(f) => format!("{f}"),
                None => "n/a".to_string(),
            };
            let _ = writeln!(summary, "  {:<9} {:<22} {:<22}", bin.display(), cell(m), cell(o));
        }
    }

    write_file(written, &cfg.out_dir, "summary.txt", &summary)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Standalone analysis of saved trees
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct AnalyzeArgs {
    pub trees_path: PathBuf,
    pub suite_seed: u64,
    pub n_cases: usize,
    pub entropy: bool,
    pub fdp: bool,
    pub trials_per_bin: u64,
}

/// Load one s-expression per line (blank lines and `#` comments allowed).
pub fn load_trees(path: &Path) -> Result<Vec<opengp_core::ExprTree>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read trees file `{}`: {e}", path.display())))?;
    let mut trees = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tree = from_sexpr(line).map_err(|e| {
            CliError::Config(format!("trees file line {}: {e}", idx + 1))
        })?;
        trees.push(tree);
    }
    if trees.is_empty() {
        return config_err(format!("no trees found in `{}`", path.display()));
    }
    Ok(trees)
}

/// Analyze saved trees against a seeded sextic suite, printing CSV tables.
pub fn run_analyze(args: &AnalyzeArgs, out: &mut impl std::io::Write) -> Result<(), CliError> {
    if !args.entropy && !args.fdp {
        return config_err("nothing to do: pass --entropy and/or --fdp");
    }
    let trees = load_trees(&args.trees_path)?;
    let suite = TestSuite::sextic(args.n_cases, args.suite_seed);
    let mut text = String::new();

    if args.entropy {
        let _ = writeln!(
            text,
            "tree,size,height,internal_nodes,root_entropy_bits,total_loss_bits,mean_loss_bits,max_loss_bits"
        );
        for (i, tree) in trees.iter().enumerate() {
            let report = opengp_core::entropy_report(tree, &suite);
            let root_entropy = value_entropy(&opengp_core::eval_tree(tree, &suite));
            let mut agg = report::EntropyAggregate::default();
            agg.add(&report);
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{}",
                i,
                tree.len(),
                tree.height(),
                agg.internal_nodes,
                root_entropy,
                agg.total_loss_bits,
                agg.mean_loss(),
                agg.max_loss_bits
            );
        }
    }

    if args.fdp {
        let members: Vec<Individual> = trees
            .iter()
            .map(|tree| Individual {
                fitness: opengp_core::fitness(tree, &suite),
                fitness_copied: false,
                tree: tree.clone(),
            })
            .collect();
        let mut rng = GpRng::seed_from_u64(args.suite_seed ^ ANALYSIS_SEED_SALT);
        let fdp = fdp_statistics(
            &members,
            &suite,
            args.trials_per_bin,
            &DepthBin::default_bins(),
            &mut rng,
        );
        let _ = writeln!(
            text,
            "depth_lo,depth_hi,trials,silent,silent_fraction,silent_tol,silent_tol_fraction"
        );
        for b in &fdp.bins {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{}",
                b.bin.lo,
                b.bin.hi.map_or("inf".to_string(), |h| h.to_string()),
                b.trials,
                b.silent,
                b.silent_fraction(),
                b.silent_tol,
                b.silent_tol_fraction()
            );
        }
    }

    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("cannot write analysis output: {e}")))?;
    Ok(())
}

