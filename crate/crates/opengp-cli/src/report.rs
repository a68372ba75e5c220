//! Report rendering: CSV tables, the plain-text summary and helper
//! statistics. Numbers are formatted with Rust's shortest-round-trip
//! float notation and a `.` decimal point, so output bytes are a pure
//! function of the computed values.

use std::fmt::Write as _;

use opengp_core::{
    eval_tree, is_fit, summarize_heights, BinTally, DepthBin, EntropyReport, FdpStats,
    HeightSummary, Individual, OrgIndividual, RunStats, TestSuite,
};
use opengp_core::{entropy_report, OpenRunStats};

fn silent_cell(t: &BinTally) -> String {
    match t.fraction() {
        Some(f) => format!("{f}"),
        None => String::new(),
    }
}

fn bin_columns(bins: &[DepthBin]) -> String {
    bins.iter()
        .map(|b| format!(",silent_frac_d{}", b.label()))
        .collect()
}

/// Fixed column set of `stats_monolithic.csv`.
pub fn monolithic_csv(stats: &RunStats) -> String {
    let mut out = String::from(
        "generation,best_fitness,mean_fitness,mean_size,mean_height,height_q1,height_median,height_q3,shortcut_hits,nodes_evaluated",
    );
    out.push_str(&bin_columns(&stats.bins));
    out.push('\n');
    for r in &stats.rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.generation,
            r.best_fitness,
            r.mean_fitness,
            r.mean_size,
            r.heights.mean,
            r.heights.q1,
            r.heights.median,
            r.heights.q3,
            r.shortcut_hits,
            r.nodes_evaluated,
        );
        for t in &r.silent_bins {
            let _ = write!(out, ",{}", silent_cell(t));
        }
        out.push('\n');
    }
    out
}

/// Fixed column set of `stats_open.csv`.
pub fn open_csv(stats: &OpenRunStats) -> String {
    let mut out = String::from(
        "generation,best_fitness,mean_fitness,mean_size,member_count_total,member_height_mean,member_height_q1,member_height_median,member_height_q3,max_member_height,shortcut_hits,nodes_evaluated",
    );
    out.push_str(&bin_columns(&stats.bins));
    out.push('\n');
    for r in &stats.rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.generation,
            r.best_fitness,
            r.mean_fitness,
            r.mean_size,
            r.member_count_total,
            r.member_heights.mean,
            r.member_heights.q1,
            r.member_heights.median,
            r.member_heights.q3,
            r.member_heights.max,
            r.shortcut_hits,
            r.nodes_evaluated,
        );
        for t in &r.silent_bins {
            let _ = write!(out, ",{}", silent_cell(t));
        }
        out.push('\n');
    }
    out
}

/// Population summary used by the text report.
#[derive(Clone, Debug)]
pub struct PopulationSummary {
    pub heights: HeightSummary,
    pub size_mean: f64,
    pub fit_count: usize,
    pub total: usize,
}

/// Height/size/fitness summary of a monolithic population; `fit_count`
/// counts trees hitting every case under the threshold.
pub fn summarize_population(
    members: &[Individual],
    suite: &TestSuite,
    hit_threshold: f64,
) -> PopulationSummary {
    assert!(!members.is_empty(), "cannot summarize an empty population");
    let heights: Vec<u32> = members.iter().map(|m| m.tree.height()).collect();
    let size_mean =
        members.iter().map(|m| m.tree.len() as f64).sum::<f64>() / members.len() as f64;
    let fit_count = members
        .iter()
        .filter(|m| is_fit(&eval_tree(&m.tree, suite), suite, hit_threshold))
        .count();
    PopulationSummary {
        heights: summarize_heights(&heights),
        size_mean,
        fit_count,
        total: members.len(),
    }
}

/// As [`summarize_population`], computed over the member trees of an
/// organism population; `fit_count` counts whole organisms.
pub fn summarize_organisms(
    pop: &[OrgIndividual],
    suite: &TestSuite,
    hit_threshold: f64,
) -> PopulationSummary {
    assert!(!pop.is_empty(), "cannot summarize an empty population");
    let heights: Vec<u32> = pop.iter().flat_map(|o| o.organism.member_heights()).collect();
    let total_members = heights.len();
    let size_mean = pop.iter().map(|o| o.organism.total_nodes() as f64).sum::<f64>()
        / pop.len() as f64;
    let fit_count = pop
        .iter()
        .filter(|o| is_fit(&opengp_core::eval_organism(&o.organism, suite), suite, hit_threshold))
        .count();
    PopulationSummary {
        heights: summarize_heights(&heights),
        size_mean,
        fit_count,
        total: total_members,
    }
}

pub fn write_population_summary(out: &mut String, s: &PopulationSummary, label: &str) {
    let _ = writeln!(
        out,
        "{label} heights: mean {} q1 {} median {} q3 {} max {}",
        s.heights.mean, s.heights.q1, s.heights.median, s.heights.q3, s.heights.max
    );
    let _ = writeln!(out, "{label} mean size: {}", s.size_mean);
}

/// Pool the per-generation operation tallies of a run into one count per
/// bin.
pub fn pooled_silence(bins: &[DepthBin], rows: impl Iterator<Item = Vec<BinTally>>) -> Vec<BinTally> {
    let mut pooled = vec![BinTally::default(); bins.len()];
    for row in rows {
        for (p, t) in pooled.iter_mut().zip(row) {
            p.ops += t.ops;
            p.silent += t.silent;
        }
    }
    pooled
}

pub fn write_silence_table(out: &mut String, bins: &[DepthBin], tallies: &[BinTally]) {
    for (bin, t) in bins.iter().zip(tallies) {
        match t.fraction() {
            Some(f) => {
                let _ = writeln!(out, "  {:<9} ops {:<7} silent_fraction {f}", bin.display(), t.ops);
            }
            None => {
                let _ = writeln!(out, "  {:<9} ops 0       silent_fraction n/a", bin.display());
            }
        }
    }
}

pub fn write_fdp_table(out: &mut String, fdp: &FdpStats) {
    for b in &fdp.bins {
        let _ = writeln!(
            out,
            "  {:<9} trials {:<6} silent {:<6} silent_fraction {} silent_tol_fraction {}",
            b.bin.display(),
            b.trials,
            b.silent,
            b.silent_fraction(),
            b.silent_tol_fraction()
        );
    }
}

/// Aggregate entropy-loss figures over a set of per-tree reports.
#[derive(Clone, Copy, Debug, Default)]
pub struct EntropyAggregate {
    pub internal_nodes: u64,
    pub total_loss_bits: f64,
    pub max_loss_bits: f64,
    pub zero_loss_nodes: u64,
}

impl EntropyAggregate {
    pub fn add(&mut self, report: &EntropyReport) {
        for (_, e) in report.internal() {
            self.internal_nodes += 1;
            self.total_loss_bits += e.loss_bits;
            if e.loss_bits > self.max_loss_bits {
                self.max_loss_bits = e.loss_bits;
            }
            // Exact-entropy bookkeeping: a lossless node is exactly 0.
            if e.loss_bits <= 1e-12 {
                self.zero_loss_nodes += 1;
            }
        }
    }

    pub fn mean_loss(&self) -> f64 {
        if self.internal_nodes == 0 {
            0.0
        } else {
            self.total_loss_bits / self.internal_nodes as f64
        }
    }

    pub fn zero_loss_share(&self) -> f64 {
        if self.internal_nodes == 0 {
            0.0
        } else {
            self.zero_loss_nodes as f64 / self.internal_nodes as f64
        }
    }
}

pub fn entropy_aggregate<'a>(
    trees: impl Iterator<Item = &'a opengp_core::ExprTree>,
    suite: &TestSuite,
) -> EntropyAggregate {
    let mut agg = EntropyAggregate::default();
    for tree in trees {
        agg.add(&entropy_report(tree, suite));
    }
    agg
}

pub fn write_entropy_aggregate(out: &mut String, agg: &EntropyAggregate) {
    let _ = writeln!(
        out,
        "  internal nodes {} mean_loss_bits {} max_loss_bits {} zero_loss_share {}",
        agg.internal_nodes,
        agg.mean_loss(),
        agg.max_loss_bits,
        agg.zero_loss_share()
    );
}
