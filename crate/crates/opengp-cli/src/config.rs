//! Experiment configuration: a flat `key = value` text file.
//!
//! Unknown and duplicate keys are hard errors — a silently ignored typo
//! would invalidate whatever the experiment claims to show. The manifest
//! written next to each experiment's outputs is itself a valid config
//! file, so any run can be repeated from its manifest alone.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use opengp_core::{DepthBin, GpParams, OrganismParams};

use crate::{config_err, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Monolithic,
    Open,
    Both,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "monolithic" => Some(Mode::Monolithic),
            "open" => Some(Mode::Open),
            "both" => Some(Mode::Both),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Monolithic => "monolithic",
            Mode::Open => "open",
            Mode::Both => "both",
        }
    }

    pub fn runs_monolithic(self) -> bool {
        matches!(self, Mode::Monolithic | Mode::Both)
    }

    pub fn runs_open(self) -> bool {
        matches!(self, Mode::Open | Mode::Both)
    }
}

/// A fully resolved experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub gp: GpParams,
    pub organism: Option<OrganismParams>,
    pub suite_n_cases: usize,
    pub suite_seed: u64,
    pub analysis_fdp: bool,
    pub analysis_entropy: bool,
    pub depth_bins: Vec<DepthBin>,
    pub fdp_trials_per_bin: u64,
    pub out_dir: PathBuf,
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_depth_bins(spec: &str) -> Result<Vec<DepthBin>, String> {
    let mut bins = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if let Some(lo) = part.strip_suffix('+') {
            let lo: u32 = lo.parse().map_err(|_| format!("bad bin `{part}`"))?;
            bins.push(DepthBin::open(lo));
        } else {
            let (lo, hi) = part.split_once('-').ok_or(format!("bad bin `{part}`"))?;
            let lo: u32 = lo.parse().map_err(|_| format!("bad bin `{part}`"))?;
            let hi: u32 = hi.parse().map_err(|_| format!("bad bin `{part}`"))?;
            if hi < lo {
                return Err(format!("bin `{part}` is reversed"));
            }
            bins.push(DepthBin::new(lo, hi));
        }
    }
    if bins.is_empty() {
        return Err("no bins given".into());
    }
    Ok(bins)
}

fn bins_to_string(bins: &[DepthBin]) -> String {
    bins.iter()
        .map(|b| match b.hi {
            Some(hi) => format!("{}-{}", b.lo, hi),
            None => format!("{}+", b.lo),
        })
        .collect::<Vec<_>>()
        .join(",")
}

struct RawConfig<'a> {
    entries: Vec<(usize, &'a str, &'a str)>,
}

impl<'a> RawConfig<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.entries.iter().position(|(_, k, _)| *k == key)?;
        Some(self.entries.remove(pos).2)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("config key `{key}`: expected {what}, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => config_err(format!("config key `{key}`: expected true or false, got `{value}`")),
    }
}

/// Parse config text into a validated [`ExperimentConfig`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(CliError::Config(format!(
                "malformed line {line_no}: expected `key = value`"
            )))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return config_err(format!("malformed line {line_no}: empty key"));
        }
        if !seen.insert(key) {
            return config_err(format!("duplicate config key `{key}` (line {line_no})"));
        }
        if !KNOWN_KEYS.contains(&key) {
            return config_err(format!("unknown config key `{key}` (line {line_no})"));
        }
        entries.push((line_no, key, value));
    }
    let mut raw = RawConfig { entries };

    let mode = match raw.take("mode") {
        Some(v) => Mode::parse(v).ok_or(CliError::Config(format!(
            "config key `mode`: expected monolithic, open or both, got `{v}`"
        )))?,
        None => return config_err("config key `mode` is required"),
    };
    let seed: u64 = match raw.take("seed") {
        Some(v) => parse_value("seed", v, "an unsigned integer")?,
        None => return config_err("config key `seed` is required"),
    };

    let mut gp = GpParams { seed, ..GpParams::default() };
    if let Some(v) = raw.take("generations") {
        gp.generations = parse_value("generations", v, "an unsigned integer")?;
    }
    if let Some(v) = raw.take("population_size") {
        gp.population_size = parse_value("population_size", v, "an unsigned integer")?;
    }
    if let Some(v) = raw.take("tournament_size") {
        gp.tournament_size = parse_value("tournament_size", v, "an unsigned integer")?;
    }
    if let Some(v) = raw.take("crossover_rate") {
        gp.crossover_rate = parse_value("crossover_rate", v, "a number in [0, 1]")?;
    }
    if let Some(v) = raw.take("mutation_rate") {
        gp.mutation_rate = parse_value("mutation_rate", v, "a number in [0, 1]")?;
    }
    if let Some(v) = raw.take("init_height_min") {
        gp.init_height_min = parse_value("init_height_min", v, "an unsigned integer")?;
    }
    if let Some(v) = raw.take("init_height_max") {
        gp.init_height_max = parse_value("init_height_max", v, "an unsigned integer")?;
    }
    if let Some(v) = raw.take("height_limit") {
        gp.height_limit = if v == "none" {
            None
        } else {
            Some(parse_value("height_limit", v, "an unsigned integer or `none`")?)
        };
    }
    if let Some(v) = raw.take("shortcut") {
        gp.shortcut_enabled = parse_bool("shortcut", v)?;
    }
    if let Some(v) = raw.take("hit_threshold") {
        gp.hit_threshold = parse_value("hit_threshold", v, "a positive number")?;
    }
    gp.validate()
        .map_err(|e| CliError::Config(format!("config key `{}`: {}", e.field, e.message)))?;

    let member_count = raw.take("member_count");
    let depth_cap = raw.take("depth_cap");
    let register_count = raw.take("register_count");
    let output_register = raw.take("output_register");
    let organism = if mode.runs_open() {
        let need = |key: &'static str, v: Option<&str>| match v {
            Some(v) => Ok(v.to_string()),
            None => Err(CliError::Config(format!(
                "config key `{key}`: required when mode = {}",
                mode.as_str()
            ))),
        };
        let params = OrganismParams {
            member_count: parse_value("member_count", &need("member_count", member_count)?, "an unsigned integer")?,
            depth_cap: parse_value("depth_cap", &need("depth_cap", depth_cap)?, "an unsigned integer")?,
            register_count: parse_value("register_count", &need("register_count", register_count)?, "an unsigned integer")?,
            output_register: match output_register {
                Some(v) => parse_value("output_register", v, "an unsigned integer")?,
                None => 0,
            },
        };
        params
            .validate()
            .map_err(|e| CliError::Config(format!("config key `{}`: {}", e.field, e.message)))?;
        Some(params)
    } else {
        for (key, v) in [
            ("member_count", member_count),
            ("depth_cap", depth_cap),
            ("register_count", register_count),
            ("output_register", output_register),
        ] {
            if v.is_some() {
                return config_err(format!(
                    "config key `{key}` only applies when mode is open or both"
                ));
            }
        }
        None
    };

    let suite_n_cases = match raw.take("suite_n_cases") {
        Some(v) => {
            let n: usize = parse_value("suite_n_cases", v, "a positive integer")?;
            if n == 0 {
                return config_err("config key `suite_n_cases`: must be at least 1");
            }
            n
        }
        None => 48,
    };
    let suite_seed = match raw.take("suite_seed") {
        Some(v) => parse_value("suite_seed", v, "an unsigned integer")?,
        None => seed,
    };
    if let Some(v) = raw.take("suite_benchmark") {
        if v != "sextic" {
            return config_err(format!(
                "config key `suite_benchmark`: only `sextic` is available, got `{v}`"
            ));
        }
    }

    let analysis_fdp = match raw.take("analysis_fdp") {
        Some(v) => parse_bool("analysis_fdp", v)?,
        None => false,
    };
    let analysis_entropy = match raw.take("analysis_entropy") {
        Some(v) => parse_bool("analysis_entropy", v)?,
        None => false,
    };
    let depth_bins = match raw.take("depth_bins") {
        Some(v) => parse_depth_bins(v)
            .map_err(|e| CliError::Config(format!("config key `depth_bins`: {e}")))?,
        None => DepthBin::default_bins(),
    };
    let fdp_trials_per_bin = match raw.take("fdp_trials_per_bin") {
        Some(v) => parse_value("fdp_trials_per_bin", v, "an unsigned integer")?,
        None => 1000,
    };
    let out_dir = PathBuf::from(raw.take("out_dir").unwrap_or("out"));

    debug_assert!(raw.entries.is_empty(), "every known key is consumed");
    Ok(ExperimentConfig {
        mode,
        gp,
        organism,
        suite_n_cases,
        suite_seed,
        analysis_fdp,
        analysis_entropy,
        depth_bins,
        fdp_trials_per_bin,
        out_dir,
    })
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "seed",
    "generations",
    "population_size",
    "tournament_size",
    "crossover_rate",
    "mutation_rate",
    "init_height_min",
    "init_height_max",
    "height_limit",
    "shortcut",
    "hit_threshold",
    "suite_benchmark",
    "suite_n_cases",
    "suite_seed",
    "member_count",
    "depth_cap",
    "register_count",
    "output_register",
    "analysis_fdp",
    "analysis_entropy",
    "depth_bins",
    "fdp_trials_per_bin",
    "out_dir",
];

impl ExperimentConfig {
    /// Render the fully resolved configuration as a manifest that is
    /// itself a loadable config file. Every tunable that affects output
    /// bytes appears here.
    pub fn manifest(&self, version: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# opengp run manifest (version {version})");
        let _ = writeln!(out, "# rerun with: opengp run --config <this file>");
        if self.mode.runs_open() {
            let _ = writeln!(
                out,
                "# open architecture: each individual is one organism of member_count \
                 register-coupled programs; depth_cap bounds levels per member program"
            );
        }
        let _ = writeln!(out, "mode = {}", self.mode.as_str());
        let _ = writeln!(out, "seed = {}", self.gp.seed);
        let _ = writeln!(out, "generations = {}", self.gp.generations);
        let _ = writeln!(out, "population_size = {}", self.gp.population_size);
        let _ = writeln!(out, "tournament_size = {}", self.gp.tournament_size);
        let _ = writeln!(out, "crossover_rate = {}", self.gp.crossover_rate);
        let _ = writeln!(out, "mutation_rate = {}", self.gp.mutation_rate);
        let _ = writeln!(out, "init_height_min = {}", self.gp.init_height_min);
        let _ = writeln!(out, "init_height_max = {}", self.gp.init_height_max);
        match self.gp.height_limit {
            Some(limit) => {
                let _ = writeln!(out, "height_limit = {limit}");
            }
            None => {
                let _ = writeln!(out, "height_limit = none");
            }
        }
        let _ = writeln!(out, "shortcut = {}", self.gp.shortcut_enabled);
        let _ = writeln!(out, "hit_threshold = {}", self.gp.hit_threshold);
        let _ = writeln!(out, "suite_benchmark = sextic");
        let _ = writeln!(out, "suite_n_cases = {}", self.suite_n_cases);
        let _ = writeln!(out, "suite_seed = {}", self.suite_seed);
        if let Some(org) = &self.organism {
            let _ = writeln!(out, "member_count = {}", org.member_count);
            let _ = writeln!(out, "depth_cap = {}", org.depth_cap);
            let _ = writeln!(out, "register_count = {}", org.register_count);
            let _ = writeln!(out, "output_register = {}", org.output_register);
        }
        let _ = writeln!(out, "analysis_fdp = {}", self.analysis_fdp);
        let _ = writeln!(out, "analysis_entropy = {}", self.analysis_entropy);
        let _ = writeln!(out, "depth_bins = {}", bins_to_string(&self.depth_bins));
        let _ = writeln!(out, "fdp_trials_per_bin = {}", self.fdp_trials_per_bin);
        let _ = writeln!(out, "out_dir = {}", self.out_dir.display());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("mode = monolithic\nseed = 42\n").unwrap();
        assert_eq!(cfg.mode, Mode::Monolithic);
        assert_eq!(cfg.gp.seed, 42);
        assert_eq!(cfg.gp.population_size, 500);
        assert_eq!(cfg.gp.tournament_size, 7);
        assert_eq!(cfg.gp.crossover_rate, 0.9);
        assert_eq!(cfg.suite_n_cases, 48);
        assert_eq!(cfg.suite_seed, 42);
        assert_eq!(cfg.depth_bins, DepthBin::default_bins());
        assert!(cfg.organism.is_none());
    }

    #[test]
    fn out_of_range_rate_names_the_key() {
        let err = parse_config("mode = monolithic\nseed = 1\ncrossover_rate = 1.2\n").unwrap_err();
        assert!(err.to_string().contains("crossover_rate"), "{err}");
    }

    #[test]
    fn open_mode_requires_organism_keys() {
        let err = parse_config("mode = open\nseed = 1\n").unwrap_err();
        assert!(err.to_string().contains("member_count"), "{err}");
        let ok = parse_config(
            "mode = open\nseed = 1\nmember_count = 40\ndepth_cap = 10\nregister_count = 4\n",
        )
        .unwrap();
        assert_eq!(ok.organism.unwrap().member_count, 40);
    }

    #[test]
    fn organism_keys_rejected_in_monolithic_mode() {
        let err =
            parse_config("mode = monolithic\nseed = 1\nmember_count = 10\n").unwrap_err();
        assert!(err.to_string().contains("member_count"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_fail_fast() {
        let err = parse_config("mode = monolithic\nseed = 1\npopsize = 10\n").unwrap_err();
        assert!(err.to_string().contains("unknown config key `popsize`"), "{err}");
        let err = parse_config("mode = monolithic\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate config key `seed`"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_config("mode = monolithic\nseed 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn depth_bin_grammar() {
        let bins = parse_depth_bins("1-5,6-10,11+").unwrap();
        assert_eq!(bins.len(), 3);
        assert_eq!(bins[2], DepthBin::open(11));
        assert!(parse_depth_bins("5-1").is_err());
        assert!(parse_depth_bins("").is_err());
    }

    #[test]
    fn manifest_round_trips_through_the_parser() {
        let cfg = parse_config(
            "mode = both\nseed = 9\nmember_count = 8\ndepth_cap = 10\nregister_count = 2\n\
             generations = 5\npopulation_size = 20\ntournament_size = 3\nheight_limit = 12\n",
        )
        .unwrap();
        let manifest = cfg.manifest("0.0.0-test");
        let back = parse_config(&manifest).unwrap();
        assert_eq!(back.mode, cfg.mode);
        assert_eq!(back.gp, cfg.gp);
        assert_eq!(back.organism.unwrap(), cfg.organism.unwrap());
        assert_eq!(back.suite_seed, cfg.suite_seed);
        assert_eq!(back.depth_bins, cfg.depth_bins);
        // And the manifest of the reloaded config is byte-identical.
        assert_eq!(back.manifest("0.0.0-test"), manifest);
    }
}
