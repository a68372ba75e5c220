//! Summary statistics shared by the engine and the experiment reports.

/// Linear-interpolation quantile (the common "type 7" rule) over a sorted
/// slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Mean, quartiles and max of a set of heights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeightSummary {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: u32,
}

pub fn summarize_heights(heights: &[u32]) -> HeightSummary {
    assert!(!heights.is_empty(), "cannot summarize an empty set");
    let mut sorted: Vec<f64> = heights.iter().map(|&h| h as f64).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sum: f64 = sorted.iter().sum();
    HeightSummary {
        mean: sum / sorted.len() as f64,
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: *heights.iter().max().unwrap(),
    }
}

/// A half-open-at-infinity depth interval `[lo, hi]`; `hi = None` means
/// unbounded above.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DepthBin {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl DepthBin {
    pub fn new(lo: u32, hi: u32) -> DepthBin {
        DepthBin { lo, hi: Some(hi) }
    }

    pub fn open(lo: u32) -> DepthBin {
        DepthBin { lo, hi: None }
    }

    #[inline]
    pub fn contains(&self, depth: u32) -> bool {
        depth >= self.lo && self.hi.is_none_or(|hi| depth <= hi)
    }

    /// Column-name fragment, e.g. `1_5` or `51_up`.
    pub fn label(&self) -> String {
        match self.hi {
            Some(hi) => format!("{}_{}", self.lo, hi),
            None => format!("{}_up", self.lo),
        }
    }

    /// Human-readable range, e.g. `[1,5]` or `[51,inf)`.
    pub fn display(&self) -> String {
        match self.hi {
            Some(hi) => format!("[{},{}]", self.lo, hi),
            None => format!("[{},inf)", self.lo),
        }
    }

    /// The default binning brackets mutation depths from right at the root
    /// out to the deep interior.
    pub fn default_bins() -> Vec<DepthBin> {
        vec![
            DepthBin::new(1, 5),
            DepthBin::new(6, 10),
            DepthBin::new(11, 20),
            DepthBin::new(21, 50),
            DepthBin::open(51),
        ]
    }
}

/// Count of genetic operations and how many of them were silent, per bin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BinTally {
    pub ops: u64,
    pub silent: u64,
}

impl BinTally {
    pub fn fraction(&self) -> Option<f64> {
        (self.ops > 0).then(|| self.silent as f64 / self.ops as f64)
    }
}
