//! Fitness test suites. A suite is the fixed environment a program is
//! scored against: a list of `(x, target)` pairs.

use rand::Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::random::GpRng;

/// Per-test-case outputs of one node or program, in suite order.
pub type ValueVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestCase {
    pub x: f64,
    pub target: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SuiteError {
    #[error("a test suite needs at least one case")]
    Empty,
    #[error("case {index} is not finite (x = {x}, target = {target})")]
    NonFinite { index: usize, x: f64, target: f64 },
}

/// An immutable set of fitness cases.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSuite {
    cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(cases: Vec<TestCase>) -> Result<TestSuite, SuiteError> {
        if cases.is_empty() {
            return Err(SuiteError::Empty);
        }
        for (index, c) in cases.iter().enumerate() {
            if !c.x.is_finite() || !c.target.is_finite() {
                return Err(SuiteError::NonFinite { index, x: c.x, target: c.target });
            }
        }
        Ok(TestSuite { cases })
    }

    /// Build a suite from inputs and a target function.
    pub fn from_fn(xs: &[f64], f: impl Fn(f64) -> f64) -> Result<TestSuite, SuiteError> {
        TestSuite::new(xs.iter().map(|&x| TestCase { x, target: f(x) }).collect())
    }

    /// The sextic polynomial benchmark: `n_cases` inputs drawn uniformly
    /// from [-1, 1), targets from [`sextic_target`]. The draw is fully
    /// determined by `seed`.
    pub fn sextic(n_cases: usize, seed: u64) -> TestSuite {
        assert!(n_cases >= 1, "n_cases must be >= 1");
        let mut rng = GpRng::seed_from_u64(seed);
        let cases = (0..n_cases)
            .map(|_| {
                let x = rng.gen_range(-1.0..1.0);
                TestCase { x, target: sextic_target(x) }
            })
            .collect();
        TestSuite { cases }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // enforced at construction
    }

    #[inline]
    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn xs(&self) -> Vec<f64> {
        self.cases.iter().map(|c| c.x).collect()
    }
}

/// Target of the sextic benchmark, x^6 - 2x^4 + x^2, evaluated with a fixed
/// operation order so a tree built from the same order reproduces the
/// targets bit for bit.
#[inline]
pub fn sextic_target(x: f64) -> f64 {
    let x2 = x * x;
    let x4 = x2 * x2;
    let x6 = x4 * x2;
    (x6 - 2.0 * x4) + x2
}
