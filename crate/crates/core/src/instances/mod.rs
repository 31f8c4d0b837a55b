//! Instance generators, the non-dominance validator and the text file format.
//!
//! Random instances are drawn from a ChaCha8 stream (`rand_chacha`) seeded
//! with `seed_from_u64`, so a seed reproduces the same instance on every
//! platform.

mod io;

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Instance, LatencyFamily, ResourceGroup};

pub use io::{format_instance, parse_instance, read_instance, write_instance, write_instance_with_comments};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceClass {
    Base,
    Random,
    Partition,
}

/// Value ranges of the random class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomRanges {
    pub fixed_cost: RangeInclusive<u32>,
    pub coeff: RangeInclusive<u32>,
    pub multiplicity: RangeInclusive<u32>,
}

impl Default for RandomRanges {
    fn default() -> Self {
        Self { fixed_cost: 1..=100, coeff: 1..=100, multiplicity: 1..=5 }
    }
}

/// Everything needed to regenerate an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub class: InstanceClass,
    pub q: usize,
    pub seed: u64,
    pub exponent: f64,
    /// Weights of the partition class.
    pub weights: Vec<u64>,
    pub ranges: RandomRanges,
}

impl GeneratorSpec {
    pub fn base(q: usize) -> Self {
        Self {
            class: InstanceClass::Base,
            q,
            seed: 0,
            exponent: 1.0,
            weights: Vec::new(),
            ranges: RandomRanges::default(),
        }
    }

    pub fn random(q: usize, seed: u64) -> Self {
        Self { class: InstanceClass::Random, seed, ..Self::base(q) }
    }

    pub fn partition(weights: Vec<u64>) -> Self {
        Self { class: InstanceClass::Partition, q: weights.len(), weights, ..Self::base(0) }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance> {
    match spec.class {
        InstanceClass::Base => base_with_exponent(spec.q, spec.exponent),
        InstanceClass::Random => random_with_exponent(spec.q, spec.seed, &spec.ranges, spec.exponent),
        InstanceClass::Partition => partition_reduction(&spec.weights),
    }
}

/// Base class: `b_i = i`, `c_i = q - i + 1`, linear latencies, no repeats.
pub fn generate_base(q: usize) -> Result<Instance> {
    base_with_exponent(q, 1.0)
}

fn base_with_exponent(q: usize, exponent: f64) -> Result<Instance> {
    if q == 0 {
        return Err(Error::Generator("q must be at least 1".into()));
    }
    let groups = (1..=q)
        .map(|i| ResourceGroup::new((q - i + 1) as f64, LatencyFamily::power(i as f64, exponent)?, 1))
        .collect::<Result<Vec<_>>>()?;
    Instance::new(groups)
}

/// Random class with linear latencies.
pub fn generate_random(q: usize, seed: u64, ranges: &RandomRanges) -> Result<Instance> {
    random_with_exponent(q, seed, ranges, 1.0)
}

const DRAWS_PER_ATTEMPT: usize = 20_000;
const ATTEMPTS: usize = 50;

fn random_with_exponent(q: usize, seed: u64, ranges: &RandomRanges, exponent: f64) -> Result<Instance> {
    if q == 0 {
        return Err(Error::Generator("q must be at least 1".into()));
    }
    for (name, r) in [("fixed cost", &ranges.fixed_cost), ("coefficient", &ranges.coeff)] {
        if r.is_empty() {
            return Err(Error::Generator(format!("empty {name} range")));
        }
    }
    if ranges.multiplicity.is_empty() || *ranges.multiplicity.start() == 0 {
        return Err(Error::Generator("multiplicity range must be nonempty and start at 1 or more".into()));
    }
    if *ranges.coeff.start() == 0 {
        return Err(Error::Generator("coefficients must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut multiplicities = Vec::new();
    let mut total = 0usize;
    while total < q {
        let m = rng.gen_range(ranges.multiplicity.clone()) as usize;
        let m = m.min(q - total);
        multiplicities.push(m);
        total += m;
    }

    let wanted = multiplicities.len();
    for _ in 0..ATTEMPTS {
        if let Some(pairs) = draw_chain(&mut rng, ranges, wanted) {
            let groups = pairs
                .iter()
                .zip(&multiplicities)
                .map(|(&(c, b), &m)| ResourceGroup::new(c as f64, LatencyFamily::power(b as f64, exponent)?, m))
                .collect::<Result<Vec<_>>>()?;
            return Instance::new(groups);
        }
    }
    Err(Error::Generator(format!(
        "could not draw {wanted} non-dominated resources from c in {:?}, b in {:?}",
        ranges.fixed_cost, ranges.coeff
    )))
}

/// Draws distinct `(c, b)` pairs one at a time, keeping only those that
/// leave the set non-dominated. Returns the pairs sorted by decreasing `c`,
/// or `None` when the draw budget runs out.
fn draw_chain(rng: &mut ChaCha8Rng, ranges: &RandomRanges, wanted: usize) -> Option<Vec<(u32, u32)>> {
    let mut chain: Vec<(u32, u32)> = Vec::with_capacity(wanted);
    for _ in 0..DRAWS_PER_ATTEMPT {
        if chain.len() == wanted {
            break;
        }
        let c = rng.gen_range(ranges.fixed_cost.clone());
        let b = rng.gen_range(ranges.coeff.clone());
        // position keeping c strictly decreasing
        let pos = chain.partition_point(|&(ci, _)| ci > c);
        if chain.get(pos).is_some_and(|&(ci, _)| ci == c) {
            continue;
        }
        let s = c as u64 + b as u64;
        let fits_before = pos == 0 || {
            let (pc, pb) = chain[pos - 1];
            pb < b && pc as u64 + pb as u64 <= s
        };
        let fits_after = pos == chain.len() || {
            let (nc, nb) = chain[pos];
            b < nb && s <= nc as u64 + nb as u64
        };
        if fits_before && fits_after {
            chain.insert(pos, (c, b));
        }
    }
    (chain.len() == wanted).then_some(chain)
}

/// Reduction from PARTITION: `c_i = w_i`, `f_i(x) = (W^2 / (4 w_i)) x`.
///
/// For an active set of total weight `s` the optimal cost is
/// `s + W^2 / (4 s)`, which reaches its minimum `W` exactly when `s = W/2`.
pub fn partition_reduction(weights: &[u64]) -> Result<Instance> {
    if weights.is_empty() || weights.contains(&0) {
        return Err(Error::Generator("partition weights must be a nonempty list of positive integers".into()));
    }
    let total: u64 = weights.iter().sum();
    let total = total as f64;
    let groups = weights
        .iter()
        .map(|&w| ResourceGroup::linear(w as f64, total * total / (4.0 * w as f64)))
        .collect::<Result<Vec<_>>>()?;
    Instance::new(groups)
}

/// A breach of non-dominance, with group indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `c_i + b_i < c_j + b_j` and `c_i <= c_j`: `better` is strictly preferable.
    Dominates { better: usize, worse: usize },
    /// Fixed costs must not increase along the group order.
    FixedCostIncreases { index: usize },
    /// Latency coefficients must not decrease along the group order.
    CoefficientDecreases { index: usize },
    /// `c_i + b_i` must exceed the largest fixed cost `c_1`.
    BelowFirstFixedCost { index: usize },
}

/// Lists every non-dominance violation; an empty list means the instance is
/// non-dominated.
pub fn validate_nondominated(instance: &Instance) -> Vec<Violation> {
    let rows: Vec<(f64, f64)> = instance.groups().iter().map(|g| (g.fixed_cost, g.latency.coefficient())).collect();
    let mut out = Vec::new();
    for (i, &(ci, bi)) in rows.iter().enumerate() {
        for (j, &(cj, bj)) in rows.iter().enumerate() {
            if i != j && ci + bi < cj + bj && ci <= cj {
                out.push(Violation::Dominates { better: i, worse: j });
            }
        }
    }
    for i in 1..rows.len() {
        if rows[i].0 > rows[i - 1].0 {
            out.push(Violation::FixedCostIncreases { index: i });
        }
        if rows[i].1 < rows[i - 1].1 {
            out.push(Violation::CoefficientDecreases { index: i });
        }
    }
    let first = rows[0].0;
    for (i, &(c, b)) in rows.iter().enumerate() {
        if c + b <= first {
            out.push(Violation::BelowFirstFixedCost { index: i });
        }
    }
    out
}
