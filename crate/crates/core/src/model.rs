//! Resources, latency families, instances and allocations.
//!
//! A resource carrying a fraction `x` of the unit demand costs
//! `c + x f(x)` when `x > 0` and nothing otherwise. Resources that share the
//! fixed cost and the latency function are interchangeable; an [`Instance`]
//! stores them once as a [`ResourceGroup`] with a multiplicity. The expanded
//! resources are called copies and are numbered group by group, so the copies
//! of group `g` occupy a contiguous index range.

use crate::error::{Error, Result};
use crate::numeric::bisect_increasing;

/// Absolute tolerance of the bisection fallback in [`invert_marginal_by_bisection`].
pub const MARGINAL_INVERSE_TOL: f64 = 1e-12;

/// Latency function `f` of a resource.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencyFamily {
    /// `f(x) = coeff * x^exponent`, with `coeff > 0` and `exponent >= 1`.
    Power { coeff: f64, exponent: f64 },
    /// `f(x) = value`, independent of the load.
    Constant { value: f64 },
}

impl LatencyFamily {
    pub fn power(coeff: f64, exponent: f64) -> Result<Self> {
        if !(coeff.is_finite() && coeff > 0.0) {
            return Err(Error::Domain(format!("power latency coefficient must be positive and finite, got {coeff}")));
        }
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(Error::Domain(format!("power latency exponent must be finite and >= 1, got {exponent}")));
        }
        Ok(Self::Power { coeff, exponent })
    }

    /// Shorthand for `f(x) = coeff * x`.
    pub fn linear(coeff: f64) -> Result<Self> {
        Self::power(coeff, 1.0)
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Domain(format!("constant latency must be nonnegative and finite, got {value}")));
        }
        Ok(Self::Constant { value })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }

    /// Exponent of a power family.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Self::Power { exponent, .. } => Some(exponent),
            Self::Constant { .. } => None,
        }
    }

    /// Coefficient `b` of a power family, or the constant value.
    pub fn coefficient(&self) -> f64 {
        match *self {
            Self::Power { coeff, .. } => coeff,
            Self::Constant { value } => value,
        }
    }

    /// `f(x)`.
    pub fn latency(&self, x: f64) -> f64 {
        match *self {
            Self::Power { coeff, exponent } => coeff * powf(x, exponent),
            Self::Constant { value } => value,
        }
    }

    /// Variable cost `x f(x)`.
    pub fn variable_cost(&self, x: f64) -> f64 {
        x * self.latency(x)
    }

    /// Marginal variable cost `g(z) = f(z) + z f'(z)`, the derivative of `z f(z)`.
    pub fn marginal(&self, z: f64) -> Result<f64> {
        if z.is_nan() || z < 0.0 {
            return Err(Error::Domain(format!("marginal needs z >= 0, got {z}")));
        }
        match *self {
            Self::Power { coeff, exponent } => Ok(coeff * (1.0 + exponent) * powf(z, exponent)),
            Self::Constant { .. } => Err(Error::ConstantFamily),
        }
    }

    /// Inverse marginal `g^{-1}(t)`, clamped to 0 for `t <= 0`.
    pub fn marginal_inverse(&self, t: f64) -> Result<f64> {
        match *self {
            Self::Power { coeff, exponent } => Ok(power_marginal_inverse(coeff, exponent, t)),
            Self::Constant { .. } => Err(Error::ConstantFamily),
        }
    }

    /// Marginal at 1; the largest value `g` takes on the unit interval.
    pub(crate) fn marginal_at_one(&self) -> f64 {
        match *self {
            Self::Power { coeff, exponent } => coeff * (1.0 + exponent),
            Self::Constant { .. } => 0.0,
        }
    }

    /// `g^{-1}(t)` for non-constant families, without the error path.
    #[inline]
    pub(crate) fn inverse_unchecked(&self, t: f64) -> f64 {
        match *self {
            Self::Power { coeff, exponent } => power_marginal_inverse(coeff, exponent, t),
            Self::Constant { .. } => 0.0,
        }
    }
}

#[inline]
fn powf(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

#[inline]
fn power_marginal_inverse(coeff: f64, exponent: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let base = t / (coeff * (1.0 + exponent));
    if exponent == 1.0 {
        base
    } else if exponent == 2.0 {
        base.sqrt()
    } else {
        base.powf(exponent.recip())
    }
}

/// Inverts a strictly increasing marginal with `g(0) = 0` by bracketing
/// bisection on `[0, upper]`, doubling `upper` until `g(upper) >= t`.
///
/// Returns 0 for `t <= 0`. Used for families without a closed-form inverse.
pub fn invert_marginal_by_bisection<G>(g: G, t: f64) -> f64
where
    G: Fn(f64) -> f64,
{
    if t <= 0.0 {
        return 0.0;
    }
    bisect_increasing(g, t, 0.0, 1.0, MARGINAL_INVERSE_TOL)
}

/// One distinct resource type and the number of identical copies available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceGroup {
    pub fixed_cost: f64,
    pub latency: LatencyFamily,
    pub multiplicity: usize,
}

impl ResourceGroup {
    pub fn new(fixed_cost: f64, latency: LatencyFamily, multiplicity: usize) -> Result<Self> {
        if !(fixed_cost.is_finite() && fixed_cost >= 0.0) {
            return Err(Error::InvalidInstance(format!("fixed cost must be nonnegative and finite, got {fixed_cost}")));
        }
        if multiplicity == 0 {
            return Err(Error::InvalidInstance("multiplicity must be at least 1".into()));
        }
        Ok(Self { fixed_cost, latency, multiplicity })
    }

    /// A single linear-latency resource `(c, b x)`.
    pub fn linear(fixed_cost: f64, coeff: f64) -> Result<Self> {
        Self::new(fixed_cost, LatencyFamily::linear(coeff)?, 1)
    }

    fn is_copy_of(&self, other: &ResourceGroup) -> bool {
        self.fixed_cost == other.fixed_cost && self.latency == other.latency
    }
}

/// Cost of one resource carrying fraction `x`: 0 when idle, `c + x f(x)` otherwise.
pub fn gamma(group: &ResourceGroup, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("usage level must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        Ok(0.0)
    } else {
        Ok(group.fixed_cost + group.latency.variable_cost(x))
    }
}

/// A problem instance: resource groups in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    groups: Vec<ResourceGroup>,
    offsets: Vec<usize>,
    copy_group: Vec<usize>,
    shared_exponent: Option<f64>,
}

impl Instance {
    /// Builds an instance, merging groups that are identical copies of each
    /// other. Merged groups keep the position of their first occurrence.
    pub fn new(groups: Vec<ResourceGroup>) -> Result<Self> {
        let mut merged: Vec<ResourceGroup> = Vec::with_capacity(groups.len());
        for g in groups {
            if !(g.fixed_cost.is_finite() && g.fixed_cost >= 0.0) || g.multiplicity == 0 {
                return Err(Error::InvalidInstance(format!("malformed group {g:?}")));
            }
            // Re-validate the latency family in case it was built by hand.
            match g.latency {
                LatencyFamily::Power { coeff, exponent } => {
                    LatencyFamily::power(coeff, exponent)?;
                }
                LatencyFamily::Constant { value } => {
                    LatencyFamily::constant(value)?;
                }
            }
            match merged.iter_mut().find(|m| m.is_copy_of(&g)) {
                Some(m) => m.multiplicity += g.multiplicity,
                None => merged.push(g),
            }
        }
        if merged.is_empty() {
            return Err(Error::InvalidInstance("an instance needs at least one resource".into()));
        }

        let mut offsets = Vec::with_capacity(merged.len() + 1);
        let mut copy_group = Vec::new();
        offsets.push(0);
        for (i, g) in merged.iter().enumerate() {
            copy_group.extend(std::iter::repeat_n(i, g.multiplicity));
            offsets.push(copy_group.len());
        }

        let first = merged[0].latency.exponent();
        let shared_exponent = match first {
            Some(p) if merged.iter().all(|g| g.latency.exponent() == Some(p)) => Some(p),
            _ => None,
        };

        Ok(Self { groups: merged, offsets, copy_group, shared_exponent })
    }

    pub fn groups(&self) -> &[ResourceGroup] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> &ResourceGroup {
        &self.groups[g]
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Number of expanded resources (copies).
    pub fn q(&self) -> usize {
        self.copy_group.len()
    }

    /// Exponent shared by every group, when all groups are power families
    /// with the same exponent.
    pub fn shared_exponent(&self) -> Option<f64> {
        self.shared_exponent
    }

    pub fn group_of(&self, copy: usize) -> usize {
        self.copy_group[copy]
    }

    /// Index range of the copies of group `g`.
    pub fn copies_of(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.multiplicity).collect()
    }

    pub fn fixed_cost(&self, copy: usize) -> f64 {
        self.groups[self.copy_group[copy]].fixed_cost
    }

    pub fn latency(&self, copy: usize) -> &LatencyFamily {
        &self.groups[self.copy_group[copy]].latency
    }

    pub fn all_constant(&self) -> bool {
        self.groups.iter().all(|g| g.latency.is_constant())
    }

    pub fn any_constant(&self) -> bool {
        self.groups.iter().any(|g| g.latency.is_constant())
    }

    /// Converts a copy set to per-group counts. Fails on duplicates or
    /// out-of-range indices.
    pub fn counts_of(&self, copies: &[usize]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.q()];
        let mut counts = vec![0; self.num_groups()];
        for &c in copies {
            if c >= self.q() {
                return Err(Error::Domain(format!("copy index {c} out of range (q = {})", self.q())));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::Domain(format!("copy index {c} listed twice")));
            }
            counts[self.copy_group[c]] += 1;
        }
        Ok(counts)
    }

    /// Objective value of a fraction vector indexed by copy.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.q() {
            return Err(Error::Domain(format!("fraction vector has length {}, expected {}", x.len(), self.q())));
        }
        x.iter().enumerate().map(|(i, &xi)| gamma(self.group(self.group_of(i)), xi)).sum()
    }
}

/// A feasible solution: active copies, fractions and objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Sorted copy indices with positive load.
    pub active: Vec<usize>,
    /// Fraction carried by each copy, indexed by copy.
    pub x: Vec<f64>,
    pub value: f64,
}

impl Allocation {
    /// Builds the canonical allocation that activates the first `counts[g]`
    /// copies of every group `g` at level `levels[g]`.
    pub fn from_group_levels(instance: &Instance, counts: &[usize], levels: &[f64]) -> Self {
        let mut x = vec![0.0; instance.q()];
        let mut active = Vec::new();
        let mut value = 0.0;
        for (g, group) in instance.groups().iter().enumerate() {
            let n = counts[g];
            if n == 0 {
                continue;
            }
            let level = levels[g];
            for copy in instance.copies_of(g).take(n) {
                x[copy] = level;
                active.push(copy);
            }
            value += n as f64 * (group.fixed_cost + group.latency.variable_cost(level));
        }
        Self { active, x, value }
    }

    /// Number of active copies per group.
    pub fn active_counts(&self, instance: &Instance) -> Vec<usize> {
        let mut counts = vec![0; instance.num_groups()];
        for &c in &self.active {
            counts[instance.group_of(c)] += 1;
        }
        counts
    }

    /// Checks the partition constraint, the support/fraction consistency and
    /// the stored value against a fresh evaluation.
    pub fn check(&self, instance: &Instance) -> std::result::Result<(), String> {
        if self.x.len() != instance.q() {
            return Err(format!("x has length {}, expected {}", self.x.len(), instance.q()));
        }
        let total: f64 = self.x.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("fractions sum to {total}, expected 1"));
        }
        let mut in_active = vec![false; instance.q()];
        for &a in &self.active {
            in_active[a] = true;
        }
        for (i, &xi) in self.x.iter().enumerate() {
            if !(0.0..=1.0).contains(&xi) {
                return Err(format!("x[{i}] = {xi} outside [0, 1]"));
            }
            if (xi > 0.0) != in_active[i] {
                return Err(format!("copy {i}: x = {xi} but active = {}", in_active[i]));
            }
        }
        let fresh = instance.evaluate(&self.x).map_err(|e| e.to_string())?;
        if (fresh - self.value).abs() > 1e-9 * fresh.abs().max(1.0) {
            return Err(format!("stored value {} differs from evaluated {fresh}", self.value));
        }
        Ok(())
    }
}
