//! Convex solves with the active set fixed, and the easy special cases:
//! identical resources and constant latencies.

use crate::error::{Error, Result};
use crate::model::{Allocation, Instance, LatencyFamily};
use crate::numeric::bisect_increasing;

/// Optimal loads for a fixed active set.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedResult {
    /// Fraction per member of the active set, in the order it was given.
    pub x: Vec<f64>,
    /// Common marginal cost `g_i(x_i)` of the active copies.
    pub lambda: f64,
    /// `z(S)`: fixed costs of `S` plus the minimal variable cost.
    pub value: f64,
}

/// Optimal loads for an active set given as per-group counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRestricted {
    /// Load of each active copy of group `g`; 0 for groups with no active copy.
    pub levels: Vec<f64>,
    pub lambda: f64,
    pub value: f64,
}

/// Solves `z(S)` for the copy set `S`.
///
/// Power families with a common exponent use the closed form; mixed
/// exponents fall back to bisection on the common marginal.
pub fn solve_restricted(instance: &Instance, set: &[usize]) -> Result<RestrictedResult> {
    let counts = instance.counts_of(set)?;
    let sol = solve_restricted_groups(instance, &counts)?;
    Ok(RestrictedResult {
        x: set.iter().map(|&c| sol.levels[instance.group_of(c)]).collect(),
        lambda: sol.lambda,
        value: sol.value,
    })
}

/// [`solve_restricted`] on per-group active counts.
pub fn solve_restricted_groups(instance: &Instance, counts: &[usize]) -> Result<GroupRestricted> {
    if counts.len() != instance.num_groups() {
        return Err(Error::Domain("count vector length differs from group count".into()));
    }
    let mut size = 0usize;
    let mut exponent: Option<f64> = None;
    let mut shared = true;
    for (g, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let group = instance.group(g);
        if n > group.multiplicity {
            return Err(Error::Domain(format!(
                "group {g}: {n} active copies exceed multiplicity {}",
                group.multiplicity
            )));
        }
        let p = group.latency.exponent().ok_or(Error::ConstantFamily)?;
        match exponent {
            None => exponent = Some(p),
            Some(e) if e != p => shared = false,
            _ => {}
        }
        size += n;
    }
    let Some(p) = exponent else {
        return Err(Error::EmptySet);
    };

    let groups = instance.groups();
    let mut levels = vec![0.0; counts.len()];
    let lambda = if shared {
        // lambda = (1 / sum (b_i (1+p))^{-1/p})^p
        let inv_p = p.recip();
        let denom: f64 =
            active(counts).map(|(g, n)| n as f64 * (groups[g].latency.coefficient() * (1.0 + p)).powf(-inv_p)).sum();
        let lambda = denom.recip().powf(p);
        for (g, _) in active(counts) {
            levels[g] = (lambda / (groups[g].latency.coefficient() * (1.0 + p))).powf(inv_p).min(1.0);
        }
        lambda
    } else {
        let g_max = active(counts).map(|(g, _)| groups[g].latency.marginal_at_one()).fold(0.0, f64::max);
        let load = |lambda: f64| -> f64 {
            active(counts).map(|(g, n)| n as f64 * groups[g].latency.inverse_unchecked(lambda)).sum()
        };
        let lambda = bisect_increasing(load, 1.0, 0.0, g_max * size as f64, 0.0);
        for (g, _) in active(counts) {
            levels[g] = groups[g].latency.inverse_unchecked(lambda).min(1.0);
        }
        lambda
    };

    let variable: f64 = active(counts).map(|(g, n)| n as f64 * groups[g].latency.variable_cost(levels[g])).sum();
    let fixed: f64 = active(counts).map(|(g, n)| n as f64 * groups[g].fixed_cost).sum();
    Ok(GroupRestricted { levels, lambda, value: fixed + variable })
}

/// Canonical [`Allocation`] for an active set given as per-group counts.
pub fn restricted_allocation(instance: &Instance, counts: &[usize]) -> Result<Allocation> {
    let sol = solve_restricted_groups(instance, counts)?;
    let mut alloc = Allocation::from_group_levels(instance, counts, &sol.levels);
    alloc.value = sol.value;
    Ok(alloc)
}

fn active(counts: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    counts.iter().copied().enumerate().filter(|&(_, n)| n > 0)
}

/// Cost of spreading the demand evenly over `k` identical resources:
/// `F(k) = f(1/k) + k c`.
pub fn identical_cost(fixed_cost: f64, family: &LatencyFamily, k: usize) -> f64 {
    family.latency(1.0 / k as f64) + k as f64 * fixed_cost
}

/// Optimal number of active resources when all `q` resources are identical.
///
/// `F` is discretely convex, so the first `k` with `F(k+1) - F(k) >= 0` is a
/// minimizer; it is found by binary search on the sign of the first
/// difference. Ties resolve to the smaller `k`. Returns `(k*, F(k*))`.
pub fn solve_identical(fixed_cost: f64, family: &LatencyFamily, q: usize) -> Result<(usize, f64)> {
    if family.is_constant() {
        return Err(Error::ConstantFamily);
    }
    if !(fixed_cost.is_finite() && fixed_cost >= 0.0) {
        return Err(Error::Domain(format!("fixed cost must be nonnegative, got {fixed_cost}")));
    }
    if q == 0 {
        return Err(Error::Domain("need at least one resource".into()));
    }
    let f = |k: usize| identical_cost(fixed_cost, family, k);
    let (mut lo, mut hi) = (1usize, q);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if f(mid + 1) - f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((lo, f(lo)))
}

/// With constant latencies the whole demand goes to the copy minimizing
/// `c_i + f_i`; ties go to the lowest group, then the lowest copy.
pub fn solve_constant_latency(instance: &Instance) -> Result<Allocation> {
    if !instance.all_constant() {
        return Err(Error::Domain("constant-latency solve needs every family to be constant".into()));
    }
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (g, group) in instance.groups().iter().enumerate() {
        let cost = group.fixed_cost + group.latency.coefficient();
        if cost < best_cost {
            best = g;
            best_cost = cost;
        }
    }
    let mut counts = vec![0; instance.num_groups()];
    counts[best] = 1;
    let mut levels = vec![0.0; instance.num_groups()];
    levels[best] = 1.0;
    Ok(Allocation::from_group_levels(instance, &counts, &levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ResourceGroup;
    use crate::oracle::numeric_relaxation;

    fn lin(c: f64, b: f64) -> ResourceGroup {
        ResourceGroup::linear(c, b).unwrap()
    }

    fn pow(c: f64, b: f64, p: f64, n: usize) -> ResourceGroup {
        ResourceGroup::new(c, LatencyFamily::power(b, p).unwrap(), n).unwrap()
    }

    fn assert_stationary(inst: &Instance, set: &[usize], r: &RestrictedResult) {
        let sum: f64 = r.x.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9, "sum = {sum}");
        for (&c, &x) in set.iter().zip(&r.x) {
            let g = inst.latency(c).marginal(x).unwrap();
            assert!((g - r.lambda).abs() <= 1e-8, "g = {g}, lambda = {}", r.lambda);
        }
    }

    #[test]
    fn two_identical_linear_copies_split_evenly() {
        let inst = Instance::new(vec![pow(4.0, 1.0, 1.0, 2)]).unwrap();
        let r = solve_restricted(&inst, &[0, 1]).unwrap();
        assert_eq!(r.x, vec![0.5, 0.5]);
        assert!((r.lambda - 1.0).abs() < 1e-15);
        assert!((r.value - (8.0 + 0.5)).abs() < 1e-12);
        assert_stationary(&inst, &[0, 1], &r);
    }

    #[test]
    fn unequal_linear_pair() {
        let inst = Instance::new(vec![lin(0.0, 1.0), lin(0.0, 3.0)]).unwrap();
        let r = solve_restricted(&inst, &[0, 1]).unwrap();
        assert!((r.lambda - 1.5).abs() < 1e-14);
        assert!((r.x[0] - 0.75).abs() < 1e-14 && (r.x[1] - 0.25).abs() < 1e-14);
        assert!((r.value - 0.75).abs() < 1e-14);
        // independent check: projected gradient on the same convex program
        let pg = numeric_relaxation(&inst, &[0.0, 0.0]).unwrap();
        assert!((pg - 0.75).abs() < 1e-9);
        assert_stationary(&inst, &[0, 1], &r);
    }

    #[test]
    fn quadratic_pair() {
        let inst = Instance::new(vec![pow(0.0, 2.0, 2.0, 2)]).unwrap();
        let r = solve_restricted(&inst, &[0, 1]).unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-14);
        assert!((r.lambda - 1.5).abs() < 1e-14);
        let pg = numeric_relaxation(&inst, &[0.0, 0.0]).unwrap();
        assert!((pg - r.value).abs() < 1e-9);
    }

    #[test]
    fn subset_ordering_is_preserved() {
        let inst = Instance::new(vec![lin(1.0, 1.0), lin(1.0, 3.0), lin(1.0, 2.0)]).unwrap();
        let r = solve_restricted(&inst, &[1, 0]).unwrap();
        assert!((r.x[0] - 0.25).abs() < 1e-14 && (r.x[1] - 0.75).abs() < 1e-14);
        assert!((r.value - 2.75).abs() < 1e-14);
    }

    #[test]
    fn mixed_exponents_use_bisection() {
        let inst = Instance::new(vec![pow(1.0, 1.0, 1.0, 1), pow(2.0, 2.0, 2.0, 2), pow(0.5, 5.0, 3.0, 1)]).unwrap();
        let set = [0, 1, 2, 3];
        let r = solve_restricted(&inst, &set).unwrap();
        assert_stationary(&inst, &set, &r);
        let pg = numeric_relaxation(&inst, &[0.0; 4]).unwrap();
        assert!((r.value - 5.5 - pg).abs() < 1e-9, "{} vs {}", r.value - 5.5, pg);
    }

    #[test]
    fn restricted_errors() {
        let inst = Instance::new(vec![lin(1.0, 1.0), pow(1.0, 2.0, 1.0, 1)]).unwrap();
        assert!(matches!(solve_restricted(&inst, &[]), Err(Error::EmptySet)));
        assert!(solve_restricted(&inst, &[0, 0]).is_err());
        let c = Instance::new(vec![
            lin(1.0, 1.0),
            ResourceGroup::new(0.0, LatencyFamily::constant(1.0).unwrap(), 1).unwrap(),
        ])
        .unwrap();
        assert!(matches!(solve_restricted(&c, &[1]), Err(Error::ConstantFamily)));
        assert!(solve_restricted(&c, &[0]).is_ok());
    }

    #[test]
    fn partition_closed_form() {
        let w = [2.0, 3.0, 5.0, 4.0, 7.0];
        let total: f64 = w.iter().sum();
        let groups = w.iter().map(|&wi| lin(wi, total * total / (4.0 * wi))).collect();
        let inst = Instance::new(groups).unwrap();
        for mask in 1u32..(1 << w.len()) {
            let set: Vec<usize> = (0..w.len()).filter(|i| mask & (1 << i) != 0).collect();
            let s: f64 = set.iter().map(|&i| w[i]).sum();
            let expected = s + total * total / 4.0 / s;
            let got = solve_restricted(&inst, &set).unwrap().value;
            assert!((got - expected).abs() <= 1e-9 * expected, "mask {mask}");
        }
    }

    #[test]
    fn identical_examples() {
        let f = LatencyFamily::linear(1.0).unwrap();
        assert_eq!(solve_identical(0.0, &f, 8).unwrap().0, 8);
        let g = LatencyFamily::power(3.0, 2.0).unwrap();
        assert_eq!(solve_identical(0.0, &g, 8).unwrap().0, 8);

        let (k, v) = solve_identical(10.0, &f, 8).unwrap();
        assert_eq!((k, v), (1, 11.0));

        let (k, v) = solve_identical(0.02, &f, 10).unwrap();
        assert_eq!(k, 7);
        assert!((v - (1.0 / 7.0 + 0.14)).abs() < 1e-12);
        assert!((v - 0.282857).abs() < 1e-6);

        assert_eq!(solve_identical(5.0, &f, 1).unwrap(), (1, 6.0));
    }

    #[test]
    fn identical_tie_goes_to_fewer_copies() {
        // F(1) = 1 + c = F(2) = 0.5 + 2c at c = 0.5
        let f = LatencyFamily::linear(1.0).unwrap();
        assert_eq!(solve_identical(0.5, &f, 5).unwrap().0, 1);
    }

    #[test]
    fn identical_errors() {
        let f = LatencyFamily::linear(1.0).unwrap();
        assert!(solve_identical(1.0, &f, 0).is_err());
        assert!(solve_identical(-1.0, &f, 3).is_err());
        let c = LatencyFamily::constant(1.0).unwrap();
        assert!(matches!(solve_identical(1.0, &c, 3), Err(Error::ConstantFamily)));
    }

    #[test]
    fn identical_is_exhaustive_minimum() {
        for &(c, b, p, q) in &[
            (0.001, 1.0, 1.0, 10_000usize),
            (0.37, 20.0, 1.0, 500),
            (1e-4, 2.0, 2.0, 3000),
            (3.0, 50.0, 1.5, 64),
            (0.0, 1.0, 3.0, 100),
        ] {
            let f = LatencyFamily::power(b, p).unwrap();
            let (k, v) = solve_identical(c, &f, q).unwrap();
            for j in 1..=q {
                assert!(v <= identical_cost(c, &f, j), "c={c} b={b} p={p}: F({k}) > F({j})");
            }
        }
    }

    #[test]
    fn identical_cost_is_discretely_convex() {
        for &(c, b, p) in &[(0.01, 1.0, 1.0), (0.5, 7.0, 2.0), (2.0, 100.0, 1.3)] {
            let f = LatencyFamily::power(b, p).unwrap();
            let diffs: Vec<f64> = (1..200).map(|k| identical_cost(c, &f, k + 1) - identical_cost(c, &f, k)).collect();
            for w in diffs.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    fn constant(c: f64, f: f64) -> ResourceGroup {
        ResourceGroup::new(c, LatencyFamily::constant(f).unwrap(), 1).unwrap()
    }

    #[test]
    fn constant_latency_examples() {
        let inst = Instance::new(vec![constant(3.0, 1.0), constant(1.0, 2.0)]).unwrap();
        let a = solve_constant_latency(&inst).unwrap();
        assert_eq!(a.active, vec![1]);
        assert_eq!(a.value, 3.0);

        let inst = Instance::new(vec![constant(0.0, 0.0)]).unwrap();
        let a = solve_constant_latency(&inst).unwrap();
        assert_eq!((a.x.clone(), a.value), (vec![1.0], 0.0));

        let inst = Instance::new(vec![constant(2.0, 2.0), constant(2.0, 2.0)]).unwrap();
        let a = solve_constant_latency(&inst).unwrap();
        assert_eq!(a.active, vec![0]);
        assert_eq!(a.value, 4.0);
        assert!(a.check(&inst).is_ok());
    }

    #[test]
    fn constant_latency_rejects_power() {
        let inst = Instance::new(vec![constant(3.0, 1.0), lin(1.0, 1.0)]).unwrap();
        assert!(solve_constant_latency(&inst).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn restricted_kkt_residuals(
                rows in proptest::collection::vec((0.0f64..50.0, 0.1f64..100.0, 1usize..4), 1..8),
                p in prop_oneof![Just(1.0), Just(2.0), 1.0f64..3.0],
            ) {
                let groups = rows.iter().map(|&(c, b, n)| pow(c, b, p, n)).collect();
                let inst = Instance::new(groups).unwrap();
                let set: Vec<usize> = (0..inst.q()).collect();
                let r = solve_restricted(&inst, &set).unwrap();
                assert_stationary(&inst, &set, &r);
            }
        }
    }
}
