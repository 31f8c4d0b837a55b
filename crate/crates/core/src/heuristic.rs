//! Primal heuristic: start from the support of the continuous relaxation and
//! improve it by greedy removals and additions of single copies.

use crate::error::{Error, Result};
use crate::kkt::{restricted_allocation, solve_constant_latency, solve_restricted_groups};
use crate::model::{Allocation, Instance};
use crate::relax::node_relaxation;

/// How the copy to remove is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RemovalRule {
    /// Remove a copy of the active group with the largest fixed cost.
    #[default]
    MaxFixedCost,
    /// For power latencies: evaluate the argmax of `c`, of `c + b` and of
    /// `c + b^(1/(p+1))` and keep whichever removal gives the lowest cost.
    PowerCriteria,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HeuristicOptions {
    pub removal: RemovalRule,
}

/// Outcome of a heuristic run.
#[derive(Debug, Clone)]
pub struct HeuristicRun {
    pub allocation: Allocation,
    /// Value of the starting solution followed by the value after each accepted move.
    pub accepted: Vec<f64>,
    /// Number of remove/add rounds executed, including the final one without improvement.
    pub rounds: usize,
}

/// Runs the heuristic with the default removal rule.
pub fn primal_heuristic(instance: &Instance) -> Result<Allocation> {
    Ok(primal_heuristic_with(instance, &HeuristicOptions::default())?.allocation)
}

/// Runs the heuristic.
///
/// Instances whose latencies are all constant are solved exactly by the
/// constant-latency rule. Mixing constant and non-constant families is an
/// error.
pub fn primal_heuristic_with(instance: &Instance, options: &HeuristicOptions) -> Result<HeuristicRun> {
    if instance.all_constant() {
        let allocation = solve_constant_latency(instance)?;
        return Ok(HeuristicRun { accepted: vec![allocation.value], allocation, rounds: 0 });
    }
    if instance.any_constant() {
        return Err(Error::ConstantFamily);
    }

    let ng = instance.num_groups();
    let zeros = vec![0; ng];
    let root = node_relaxation(instance, &zeros, &zeros)?;
    let mut counts: Vec<usize> =
        (0..ng).map(|g| if root.free_levels[g] > 0.0 { instance.group(g).multiplicity } else { 0 }).collect();
    let mut current = solve_restricted_groups(instance, &counts)?.value;
    let mut accepted = vec![current];
    let mut rounds = 0;

    loop {
        rounds += 1;
        let mut improved = false;

        if counts.iter().sum::<usize>() > 1 {
            let mut best: Option<(usize, f64)> = None;
            for g in removal_candidates(instance, &counts, options.removal) {
                counts[g] -= 1;
                let z = solve_restricted_groups(instance, &counts)?.value;
                counts[g] += 1;
                if best.is_none_or(|(_, v)| z < v) {
                    best = Some((g, z));
                }
            }
            if let Some((g, z)) = best {
                if z < current {
                    counts[g] -= 1;
                    current = z;
                    accepted.push(z);
                    improved = true;
                }
            }
        }

        if let Some(g) = cheapest_inactive(instance, &counts) {
            counts[g] += 1;
            let z = solve_restricted_groups(instance, &counts)?.value;
            if z < current {
                current = z;
                accepted.push(z);
                improved = true;
            } else {
                counts[g] -= 1;
            }
        }

        if !improved {
            break;
        }
    }

    Ok(HeuristicRun { allocation: restricted_allocation(instance, &counts)?, accepted, rounds })
}

/// First group maximizing `key` among groups with an active copy.
fn argmax_active(instance: &Instance, counts: &[usize], key: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for g in (0..instance.num_groups()).filter(|&g| counts[g] > 0) {
        let k = key(g);
        if best.is_none_or(|(_, v)| k > v) {
            best = Some((g, k));
        }
    }
    best.map(|(g, _)| g)
}

fn removal_candidates(instance: &Instance, counts: &[usize], rule: RemovalRule) -> Vec<usize> {
    let c = |g: usize| instance.group(g).fixed_cost;
    let mut out: Vec<usize> = argmax_active(instance, counts, c).into_iter().collect();
    if rule == RemovalRule::PowerCriteria {
        let b = |g: usize| instance.group(g).latency.coefficient();
        let p = |g: usize| instance.group(g).latency.exponent().unwrap_or(1.0);
        let extra = [
            argmax_active(instance, counts, |g| c(g) + b(g)),
            argmax_active(instance, counts, |g| c(g) + b(g).powf((p(g) + 1.0).recip())),
        ];
        for g in extra.into_iter().flatten() {
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// First group minimizing the fixed cost among groups with an idle copy.
fn cheapest_inactive(instance: &Instance, counts: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (g, group) in instance.groups().iter().enumerate() {
        if counts[g] < group.multiplicity && best.is_none_or(|(_, v)| group.fixed_cost < v) {
            best = Some((g, group.fixed_cost));
        }
    }
    best.map(|(g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatencyFamily, ResourceGroup};
    use crate::oracle::brute_force_optimum;
    use crate::relax::continuous_relaxation_bound;

    fn lin(c: f64, b: f64) -> ResourceGroup {
        ResourceGroup::linear(c, b).unwrap()
    }

    #[test]
    fn three_resource_trace() {
        let inst = Instance::new(vec![lin(3.0, 1.0), lin(2.0, 2.0), lin(1.0, 3.0)]).unwrap();
        let run = primal_heuristic_with(&inst, &HeuristicOptions::default()).unwrap();
        assert_eq!(run.accepted.len(), 3);
        assert!((run.accepted[0] - (6.0 + 6.0 / 11.0)).abs() < 1e-12);
        assert!((run.accepted[1] - 4.2).abs() < 1e-12);
        assert!((run.accepted[2] - 4.0).abs() < 1e-12);
        assert_eq!(run.allocation.active, vec![2]);
        assert!((run.allocation.value - 4.0).abs() < 1e-12);
        assert!(run.allocation.check(&inst).is_ok());
    }

    #[test]
    fn single_resource() {
        let inst = Instance::new(vec![lin(4.0, 2.5)]).unwrap();
        let a = primal_heuristic(&inst).unwrap();
        assert_eq!(a.active, vec![0]);
        assert_eq!(a.value, 6.5);
    }

    #[test]
    fn identical_zero_cost_uses_every_copy() {
        let family = LatencyFamily::power(3.0, 2.0).unwrap();
        let inst = Instance::new(vec![ResourceGroup::new(0.0, family, 6).unwrap()]).unwrap();
        let a = primal_heuristic(&inst).unwrap();
        assert_eq!(a.active.len(), 6);
        assert!((a.value - family.latency(1.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn constant_instances_use_fast_path() {
        let c = |c: f64, f: f64| ResourceGroup::new(c, LatencyFamily::constant(f).unwrap(), 1).unwrap();
        let inst = Instance::new(vec![c(3.0, 1.0), c(1.0, 2.0)]).unwrap();
        assert_eq!(primal_heuristic(&inst).unwrap().value, 3.0);
        let mixed = Instance::new(vec![c(3.0, 1.0), lin(1.0, 2.0)]).unwrap();
        assert!(matches!(primal_heuristic(&mixed), Err(Error::ConstantFamily)));
    }

    #[test]
    fn power_criteria_never_worse_than_start() {
        let p = |c: f64, b: f64, n: usize| ResourceGroup::new(c, LatencyFamily::power(b, 2.0).unwrap(), n).unwrap();
        let inst = Instance::new(vec![p(9.0, 1.0, 2), p(6.0, 4.0, 1), p(2.0, 30.0, 3)]).unwrap();
        let opts = HeuristicOptions { removal: RemovalRule::PowerCriteria };
        let run = primal_heuristic_with(&inst, &opts).unwrap();
        assert!(run.allocation.value <= run.accepted[0]);
        assert!(run.allocation.value >= brute_force_optimum(&inst).unwrap().value - 1e-12);
        assert!(run.allocation.check(&inst).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(96))]

            #[test]
            fn sandwiched_and_monotone(
                rows in proptest::collection::vec((0u32..50, 1u32..50, 1usize..4), 1..6),
                power in any::<bool>(),
            ) {
                let groups: Vec<_> = rows
                    .iter()
                    .map(|&(c, b, n)| ResourceGroup::new(c as f64, LatencyFamily::power(b as f64, if power { 2.0 } else { 1.0 }).unwrap(), n).unwrap())
                    .collect();
                let inst = Instance::new(groups).unwrap();
                for removal in [RemovalRule::MaxFixedCost, RemovalRule::PowerCriteria] {
                    let run = primal_heuristic_with(&inst, &HeuristicOptions { removal }).unwrap();
                    let a = &run.allocation;
                    prop_assert!(a.check(&inst).is_ok());
                    let z = brute_force_optimum(&inst).unwrap().value;
                    let root = continuous_relaxation_bound(&inst, &[], &[]).unwrap().bound;
                    prop_assert!(a.value >= z - 1e-9 * z.max(1.0));
                    prop_assert!(a.value >= root - 1e-9 * root.max(1.0));
                    for w in run.accepted.windows(2) {
                        prop_assert!(w[1] < w[0]);
                    }
                    prop_assert!(run.accepted.len() <= 2 * inst.q() + 1);
                    prop_assert!((a.value - run.accepted.last().unwrap()).abs() <= 1e-12 * a.value.max(1.0));
                }
            }
        }
    }
}
