//! Exact branch-and-bound.
//!
//! Nodes fix copies ON or OFF by group and count, never by copy identity.
//! In n-ary mode a branching step decides, for the free copies of one group,
//! how many of them are ON; n free copies give n+1 children. Binary mode
//! branches on one copy at a time and therefore revisits every count through
//! all of its copy orderings, which is what n-ary branching avoids. Every
//! node is bounded by the continuous relaxation and the search is
//! depth-first.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::heuristic::{primal_heuristic_with, HeuristicOptions};
use crate::kkt::{restricted_allocation, solve_constant_latency, solve_restricted_groups};
use crate::model::{Allocation, Instance};
use crate::relax::node_relaxation;

/// Relative pruning tolerance: a node is discarded when its bound is within
/// `PRUNE_TOL * max(1, |incumbent|)` of the incumbent or above it.
pub const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Branching {
    /// One child per possible count of ON copies in the branching group.
    #[default]
    NAry,
    /// One copy at a time, ON child first.
    Binary,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub branching: Branching,
    /// Stop once this many nodes have been created.
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Record one [`TraceEntry`] per evaluated node.
    pub trace: bool,
    pub heuristic: HeuristicOptions,
}

/// A subproblem: per group, how many copies are fixed ON and OFF.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    pub on_counts: Vec<usize>,
    pub off_counts: Vec<usize>,
    /// Bound inherited from the parent until the node is evaluated.
    pub lower_bound: f64,
    pub depth: usize,
}

impl BnbNode {
    pub fn root(instance: &Instance) -> Self {
        let ng = instance.num_groups();
        Self { on_counts: vec![0; ng], off_counts: vec![0; ng], lower_bound: f64::NEG_INFINITY, depth: 0 }
    }

    pub fn free_count(&self, instance: &Instance, g: usize) -> usize {
        instance.group(g).multiplicity - self.on_counts[g] - self.off_counts[g]
    }

    /// True when every copy is fixed OFF.
    pub fn is_empty(&self, instance: &Instance) -> bool {
        (0..instance.num_groups()).all(|g| self.off_counts[g] == instance.group(g).multiplicity)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Nodes created, root included.
    pub nodes: u64,
    /// Relaxation bounds computed.
    pub bound_evals: u64,
    /// Times the incumbent improved after the heuristic.
    pub incumbent_updates: u64,
    pub max_depth: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub depth: usize,
    pub bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Best allocation found; optimal when `status` is `Optimal`.
    pub allocation: Allocation,
    pub status: SolveStatus,
    pub stats: SolveStats,
    /// Value of the heuristic solution used as the first incumbent.
    pub heuristic_value: f64,
    /// Relaxation bound at the root.
    pub root_bound: f64,
    pub trace: Vec<TraceEntry>,
}

/// Children of `node`, in the order the search explores them.
///
/// The branching group is the one with the largest fixed cost among groups
/// with free copies (lowest index on ties). With `n` free copies, n-ary mode
/// returns the children with `l = n, n-1, .., 0` of them ON and the rest OFF;
/// binary mode returns the single-copy ON child, then the OFF child.
pub fn branch_children(node: &BnbNode, instance: &Instance, branching: Branching) -> Vec<BnbNode> {
    let mut pick: Option<(usize, f64)> = None;
    for (g, group) in instance.groups().iter().enumerate() {
        if node.free_count(instance, g) > 0 && pick.is_none_or(|(_, c)| group.fixed_cost > c) {
            pick = Some((g, group.fixed_cost));
        }
    }
    let Some((g, _)) = pick else {
        return Vec::new();
    };
    let free = node.free_count(instance, g);
    let child = |on: usize, off: usize| {
        let mut c = node.clone();
        c.on_counts[g] += on;
        c.off_counts[g] += off;
        c.depth += 1;
        c
    };
    match branching {
        Branching::NAry => (0..=free).rev().map(|l| child(l, free - l)).collect(),
        Branching::Binary => vec![child(1, 0), child(0, 1)],
    }
}

/// Solves an instance to optimality, or until a limit is hit.
///
/// Instances with only constant latencies are solved directly; mixing
/// constant and non-constant families is an error.
pub fn solve(instance: &Instance, options: &SolveOptions) -> Result<Solution> {
    let start = Instant::now();
    if instance.all_constant() {
        let allocation = solve_constant_latency(instance)?;
        let value = allocation.value;
        let stats = SolveStats { nodes: 1, bound_evals: 1, wall_time: start.elapsed(), ..Default::default() };
        return Ok(Solution {
            allocation,
            status: SolveStatus::Optimal,
            stats,
            heuristic_value: value,
            root_bound: value,
            trace: Vec::new(),
        });
    }
    if instance.any_constant() {
        return Err(Error::ConstantFamily);
    }

    let heuristic = primal_heuristic_with(instance, &options.heuristic)?;
    let heuristic_value = heuristic.allocation.value;
    let mut search = Search {
        instance,
        options,
        start,
        incumbent: heuristic.allocation,
        stats: SolveStats::default(),
        trace: Vec::new(),
    };
    let (status, root_bound) = search.run()?;
    search.stats.wall_time = start.elapsed();
    Ok(Solution {
        allocation: search.incumbent,
        status,
        stats: search.stats,
        heuristic_value,
        root_bound,
        trace: search.trace,
    })
}

struct Search<'a> {
    instance: &'a Instance,
    options: &'a SolveOptions,
    start: Instant,
    incumbent: Allocation,
    stats: SolveStats,
    trace: Vec<TraceEntry>,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        let z = self.incumbent.value;
        z - PRUNE_TOL * z.abs().max(1.0)
    }

    fn run(&mut self) -> Result<(SolveStatus, f64)> {
        let instance = self.instance;
        let mut stack = vec![BnbNode::root(instance)];
        self.stats.nodes = 1;
        let mut root_bound = None;

        while let Some(mut node) = stack.pop() {
            if let Some(limit) = self.options.time_limit {
                if self.start.elapsed() >= limit {
                    return Ok((SolveStatus::TimeLimit, root_bound.unwrap_or(f64::NEG_INFINITY)));
                }
            }
            // parent bound may already be beaten by a newer incumbent
            if node.lower_bound >= self.cutoff() || node.is_empty(instance) {
                continue;
            }

            let relax = node_relaxation(instance, &node.on_counts, &node.off_counts)?;
            self.stats.bound_evals += 1;
            node.lower_bound = relax.bound;
            root_bound.get_or_insert(relax.bound);
            self.stats.max_depth = self.stats.max_depth.max(node.depth);
            if self.options.trace {
                self.trace.push(TraceEntry { depth: node.depth, bound: relax.bound, incumbent: self.incumbent.value });
            }
            if relax.bound >= self.cutoff() {
                continue;
            }

            // The relaxation support is a feasible activation: evaluate it exactly.
            let support: Vec<usize> = (0..instance.num_groups())
                .map(|g| {
                    let free = node.free_count(instance, g);
                    node.on_counts[g] + if relax.free_levels[g] > 0.0 { free } else { 0 }
                })
                .collect();
            let z = solve_restricted_groups(instance, &support)?.value;
            if z < self.incumbent.value {
                self.incumbent = restricted_allocation(instance, &support)?;
                self.stats.incumbent_updates += 1;
            }
            if relax.is_integral((0..instance.num_groups()).map(|g| node.free_count(instance, g))) {
                continue;
            }

            let children = branch_children(&node, instance, self.options.branching);
            if let Some(limit) = self.options.node_limit {
                if self.stats.nodes + children.len() as u64 > limit {
                    return Ok((SolveStatus::NodeLimit, root_bound.unwrap_or(f64::NEG_INFINITY)));
                }
            }
            self.stats.nodes += children.len() as u64;
            stack.extend(children.into_iter().rev());
        }
        Ok((SolveStatus::Optimal, root_bound.unwrap_or(self.incumbent.value)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatencyFamily, ResourceGroup};
    use crate::oracle::brute_force_optimum;

    fn lin(c: f64, b: f64) -> ResourceGroup {
        ResourceGroup::linear(c, b).unwrap()
    }

    fn group(c: f64, b: f64, n: usize) -> ResourceGroup {
        ResourceGroup::new(c, LatencyFamily::linear(b).unwrap(), n).unwrap()
    }

    #[test]
    fn three_resource_optimum() {
        let inst = Instance::new(vec![lin(3.0, 1.0), lin(2.0, 2.0), lin(1.0, 3.0)]).unwrap();
        let s = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.allocation.value - 4.0).abs() < 1e-12);
        assert!(s.allocation.check(&inst).is_ok());
        assert!(s.stats.nodes >= s.stats.bound_evals && s.stats.bound_evals >= 1);
    }

    #[test]
    fn partition_yes_instance() {
        let w = [2.0, 3.0, 5.0, 4.0];
        let groups = w.iter().map(|&x| lin(x, 14.0 * 14.0 / (4.0 * x))).collect();
        let inst = Instance::new(groups).unwrap();
        let s = solve(&inst, &SolveOptions::default()).unwrap();
        assert!((s.allocation.value - 14.0).abs() < 1e-9 * 14.0);
        let weight: f64 = s.allocation.active.iter().map(|&c| w[c]).sum();
        assert_eq!(weight, 7.0);
    }

    #[test]
    fn zero_cost_group_uses_all_copies() {
        let inst = Instance::new(vec![group(0.0, 2.0, 5)]).unwrap();
        let s = solve(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(s.allocation.active.len(), 5);
        assert!((s.allocation.value - 2.0 / 5.0).abs() < 1e-14);
    }

    #[test]
    fn nary_children() {
        let inst = Instance::new(vec![group(1.0, 1.0, 2), group(5.0, 1.0, 3)]).unwrap();
        let root = BnbNode::root(&inst);
        let kids = branch_children(&root, &inst, Branching::NAry);
        let got: Vec<(usize, usize)> = kids.iter().map(|k| (k.on_counts[1], k.off_counts[1])).collect();
        assert_eq!(got, vec![(3, 0), (2, 1), (1, 2), (0, 3)]);
        assert!(kids.iter().all(|k| k.depth == 1 && k.on_counts[0] == 0 && k.off_counts[0] == 0));

        let kids = branch_children(&kids[3], &inst, Branching::NAry);
        assert_eq!(kids.len(), 3);
        assert_eq!((kids[0].on_counts[0], kids[0].off_counts[0]), (2, 0));

        let bin = branch_children(&root, &inst, Branching::Binary);
        let got: Vec<(usize, usize)> = bin.iter().map(|k| (k.on_counts[1], k.off_counts[1])).collect();
        assert_eq!(got, vec![(1, 0), (0, 1)]);
    }

    #[test]
    fn single_free_copy_is_binary() {
        let inst = Instance::new(vec![lin(2.0, 1.0), lin(1.0, 1.5)]).unwrap();
        let root = BnbNode::root(&inst);
        assert_eq!(branch_children(&root, &inst, Branching::NAry), branch_children(&root, &inst, Branching::Binary));
    }

    #[test]
    fn ties_branch_on_lowest_group() {
        let inst = Instance::new(vec![lin(2.0, 1.0), lin(2.0, 3.0)]).unwrap();
        let kids = branch_children(&BnbNode::root(&inst), &inst, Branching::NAry);
        assert_eq!(kids[0].on_counts, vec![1, 0]);
    }

    #[test]
    fn leaf_has_no_children() {
        let inst = Instance::new(vec![lin(2.0, 1.0)]).unwrap();
        let mut node = BnbNode::root(&inst);
        node.on_counts[0] = 1;
        assert!(branch_children(&node, &inst, Branching::NAry).is_empty());
    }

    #[test]
    fn trace_and_modes_agree_without_repeats() {
        let inst =
            Instance::new(vec![lin(9.0, 1.0), lin(7.0, 4.0), lin(5.0, 6.0), lin(3.0, 9.0), lin(1.0, 12.0)]).unwrap();
        let opts = |branching| SolveOptions { branching, trace: true, ..Default::default() };
        let a = solve(&inst, &opts(Branching::NAry)).unwrap();
        let b = solve(&inst, &opts(Branching::Binary)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.stats.nodes, b.stats.nodes);
        assert_eq!(a.trace.len() as u64, a.stats.bound_evals);
    }

    #[test]
    fn repeated_resources_need_fewer_nodes_in_nary_mode() {
        let inst = Instance::new(vec![group(20.0, 1.0, 4), group(10.0, 8.0, 3), group(2.0, 30.0, 2)]).unwrap();
        let nary = solve(&inst, &SolveOptions::default()).unwrap();
        let binary = solve(&inst, &SolveOptions { branching: Branching::Binary, ..Default::default() }).unwrap();
        assert!((nary.allocation.value - binary.allocation.value).abs() < 1e-12);
        assert!(nary.stats.nodes < binary.stats.nodes, "{} vs {}", nary.stats.nodes, binary.stats.nodes);
    }

    #[test]
    fn node_limit_is_reported() {
        let inst = Instance::new((1..=12).map(|i| lin((13 - i) as f64, i as f64)).collect()).unwrap();
        let opts = SolveOptions { node_limit: Some(3), ..Default::default() };
        let s = solve(&inst, &opts).unwrap();
        assert_eq!(s.status, SolveStatus::NodeLimit);
        assert!(s.stats.nodes <= 3);
        assert!(s.allocation.check(&inst).is_ok());
    }

    #[test]
    fn time_limit_is_reported() {
        let inst = Instance::new((1..=12).map(|i| lin((13 - i) as f64, i as f64)).collect()).unwrap();
        let opts = SolveOptions { time_limit: Some(Duration::ZERO), ..Default::default() };
        assert_eq!(solve(&inst, &opts).unwrap().status, SolveStatus::TimeLimit);
    }

    #[test]
    fn deterministic() {
        let inst = Instance::new(vec![group(20.0, 1.0, 3), group(11.0, 9.0, 2), group(4.0, 17.0, 4)]).unwrap();
        let opts = SolveOptions { trace: true, ..Default::default() };
        let a = solve(&inst, &opts).unwrap();
        let b = solve(&inst, &opts).unwrap();
        assert_eq!(a.allocation, b.allocation);
        assert_eq!(a.trace, b.trace);
        let strip = |s: &SolveStats| SolveStats { wall_time: Duration::ZERO, ..s.clone() };
        assert_eq!(strip(&a.stats), strip(&b.stats));
    }

    #[test]
    fn constant_instances_use_fast_path() {
        let c = |c: f64, f: f64| ResourceGroup::new(c, LatencyFamily::constant(f).unwrap(), 1).unwrap();
        let inst = Instance::new(vec![c(3.0, 1.0), c(1.0, 2.0)]).unwrap();
        assert_eq!(solve(&inst, &SolveOptions::default()).unwrap().allocation.value, 3.0);
    }

    /// Exhaustive optimum of the subproblem at `node`.
    fn node_optimum(inst: &Instance, node: &BnbNode) -> f64 {
        let ng = inst.num_groups();
        let mut best = f64::INFINITY;
        let mut counts = node.on_counts.clone();
        loop {
            if counts.iter().any(|&n| n > 0) {
                best = best.min(solve_restricted_groups(inst, &counts).unwrap().value);
            }
            let mut g = 0;
            loop {
                if g == ng {
                    return best;
                }
                if counts[g] < inst.group(g).multiplicity - node.off_counts[g] {
                    counts[g] += 1;
                    break;
                }
                counts[g] = node.on_counts[g];
                g += 1;
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = Instance> {
            (proptest::collection::vec((0u32..40, 1u32..40, 1usize..4), 1..6), prop_oneof![Just(1.0), Just(2.0)])
                .prop_map(|(rows, p)| {
                    let groups = rows
                        .iter()
                        .map(|&(c, b, n)| {
                            ResourceGroup::new(c as f64, LatencyFamily::power(b as f64, p).unwrap(), n).unwrap()
                        })
                        .collect();
                    Instance::new(groups).unwrap()
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn matches_brute_force(inst in instance()) {
                let z = brute_force_optimum(&inst).unwrap().value;
                for branching in [Branching::NAry, Branching::Binary] {
                    let s = solve(&inst, &SolveOptions { branching, ..Default::default() }).unwrap();
                    prop_assert!((s.allocation.value - z).abs() <= 1e-9 * z.abs().max(1.0));
                    prop_assert!(s.root_bound <= z + 1e-9 * z.abs().max(1.0));
                    prop_assert!(s.heuristic_value >= z - 1e-9 * z.abs().max(1.0));
                    prop_assert!(s.allocation.check(&inst).is_ok());
                    if branching == Branching::NAry {
                        prop_assert!(s.stats.max_depth <= inst.num_groups());
                    }
                }
            }

            #[test]
            fn every_node_bound_is_valid(inst in instance(), path in proptest::collection::vec(0usize..8, 0..6)) {
                // Walk a random root-to-leaf path and compare each node's bound
                // with the exact optimum of its subproblem.
                let z = brute_force_optimum(&inst).unwrap().value;
                let mut node = BnbNode::root(&inst);
                let root = node_relaxation(&inst, &node.on_counts, &node.off_counts).unwrap();
                prop_assert!(root.bound <= z + 1e-9 * z.max(1.0));
                for k in path {
                    let kids = branch_children(&node, &inst, Branching::NAry);
                    if kids.is_empty() { break; }
                    node = kids[k % kids.len()].clone();
                    if node.is_empty(&inst) { break; }
                    let r = node_relaxation(&inst, &node.on_counts, &node.off_counts).unwrap();
                    let best = node_optimum(&inst, &node);
                    prop_assert!(r.bound <= best + 1e-9 * best.max(1.0), "bound {} > node optimum {}", r.bound, best);
                }
            }
        }
    }
}
