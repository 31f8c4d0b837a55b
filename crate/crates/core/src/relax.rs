//! Ordering Algorithm for the continuous (equivalently, Lagrangean)
//! relaxation.
//!
//! With multipliers `kappa`, the relaxed problem
//!
//! ```text
//! min  sum_i x_i f_i(x_i) + kappa_i x_i   s.t.  sum_i x_i = 1,  x >= 0
//! ```
//!
//! has an optimal level `lambda` such that the copies with `kappa_i < lambda`
//! carry `x_i = g_i^{-1}(lambda - kappa_i)` and all others carry nothing.
//! Sorting by `kappa` reduces the search for the support to a scan over the
//! sorted prefix. Setting `kappa = c` yields the continuous relaxation, whose
//! value is the best Lagrangean bound; at a branch-and-bound node the copies
//! fixed ON get `kappa = 0` and the copies fixed OFF are dropped.

use crate::error::{Error, Result};
use crate::model::{Instance, ResourceGroup};
use crate::numeric::bisect_increasing;

/// Tolerance of the strict side of the support window, `lambda > kappa_h`.
pub const WINDOW_TOL: f64 = 1e-12;

/// Optimal solution of the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct DualResult {
    /// Optimal level `lambda*`.
    pub lambda: f64,
    /// Sorted copy indices with positive load.
    pub support: Vec<usize>,
    /// Load per copy, indexed by copy.
    pub x: Vec<f64>,
    /// Relaxation value, including the fixed costs of copies fixed ON.
    pub bound: f64,
    /// Support size.
    pub h: usize,
}

/// A run of copies of one group sharing a multiplier.
#[derive(Debug, Clone, Copy)]
struct Block {
    kappa: f64,
    group: usize,
    count: usize,
    /// Caller-side tag used to map loads back.
    tag: usize,
}

#[derive(Debug, Clone, Copy)]
struct Level {
    lambda: f64,
    /// Number of leading sorted blocks that may carry load.
    prefix: usize,
}

#[inline]
fn window_tol(kappa: f64) -> f64 {
    WINDOW_TOL * kappa.abs().max(1.0)
}

/// Finds `lambda*` over blocks sorted by ascending `kappa`.
fn solve_level(blocks: &[Block], groups: &[ResourceGroup]) -> Level {
    let linear = blocks.iter().all(|b| groups[b.group].latency.exponent() == Some(1.0));
    if linear {
        solve_level_linear(blocks, groups)
    } else {
        solve_level_general(blocks, groups)
    }
}

/// Shared linear latency: `g_i^{-1}(t) = t / (2 b_i)`, so for a prefix the
/// level is `(1 + sum kappa_i / 2b_i) / sum 1 / 2b_i`, maintained by running
/// sums. Blocks with equal `kappa` are added together.
fn solve_level_linear(blocks: &[Block], groups: &[ResourceGroup]) -> Level {
    let mut slope = 0.0;
    let mut offset = 0.0;
    let mut prev: Option<Level> = None;
    let mut start = 0;
    while start < blocks.len() {
        let kappa = blocks[start].kappa;
        let mut end = start;
        while end < blocks.len() && blocks[end].kappa == kappa {
            let b = &blocks[end];
            let w = b.count as f64 / (2.0 * groups[b.group].latency.coefficient());
            slope += w;
            offset += w * b.kappa;
            end += 1;
        }
        let lambda = (1.0 + offset) / slope;
        if let Some(p) = prev {
            if lambda <= kappa + window_tol(kappa) {
                // The new level carries (numerically) nothing.
                return p;
            }
        }
        let level = Level { lambda, prefix: end };
        if end == blocks.len() || lambda <= blocks[end].kappa {
            return level;
        }
        prev = Some(level);
        start = end;
    }
    unreachable!("blocks are nonempty")
}

/// Any power exponents: binary search over the distinct `kappa` values for
/// the window `phi(kappa_j) < 1 <= phi(kappa_{j+1})`, where `phi` is the
/// total load at a given level, then bisection for `lambda` inside it.
fn solve_level_general(blocks: &[Block], groups: &[ResourceGroup]) -> Level {
    // starts of runs of equal kappa
    let mut starts = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        if i == 0 || b.kappa != blocks[i - 1].kappa {
            starts.push(i);
        }
    }
    let end_of = |j: usize| starts.get(j + 1).copied().unwrap_or(blocks.len());
    let load = |prefix: usize, lambda: f64| -> f64 {
        blocks[..prefix]
            .iter()
            .map(|b| b.count as f64 * groups[b.group].latency.inverse_unchecked(lambda - b.kappa))
            .sum()
    };

    // largest j with phi(kappa_j) < 1; phi(kappa_0) = 0
    let (mut lo, mut hi) = (0usize, starts.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        let kappa = blocks[starts[mid]].kappa;
        if load(starts[mid], kappa) < 1.0 {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }

    let mut j = lo;
    loop {
        let prefix = end_of(j);
        let kappa = blocks[starts[j]].kappa;
        let upper = if prefix < blocks.len() { blocks[prefix].kappa } else { kappa + 1.0 };
        let lambda = bisect_increasing(|l| load(prefix, l), 1.0, kappa, upper, 0.0);
        if j == 0 || lambda > kappa + window_tol(kappa) {
            return Level { lambda, prefix };
        }
        j -= 1;
    }
}

/// Loads and objective for a solved level. Returns per-block loads.
fn block_loads(blocks: &[Block], groups: &[ResourceGroup], level: Level) -> (Vec<f64>, f64) {
    let mut loads = vec![0.0; blocks.len()];
    let mut objective = 0.0;
    for (i, b) in blocks[..level.prefix].iter().enumerate() {
        let latency = &groups[b.group].latency;
        let x = latency.inverse_unchecked(level.lambda - b.kappa).min(1.0);
        loads[i] = x;
        objective += b.count as f64 * (latency.variable_cost(x) + b.kappa * x);
    }
    (loads, objective)
}

fn sort_blocks(blocks: &mut [Block]) {
    blocks.sort_by(|a, b| a.kappa.total_cmp(&b.kappa).then(a.group.cmp(&b.group)));
}

/// Ordering Algorithm over the copies in `available`, with one multiplier
/// per copy (indexed by copy; entries of unavailable copies are ignored).
pub fn ordering_algorithm(instance: &Instance, kappa: &[f64], available: &[usize]) -> Result<DualResult> {
    if kappa.len() != instance.q() {
        return Err(Error::Domain(format!("multiplier vector has length {}, expected {}", kappa.len(), instance.q())));
    }
    if available.is_empty() {
        return Err(Error::Infeasible);
    }
    instance.counts_of(available)?;
    for &c in available {
        if instance.latency(c).is_constant() {
            return Err(Error::ConstantFamily);
        }
        if !(kappa[c].is_finite() && kappa[c] >= 0.0) {
            return Err(Error::Domain(format!("multiplier of copy {c} is {}", kappa[c])));
        }
    }

    let mut order = available.to_vec();
    order.sort_by(|&a, &b| {
        kappa[a].total_cmp(&kappa[b]).then(instance.group_of(a).cmp(&instance.group_of(b))).then(a.cmp(&b))
    });

    // Merge runs of same-group, same-kappa copies. `tag` is the run start in `order`.
    let mut blocks: Vec<Block> = Vec::new();
    for (pos, &c) in order.iter().enumerate() {
        let g = instance.group_of(c);
        match blocks.last_mut() {
            Some(b) if b.group == g && b.kappa == kappa[c] => b.count += 1,
            _ => blocks.push(Block { kappa: kappa[c], group: g, count: 1, tag: pos }),
        }
    }

    let groups = instance.groups();
    let level = solve_level(&blocks, groups);
    let (loads, bound) = block_loads(&blocks, groups, level);

    let mut x = vec![0.0; instance.q()];
    for (b, &load) in blocks.iter().zip(&loads) {
        for &c in &order[b.tag..b.tag + b.count] {
            x[c] = load;
        }
    }
    let support: Vec<usize> = (0..instance.q()).filter(|&c| x[c] > 0.0).collect();
    Ok(DualResult { lambda: level.lambda, h: support.len(), support, x, bound })
}

/// Relaxation bound of the node with copies `on` fixed ON and `off` fixed OFF.
pub fn continuous_relaxation_bound(instance: &Instance, on: &[usize], off: &[usize]) -> Result<DualResult> {
    let on_counts = instance.counts_of(on)?;
    instance.counts_of(off)?;
    let mut state = vec![0u8; instance.q()];
    for &c in on {
        state[c] = 1;
    }
    for &c in off {
        if state[c] == 1 {
            return Err(Error::Domain(format!("copy {c} is fixed both ON and OFF")));
        }
        state[c] = 2;
    }
    let available: Vec<usize> = (0..instance.q()).filter(|&c| state[c] != 2).collect();
    if available.is_empty() {
        return Err(Error::Infeasible);
    }
    let kappa: Vec<f64> = (0..instance.q()).map(|c| if state[c] == 1 { 0.0 } else { instance.fixed_cost(c) }).collect();
    let mut result = ordering_algorithm(instance, &kappa, &available)?;
    result.bound += on_counts.iter().enumerate().map(|(g, &n)| n as f64 * instance.group(g).fixed_cost).sum::<f64>();
    Ok(result)
}

/// Relaxation of a node described by per-group counts.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRelaxation {
    pub lambda: f64,
    /// Load of each copy fixed ON, per group.
    pub on_levels: Vec<f64>,
    /// Load of each free copy, per group.
    pub free_levels: Vec<f64>,
    pub bound: f64,
}

impl NodeRelaxation {
    /// True when no free copy carries load: the relaxation is then solved by
    /// activating exactly the copies fixed ON.
    pub fn is_integral(&self, free_counts: impl IntoIterator<Item = usize>) -> bool {
        free_counts.into_iter().zip(&self.free_levels).all(|(n, &x)| n == 0 || x == 0.0)
    }
}

/// [`continuous_relaxation_bound`] on per-group ON/OFF counts.
pub fn node_relaxation(instance: &Instance, on_counts: &[usize], off_counts: &[usize]) -> Result<NodeRelaxation> {
    let ng = instance.num_groups();
    if on_counts.len() != ng || off_counts.len() != ng {
        return Err(Error::Domain("count vector length differs from group count".into()));
    }
    let groups = instance.groups();
    let mut blocks = Vec::with_capacity(2 * ng);
    let mut fixed = 0.0;
    for (g, group) in groups.iter().enumerate() {
        let (on, off) = (on_counts[g], off_counts[g]);
        if on + off > group.multiplicity {
            return Err(Error::Domain(format!("group {g}: ON + OFF exceeds multiplicity")));
        }
        let free = group.multiplicity - on - off;
        if on + free > 0 && group.latency.is_constant() {
            return Err(Error::ConstantFamily);
        }
        if on > 0 {
            blocks.push(Block { kappa: 0.0, group: g, count: on, tag: 2 * g });
            fixed += on as f64 * group.fixed_cost;
        }
        if free > 0 {
            blocks.push(Block { kappa: group.fixed_cost, group: g, count: free, tag: 2 * g + 1 });
        }
    }
    if blocks.is_empty() {
        return Err(Error::Infeasible);
    }
    sort_blocks(&mut blocks);
    let level = solve_level(&blocks, groups);
    let (loads, objective) = block_loads(&blocks, groups, level);
    let mut on_levels = vec![0.0; ng];
    let mut free_levels = vec![0.0; ng];
    for (b, &x) in blocks.iter().zip(&loads) {
        if b.tag % 2 == 0 {
            on_levels[b.tag / 2] = x;
        } else {
            free_levels[b.tag / 2] = x;
        }
    }
    Ok(NodeRelaxation { lambda: level.lambda, on_levels, free_levels, bound: objective + fixed })
}

/// Optimal activation variables of the Lagrangean subproblem:
/// `y_i = 1` iff `c_i < kappa_i`.
///
/// With the optimal multipliers `kappa = c` every `y_i` is 0, so the branch
/// and bound never evaluates this rule.
pub fn lagrangean_activation(instance: &Instance, kappa: &[f64]) -> Vec<bool> {
    (0..instance.q()).map(|c| instance.fixed_cost(c) < kappa[c]).collect()
}

/// Lagrangean bound `z_LRP(kappa)`: the relaxed convex value plus
/// `sum (c_i - kappa_i) y_i`.
pub fn lagrangean_bound(instance: &Instance, kappa: &[f64]) -> Result<f64> {
    let all: Vec<usize> = (0..instance.q()).collect();
    let relaxed = ordering_algorithm(instance, kappa, &all)?;
    let activation: f64 = lagrangean_activation(instance, kappa)
        .iter()
        .enumerate()
        .filter(|&(_, &y)| y)
        .map(|(c, _)| instance.fixed_cost(c) - kappa[c])
        .sum();
    Ok(relaxed.bound + activation)
}
