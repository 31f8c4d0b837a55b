//! Slow, independent reference solvers used to validate the fast paths.
//!
//! Nothing here calls into `kkt` or `relax`: restricted problems are solved
//! by a local bisection on the common marginal, and the relaxation by
//! projected gradient descent on the simplex.

use crate::error::{Error, Result};
use crate::model::{Allocation, Instance, LatencyFamily};

/// Largest expanded size accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Iteration cap of [`numeric_relaxation`].
pub const PG_MAX_ITERS: usize = 100_000;

fn power_params(family: &LatencyFamily) -> Result<(f64, f64)> {
    match *family {
        LatencyFamily::Power { coeff, exponent } => Ok((coeff, exponent)),
        LatencyFamily::Constant { .. } => Err(Error::ConstantFamily),
    }
}

/// Optimal per-group loads and value for an active set given as counts.
fn restricted(params: &[(f64, f64, f64)], counts: &[usize]) -> (Vec<f64>, f64) {
    // x_g(lambda) = (lambda / (b (1 + p)))^(1/p), increasing in lambda
    let level = |lambda: f64, (b, p): (f64, f64)| (lambda / (b * (1.0 + p))).powf(1.0 / p);
    let load = |lambda: f64| -> f64 {
        counts.iter().zip(params).filter(|(&n, _)| n > 0).map(|(&n, &(_, b, p))| n as f64 * level(lambda, (b, p))).sum()
    };
    let mut hi = 1.0;
    while load(hi) < 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if load(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut levels = vec![0.0; counts.len()];
    let mut value = 0.0;
    for (g, (&n, &(c, b, p))) in counts.iter().zip(params).enumerate() {
        if n > 0 {
            let x = level(lambda, (b, p)).min(1.0);
            levels[g] = x;
            value += n as f64 * (c + b * x.powf(p + 1.0));
        }
    }
    (levels, value)
}

/// Exact optimum by enumerating every nonempty activation.
///
/// Identical copies are enumerated by count, which visits
/// `prod (n_g + 1) - 1` activations instead of `2^q - 1`.
pub fn brute_force_optimum(instance: &Instance) -> Result<Allocation> {
    if instance.q() > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { q: instance.q(), limit: BRUTE_FORCE_LIMIT });
    }
    let params: Vec<(f64, f64, f64)> = instance
        .groups()
        .iter()
        .map(|g| power_params(&g.latency).map(|(b, p)| (g.fixed_cost, b, p)))
        .collect::<Result<_>>()?;
    let mult = instance.multiplicities();
    let ng = mult.len();

    let mut counts = vec![0usize; ng];
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    loop {
        // next count vector in mixed radix
        let mut g = 0;
        while g < ng && counts[g] == mult[g] {
            counts[g] = 0;
            g += 1;
        }
        if g == ng {
            break;
        }
        counts[g] += 1;

        let (levels, value) = restricted(&params, &counts);
        if best.as_ref().is_none_or(|(v, _, _)| value < *v) {
            best = Some((value, counts.clone(), levels));
        }
    }
    let (value, counts, levels) = best.expect("q >= 1");
    let mut alloc = Allocation::from_group_levels(instance, &counts, &levels);
    alloc.value = value;
    Ok(alloc)
}

/// Euclidean projection onto the unit simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Value of `min sum x_i f_i(x_i) + kappa_i x_i` over the unit simplex,
/// computed by projected gradient descent with backtracking.
pub fn numeric_relaxation(instance: &Instance, kappa: &[f64]) -> Result<f64> {
    if kappa.len() != instance.q() {
        return Err(Error::Domain(format!("expected {} multipliers, got {}", instance.q(), kappa.len())));
    }
    let params: Vec<(f64, f64)> =
        (0..instance.q()).map(|c| power_params(instance.latency(c))).collect::<Result<_>>()?;

    let objective = |x: &[f64]| -> f64 {
        x.iter().zip(&params).zip(kappa).map(|((&xi, &(b, p)), &k)| b * xi.powf(p + 1.0) + k * xi).sum()
    };
    let gradient = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(&params).zip(kappa).map(|((&xi, &(b, p)), &k)| b * (1.0 + p) * xi.powf(p) + k).collect()
    };

    let n = instance.q();
    let mut x = vec![1.0 / n as f64; n];
    let mut fx = objective(&x);
    let mut step = 1.0;
    for _ in 0..PG_MAX_ITERS {
        let grad = gradient(&x);
        let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        let y = project_simplex(&trial);
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dist2: f64 = d.iter().map(|v| v * v).sum();
        if dist2 == 0.0 {
            break;
        }
        let fy = objective(&y);
        let model = fx + grad.iter().zip(&d).map(|(g, v)| g * v).sum::<f64>() + dist2 / (2.0 * step);
        if fy <= model {
            let done = dist2.sqrt() < 1e-15;
            x = y;
            fx = fy;
            step *= 1.5;
            if done {
                break;
            }
        } else {
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
    }
    Ok(fx)
}
