//! Sharing one defense budget across a portfolio of GDFs.
//!
//! Additive-mode portfolios without dependency edges are separable and
//! concave, so the budget is split by water-filling: every funded GDF below
//! its own optimum ends at the same marginal value `lambda`. Non-mandatory GDFs
//! whose ENBCDS is negative at their allocated spend are dropped one at a time
//! (most negative first) and the budget is re-split among the rest until no
//! such GDF remains; single drops and re-admissions that raise the total
//! are then tried as well. Dependency edges couple the objective; the water-filling
//! point is then refined by coordinate ascent over single spends and pairwise
//! budget transfers. The literal cost mode is not concave and is solved on a
//! budget grid by dynamic programming before the same refinement.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::enbcds::{compromise_by_position, evaluator_at, CostMode, Enbcds, SpendVector};
use crate::error::EvalError;
use crate::model::ValidPortfolio;
use crate::scalar::Scalar;

use super::search::scanned_max;
use super::spend::peak_on;

const MAX_SWEEPS: usize = 100;
const BISECTION_STEPS: usize = 200;
const GRID_UNITS: usize = 400;
const EQUALIZE_ROUNDS: usize = 200;
const KKT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationOptions<T> {
    pub mode: CostMode,
    /// Overrides the portfolio budget.
    pub budget: Option<T>,
    pub max_sweeps: usize,
}

impl<T> Default for AllocationOptions<T> {
    fn default() -> Self {
        Self {
            mode: CostMode::Additive,
            budget: None,
            max_sweeps: MAX_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMethod {
    WaterFilling,
    CoordinateAscent,
    GridSearch,
}

/// First-order optimality evidence for an allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate<T> {
    /// Shared marginal value of the budget (0 when the budget does not bind).
    pub lambda: T,
    /// Retained GDFs strictly between zero spend and their own optimum.
    pub interior: Vec<String>,
    /// Largest `|marginal - lambda|` over interior GDFs.
    pub max_interior_gap: T,
    /// Largest `marginal - lambda` over retained GDFs at zero spend (should be <= tol).
    pub max_zero_excess: T,
    pub tolerance: T,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult<T> {
    pub spends: SpendVector<T>,
    pub dropped: BTreeSet<String>,
    /// Sum of ENBCDS over retained GDFs.
    pub objective: T,
    pub budget: T,
    pub budget_used: T,
    /// ENBCDS of each retained GDF at its allocated spend.
    pub values: BTreeMap<String, T>,
    /// Standalone optimal spend `s*` of every GDF.
    pub optimal: BTreeMap<String, T>,
    /// Derivative of the objective with respect to each retained GDF's spend.
    pub marginal_at_solution: BTreeMap<String, T>,
    pub kkt: KktCertificate<T>,
    pub iterations: usize,
    pub method: AllocationMethod,
}

/// Magnitude of all monetary flows in the portfolio at zero spend; used to
/// express tolerances on objective values.
pub fn value_scale<T: Scalar>(p: &ValidPortfolio<T>) -> T {
    let total: T = p
        .gdfs
        .iter()
        .map(|g| g.ben + g.dir_costs + g.expected_noncyber() + g.baseline_expected_loss())
        .fold(T::zero(), |a, b| a + b);
    total.max(T::one())
}

pub fn allocate<T: Scalar>(p: &ValidPortfolio<T>) -> Result<AllocationResult<T>, EvalError> {
    allocate_with(p, &AllocationOptions::default())
}

pub fn allocate_with<T: Scalar>(
    p: &ValidPortfolio<T>,
    opts: &AllocationOptions<T>,
) -> Result<AllocationResult<T>, EvalError> {
    let budget = opts.budget.unwrap_or(p.budget);
    if !(budget.is_finite() && budget >= T::zero()) {
        return Err(EvalError::InvalidSpend(budget.to_f64_lossless()));
    }
    let n = p.gdfs.len();
    let standalone: Vec<Enbcds<'_, T>> = p.gdfs.iter().map(|g| Enbcds::new(g).with_mode(opts.mode)).collect();
    let caps: Vec<T> = standalone.iter().map(|e| peak_on(e, e.zero_spend_cost()).0).collect();
    let scale = value_scale(p);

    let solver = Solver {
        p,
        standalone: &standalone,
        caps: &caps,
        budget,
        opts,
        scale,
    };
    // The drop rule alone (remove the most negative GDF, re-solve, repeat)
    // can stop short: a profitable GDF may be better dropped when its budget
    // earns more elsewhere or when it raises attack odds on its dependants,
    // and a GDF dropped early may pay once its parents are gone. Both the
    // drop-rule fixed point and the all-retained solution are improved by
    // single drops and re-admissions until none helps; the better one wins.
    let by_rule = solver.local_search(solver.by_drop_rule(vec![false; n])?)?;
    let from_all = solver.local_search(solver.fixed(vec![false; n])?)?;
    let iterations = by_rule.iterations + from_all.iterations;
    let best = if from_all.objective > by_rule.objective + T::of(1e-12) * scale {
        from_all
    } else {
        by_rule
    };
    let Solved {
        spends,
        dropped,
        mut lambda,
        ..
    } = best;
    let concave_separable = opts.mode == CostMode::Additive && !p.has_edges();
    let method = if opts.mode == CostMode::Literal {
        AllocationMethod::GridSearch
    } else if p.has_edges() {
        AllocationMethod::CoordinateAscent
    } else {
        AllocationMethod::WaterFilling
    };

    let values = true_values(p, &spends, &dropped, opts.mode);
    let marginals: Vec<T> = if concave_separable {
        (0..n).map(|i| standalone[i].marginal(spends[i])).collect()
    } else {
        (0..n)
            .map(|i| objective_slope(p, &spends, &dropped, opts.mode, i, &standalone))
            .collect()
    };
    let budget_used: T = spends.iter().copied().fold(T::zero(), |a, b| a + b);
    if !concave_separable {
        lambda = estimate_lambda(&spends, &caps, &dropped, &marginals, budget, budget_used);
    }
    let kkt = certificate(p, &spends, &caps, &dropped, &marginals, lambda);

    let mut out_spends = SpendVector::new();
    let mut out_values = BTreeMap::new();
    let mut out_marginals = BTreeMap::new();
    let mut out_dropped = BTreeSet::new();
    let mut optimal = BTreeMap::new();
    for (i, g) in p.gdfs.iter().enumerate() {
        out_spends.set(g.id.clone(), spends[i])?;
        optimal.insert(g.id.clone(), caps[i]);
        if dropped[i] {
            out_dropped.insert(g.id.clone());
        } else {
            out_values.insert(g.id.clone(), values[i]);
            out_marginals.insert(g.id.clone(), marginals[i]);
        }
    }
    let objective = (0..n)
        .filter(|&i| !dropped[i])
        .map(|i| values[i])
        .fold(T::zero(), |a, b| a + b);
    Ok(AllocationResult {
        spends: out_spends,
        dropped: out_dropped,
        objective,
        budget,
        budget_used,
        values: out_values,
        optimal,
        marginal_at_solution: out_marginals,
        kkt,
        iterations,
        method,
    })
}

struct Solved<T> {
    spends: Vec<T>,
    dropped: Vec<bool>,
    lambda: T,
    objective: T,
    iterations: usize,
    values: Vec<T>,
}

struct Solver<'a, 'p, T> {
    p: &'a ValidPortfolio<T>,
    standalone: &'a [Enbcds<'p, T>],
    caps: &'a [T],
    budget: T,
    opts: &'a AllocationOptions<T>,
    scale: T,
}

impl<T: Scalar> Solver<'_, '_, T> {
    /// Best spends with the drop set held fixed (the literal-mode grid may
    /// drop more).
    fn fixed(&self, mut dropped: Vec<bool>) -> Result<Solved<T>, EvalError> {
        let (p, opts) = (self.p, self.opts);
        let mut iterations = 1;
        let (spends, lambda) = match water_fill(self.standalone, self.caps, &dropped, self.budget) {
            Ok(wf) => {
                iterations += wf.steps;
                let mut spends = wf.spends;
                if p.has_edges() {
                    iterations += coordinate_ascent(p, &mut spends, &dropped, self.budget, opts, self.scale);
                    iterations += self.equalize(&mut spends, &dropped);
                }
                (spends, wf.lambda)
            }
            Err(EvalError::NonConcaveMode) => {
                let mut spends = grid_allocation(self.standalone, &mut dropped, self.budget);
                iterations += coordinate_ascent(p, &mut spends, &dropped, self.budget, opts, self.scale);
                iterations += self.equalize(&mut spends, &dropped);
                (spends, T::zero())
            }
            Err(e) => return Err(e),
        };
        let values = true_values(p, &spends, &dropped, opts.mode);
        let objective = (0..values.len())
            .filter(|&i| !dropped[i])
            .map(|i| values[i])
            .fold(T::zero(), |a, b| a + b);
        Ok(Solved {
            spends,
            dropped,
            lambda,
            objective,
            iterations,
            values,
        })
    }

    /// Value comparisons stall once gains fall below rounding, leaving
    /// interior marginals slightly apart. Moves spend from the lowest to the
    /// highest interior marginal, placing each transfer by bisection on the
    /// marginal difference, while the objective does not fall.
    fn equalize(&self, spends: &mut [T], dropped: &[bool]) -> usize {
        let (p, mode) = (self.p, self.opts.mode);
        let slope = |s: &[T], i: usize| objective_slope(p, s, dropped, mode, i, self.standalone);
        let floor = T::of(1e-12) * self.scale;
        let mut rounds = 0;
        while rounds < EQUALIZE_ROUNDS {
            let interior: Vec<usize> = (0..spends.len())
                .filter(|&i| !dropped[i] && is_interior(spends[i], self.caps[i]))
                .collect();
            if interior.len() < 2 {
                break;
            }
            let m: Vec<T> = interior.iter().map(|&i| slope(spends, i)).collect();
            let (mut hi, mut lo) = (0, 0);
            for j in 1..m.len() {
                if m[j] > m[hi] {
                    hi = j;
                }
                if m[j] < m[lo] {
                    lo = j;
                }
            }
            if m[hi] - m[lo] <= T::of(KKT_TOL * 1e-3) * m[hi].abs().max(T::one()) {
                break;
            }
            rounds += 1;
            let (i, k) = (interior[hi], interior[lo]);
            let gap = |t: T| {
                let mut trial = spends.to_vec();
                trial[i] = spends[i] + t;
                trial[k] = spends[k] - t;
                slope(&trial, i) - slope(&trial, k)
            };
            let (mut a, mut b) = (T::zero(), spends[k]);
            if gap(b) > T::zero() {
                a = b;
            } else {
                for _ in 0..BISECTION_STEPS {
                    let mid = (a + b) / T::of(2.0);
                    if gap(mid) > T::zero() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                    if b - a <= T::of(1e-14) * spends[k].max(T::one()) {
                        break;
                    }
                }
            }
            let before = objective(p, spends, dropped, mode);
            let mut trial = spends.to_vec();
            trial[i] = spends[i] + a;
            trial[k] = spends[k] - a;
            if !(objective(p, &trial, dropped, mode) >= before - floor) || !(a > T::zero()) {
                break;
            }
            spends.copy_from_slice(&trial);
        }
        rounds
    }

    /// Drops the most negative non-mandatory GDF and re-solves until every
    /// retained GDF is worth at least zero at its allocated spend.
    fn by_drop_rule(&self, dropped: Vec<bool>) -> Result<Solved<T>, EvalError> {
        let mut cur = self.fixed(dropped)?;
        let mut iterations = cur.iterations;
        loop {
            let worst = (0..cur.values.len())
                .filter(|&i| !cur.dropped[i] && !self.p.gdfs[i].mandatory && cur.values[i] < T::zero())
                .min_by(|&a, &b| cur.values[a].partial_cmp(&cur.values[b]).expect("finite values"));
            let Some(i) = worst else {
                cur.iterations = iterations;
                return Ok(cur);
            };
            let mut d = cur.dropped.clone();
            d[i] = true;
            cur = self.fixed(d)?;
            iterations += cur.iterations;
        }
    }

    /// Greedy single-GDF drops and re-admissions while the objective rises.
    fn local_search(&self, mut cur: Solved<T>) -> Result<Solved<T>, EvalError> {
        let min_gain = T::of(1e-12) * self.scale;
        let mut iterations = cur.iterations;
        loop {
            let mut improved: Option<Solved<T>> = None;
            for i in 0..cur.dropped.len() {
                if self.p.gdfs[i].mandatory {
                    continue;
                }
                let mut d = cur.dropped.clone();
                d[i] = !d[i];
                let cand = self.fixed(d)?;
                iterations += cand.iterations;
                let bar = improved.as_ref().map_or(cur.objective + min_gain, |c| c.objective);
                if cand.objective > bar {
                    improved = Some(cand);
                }
            }
            match improved {
                Some(c) => cur = c,
                None => {
                    cur.iterations = iterations;
                    return Ok(cur);
                }
            }
        }
    }
}

struct WaterFill<T> {
    spends: Vec<T>,
    lambda: T,
    steps: usize,
}

/// Spend at which `marginal(s) = lambda`, clamped to `[0, cap]`.
fn spend_at<T: Scalar>(eval: &Enbcds<'_, T>, cap: T, lambda: T) -> T {
    if !(cap > T::zero()) || eval.marginal(T::zero()) <= lambda {
        return T::zero();
    }
    if eval.marginal(cap) >= lambda {
        return cap;
    }
    let (mut lo, mut hi) = (T::zero(), cap);
    for _ in 0..BISECTION_STEPS {
        let mid = lo + (hi - lo) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval.marginal(mid) >= lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Water-filling over the GDFs not yet dropped, ignoring dependencies.
fn water_fill<T: Scalar>(
    evals: &[Enbcds<'_, T>],
    caps: &[T],
    dropped: &[bool],
    budget: T,
) -> Result<WaterFill<T>, EvalError> {
    if evals.iter().any(|e| e.mode() != CostMode::Additive) {
        return Err(EvalError::NonConcaveMode);
    }
    let active: Vec<usize> = (0..evals.len()).filter(|&i| !dropped[i]).collect();
    let fill = |lambda: T| {
        let mut s = vec![T::zero(); evals.len()];
        for &i in &active {
            s[i] = spend_at(&evals[i], caps[i], lambda);
        }
        s
    };
    let sum = |s: &[T]| s.iter().copied().fold(T::zero(), |a, b| a + b);

    let at_caps = fill(T::zero());
    if sum(&at_caps) <= budget {
        return Ok(WaterFill {
            spends: at_caps,
            lambda: T::zero(),
            steps: 0,
        });
    }
    let mut lam_hi = active
        .iter()
        .map(|&i| evals[i].marginal(T::zero()))
        .fold(T::zero(), T::max);
    let mut lam_lo = T::zero();
    let mut lo_spends = at_caps;
    let mut hi_spends = fill(lam_hi);
    let mut steps = 0;
    while steps < BISECTION_STEPS {
        let mid = lam_lo + (lam_hi - lam_lo) / T::of(2.0);
        if mid <= lam_lo || mid >= lam_hi {
            break;
        }
        steps += 1;
        let s = fill(mid);
        if sum(&s) > budget {
            lam_lo = mid;
            lo_spends = s;
        } else {
            lam_hi = mid;
            hi_spends = s;
        }
    }
    // Hand out what is left between the two brackets; GDFs in that range all
    // sit at a marginal between lam_hi and lam_lo.
    let mut left = budget - sum(&hi_spends);
    for &i in &active {
        if left <= T::zero() {
            break;
        }
        let extra = (lo_spends[i] - hi_spends[i]).max(T::zero()).min(left);
        hi_spends[i] = hi_spends[i] + extra;
        left = left - extra;
    }
    // Rounding must never push the total over the budget.
    let mut over = sum(&hi_spends) - budget;
    for &i in active.iter().rev() {
        if over <= T::zero() {
            break;
        }
        let cut = hi_spends[i].min(over);
        hi_spends[i] = hi_spends[i] - cut;
        over = over - cut;
    }
    Ok(WaterFill {
        spends: hi_spends,
        lambda: lam_hi,
        steps,
    })
}

/// ENBCDS of every GDF with dependency effects (dropped GDFs cannot be compromised).
fn true_values<T: Scalar>(p: &ValidPortfolio<T>, spends: &[T], dropped: &[bool], mode: CostMode) -> Vec<T> {
    let q = compromise_by_position(p, spends, dropped);
    (0..p.gdfs.len())
        .map(|i| evaluator_at(p, i, &q, mode).value(spends[i]))
        .collect()
}

fn objective<T: Scalar>(p: &ValidPortfolio<T>, spends: &[T], dropped: &[bool], mode: CostMode) -> T {
    let values = true_values(p, spends, dropped, mode);
    (0..values.len())
        .filter(|&i| !dropped[i])
        .map(|i| values[i])
        .fold(T::zero(), |a, b| a + b)
}

/// Central-difference derivative of the whole objective in GDF `i`'s spend.
fn objective_slope<T: Scalar>(
    p: &ValidPortfolio<T>,
    spends: &[T],
    dropped: &[bool],
    mode: CostMode,
    i: usize,
    standalone: &[Enbcds<'_, T>],
) -> T {
    let h = T::of(1e-6) * standalone[i].zero_spend_cost().max(T::one());
    let mut s = spends.to_vec();
    let lo = (spends[i] - h).max(T::zero());
    let hi = spends[i] + h;
    s[i] = hi;
    let up = objective(p, &s, dropped, mode);
    s[i] = lo;
    let down = objective(p, &s, dropped, mode);
    (up - down) / (hi - lo)
}

/// Upper bound on useful spend: beyond the largest possible attack loss of
/// the retained GDFs, extra spend cannot pay for itself.
fn spend_ceiling<T: Scalar>(p: &ValidPortfolio<T>, dropped: &[bool]) -> T {
    p.gdfs
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped[*i])
        .flat_map(|(_, g)| g.attacks.iter().map(|a| a.loss))
        .fold(T::zero(), |a, b| a + b)
}

/// Coordinate ascent on the coupled objective: each GDF's spend with the rest
/// fixed, then budget transfers between every pair. Only strict improvements
/// are accepted. Returns the number of sweeps.
fn coordinate_ascent<T: Scalar>(
    p: &ValidPortfolio<T>,
    spends: &mut [T],
    dropped: &[bool],
    budget: T,
    opts: &AllocationOptions<T>,
    scale: T,
) -> usize {
    let active: Vec<usize> = (0..spends.len()).filter(|&i| !dropped[i]).collect();
    if active.is_empty() {
        return 0;
    }
    let ceiling = spend_ceiling(p, dropped);
    let stop = T::of(1e-9) * scale;
    let mut best = objective(p, spends, dropped, opts.mode);
    let mut work = spends.to_vec();
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let start = best;
        for &i in &active {
            let used: T = work.iter().copied().fold(T::zero(), |a, b| a + b);
            let slack = (budget - used).max(T::zero());
            let hi = (work[i] + slack).min(ceiling.max(work[i]));
            let tol = T::of(1e-10) * hi.max(T::one());
            let (s, v) = scanned_max(
                |x| {
                    let mut trial = work.clone();
                    trial[i] = x;
                    objective(p, &trial, dropped, opts.mode)
                },
                T::zero(),
                hi,
                tol,
                24,
            );
            if v > best {
                work[i] = s;
                best = v;
            }
        }
        for (a, &i) in active.iter().enumerate() {
            for &k in &active[a + 1..] {
                let pool = work[i] + work[k];
                if !(pool > T::zero()) {
                    continue;
                }
                let tol = T::of(1e-10) * pool;
                let (x, v) = scanned_max(
                    |x| {
                        let mut trial = work.clone();
                        trial[i] = x;
                        trial[k] = pool - x;
                        objective(p, &trial, dropped, opts.mode)
                    },
                    T::zero(),
                    pool,
                    tol,
                    24,
                );
                if v > best {
                    work[i] = x;
                    work[k] = pool - x;
                    best = v;
                }
            }
        }
        if best - start < stop {
            break;
        }
    }
    spends.copy_from_slice(&work);
    sweeps
}

/// Dynamic program over a uniform budget grid; each non-mandatory GDF may
/// also be dropped. Marks dropped GDFs and returns the grid spends.
fn grid_allocation<T: Scalar>(evals: &[Enbcds<'_, T>], dropped: &mut [bool], budget: T) -> Vec<T> {
    let n = evals.len();
    let mut spends = vec![T::zero(); n];
    let units = if budget > T::zero() { GRID_UNITS } else { 0 };
    let step = if units > 0 {
        budget / T::of(units as f64)
    } else {
        T::zero()
    };
    // options[i] = (units, value, drop)
    let mut options: Vec<Vec<(usize, T, bool)>> = Vec::with_capacity(n);
    for (i, e) in evals.iter().enumerate() {
        let mut opts = Vec::new();
        if dropped[i] {
            opts.push((0, T::zero(), true));
        } else {
            if !e.gdf().mandatory {
                opts.push((0, T::zero(), true));
            }
            let max_units = if step > T::zero() {
                let k = (e.zero_spend_cost() / step).ceil().to_f64_lossless();
                (k.max(0.0) as usize).min(units)
            } else {
                0
            };
            for k in 0..=max_units {
                opts.push((k, e.value(step * T::of(k as f64)), false));
            }
        }
        options.push(opts);
    }
    let neg_inf = T::neg_infinity();
    let mut best = vec![T::zero(); units + 1];
    let mut choice: Vec<Vec<usize>> = Vec::with_capacity(n);
    for opts in &options {
        let mut next = vec![neg_inf; units + 1];
        let mut pick = vec![0usize; units + 1];
        for b in 0..=units {
            for (o, &(k, v, _)) in opts.iter().enumerate() {
                if k > b || best[b - k] == neg_inf {
                    continue;
                }
                let cand = best[b - k] + v;
                if cand > next[b] {
                    next[b] = cand;
                    pick[b] = o;
                }
            }
        }
        best = next;
        choice.push(pick);
    }
    let mut b = (0..=units)
        .max_by(|&x, &y| best[x].partial_cmp(&best[y]).expect("finite"))
        .unwrap_or(0);
    for i in (0..n).rev() {
        let (k, _, drop) = options[i][choice[i][b]];
        dropped[i] = drop;
        spends[i] = step * T::of(k as f64);
        b -= k;
    }
    spends
}

fn estimate_lambda<T: Scalar>(spends: &[T], caps: &[T], dropped: &[bool], marginals: &[T], budget: T, used: T) -> T {
    if used < budget * (T::one() - T::of(1e-9)) {
        return T::zero();
    }
    let interior: Vec<T> = (0..spends.len())
        .filter(|&i| !dropped[i] && is_interior(spends[i], caps[i]))
        .map(|i| marginals[i])
        .collect();
    if interior.is_empty() {
        return T::zero();
    }
    let n = T::of(interior.len() as f64);
    interior.into_iter().fold(T::zero(), |a, b| a + b) / n
}

fn is_interior<T: Scalar>(s: T, cap: T) -> bool {
    let eps = T::of(1e-9) * cap.max(T::one());
    s > eps && s < cap - eps
}

fn certificate<T: Scalar>(
    p: &ValidPortfolio<T>,
    spends: &[T],
    caps: &[T],
    dropped: &[bool],
    marginals: &[T],
    lambda: T,
) -> KktCertificate<T> {
    let tolerance = T::of(KKT_TOL) * lambda.abs().max(T::one());
    let mut interior = Vec::new();
    let mut gap = T::zero();
    let mut excess = T::zero();
    for i in 0..spends.len() {
        if dropped[i] {
            continue;
        }
        if is_interior(spends[i], caps[i]) {
            interior.push(p.gdfs[i].id.clone());
            gap = gap.max((marginals[i] - lambda).abs());
        } else if spends[i] <= T::zero() {
            excess = excess.max(marginals[i] - lambda);
        }
    }
    KktCertificate {
        lambda,
        satisfied: gap <= tolerance && excess <= tolerance,
        interior,
        max_interior_gap: gap,
        max_zero_excess: excess,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_portfolio, AttackType, BreachModel, Gdf, Portfolio};

    fn gdf(id: &str, ben: f64, p: f64, loss: f64, alpha: f64) -> Gdf<f64> {
        let mut g = Gdf::new(id, ben);
        g.attacks.push(AttackType {
            id: "a".into(),
            description: String::new(),
            baseline_prob: p,
            loss,
            breach: BreachModel::GordonLoebI { alpha, beta: 1.0 },
        });
        g
    }

    #[test]
    fn zero_budget_spends_nothing_and_drops_negatives() {
        let mut p = Portfolio::new(0.0)
            .with_gdf(gdf("good", 1e5, 0.5, 1e4, 1e-3))
            .with_gdf(gdf("bad", 1e3, 0.5, 1e5, 1e-3));
        let mut m = gdf("must", 1e3, 0.5, 1e5, 1e-3);
        m.mandatory = true;
        p.gdfs.push(m);
        let r = allocate(&validate_portfolio(p).unwrap()).unwrap();
        assert!(r.spends.iter().all(|(_, s)| s == 0.0));
        assert_eq!(r.dropped, ["bad".to_string()].into());
        assert_eq!(r.budget_used, 0.0);
    }

    #[test]
    fn single_gdf_never_overshoots() {
        let g = gdf("x", 1e5, 0.5, 20000.0, 0.01);
        let p = validate_portfolio(Portfolio::new(5000.0).with_gdf(g.clone())).unwrap();
        let r = allocate(&p).unwrap();
        let s_star = crate::optimize::optimal_spend(&g, None).unwrap().s_star;
        assert_eq!(r.spends.get("x"), s_star);
        assert_eq!(r.kkt.lambda, 0.0);
        assert!(r.kkt.satisfied);
    }

    #[test]
    fn binding_budget_equalizes_marginals() {
        let p = Portfolio::new(1000.0)
            .with_gdf(gdf("x", 1e5, 0.5, 20000.0, 0.01))
            .with_gdf(gdf("y", 1e5, 0.4, 30000.0, 0.005));
        let r = allocate(&validate_portfolio(p).unwrap()).unwrap();
        assert!((r.budget_used - 1000.0).abs() < 1e-9);
        assert!(r.budget_used <= 1000.0 + 1e-9);
        assert_eq!(r.kkt.interior.len(), 2);
        assert!(r.kkt.satisfied, "{:?}", r.kkt);
        let mx = r.marginal_at_solution["x"];
        let my = r.marginal_at_solution["y"];
        assert!((mx - my).abs() < 1e-4 * mx.max(1.0));
        assert_eq!(r.method, AllocationMethod::WaterFilling);
    }

    #[test]
    fn literal_mode_falls_back_to_grid() {
        let p = Portfolio::new(1000.0)
            .with_gdf(gdf("x", 1e5, 0.5, 20000.0, 0.01))
            .with_gdf(gdf("y", 1e5, 0.4, 30000.0, 0.005));
        let p = validate_portfolio(p).unwrap();
        let opts = AllocationOptions {
            mode: CostMode::Literal,
            ..Default::default()
        };
        let evals: Vec<_> = p
            .gdfs
            .iter()
            .map(|g| Enbcds::new(g).with_mode(CostMode::Literal))
            .collect();
        assert!(matches!(
            water_fill(&evals, &[1.0, 1.0], &[false, false], 10.0),
            Err(EvalError::NonConcaveMode)
        ));
        let r = allocate_with(&p, &opts).unwrap();
        assert_eq!(r.method, AllocationMethod::GridSearch);
        assert!(r.budget_used <= 1000.0 + 1e-9);
    }

    #[test]
    fn budget_override() {
        let p = validate_portfolio(Portfolio::new(1000.0).with_gdf(gdf("x", 1e5, 0.5, 20000.0, 0.01))).unwrap();
        let r = allocate_with(
            &p,
            &AllocationOptions {
                budget: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.spends.get("x"), 0.0);
        assert!(allocate_with(
            &p,
            &AllocationOptions {
                budget: Some(-1.0),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn coordinate_ascent_never_lowers_objective() {
        let mut p = Portfolio::new(30000.0)
            .with_gdf(gdf("a", 1e5, 0.4, 2e5, 1e-4))
            .with_gdf(gdf("b", 8e4, 0.3, 1e5, 5e-5))
            .with_gdf(gdf("c", 5e4, 0.2, 3e5, 2e-4));
        for (from, to) in [("a", "b"), ("a", "c"), ("b", "c")] {
            p.edges.push(crate::model::DependencyEdge {
                from: from.into(),
                to: to.into(),
                uplift: [("a".to_string(), 2.5)].into(),
            });
        }
        let p = validate_portfolio(p).unwrap();
        let opts = AllocationOptions::default();
        let scale = value_scale(&p);
        let dropped = [false; 3];
        for start in [
            [0.0, 0.0, 0.0],
            [30000.0, 0.0, 0.0],
            [1e4, 1e4, 1e4],
            [0.0, 5000.0, 25000.0],
        ] {
            let mut s = start.to_vec();
            let before = objective(&p, &s, &dropped, CostMode::Additive);
            coordinate_ascent(&p, &mut s, &dropped, 30000.0, &opts, scale);
            assert!(objective(&p, &s, &dropped, CostMode::Additive) >= before);
            assert!(s.iter().sum::<f64>() <= 30000.0 * (1.0 + 1e-12));
        }
    }
}
