//! Independent brute-force verifiers. Everything here works on floating-point
//! grids and deliberately shares no code path with the exact solvers: profits
//! are maximized by grid search, dispatch by grid dynamic programming.

use crate::curvelib::StatusOutputSet;
use crate::model::{ConsumerSpec, Network, Scenario, UnitSpec};
use crate::rat::to_f64;

#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Quantity step in MWh.
    pub quantity_step: f64,
    /// Price grid per dimension: (lo, hi, step).
    pub price_grid: Vec<(f64, f64, f64)>,
}

impl GridSpec {
    pub fn quantities(step: f64) -> GridSpec {
        GridSpec {
            quantity_step: step,
            price_grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BrutePrimal {
    pub value: f64,
    pub unit_g: Vec<Vec<f64>>,
    pub cons_d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BruteDualScan {
    pub best_value: f64,
    pub best_price: Vec<f64>,
    /// Grid prices whose dual objective is within `flat_tol` of the best
    /// (collected only for grids up to half a million points).
    pub flat_region: Vec<Vec<f64>>,
    pub flat_tol: f64,
    /// Dual objective at each requested probe price.
    pub probe_values: Vec<f64>,
}

fn unit_cost_f64(u: &UnitSpec, on: &[bool], g: &[f64]) -> f64 {
    let mut cost = 0.0;
    let mut prev_on = u.initial_on;
    let slope_eval = |x: f64| -> f64 {
        match &u.cost {
            crate::model::CostCurve::Affine { slope } => to_f64(slope) * x,
            crate::model::CostCurve::Quadratic { linear, quad } => {
                to_f64(linear) * x + to_f64(quad) * x * x
            }
            crate::model::CostCurve::Piecewise { segments } => {
                let mut acc = 0.0;
                let mut lo = 0.0;
                for seg in segments {
                    let upto = to_f64(&seg.upto);
                    let s = to_f64(&seg.slope);
                    if x <= upto {
                        return acc + s * (x - lo);
                    }
                    acc += s * (upto - lo);
                    lo = upto;
                }
                let last = segments.last().unwrap();
                acc + to_f64(&last.slope) * (x - lo)
            }
        }
    };
    for (t, &on_t) in on.iter().enumerate() {
        if on_t {
            cost += slope_eval(g[t]) + to_f64(&u.no_load_cost);
            if !prev_on {
                cost += to_f64(&u.startup_cost);
            }
        }
        prev_on = on_t;
    }
    cost
}

fn consumer_benefit_f64(c: &ConsumerSpec, v: &[bool], d: &[f64]) -> f64 {
    let mut total = 0.0;
    for (t, &dt) in d.iter().enumerate() {
        let mut remaining = dt - to_f64(&c.fixed_load[t]);
        for (k, b) in c.blocks.iter().enumerate() {
            if v.get(k).copied().unwrap_or(false) {
                total += to_f64(&b.price) * to_f64(&b.quantity[t]);
                remaining -= to_f64(&b.quantity[t]);
            }
        }
        if remaining < -1e-9 {
            return f64::NEG_INFINITY;
        }
        let remaining = remaining.max(0.0);
        if let Some(q) = &c.quadratic {
            total += to_f64(&q.linear) * remaining + to_f64(&q.quad) * remaining * remaining;
        } else {
            let mut rem = remaining;
            for seg in &c.elastic[t] {
                if rem <= 0.0 {
                    break;
                }
                let take = rem.min(to_f64(&seg.quantity));
                total += to_f64(&seg.price) * take;
                rem -= take;
            }
        }
    }
    total
}

/// Integer-indexed grid over [lo, hi]: lo + k*step plus the exact top.
fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = lo;
    while x < hi - 1e-12 {
        v.push(x);
        x += step;
    }
    v.push(hi);
    v
}

/// Exhaustive grid dispatch via dynamic programming over integer quantity
/// indices; exact balance on the grid.
pub fn brute_primal(s: &Scenario, grid: &GridSpec) -> Result<BrutePrimal, String> {
    let step = grid.quantity_step;
    if step <= 0.0 {
        return Err("quantity step must be positive".into());
    }
    let t = s.periods();
    if t > 2 {
        return Err("oracle supports at most two periods".into());
    }
    // balance bookkeeping on a fine microgrid (independent of the step) so
    // off-step interval endpoints cannot fake a balanced dispatch
    let to_idx = |x: f64| -> i64 { (x * 1000.0).round() as i64 };

    // enumerate patterns
    let n_unit_patterns = 1usize << (s.units.len() * t);
    let n_cons_patterns: usize = s
        .consumers
        .iter()
        .map(|c| 1usize << c.blocks.len())
        .product();
    let mut best: Option<BrutePrimal> = None;

    for up in 0..n_unit_patterns {
        let unit_on: Vec<Vec<bool>> = (0..s.units.len())
            .map(|i| (0..t).map(|ti| up & (1 << (i * t + ti)) != 0).collect())
            .collect();
        for cp in 0..n_cons_patterns {
            let mut cons_v: Vec<Vec<bool>> = Vec::new();
            let mut rem = cp;
            for c in &s.consumers {
                let k = c.blocks.len();
                let bits = rem % (1 << k);
                rem >>= k;
                cons_v.push((0..k).map(|b| bits & (1 << b) != 0).collect());
            }

            // per period, per node: reachable supply index sets with best cost
            // handled by DP over units then consumers; ramp coupling for two
            // periods handled by iterating period-1 choices per unit
            let result = brute_pattern(s, &unit_on, &cons_v, step, to_idx);
            if let Some(cand) = result {
                if best
                    .as_ref()
                    .map(|b| cand.value > b.value + 1e-12)
                    .unwrap_or(true)
                {
                    best = Some(cand);
                }
            }
        }
    }
    best.ok_or_else(|| "no feasible grid dispatch".into())
}

/// Grid search for one pattern combination. Single-period scenarios run a
/// dynamic program over players keyed by the integer balance index (the
/// welfare is additively separable, so the DP is exhaustive); coupled periods
/// fall back to explicit per-period tuple enumeration.
fn brute_pattern(
    s: &Scenario,
    unit_on: &[Vec<bool>],
    cons_v: &[Vec<bool>],
    step: f64,
    to_idx: impl Fn(f64) -> i64 + Copy,
) -> Option<BrutePrimal> {
    if s.periods() == 1 {
        return brute_pattern_dp(s, unit_on, cons_v, step, to_idx);
    }
    let t = s.periods();
    // per player per period grids
    let mut unit_grids: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, u) in s.units.iter().enumerate() {
        let mut per = Vec::new();
        for ti in 0..t {
            if unit_on[i][ti] {
                per.push(grid_points(to_f64(&u.g_min), to_f64(&u.g_max), step));
            } else {
                per.push(vec![0.0]);
            }
        }
        unit_grids.push(per);
    }
    let mut cons_grids: Vec<Vec<Vec<f64>>> = Vec::new();
    for (j, c) in s.consumers.iter().enumerate() {
        let mut per = Vec::new();
        for ti in 0..t {
            let mut base = to_f64(&c.fixed_load[ti]);
            for (k, b) in c.blocks.iter().enumerate() {
                if cons_v[j][k] {
                    base += to_f64(&b.quantity[ti]);
                }
            }
            let flex = if let Some(q) = &c.quadratic {
                to_f64(&q.d_max)
            } else {
                c.elastic[ti].iter().map(|sgm| to_f64(&sgm.quantity)).sum()
            };
            per.push(grid_points(base, base + flex, step));
        }
        cons_grids.push(per);
    }

    let cap_idx = match &s.network {
        Network::OneNode => None,
        Network::TwoNode { line_capacity } => Some(to_idx(to_f64(line_capacity))),
    };

    // recursive enumeration per period of balanced tuples with best welfare
    let mut best: Option<BrutePrimal> = None;
    let mut stack_g: Vec<Vec<f64>> = vec![Vec::new(); t];
    let mut stack_d: Vec<Vec<f64>> = vec![Vec::new(); t];

    fn enumerate_period(
        s: &Scenario,
        unit_grids: &[Vec<Vec<f64>>],
        cons_grids: &[Vec<Vec<f64>>],
        ti: usize,
        k: usize,
        gs: &mut Vec<f64>,
        ds: &mut Vec<f64>,
        cap_idx: Option<i64>,
        to_idx: impl Fn(f64) -> i64 + Copy,
        out: &mut Vec<(Vec<f64>, Vec<f64>)>,
    ) {
        let n = unit_grids.len() + cons_grids.len();
        if k == n {
            let mut res = vec![0i64; s.nodes()];
            for (i, u) in s.units.iter().enumerate() {
                res[u.node] += to_idx(gs[i]);
            }
            for (j, c) in s.consumers.iter().enumerate() {
                res[c.node] -= to_idx(ds[j]);
            }
            let ok = match cap_idx {
                None => res[0] == 0,
                Some(cap) => res[0] + res[1] == 0 && res[0].abs() <= cap,
            };
            if ok {
                out.push((gs.clone(), ds.clone()));
            }
            return;
        }
        let grid = if k < unit_grids.len() {
            &unit_grids[k][ti]
        } else {
            &cons_grids[k - unit_grids.len()][ti]
        };
        for &v in grid {
            if k < unit_grids.len() {
                gs.push(v);
            } else {
                ds.push(v);
            }
            enumerate_period(
                s,
                unit_grids,
                cons_grids,
                ti,
                k + 1,
                gs,
                ds,
                cap_idx,
                to_idx,
                out,
            );
            if k < unit_grids.len() {
                gs.pop();
            } else {
                ds.pop();
            }
        }
    }

    let mut per_period: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::new();
    for ti in 0..t {
        let mut tuples = Vec::new();
        let mut gs = Vec::new();
        let mut ds = Vec::new();
        enumerate_period(
            s,
            &unit_grids,
            &cons_grids,
            ti,
            0,
            &mut gs,
            &mut ds,
            cap_idx,
            to_idx,
            &mut tuples,
        );
        if tuples.is_empty() {
            return None;
        }
        per_period.push(tuples);
    }

    let mut idx = vec![0usize; t];
    loop {
        for ti in 0..t {
            stack_g[ti] = per_period[ti][idx[ti]].0.clone();
            stack_d[ti] = per_period[ti][idx[ti]].1.clone();
        }
        // ramp feasibility
        let mut feasible = true;
        for (i, u) in s.units.iter().enumerate() {
            if let Some(r) = &u.ramp_limit {
                let rl = to_f64(r) + 1e-9;
                let mut prev = to_f64(&u.initial_output);
                for ti in 0..t {
                    let g = stack_g[ti][i];
                    if (g - prev).abs() > rl {
                        feasible = false;
                        break;
                    }
                    prev = g;
                }
            }
            if !feasible {
                break;
            }
        }
        if feasible {
            let mut welfare = 0.0;
            for (j, c) in s.consumers.iter().enumerate() {
                let d: Vec<f64> = (0..t).map(|ti| stack_d[ti][j]).collect();
                welfare += consumer_benefit_f64(c, &cons_v[j], &d);
            }
            for (i, u) in s.units.iter().enumerate() {
                let g: Vec<f64> = (0..t).map(|ti| stack_g[ti][i]).collect();
                welfare -= unit_cost_f64(u, &unit_on[i], &g);
            }
            if best
                .as_ref()
                .map(|b| welfare > b.value + 1e-12)
                .unwrap_or(true)
            {
                best = Some(BrutePrimal {
                    value: welfare,
                    unit_g: (0..s.units.len())
                        .map(|i| (0..t).map(|ti| stack_g[ti][i]).collect())
                        .collect(),
                    cons_d: (0..s.consumers.len())
                        .map(|j| (0..t).map(|ti| stack_d[ti][j]).collect())
                        .collect(),
                });
            }
        }
        // advance
        let mut k = t;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_period[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Single-period exhaustive grid dispatch by dynamic programming over
/// players, keyed by nodal balance indices.
fn brute_pattern_dp(
    s: &Scenario,
    unit_on: &[Vec<bool>],
    cons_v: &[Vec<bool>],
    step: f64,
    to_idx: impl Fn(f64) -> i64 + Copy,
) -> Option<BrutePrimal> {
    use std::collections::HashMap;
    let nodes = s.nodes();
    // (value at grid point, welfare contribution)
    let mut options: Vec<Vec<(f64, f64, i64, usize)>> = Vec::new(); // (q, welfare, idx, node)
    for (i, u) in s.units.iter().enumerate() {
        let pts = if unit_on[i][0] {
            grid_points(to_f64(&u.g_min), to_f64(&u.g_max), step)
        } else {
            vec![0.0]
        };
        options.push(
            pts.into_iter()
                .map(|g| {
                    (
                        g,
                        -unit_cost_f64(u, &unit_on[i], std::slice::from_ref(&g)),
                        to_idx(g),
                        u.node,
                    )
                })
                .collect(),
        );
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let mut base = to_f64(&c.fixed_load[0]);
        for (k, b) in c.blocks.iter().enumerate() {
            if cons_v[j][k] {
                base += to_f64(&b.quantity[0]);
            }
        }
        let flex = if let Some(q) = &c.quadratic {
            to_f64(&q.d_max)
        } else {
            c.elastic[0].iter().map(|sgm| to_f64(&sgm.quantity)).sum()
        };
        options.push(
            grid_points(base, base + flex, step)
                .into_iter()
                .map(|d| {
                    (
                        d,
                        consumer_benefit_f64(c, &cons_v[j], std::slice::from_ref(&d)),
                        -to_idx(d),
                        c.node,
                    )
                })
                .collect(),
        );
    }
    // DP over players; state = per-node balance indices
    let mut states: HashMap<Vec<i64>, (f64, Vec<usize>)> = HashMap::new();
    states.insert(vec![0; nodes], (0.0, Vec::new()));
    for opts in &options {
        let mut next: HashMap<Vec<i64>, (f64, Vec<usize>)> = HashMap::new();
        for (state, (welfare, picks)) in &states {
            for (k, (_, w, bal, node)) in opts.iter().enumerate() {
                let mut ns = state.clone();
                ns[*node] += bal;
                let nw = welfare + w;
                let entry = next.entry(ns).or_insert((f64::NEG_INFINITY, Vec::new()));
                if nw > entry.0 {
                    let mut np = picks.clone();
                    np.push(k);
                    *entry = (nw, np);
                }
            }
        }
        states = next;
    }
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for (state, (welfare, picks)) in &states {
        let ok = match &s.network {
            Network::OneNode => state[0] == 0,
            Network::TwoNode { line_capacity } => {
                state[0] + state[1] == 0 && state[0].abs() <= to_idx(to_f64(line_capacity))
            }
        };
        if ok && best.map(|(b, _)| *welfare > b + 1e-12).unwrap_or(true) {
            best = Some((*welfare, picks));
        }
    }
    let (value, picks) = best?;
    let mut unit_g = Vec::new();
    for i in 0..s.units.len() {
        unit_g.push(vec![options[i][picks[i]].0]);
    }
    let mut cons_d = Vec::new();
    for j in 0..s.consumers.len() {
        cons_d.push(vec![options[s.units.len() + j][picks[s.units.len() + j]].0]);
    }
    Some(BrutePrimal {
        value,
        unit_g,
        cons_d,
    })
}

/// Best profit of a player over a StatusOutputSet by quantity grid search.
fn grid_profit(
    s: &Scenario,
    is_unit: bool,
    idx: usize,
    set: &StatusOutputSet,
    prices: &[f64],
    step: f64,
) -> f64 {
    let t = s.periods();
    let mut best = f64::NEG_INFINITY;
    for prof in &set.closure().profiles {
        // per period grids over the profile ranges
        let mut grids: Vec<Vec<f64>> = Vec::new();
        for r in &prof.ranges {
            let mut pts = Vec::new();
            for iv in &r.intervals {
                let (Some(lo), Some(hi)) = (&iv.lo, &iv.hi) else {
                    continue;
                };
                pts.extend(grid_points(to_f64(lo), to_f64(hi), step));
            }
            grids.push(pts);
        }
        let mut counter = vec![0usize; t];
        'points: loop {
            let q: Vec<f64> = (0..t).map(|ti| grids[ti][counter[ti]]).collect();
            // ramp check
            let mut ok = true;
            if let Some(rc) = &prof.ramp {
                let mut prev = to_f64(&rc.initial_output);
                for &x in &q {
                    if (x - prev).abs() > to_f64(&rc.limit) + 1e-9 {
                        ok = false;
                        break;
                    }
                    prev = x;
                }
            }
            if ok {
                let linear: f64 = prices.iter().zip(&q).map(|(p, x)| p * x).sum();
                let value = if is_unit {
                    linear - unit_cost_f64(&s.units[idx], &prof.pattern, &q)
                } else {
                    consumer_benefit_f64(&s.consumers[idx], &prof.pattern, &q) - linear
                };
                if value > best {
                    best = value;
                }
            }
            let mut k = t;
            loop {
                if k == 0 {
                    break 'points;
                }
                k -= 1;
                counter[k] += 1;
                if counter[k] < grids[k].len() {
                    break;
                }
                counter[k] = 0;
            }
        }
    }
    best
}

/// Scan the dual objective on a price grid; returns the best grid price,
/// the near-optimal grid prices (small grids), and the objective at any
/// requested probe prices.
pub fn grid_dual_scan(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
    grid: &GridSpec,
    flat_tol: f64,
    probes: &[Vec<f64>],
) -> Result<BruteDualScan, String> {
    let dim = s.price_dim();
    if grid.price_grid.len() != dim {
        return Err(format!("price grid needs {dim} dimensions"));
    }
    let axes: Vec<Vec<f64>> = grid
        .price_grid
        .iter()
        .map(|(lo, hi, st)| grid_points(*lo, *hi, *st))
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    if total > 20_000_000 {
        return Err("price grid too large".into());
    }
    let keep_region = total <= 500_000;
    let nodes = s.nodes();
    let t = s.periods();
    let qstep = grid.quantity_step;

    let objective = |p: &[f64]| -> f64 {
        let mut val = 0.0;
        for (i, u) in s.units.iter().enumerate() {
            let prices: Vec<f64> = (0..t).map(|ti| p[ti * nodes + u.node]).collect();
            val += grid_profit(s, true, i, &unit_sets[i], &prices, qstep);
        }
        for (j, c) in s.consumers.iter().enumerate() {
            let prices: Vec<f64> = (0..t).map(|ti| p[ti * nodes + c.node]).collect();
            val += grid_profit(s, false, j, &cons_sets[j], &prices, qstep);
        }
        if let Network::TwoNode { line_capacity } = &s.network {
            for ti in 0..t {
                val += to_f64(line_capacity) * (p[ti * nodes + 1] - p[ti * nodes]).abs();
            }
        }
        val
    };

    let mut best = f64::INFINITY;
    let mut best_price = Vec::new();
    let mut evaluated: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut counter = vec![0usize; dim];
    loop {
        let p: Vec<f64> = (0..dim).map(|d| axes[d][counter[d]]).collect();
        let val = objective(&p);
        if val < best {
            best = val;
            best_price = p.clone();
        }
        if keep_region {
            evaluated.push((p, val));
        }
        let mut k = dim;
        loop {
            if k == 0 {
                let flat_region = evaluated
                    .into_iter()
                    .filter(|(_, v)| *v <= best + flat_tol)
                    .map(|(p, _)| p)
                    .collect();
                let probe_values = probes.iter().map(|p| objective(p)).collect();
                return Ok(BruteDualScan {
                    best_value: best,
                    best_price,
                    flat_region,
                    flat_tol,
                    probe_values,
                });
            }
            k -= 1;
            counter[k] += 1;
            if counter[k] < axes[k].len() {
                break;
            }
            counter[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvelib::{consumer_feasible_set, unit_feasible_set};
    use crate::model::builtin_example;
    use crate::rat::rat;

    #[test]
    fn brute_matches_exact_on_example3() {
        let s = builtin_example(3, None).unwrap();
        let b = brute_primal(&s, &GridSpec::quantities(1.0)).unwrap();
        // cost minimization: welfare = -cost
        assert!((b.value + 4815.0).abs() < 1e-6);
        assert!((b.unit_g[0][0] - 120.0).abs() < 1e-9);
        assert!((b.unit_g[1][0] - 80.0).abs() < 1e-9);
    }

    #[test]
    fn brute_example1_stays_dark() {
        let s = builtin_example(1, None).unwrap();
        let b = brute_primal(&s, &GridSpec::quantities(1.0)).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn brute_example5_welfare() {
        let s = builtin_example(5, None).unwrap();
        let b = brute_primal(&s, &GridSpec::quantities(1.0)).unwrap();
        assert!((b.value - 7200.0).abs() < 1e-6);
    }

    #[test]
    fn brute_example9_ramp() {
        let s = builtin_example(9, None).unwrap();
        let b = brute_primal(&s, &GridSpec::quantities(5.0)).unwrap();
        assert!((b.value + 2160.0).abs() < 1e-6);
        assert!((b.unit_g[0][0] - 80.0).abs() < 1e-9);
        assert!((b.unit_g[0][1] - 30.0).abs() < 1e-9);
    }

    #[test]
    fn dual_scan_example3_narrows_to_threshold() {
        let s = builtin_example(3, None).unwrap();
        let us: Vec<_> = s.units.iter().map(|u| unit_feasible_set(u, 1)).collect();
        let cs: Vec<_> = s
            .consumers
            .iter()
            .map(|c| consumer_feasible_set(c, 1))
            .collect();
        let scan = grid_dual_scan(
            &s,
            &us,
            &cs,
            &GridSpec {
                quantity_step: 1.0,
                price_grid: vec![(29.0, 31.0, 0.001)],
            },
            1e-6,
            &[],
        )
        .unwrap();
        assert!(
            (scan.best_price[0] - 30.094).abs() < 2e-3,
            "{}",
            scan.best_price[0]
        );
    }

    #[test]
    fn dual_scan_example1_flat_region_starts_at_bid() {
        // at a small positive inflation the dual rises strictly below the bid
        // price, so the scan pins the lower edge of the flat region
        let s = builtin_example(1, None).unwrap();
        let opp = crate::feasets::OpportunitySets::build(&s, None).unwrap();
        let (us, cs) = opp.player_sets(
            &s,
            &crate::feasets::SetChoice::Modified(crate::feasets::Eps::Value(crate::rat::ratio(
                1, 1000,
            ))),
        );
        let scan = grid_dual_scan(
            &s,
            &us,
            &cs,
            &GridSpec {
                quantity_step: 1.0,
                price_grid: vec![(0.0, 60.0, 0.5)],
            },
            1e-9,
            &[],
        )
        .unwrap();
        // flat optimal region starts at the bid price b = 20
        let min_flat = scan
            .flat_region
            .iter()
            .map(|p| p[0])
            .fold(f64::INFINITY, f64::min);
        assert!((min_flat - 20.0).abs() < 0.51, "{min_flat}");
        let _ = rat(0);
    }
}
