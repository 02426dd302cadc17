//! Opportunity sets: which volumes a player could actually realize as a
//! centralized-dispatch outcome with reduced caps, the sunk-state sets that
//! keep pricing non-confiscatory, and the modified per-player feasible sets
//! built from both.

use crate::curvelib::{
    consumer_feasible_set, unit_feasible_set, Interval, IntervalUnion, PlayerRef, Profile,
    RampChain, StatusOutputSet,
};
use crate::model::{Network, Scenario};
use crate::primal::{solve_primal, welfare_at, Caps, DispatchPoint, SolveError};
use crate::rat::{rat, ratio, Rat};
use num_traits::{Signed, Zero};

/// How a projection was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionMethod {
    ExactFixedLoad,
    ExactZeroMin,
    Mirror,
    CapSweep,
    TrivialFixed,
}

/// Inflation width for modified sets: a positive value or the downward limit.
#[derive(Debug, Clone, PartialEq)]
pub enum Eps {
    Limit,
    Value(Rat),
}

/// Which per-player sets a pricing run uses.
#[derive(Debug, Clone, PartialEq)]
pub enum SetChoice {
    Original,
    Modified(Eps),
}

/// Per-player opportunity projections and sunk sets for a scenario.
#[derive(Debug, Clone)]
pub struct OpportunitySets {
    pub unit_omega: Vec<StatusOutputSet>,
    pub cons_omega: Vec<StatusOutputSet>,
    pub unit_psi: Vec<StatusOutputSet>,
    pub cons_psi: Vec<StatusOutputSet>,
    pub unit_method: Vec<ConstructionMethod>,
    pub cons_method: Vec<ConstructionMethod>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Member,
    NotOptimal { capped_value: Rat, point_value: Rat },
    Infeasible { reason: String },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member)
    }
}

/// Fixed-point test: is the candidate optimal for the primal capped at the
/// candidate itself?
pub fn opportunity_membership(s: &Scenario, candidate: &DispatchPoint) -> Membership {
    let point_value = match welfare_at(s, candidate) {
        Ok(v) => v,
        Err(e) => {
            return Membership::Infeasible {
                reason: e.to_string(),
            }
        }
    };
    let caps = Caps::at_point(candidate);
    match solve_primal(s, Some(&caps)) {
        Ok(sol) => {
            if sol.value == point_value {
                Membership::Member
            } else {
                Membership::NotOptimal {
                    capped_value: sol.value,
                    point_value,
                }
            }
        }
        Err(e) => Membership::Infeasible {
            reason: e.to_string(),
        },
    }
}

// ---------------------------------------------------------------------------
// Sunk states
// ---------------------------------------------------------------------------

/// States of a unit achieving its sunk (minimum) cost.
pub fn unit_sunk_states(s: &Scenario, unit_idx: usize) -> StatusOutputSet {
    let u = &s.units[unit_idx];
    let t = s.periods();
    let x = unit_feasible_set(u, t);
    // profit at zero prices is -C, so the argmax is exactly the min-cost set
    let zero = vec![Rat::zero(); t];
    let pm =
        crate::curvelib::profit_max(PlayerRef::Unit(u), &x, &zero).expect("unit set non-empty");
    pm.argmax
}

/// States of a consumer achieving its sunk benefit (the benefit of the
/// mandatory consumption, zero under the elastic-only convention).
pub fn consumer_sunk_states(s: &Scenario, cons_idx: usize) -> StatusOutputSet {
    let c = &s.consumers[cons_idx];
    let t = s.periods();
    let mut profiles = Vec::new();
    let nblocks = c.blocks.len();
    for bits in 0..(1usize << nblocks) {
        let pattern: Vec<bool> = (0..nblocks).map(|k| bits & (1 << k) != 0).collect();
        let block_benefit: Rat = c
            .blocks
            .iter()
            .enumerate()
            .filter(|(k, _)| pattern[*k])
            .map(|(_, b)| b.quantity.iter().map(|q| &b.price * q).sum::<Rat>())
            .sum();
        if !block_benefit.is_zero() {
            continue;
        }
        let ranges: Vec<IntervalUnion> = (0..t)
            .map(|ti| {
                let mut base = c.fixed_load[ti].clone();
                for (k, b) in c.blocks.iter().enumerate() {
                    if pattern[k] {
                        base += b.quantity[ti].clone();
                    }
                }
                let mut iu = IntervalUnion::point(base.clone());
                if let Some(q) = &c.quadratic {
                    if q.linear.is_zero() && q.quad.is_zero() {
                        iu = IntervalUnion::closed(base.clone(), &base + &q.d_max);
                    } else if !q.linear.is_zero() && (&q.linear + &q.quad * &q.d_max).is_zero() {
                        iu.push(Interval::point(&base + &q.d_max));
                    }
                } else {
                    // trailing zero-price steps carry no benefit
                    let zero_cap: Rat = c.elastic[ti]
                        .iter()
                        .filter(|seg| seg.price.is_zero())
                        .map(|seg| seg.quantity.clone())
                        .sum();
                    if zero_cap.is_positive() {
                        iu = IntervalUnion::closed(base.clone(), &base + &zero_cap);
                    }
                }
                iu
            })
            .collect();
        profiles.push(Profile {
            pattern,
            ranges,
            ramp: None,
        });
    }
    StatusOutputSet::new(profiles)
}

// ---------------------------------------------------------------------------
// Exact projections
// ---------------------------------------------------------------------------

fn total_fixed_load(s: &Scenario, t: usize) -> Rat {
    s.consumers
        .iter()
        .map(|c| c.fixed_load[t].clone())
        .fold(Rat::zero(), |a, b| a + b)
}

fn consumers_pure_fixed(s: &Scenario) -> bool {
    s.consumers.iter().all(|c| {
        c.quadratic.is_none() && c.blocks.is_empty() && c.elastic.iter().all(|e| e.is_empty())
    })
}

/// Fixed-load single-period one-node projection of a unit: the feasible
/// states with some feasible completion, minus online-at-zero states of units
/// carrying a fixed charge.
pub fn opportunity_projection_fixed_load(
    s: &Scenario,
    unit_idx: usize,
) -> Result<StatusOutputSet, SolveError> {
    if s.periods() != 1 || s.nodes() != 1 || !consumers_pure_fixed(s) {
        return Err(SolveError::Unsupported(
            "fixed-load projection needs one period, one node, pure fixed load (use cap_sweep)"
                .into(),
        ));
    }
    let d = total_fixed_load(s, 0);
    let u = &s.units[unit_idx];
    let others: Vec<&crate::model::UnitSpec> = s
        .units
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != unit_idx)
        .map(|(_, x)| x)
        .collect();
    // deliverable ranges of the other units over commitment subsets
    let mut completions: Vec<(Rat, Rat)> = Vec::new();
    for bits in 0..(1usize << others.len()) {
        let mut lo = Rat::zero();
        let mut hi = Rat::zero();
        for (k, o) in others.iter().enumerate() {
            if bits & (1 << k) != 0 {
                lo += o.g_min.clone();
                hi += o.g_max.clone();
            }
        }
        completions.push((lo, hi));
    }
    let coverable = |need: &Rat| completions.iter().any(|(lo, hi)| need >= lo && need <= hi);

    let mut profiles = Vec::new();
    if coverable(&d) {
        profiles.push(Profile {
            pattern: vec![false],
            ranges: vec![IntervalUnion::point(Rat::zero())],
            ramp: None,
        });
        if u.g_min.is_zero() && u.no_load_cost.is_zero() && u.startup_cost.is_zero() {
            profiles.push(Profile {
                pattern: vec![true],
                ranges: vec![IntervalUnion::point(Rat::zero())],
                ramp: None,
            });
        }
    }
    // on-branch: g in [g_min, g_max] with the remainder coverable
    let mut on_union = IntervalUnion::empty();
    for (lo, hi) in &completions {
        // need d - g in [lo, hi]  =>  g in [d - hi, d - lo]
        let glo = (&d - hi).max(u.g_min.clone());
        let ghi = (&d - lo).min(u.g_max.clone());
        if glo <= ghi {
            // online at zero output with a fixed charge is never a restricted
            // optimum; keep such intervals open at zero
            let open_floor =
                glo.is_zero() && (u.no_load_cost.is_positive() || u.startup_cost.is_positive());
            on_union.push(Interval {
                lo: Some(glo),
                hi: Some(ghi),
                lo_open: open_floor,
                hi_open: false,
            });
        }
    }
    on_union
        .intervals
        .retain(|iv| !(iv.lo_open && iv.lo == iv.hi));
    if !on_union.is_empty() {
        profiles.push(Profile {
            pattern: vec![true],
            ranges: vec![on_union],
            ramp: None,
        });
    }
    Ok(StatusOutputSet::new(profiles))
}

/// Zero-minimum single-period one-node projection of a unit facing concave
/// (step or quadratic) bids: classify around the maximum realizable output
/// and the break-even minimum.
pub fn opportunity_projection_zero_min(
    s: &Scenario,
    unit_idx: usize,
) -> Result<StatusOutputSet, SolveError> {
    if s.periods() != 1 || s.nodes() != 1 {
        return Err(SolveError::Unsupported(
            "zero-minimum projection needs one period and one node".into(),
        ));
    }
    if s.units.iter().any(|u| !u.g_min.is_zero()) {
        return Err(SolveError::Unsupported(
            "zero-minimum projection requires every unit to have zero minimum output (use cap_sweep)".into(),
        ));
    }
    if s.consumers.iter().any(|c| !c.blocks.is_empty()) {
        return Err(SolveError::Unsupported(
            "zero-minimum projection requires concave bids (use cap_sweep)".into(),
        ));
    }
    let u = &s.units[unit_idx];
    let d_min_total = total_fixed_load(s, 0);

    // maximum realizable output: sole-supplier welfare optimum with ties
    // toward the largest output, or the unit's own cap when the fixed load
    // exceeds it
    let g_bar_max = if d_min_total < u.g_max {
        let mut caps = Caps::none(s);
        for i in 0..s.units.len() {
            if i != unit_idx {
                caps.unit_u[i] = Some(vec![false; s.periods()]);
            }
        }
        let sole = solve_primal(s, Some(&caps))?;
        sole.optima[0].unit_g[unit_idx][0].clone()
    } else {
        u.g_max.clone()
    };

    let w_free = u.no_load_cost.is_zero() && u.startup_cost.is_zero();
    let mut profiles = vec![Profile {
        pattern: vec![false],
        ranges: vec![IntervalUnion::point(Rat::zero())],
        ramp: None,
    }];
    if d_min_total.is_zero() {
        if g_bar_max.is_positive() {
            let g_bar_min = if w_free {
                Rat::zero()
            } else {
                break_even_min_output(s, unit_idx, &g_bar_max)?
            };
            profiles.push(Profile {
                pattern: vec![true],
                ranges: vec![IntervalUnion::closed(g_bar_min, g_bar_max)],
                ramp: None,
            });
        } else if w_free {
            profiles.push(Profile {
                pattern: vec![true],
                ranges: vec![IntervalUnion::point(Rat::zero())],
                ramp: None,
            });
        }
        // a fixed charge with zero realizable output leaves the off state only
    } else {
        let others_cap: Rat = s
            .units
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != unit_idx)
            .map(|(_, o)| o.g_max.clone())
            .sum();
        let g_bar_min = (&d_min_total - &others_cap).max(Rat::zero());
        let mut iu = IntervalUnion::empty();
        if g_bar_min <= g_bar_max {
            iu.push(Interval {
                lo: Some(g_bar_min.clone()),
                hi: Some(g_bar_max.clone()),
                lo_open: g_bar_min.is_zero() && !w_free,
                hi_open: false,
            });
            iu.intervals.retain(|iv| !(iv.lo_open && iv.lo == iv.hi));
        }
        if !iu.is_empty() {
            profiles.push(Profile {
                pattern: vec![true],
                ranges: vec![iu],
                ramp: None,
            });
        }
    }
    Ok(StatusOutputSet::new(profiles))
}

/// Lowest positive output at which the consumers' best benefit for exactly
/// that volume covers the unit's all-in cost.
fn break_even_min_output(s: &Scenario, unit_idx: usize, upper: &Rat) -> Result<Rat, SolveError> {
    let u = &s.units[unit_idx];
    let w = &u.no_load_cost + &u.startup_cost;
    let all_steps = s.consumers.iter().all(|c| c.quadratic.is_none());
    if all_steps {
        // aggregate the step bids in descending price order
        let mut steps: Vec<(Rat, Rat)> = Vec::new();
        for c in &s.consumers {
            for seg in &c.elastic[0] {
                steps.push((seg.price.clone(), seg.quantity.clone()));
            }
        }
        steps.sort_by(|a, b| b.0.cmp(&a.0));
        let mut g = Rat::zero();
        let mut benefit = Rat::zero();
        let mut f_prev = -w.clone();
        for (price, qty) in &steps {
            let g_next = (&g + qty).min(upper.clone());
            if g_next <= g {
                break;
            }
            let f_next = &benefit + price * (&g_next - &g) - u.cost.eval(&g_next) - &w;
            if f_prev.is_negative() && !f_next.is_negative() {
                let g0 = g.clone();
                let b0 = benefit.clone();
                let root = find_root_on_piece(&g, &g_next, &|x: &Rat| {
                    &b0 + price * (x - &g0) - u.cost.eval(x) - &w
                });
                return Ok(root);
            }
            benefit += price * (&g_next - &g);
            g = g_next;
            f_prev = f_next;
            if g == *upper {
                break;
            }
        }
        if !f_prev.is_negative() {
            return Ok(g);
        }
        Err(SolveError::Internal(
            "break-even output not found below the realizable maximum".into(),
        ))
    } else if s.consumers.len() == 1 {
        let c = &s.consumers[0];
        let q = c.quadratic.as_ref().ok_or_else(|| {
            SolveError::Unsupported("mixed bid shapes for break-even root".into())
        })?;
        match &u.cost {
            crate::model::CostCurve::Affine { slope } => {
                // quad g^2 + (linear - slope) g - w = 0 with quad < 0
                let a = q.quad.clone();
                let b = &q.linear - slope;
                let cc = -w.clone();
                let disc = &b * &b - rat(4) * &a * &cc;
                if disc.is_negative() {
                    return Err(SolveError::Internal("no break-even crossing".into()));
                }
                let sq = crate::curvelib::rational_sqrt(&disc);
                let mut roots = [(-&b + &sq) / (rat(2) * &a), (-&b - &sq) / (rat(2) * &a)];
                roots.sort();
                for r in roots {
                    if r.is_positive() && r <= *upper {
                        return Ok(r);
                    }
                }
                Err(SolveError::Internal("break-even root out of range".into()))
            }
            _ => Err(SolveError::Unsupported(
                "break-even root for quadratic bids needs an affine unit".into(),
            )),
        }
    } else {
        Err(SolveError::Unsupported(
            "break-even root requires step bids or a single quadratic consumer".into(),
        ))
    }
}

/// Root of an increasing function on [lo, hi] with f(lo) < 0 <= f(hi): exact
/// for affine pieces, bisection fallback otherwise.
fn find_root_on_piece(lo: &Rat, hi: &Rat, f: &dyn Fn(&Rat) -> Rat) -> Rat {
    let flo = f(lo);
    let fhi = f(hi);
    if fhi.is_zero() {
        return hi.clone();
    }
    let mid = (lo + hi) / rat(2);
    let fmid = f(&mid);
    if &flo + &fhi == rat(2) * &fmid {
        return lo - &flo * (hi - lo) / (&fhi - &flo);
    }
    let mut a = lo.clone();
    let mut b = hi.clone();
    let tol = ratio(1, 1_000_000_000) * ratio(1, 1_000_000_000);
    while &b - &a > tol {
        let m = (&a + &b) / rat(2);
        if f(&m).is_negative() {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

// ---------------------------------------------------------------------------
// Cap sweep
// ---------------------------------------------------------------------------

struct PlayerGrid {
    pattern: Vec<bool>,
    grids: Vec<Vec<Rat>>,
    ramp: Option<RampChain>,
}

/// Shared sweep state: balanced candidates are generated and verified once
/// per scenario, projections are then sliced per player.
pub struct SweepCache {
    resolution: Rat,
    verified: std::cell::RefCell<Option<Vec<DispatchPoint>>>,
}

impl SweepCache {
    pub fn new(resolution: Rat) -> Self {
        SweepCache {
            resolution,
            verified: std::cell::RefCell::new(None),
        }
    }

    pub fn resolution(&self) -> &Rat {
        &self.resolution
    }

    fn ensure(&self, s: &Scenario) -> Result<(), SolveError> {
        if self.verified.borrow().is_some() {
            return Ok(());
        }
        let pts = sweep_verified_points(s, &self.resolution)?;
        *self.verified.borrow_mut() = Some(pts);
        Ok(())
    }

    pub fn unit(&self, s: &Scenario, unit_idx: usize) -> Result<StatusOutputSet, SolveError> {
        self.ensure(s)?;
        let pts = self.verified.borrow();
        let pts = pts.as_ref().unwrap();
        let ramp = s.units[unit_idx]
            .ramp_limit
            .as_ref()
            .map(|limit| RampChain {
                limit: limit.clone(),
                initial_output: s.units[unit_idx].initial_output.clone(),
            });
        let mut set = collect_projection(
            pts.iter()
                .map(|p| (p.unit_on[unit_idx].clone(), p.unit_g[unit_idx].clone())),
            ramp,
            &self.resolution,
        );
        refine_endpoints(s, true, unit_idx, &mut set);
        Ok(set)
    }

    pub fn consumer(&self, s: &Scenario, cons_idx: usize) -> Result<StatusOutputSet, SolveError> {
        self.ensure(s)?;
        let pts = self.verified.borrow();
        let pts = pts.as_ref().unwrap();
        let mut set = collect_projection(
            pts.iter()
                .map(|p| (p.cons_v[cons_idx].clone(), p.cons_d[cons_idx].clone())),
            None,
            &self.resolution,
        );
        refine_endpoints(s, false, cons_idx, &mut set);
        Ok(set)
    }
}

/// Public entry matching the sweep operation: projection of one player from
/// the balanced-candidate sweep at the given resolution.
pub fn cap_sweep(
    s: &Scenario,
    player_is_unit: bool,
    idx: usize,
    resolution: Rat,
) -> Result<StatusOutputSet, SolveError> {
    let cache = SweepCache::new(resolution);
    if player_is_unit {
        cache.unit(s, idx)
    } else {
        cache.consumer(s, idx)
    }
}

fn collect_projection(
    points: impl Iterator<Item = (Vec<bool>, Vec<Rat>)>,
    ramp: Option<RampChain>,
    resolution: &Rat,
) -> StatusOutputSet {
    let mut profiles: Vec<Profile> = Vec::new();
    for (pattern, q) in points {
        let prof = Profile {
            pattern,
            ranges: q.iter().map(|x| IntervalUnion::point(x.clone())).collect(),
            ramp: ramp.clone(),
        };
        if !profiles.contains(&prof) {
            profiles.push(prof);
        }
    }
    let mut set = StatusOutputSet::new(profiles);
    set.resolution = Some(resolution.clone());
    set.coalesce();
    for p in set.profiles.iter_mut() {
        for r in p.ranges.iter_mut() {
            r.merge_within(resolution);
        }
    }
    set.coalesce();
    set
}

/// Enumerate balanced grid dispatches and keep the ones passing the
/// fixed-point membership test. Every restricted-primal optimum is itself a
/// balanced grid point whenever the caps are, so sweeping balanced candidates
/// loses nothing relative to sweeping raw cap vectors.
fn sweep_verified_points(s: &Scenario, resolution: &Rat) -> Result<Vec<DispatchPoint>, SolveError> {
    if !resolution.is_positive() {
        return Err(SolveError::Unsupported(
            "sweep resolution must be positive".into(),
        ));
    }
    let t = s.periods();
    let grid_of = |iu: &IntervalUnion| -> Vec<Rat> {
        let mut vals = Vec::new();
        for iv in &iu.intervals {
            let (Some(lo), Some(hi)) = (&iv.lo, &iv.hi) else {
                continue;
            };
            let mut x = lo.clone();
            while &x < hi {
                vals.push(x.clone());
                x += resolution.clone();
            }
            vals.push(hi.clone());
        }
        vals.sort();
        vals.dedup();
        vals
    };
    let grids_for = |set: &StatusOutputSet| -> Vec<PlayerGrid> {
        set.profiles
            .iter()
            .map(|prof| PlayerGrid {
                pattern: prof.pattern.clone(),
                grids: prof.ranges.iter().map(&grid_of).collect(),
                ramp: prof.ramp.clone(),
            })
            .collect()
    };
    let unit_grids: Vec<Vec<PlayerGrid>> = s
        .units
        .iter()
        .map(|u| grids_for(&unit_feasible_set(u, t)))
        .collect();
    let cons_grids: Vec<Vec<PlayerGrid>> = s
        .consumers
        .iter()
        .map(|c| grids_for(&consumer_feasible_set(c, t)))
        .collect();

    let line_cap = match &s.network {
        Network::OneNode => None,
        Network::TwoNode { line_capacity } => Some(line_capacity.clone()),
    };

    let mut verified: Vec<DispatchPoint> = Vec::new();
    let mut candidates: u64 = 0;

    let mut pidx = vec![0usize; unit_grids.len() + cons_grids.len()];
    'patterns: loop {
        let u_sel: Vec<&PlayerGrid> = unit_grids
            .iter()
            .enumerate()
            .map(|(i, g)| &g[pidx[i]])
            .collect();
        let c_sel: Vec<&PlayerGrid> = cons_grids
            .iter()
            .enumerate()
            .map(|(j, g)| &g[pidx[unit_grids.len() + j]])
            .collect();

        let mut per_period: Vec<Vec<(Vec<Rat>, Vec<Rat>, Rat)>> = Vec::new();
        for ti in 0..t {
            let mut tuples = Vec::new();
            enumerate_balanced(
                s,
                &u_sel,
                &c_sel,
                ti,
                line_cap.as_ref(),
                &mut tuples,
                &mut candidates,
            )?;
            per_period.push(tuples);
        }
        if per_period.iter().all(|p| !p.is_empty()) {
            let mut combo_idx = vec![0usize; t];
            'combine: loop {
                let picked: Vec<&(Vec<Rat>, Vec<Rat>, Rat)> =
                    (0..t).map(|ti| &per_period[ti][combo_idx[ti]]).collect();
                let mut ok = true;
                for (i, g) in u_sel.iter().enumerate() {
                    if let Some(rc) = &g.ramp {
                        let mut prev = rc.initial_output.clone();
                        for p in &picked {
                            if (&p.0[i] - &prev).abs() > rc.limit {
                                ok = false;
                                break;
                            }
                            prev = p.0[i].clone();
                        }
                    }
                    if !ok {
                        break;
                    }
                }
                if ok {
                    let point = DispatchPoint {
                        unit_on: u_sel.iter().map(|g| g.pattern.clone()).collect(),
                        unit_g: (0..u_sel.len())
                            .map(|i| picked.iter().map(|p| p.0[i].clone()).collect())
                            .collect(),
                        cons_v: c_sel.iter().map(|g| g.pattern.clone()).collect(),
                        cons_d: (0..c_sel.len())
                            .map(|j| picked.iter().map(|p| p.1[j].clone()).collect())
                            .collect(),
                        flow: if line_cap.is_some() {
                            picked.iter().map(|p| p.2.clone()).collect()
                        } else {
                            Vec::new()
                        },
                        objective: Rat::zero(),
                        flat: false,
                    };
                    if opportunity_membership(s, &point).is_member() {
                        verified.push(point);
                    }
                }
                let mut k = t;
                loop {
                    if k == 0 {
                        break 'combine;
                    }
                    k -= 1;
                    combo_idx[k] += 1;
                    if combo_idx[k] < per_period[k].len() {
                        break;
                    }
                    combo_idx[k] = 0;
                }
            }
        }

        let mut k = pidx.len();
        loop {
            if k == 0 {
                break 'patterns;
            }
            k -= 1;
            pidx[k] += 1;
            let len = if k < unit_grids.len() {
                unit_grids[k].len()
            } else {
                cons_grids[k - unit_grids.len()].len()
            };
            if pidx[k] < len {
                break;
            }
            pidx[k] = 0;
        }
    }
    Ok(verified)
}

/// Recursive enumeration of balanced quantity tuples in one period.
fn enumerate_balanced(
    s: &Scenario,
    units: &[&PlayerGrid],
    consumers: &[&PlayerGrid],
    ti: usize,
    line_cap: Option<&Rat>,
    out: &mut Vec<(Vec<Rat>, Vec<Rat>, Rat)>,
    candidates: &mut u64,
) -> Result<(), SolveError> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        s: &Scenario,
        units: &[&PlayerGrid],
        consumers: &[&PlayerGrid],
        ti: usize,
        line_cap: Option<&Rat>,
        k: usize,
        gs: &mut Vec<Rat>,
        ds: &mut Vec<Rat>,
        out: &mut Vec<(Vec<Rat>, Vec<Rat>, Rat)>,
        candidates: &mut u64,
    ) -> Result<(), SolveError> {
        let n = units.len() + consumers.len();
        if k == n {
            *candidates += 1;
            if *candidates > 2_000_000 {
                return Err(SolveError::Unsupported(
                    "sweep resolution too fine for this scenario".into(),
                ));
            }
            let mut res = vec![Rat::zero(); s.nodes()];
            for (i, u) in s.units.iter().enumerate() {
                res[u.node] += gs[i].clone();
            }
            for (j, c) in s.consumers.iter().enumerate() {
                res[c.node] -= ds[j].clone();
            }
            match line_cap {
                None => {
                    if res[0].is_zero() {
                        out.push((gs.clone(), ds.clone(), Rat::zero()));
                    }
                }
                Some(cap) => {
                    let f = res[0].clone();
                    if (&res[0] + &res[1]).is_zero() && f.abs() <= *cap {
                        out.push((gs.clone(), ds.clone(), f));
                    }
                }
            }
            return Ok(());
        }
        let grid: &[Rat] = if k < units.len() {
            &units[k].grids[ti]
        } else {
            &consumers[k - units.len()].grids[ti]
        };
        for v in grid {
            if k < units.len() {
                gs.push(v.clone());
            } else {
                ds.push(v.clone());
            }
            recurse(
                s,
                units,
                consumers,
                ti,
                line_cap,
                k + 1,
                gs,
                ds,
                out,
                candidates,
            )?;
            if k < units.len() {
                gs.pop();
            } else {
                ds.pop();
            }
        }
        Ok(())
    }
    let mut gs = Vec::new();
    let mut ds = Vec::new();
    recurse(
        s, units, consumers, ti, line_cap, 0, &mut gs, &mut ds, out, candidates,
    )
}

// ---------------------------------------------------------------------------
// Endpoint refinement (single period, single node)
// ---------------------------------------------------------------------------

/// Probe whether quantity x of one player is realizable: cap only that player
/// at x, re-solve, and accept when some optimum pins the player at x and is
/// its own fixed point.
fn probe_player_point(s: &Scenario, is_unit: bool, idx: usize, x: &Rat) -> bool {
    let mut caps = Caps::none(s);
    if is_unit {
        caps.unit_g[idx] = Some(vec![x.clone()]);
    } else {
        caps.cons_d[idx] = Some(vec![x.clone()]);
    }
    let Ok(sol) = solve_primal(s, Some(&caps)) else {
        return false;
    };
    for point in &sol.optima {
        let q = if is_unit {
            &point.unit_g[idx][0]
        } else {
            &point.cons_d[idx][0]
        };
        if q == x && opportunity_membership(s, point).is_member() {
            return true;
        }
    }
    false
}

/// Sharpen interval endpoints between grid points by bisecting the
/// realizability probe. Endpoints move only to probe-verified members, so the
/// refined set stays sound.
fn refine_endpoints(s: &Scenario, is_unit: bool, idx: usize, set: &mut StatusOutputSet) {
    if s.periods() != 1 || s.nodes() != 1 {
        return;
    }
    let Some(res) = set.resolution.clone() else {
        return;
    };
    for prof in set.profiles.iter_mut() {
        for iv in prof.ranges[0].intervals.iter_mut() {
            let (Some(lo), Some(hi)) = (iv.lo.clone(), iv.hi.clone()) else {
                continue;
            };
            if lo == hi {
                continue;
            }
            let mut a = (&lo - &res).max(Rat::zero());
            let mut b = lo.clone();
            if a < b {
                for _ in 0..40 {
                    let m = (&a + &b) / rat(2);
                    if m == b || m == a {
                        break;
                    }
                    if probe_player_point(s, is_unit, idx, &m) {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                iv.lo = Some(b);
            }
            let mut a2 = hi.clone();
            let mut b2 = &hi + &res;
            for _ in 0..40 {
                let m = (&a2 + &b2) / rat(2);
                if m == a2 || m == b2 {
                    break;
                }
                if probe_player_point(s, is_unit, idx, &m) {
                    a2 = m;
                } else {
                    b2 = m;
                }
            }
            iv.hi = Some(a2);
        }
    }
}

// ---------------------------------------------------------------------------
// Modified sets and the top-level build
// ---------------------------------------------------------------------------

/// The player's modified feasible set: sunk states plus the opportunity
/// projection inflated by eps inside the original set. The downward limit is
/// realized as the closure with zero inflation; payoffs over it equal the
/// limits of the positive-eps payoffs because profits are continuous on the
/// closures.
pub fn modified_player_set(
    original: &StatusOutputSet,
    omega: &StatusOutputSet,
    psi: &StatusOutputSet,
    eps: &Eps,
) -> StatusOutputSet {
    let eps_val = match eps {
        Eps::Limit => Rat::zero(),
        Eps::Value(e) => e.clone(),
    };
    let omega = omega.closure();
    let mut profiles: Vec<Profile> = psi.closure().profiles;
    // inflate each projection profile inside every original pattern whose
    // boxes intersect the inflated quantity window (inflation is a quantity
    // neighborhood, so it can cross commitment patterns)
    for bar in &omega.profiles {
        for xprof in &original.profiles {
            let mut ranges = Vec::new();
            let mut ok = true;
            for (t, bar_range) in bar.ranges.iter().enumerate() {
                let xr = &xprof.ranges[t];
                let (Some(xlo), Some(xhi)) = (xr.min_element(), xr.max_element()) else {
                    ok = false;
                    break;
                };
                let infl = bar_range.inflate_clip(&eps_val, xlo, xhi);
                let mut inter = IntervalUnion::empty();
                for a in &infl.intervals {
                    for b in &xr.intervals {
                        let lo = a.lo.clone().unwrap().max(b.lo.clone().unwrap());
                        let hi = a.hi.clone().unwrap().min(b.hi.clone().unwrap());
                        if lo <= hi {
                            inter.intervals.push(Interval::closed(lo, hi));
                        }
                    }
                }
                inter.normalize();
                if inter.is_empty() {
                    ok = false;
                    break;
                }
                ranges.push(inter);
            }
            if ok {
                profiles.push(Profile {
                    pattern: xprof.pattern.clone(),
                    ranges,
                    ramp: xprof.ramp.clone(),
                });
            }
        }
    }
    let mut dedup: Vec<Profile> = Vec::new();
    for p in profiles {
        if !dedup.contains(&p) {
            dedup.push(p);
        }
    }
    let mut set = StatusOutputSet::new(dedup);
    set.coalesce();
    set
}

fn project_unit(
    s: &Scenario,
    unit_idx: usize,
    sweep: &SweepCache,
) -> Result<(StatusOutputSet, ConstructionMethod), SolveError> {
    if s.periods() == 1 && s.nodes() == 1 {
        if consumers_pure_fixed(s) {
            return Ok((
                opportunity_projection_fixed_load(s, unit_idx)?,
                ConstructionMethod::ExactFixedLoad,
            ));
        }
        let zero_min_ok = s.units.iter().all(|u| u.g_min.is_zero())
            && s.consumers.iter().all(|c| c.blocks.is_empty());
        if zero_min_ok {
            match opportunity_projection_zero_min(s, unit_idx) {
                Ok(set) => return Ok((set, ConstructionMethod::ExactZeroMin)),
                Err(SolveError::Unsupported(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok((sweep.unit(s, unit_idx)?, ConstructionMethod::CapSweep))
}

/// Consumer projection. Pure fixed-load consumers project to their fixed
/// point; a single consumer facing a single producer mirrors the producer's
/// projection through the power balance; everything else goes through the
/// sweep.
pub fn opportunity_projection_consumer(
    s: &Scenario,
    cons_idx: usize,
    sweep: &SweepCache,
) -> Result<(StatusOutputSet, ConstructionMethod), SolveError> {
    let c = &s.consumers[cons_idx];
    let t = s.periods();
    let pure_fixed =
        c.quadratic.is_none() && c.blocks.is_empty() && c.elastic.iter().all(|e| e.is_empty());
    if pure_fixed {
        return Ok((
            StatusOutputSet::new(vec![Profile {
                pattern: Vec::new(),
                ranges: c
                    .fixed_load
                    .iter()
                    .map(|d| IntervalUnion::point(d.clone()))
                    .collect(),
                ramp: None,
            }]),
            ConstructionMethod::TrivialFixed,
        ));
    }
    if s.consumers.len() == 1 && s.units.len() == 1 && t == 1 && s.nodes() == 1 {
        let prod = project_unit(s, 0, sweep)?.0;
        let mut iu = IntervalUnion::empty();
        for p in &prod.profiles {
            for iv in &p.ranges[0].intervals {
                iu.intervals.push(iv.clone());
            }
        }
        iu.normalize();
        return Ok((
            StatusOutputSet::new(vec![Profile {
                pattern: vec![false; c.blocks.len()],
                ranges: vec![iu],
                ramp: None,
            }]),
            ConstructionMethod::Mirror,
        ));
    }
    let set = sweep.consumer(s, cons_idx)?;
    Ok((set, ConstructionMethod::CapSweep))
}

impl OpportunitySets {
    /// Build projections and sunk sets for every player, choosing exact
    /// constructions where their preconditions hold and the balanced-grid
    /// sweep elsewhere.
    pub fn build(s: &Scenario, resolution: Option<Rat>) -> Result<OpportunitySets, SolveError> {
        let sweep = SweepCache::new(resolution.unwrap_or_else(|| rat(1)));
        let mut unit_omega = Vec::new();
        let mut unit_method = Vec::new();
        for i in 0..s.units.len() {
            let (set, method) = project_unit(s, i, &sweep)?;
            unit_omega.push(set);
            unit_method.push(method);
        }
        let mut cons_omega = Vec::new();
        let mut cons_method = Vec::new();
        for j in 0..s.consumers.len() {
            let (set, method) = opportunity_projection_consumer(s, j, &sweep)?;
            cons_omega.push(set);
            cons_method.push(method);
        }
        let unit_psi = (0..s.units.len()).map(|i| unit_sunk_states(s, i)).collect();
        let cons_psi = (0..s.consumers.len())
            .map(|j| consumer_sunk_states(s, j))
            .collect();
        Ok(OpportunitySets {
            unit_omega,
            cons_omega,
            unit_psi,
            cons_psi,
            unit_method,
            cons_method,
        })
    }

    /// Per-player sets used by a pricing run.
    pub fn player_sets(
        &self,
        s: &Scenario,
        choice: &SetChoice,
    ) -> (Vec<StatusOutputSet>, Vec<StatusOutputSet>) {
        let t = s.periods();
        match choice {
            SetChoice::Original => (
                s.units.iter().map(|u| unit_feasible_set(u, t)).collect(),
                s.consumers
                    .iter()
                    .map(|c| consumer_feasible_set(c, t))
                    .collect(),
            ),
            SetChoice::Modified(eps) => {
                let units = (0..s.units.len())
                    .map(|i| {
                        modified_player_set(
                            &unit_feasible_set(&s.units[i], t),
                            &self.unit_omega[i],
                            &self.unit_psi[i],
                            eps,
                        )
                    })
                    .collect();
                let cons = (0..s.consumers.len())
                    .map(|j| {
                        modified_player_set(
                            &consumer_feasible_set(&s.consumers[j], t),
                            &self.cons_omega[j],
                            &self.cons_psi[j],
                            eps,
                        )
                    })
                    .collect();
                (units, cons)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_example;

    fn omega_on_interval(set: &StatusOutputSet) -> Option<(Rat, Rat)> {
        set.profiles
            .iter()
            .find(|p| p.pattern == vec![true])
            .and_then(|p| {
                let iv = p.ranges[0].intervals.last()?;
                Some((iv.lo.clone()?, iv.hi.clone()?))
            })
    }

    #[test]
    fn example3_fixed_load_projection() {
        let s = builtin_example(3, None).unwrap();
        let p1 = opportunity_projection_fixed_load(&s, 0).unwrap();
        assert_eq!(omega_on_interval(&p1), Some((rat(80), rat(120))));
        let p2 = opportunity_projection_fixed_load(&s, 1).unwrap();
        assert_eq!(omega_on_interval(&p2), Some((rat(80), rat(120))));
        // neither unit can cover 200 alone, so the off state is not realizable
        assert!(!p1.profiles.iter().any(|p| p.pattern == vec![false]));
    }

    #[test]
    fn example4_fixed_load_projection() {
        let s = builtin_example(4, None).unwrap();
        let p1 = opportunity_projection_fixed_load(&s, 0).unwrap();
        assert_eq!(omega_on_interval(&p1), Some((rat(40), rat(120))));
        let p2 = opportunity_projection_fixed_load(&s, 1).unwrap();
        assert_eq!(omega_on_interval(&p2), Some((rat(80), rat(160))));
    }

    #[test]
    fn single_unit_zero_demand_projection() {
        let mut s = builtin_example(3, None).unwrap();
        s.units.truncate(1);
        s.units[0].no_load_cost = rat(5);
        s.consumers[0].fixed_load = vec![Rat::zero()];
        let p = opportunity_projection_fixed_load(&s, 0).unwrap();
        assert_eq!(p.profiles.len(), 1);
        assert_eq!(p.profiles[0].pattern, vec![false]);
    }

    #[test]
    fn example1_zero_min_projection_collapses() {
        let s = builtin_example(1, None).unwrap();
        let p = opportunity_projection_zero_min(&s, 0).unwrap();
        assert_eq!(p.profiles.len(), 1);
        assert_eq!(p.profiles[0].pattern, vec![false]);
    }

    #[test]
    fn example2_zero_min_projection() {
        let s = builtin_example(2, None).unwrap();
        let p = opportunity_projection_zero_min(&s, 0).unwrap();
        let (lo, hi) = omega_on_interval(&p).unwrap();
        // optimum consumption 30; break-even minimum d_max(1 - sqrt(1 - 4w/(a d_max)))/2
        assert_eq!(hi, rat(30));
        let expect = rat(60) * (rat(1) - crate::curvelib::rational_sqrt(&ratio(1, 3))) / rat(2);
        assert!((&lo - &expect).abs() < ratio(1, 1_000_000));
    }

    #[test]
    fn example6_zero_min_projection() {
        let s = builtin_example(6, None).unwrap();
        for i in 0..2 {
            let p = opportunity_projection_zero_min(&s, i).unwrap();
            assert_eq!(omega_on_interval(&p), Some((rat(51), rat(80))), "unit {i}");
            assert!(p.profiles.iter().any(|pr| pr.pattern == vec![false]));
        }
    }

    #[test]
    fn example3_membership_cases() {
        let s = builtin_example(3, None).unwrap();
        let sol = solve_primal(&s, None).unwrap();
        assert!(opportunity_membership(&s, &sol.optima[0]).is_member());
        // (160, 40) breaks unit 2's minimum
        let mut bad = sol.optima[0].clone();
        bad.unit_g[0] = vec![rat(160)];
        bad.unit_g[1] = vec![rat(40)];
        assert!(!opportunity_membership(&s, &bad).is_member());
    }

    #[test]
    fn example7_membership_rejects_over_cap() {
        let s = builtin_example(7, None).unwrap();
        let sol = solve_primal(&s, None).unwrap();
        let mut bad = sol.optima[0].clone();
        bad.cons_d[0] = vec![rat(100)];
        bad.unit_g[0] = vec![rat(300)];
        assert!(!opportunity_membership(&s, &bad).is_member());
    }

    #[test]
    fn example3_sunk_sets() {
        let s = builtin_example(3, None).unwrap();
        // unit 1 has no fixed charge but a 80 MWh floor: only off costs zero
        let psi1 = unit_sunk_states(&s, 0);
        assert!(psi1.contains(&[false], &[Rat::zero()]));
        assert_eq!(psi1.profiles.len(), 1);
        let psi2 = unit_sunk_states(&s, 1);
        assert!(psi2.contains(&[false], &[Rat::zero()]));
        assert_eq!(psi2.profiles.len(), 1);
    }

    #[test]
    fn example4_sunk_includes_online_at_zero() {
        let s = builtin_example(4, None).unwrap();
        let psi1 = unit_sunk_states(&s, 0);
        assert!(psi1.contains(&[false], &[Rat::zero()]));
        assert!(psi1.contains(&[true], &[Rat::zero()]));
    }

    #[test]
    fn fixed_consumer_sunk_is_fixed_point() {
        let s = builtin_example(3, None).unwrap();
        let psi = consumer_sunk_states(&s, 0);
        assert_eq!(psi.profiles.len(), 1);
        assert!(psi.contains(&[], &[rat(200)]));
    }

    #[test]
    fn example3_modified_sets() {
        let s = builtin_example(3, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        let x2 = unit_feasible_set(&s.units[1], 1);
        let m = modified_player_set(
            &x2,
            &sets.unit_omega[1],
            &sets.unit_psi[1],
            &Eps::Value(rat(5)),
        );
        assert!(m.contains(&[true], &[rat(125)]));
        assert!(!m.contains(&[true], &[rat(126)]));
        assert!(m.contains(&[false], &[Rat::zero()]));
        assert!(!m.contains(&[true], &[rat(79)])); // clipped at g_min
        let m0 = modified_player_set(&x2, &sets.unit_omega[1], &sets.unit_psi[1], &Eps::Limit);
        assert!(m0.contains(&[true], &[rat(120)]));
        assert!(!m0.contains(&[true], &[ratio(241, 2)]));
    }

    #[test]
    fn example1_modified_inflation_crosses_patterns() {
        let s = builtin_example(1, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        let x = unit_feasible_set(&s.units[0], 1);
        let m = modified_player_set(
            &x,
            &sets.unit_omega[0],
            &sets.unit_psi[0],
            &Eps::Value(rat(2)),
        );
        // inflating the off state reaches online outputs up to eps
        assert!(m.contains(&[true], &[rat(2)]));
        assert!(!m.contains(&[true], &[rat(3)]));
        let m0 = modified_player_set(&x, &sets.unit_omega[0], &sets.unit_psi[0], &Eps::Limit);
        assert!(m0.contains(&[false], &[Rat::zero()]));
    }

    #[test]
    fn example9_sweep_projection() {
        let s = builtin_example(9, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        assert_eq!(sets.unit_method[0], ConstructionMethod::CapSweep);
        let omega = &sets.unit_omega[0];
        assert_eq!(omega.profiles.len(), 1);
        assert_eq!(omega.profiles[0].pattern, vec![true, true]);
        assert!(omega.contains(&[true, true], &[rat(80), rat(30)]));
        assert!(!omega.contains(&[true, true], &[rat(80), rat(31)]));
        let cons = &sets.cons_omega[0];
        assert!(cons.contains(&[], &[rat(80), rat(30)]));
        assert!(!cons.contains(&[], &[rat(80), rat(31)]));
    }

    #[test]
    fn example8_sweep_projection() {
        let s = builtin_example(8, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        assert!(sets.unit_omega[0].contains(&[true], &[rat(150)]));
        assert!(!sets.unit_omega[0].contains(&[true], &[rat(151)]));
        // the remote unit cannot run at all: only its off state is realizable
        assert!(sets.unit_omega[1].contains(&[false], &[Rat::zero()]));
        assert_eq!(sets.unit_omega[1].profiles.len(), 1);
    }

    #[test]
    fn example5_consumer_sweep_with_refined_endpoint() {
        let s = builtin_example(5, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        let c1 = &sets.cons_omega[0];
        assert!(c1.contains(&[], &[rat(100)]));
        assert!(c1.contains(&[], &[Rat::zero()]));
        // lowest nonzero realizable consumption: [(a - b2) g + w]/(b1 - b2)
        let expect = ratio(1300, 85);
        let lo = c1
            .profiles
            .iter()
            .flat_map(|p| p.ranges[0].intervals.iter())
            .filter_map(|iv| iv.lo.clone())
            .filter(|x| x.is_positive())
            .min()
            .unwrap();
        assert!(
            (&lo - &expect).abs() < ratio(1, 1_000_000),
            "lo = {lo}, expected ~{expect}"
        );
    }

    #[test]
    fn example7_consumer_sweep() {
        let s = builtin_example(7, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        let c1 = &sets.cons_omega[0];
        assert!(c1.contains(&[], &[rat(50)]));
        assert!(c1.contains(&[], &[Rat::zero()]));
        assert!(!c1.contains(&[], &[rat(60)]));
        let c2 = &sets.cons_omega[1];
        assert!(c2.contains(&[true], &[rat(200)]));
        assert!(c2.contains(&[false], &[Rat::zero()]));
    }

    #[test]
    fn example6_consumer_sweep_interval() {
        let s = builtin_example(6, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        let c = &sets.cons_omega[0];
        assert!(c.contains(&[], &[rat(51)]));
        assert!(c.contains(&[], &[rat(80)]));
        assert!(c.contains(&[], &[rat(60)]));
        assert!(!c.contains(&[], &[rat(50)]));
        assert!(!c.contains(&[], &[rat(81)]));
        assert!(c.contains(&[], &[Rat::zero()]));
    }

    #[test]
    fn containment_chain_and_monotonicity() {
        let s = builtin_example(3, None).unwrap();
        let sets = OpportunitySets::build(&s, None).unwrap();
        let x2 = unit_feasible_set(&s.units[1], 1);
        let m1 = modified_player_set(
            &x2,
            &sets.unit_omega[1],
            &sets.unit_psi[1],
            &Eps::Value(rat(1)),
        );
        let m2 = modified_player_set(
            &x2,
            &sets.unit_omega[1],
            &sets.unit_psi[1],
            &Eps::Value(rat(10)),
        );
        for prof in &sets.unit_psi[1].profiles {
            for q in prof.ranges[0].sample_points() {
                assert!(m1.contains(&prof.pattern, std::slice::from_ref(&q)));
            }
        }
        for prof in &m1.profiles {
            for q in prof.ranges[0].sample_points() {
                assert!(m2.contains(&prof.pattern, std::slice::from_ref(&q)));
                assert!(x2.contains(&prof.pattern, &[q]));
            }
        }
    }

    #[test]
    fn modified_primal_preserves_optimum() {
        for n in [3usize, 5, 6, 7] {
            let s = builtin_example(n, None).unwrap();
            let base = solve_primal(&s, None).unwrap();
            let sets = OpportunitySets::build(&s, None).unwrap();
            let (us, cs) = sets.player_sets(&s, &SetChoice::Modified(Eps::Value(ratio(1, 2))));
            let modif = crate::primal::solve_primal_over(&s, &us, &cs, None).unwrap();
            assert_eq!(modif.value, base.value, "example {n}");
        }
    }

    #[test]
    fn omega_fixed_points_pass_membership() {
        let s = builtin_example(3, None).unwrap();
        // vertices and a midpoint of the unit-1 projection, completed through
        // the balance by unit 2
        for q in [rat(80), rat(100), rat(120)] {
            let point = DispatchPoint {
                unit_on: vec![vec![true], vec![true]],
                unit_g: vec![vec![q.clone()], vec![rat(200) - &q]],
                cons_v: vec![vec![]],
                cons_d: vec![vec![rat(200)]],
                flow: Vec::new(),
                objective: Rat::zero(),
                flat: false,
            };
            assert!(opportunity_membership(&s, &point).is_member(), "at {q}");
        }
    }
}
