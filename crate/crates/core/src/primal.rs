//! Centralized dispatch: welfare maximization (cost minimization for pure
//! fixed load) over commitments and dispatch, with optional per-player caps
//! realizing the restricted problems used by the opportunity-set machinery.

use crate::curvelib::{
    consumer_feasible_set, ramp_polygon_vertices, unit_feasible_set, Interval, IntervalUnion,
    PlayerRef, StatusOutputSet,
};
use crate::model::{Network, Scenario};
use crate::rat::{rat, Rat};
use crate::simplex::{solve_lp, Lp, LpOutcome, LpRow, Relation};
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("too many discrete patterns ({0}); desk-scale guard is 2^20")]
    TooManyPatterns(u128),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Internal(String),
}

/// Whether the scenario is a pure fixed-load cost minimization or a welfare
/// maximization with price-sensitive load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    CostMin,
    WelfareMax,
}

pub fn objective_kind(s: &Scenario) -> ObjectiveKind {
    let price_sensitive = s.consumers.iter().any(|c| {
        c.quadratic.is_some() || !c.blocks.is_empty() || c.elastic.iter().any(|e| !e.is_empty())
    });
    if price_sensitive {
        ObjectiveKind::WelfareMax
    } else {
        ObjectiveKind::CostMin
    }
}

/// A feasible commitment/dispatch outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchPoint {
    /// Commitment pattern per unit per period.
    pub unit_on: Vec<Vec<bool>>,
    /// Output per unit per period.
    pub unit_g: Vec<Vec<Rat>>,
    /// Block pattern per consumer.
    pub cons_v: Vec<Vec<bool>>,
    /// Total consumption per consumer per period.
    pub cons_d: Vec<Vec<Rat>>,
    /// Line flow node0 -> node1 per period (two-node networks).
    pub flow: Vec<Rat>,
    /// Objective value at this point (cost or welfare per scenario kind).
    pub objective: Rat,
    /// Alternative optimal dispatches exist for the same discrete pattern.
    pub flat: bool,
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub kind: ObjectiveKind,
    /// Optimal cost (CostMin) or welfare (WelfareMax).
    pub value: Rat,
    /// One representative per optimal discrete pattern, in deterministic
    /// enumeration order (all-on patterns first).
    pub optima: Vec<DispatchPoint>,
}

/// Optional per-player per-period upper bounds (the restricted primal).
#[derive(Debug, Clone, Default)]
pub struct Caps {
    /// unit id index -> per-period commitment cap (false forbids ON)
    pub unit_u: Vec<Option<Vec<bool>>>,
    /// unit id index -> per-period output cap
    pub unit_g: Vec<Option<Vec<Rat>>>,
    /// consumer id index -> per-block cap (false forbids taking the block)
    pub cons_v: Vec<Option<Vec<bool>>>,
    /// consumer id index -> per-period consumption cap
    pub cons_d: Vec<Option<Vec<Rat>>>,
}

impl Caps {
    pub fn none(s: &Scenario) -> Caps {
        Caps {
            unit_u: vec![None; s.units.len()],
            unit_g: vec![None; s.units.len()],
            cons_v: vec![None; s.consumers.len()],
            cons_d: vec![None; s.consumers.len()],
        }
    }

    /// Caps equal to a dispatch point (the fixed-point test of the
    /// opportunity construction).
    pub fn at_point(point: &DispatchPoint) -> Caps {
        Caps {
            unit_u: point.unit_on.iter().map(|p| Some(p.clone())).collect(),
            unit_g: point.unit_g.iter().map(|g| Some(g.clone())).collect(),
            cons_v: point.cons_v.iter().map(|p| Some(p.clone())).collect(),
            cons_d: point.cons_d.iter().map(|d| Some(d.clone())).collect(),
        }
    }
}

/// Solve the centralized dispatch over the players' original feasible sets.
pub fn solve_primal(s: &Scenario, caps: Option<&Caps>) -> Result<PrimalSolution, SolveError> {
    let unit_sets: Vec<StatusOutputSet> = s
        .units
        .iter()
        .map(|u| unit_feasible_set(u, s.periods()))
        .collect();
    let cons_sets: Vec<StatusOutputSet> = s
        .consumers
        .iter()
        .map(|c| consumer_feasible_set(c, s.periods()))
        .collect();
    solve_primal_over(s, &unit_sets, &cons_sets, caps)
}

/// One enumerable cell: a profile with single-interval ranges per period.
#[derive(Debug, Clone)]
struct Atom {
    pattern: Vec<bool>,
    lo: Vec<Rat>,
    hi: Vec<Rat>,
    ramp: Option<crate::curvelib::RampChain>,
}

fn atoms_of(set: &StatusOutputSet, periods: usize) -> Vec<Atom> {
    let mut out = Vec::new();
    for prof in &set.closure().profiles {
        // cartesian product of per-period interval components
        let mut partial: Vec<(Vec<Rat>, Vec<Rat>)> = vec![(Vec::new(), Vec::new())];
        for t in 0..periods {
            let mut next = Vec::new();
            for iv in &prof.ranges[t].intervals {
                let (Some(lo), Some(hi)) = (&iv.lo, &iv.hi) else {
                    continue;
                };
                for (plo, phi) in &partial {
                    let mut nlo = plo.clone();
                    let mut nhi = phi.clone();
                    nlo.push(lo.clone());
                    nhi.push(hi.clone());
                    next.push((nlo, nhi));
                }
            }
            partial = next;
        }
        for (lo, hi) in partial {
            out.push(Atom {
                pattern: prof.pattern.clone(),
                lo,
                hi,
                ramp: prof.ramp.clone(),
            });
        }
    }
    out
}

/// Order patterns all-on first so representative optima are deterministic.
fn atom_sort_key(a: &Atom) -> (Vec<bool>, Vec<Rat>) {
    (
        a.pattern.iter().map(|b| !b).collect(),
        a.lo.iter().map(|x| -x.clone()).collect(),
    )
}

/// Solve the dispatch over explicit per-player profile sets (original sets,
/// modified sets, or anything StatusOutputSet-shaped).
pub fn solve_primal_over(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
    caps: Option<&Caps>,
) -> Result<PrimalSolution, SolveError> {
    let t = s.periods();
    let kind = objective_kind(s);
    let default_caps = Caps::none(s);
    let caps = caps.unwrap_or(&default_caps);

    let mut unit_atoms: Vec<Vec<Atom>> = Vec::new();
    for (i, set) in unit_sets.iter().enumerate() {
        let mut atoms = atoms_of(set, t);
        // apply commitment and output caps
        atoms.retain(|a| match &caps.unit_u[i] {
            Some(cap) => a.pattern.iter().zip(cap).all(|(on, c)| !*on || *c),
            None => true,
        });
        if let Some(gcap) = &caps.unit_g[i] {
            for a in atoms.iter_mut() {
                for ti in 0..t {
                    if a.hi[ti] > gcap[ti] {
                        a.hi[ti] = gcap[ti].clone();
                    }
                }
            }
            atoms.retain(|a| a.lo.iter().zip(&a.hi).all(|(l, h)| l <= h));
        }
        atoms.sort_by_key(atom_sort_key);
        if atoms.is_empty() {
            return Err(SolveError::Infeasible(format!(
                "unit {} has no feasible state under caps",
                s.units[i].id
            )));
        }
        unit_atoms.push(atoms);
    }
    let mut cons_atoms: Vec<Vec<Atom>> = Vec::new();
    for (j, set) in cons_sets.iter().enumerate() {
        let mut atoms = atoms_of(set, t);
        atoms.retain(|a| match &caps.cons_v[j] {
            Some(cap) => a.pattern.iter().zip(cap).all(|(on, c)| !*on || *c),
            None => true,
        });
        if let Some(dcap) = &caps.cons_d[j] {
            for a in atoms.iter_mut() {
                for ti in 0..t {
                    if a.hi[ti] > dcap[ti] {
                        a.hi[ti] = dcap[ti].clone();
                    }
                }
            }
            atoms.retain(|a| a.lo.iter().zip(&a.hi).all(|(l, h)| l <= h));
        }
        atoms.sort_by_key(atom_sort_key);
        if atoms.is_empty() {
            return Err(SolveError::Infeasible(format!(
                "consumer {} has no feasible state under caps (fixed load unservable)",
                s.consumers[j].id
            )));
        }
        cons_atoms.push(atoms);
    }

    let mut combos: u128 = 1;
    for a in unit_atoms.iter().chain(cons_atoms.iter()) {
        combos = combos.saturating_mul(a.len() as u128);
        if combos > (1 << 20) {
            return Err(SolveError::TooManyPatterns(combos));
        }
    }

    let has_quadratic = s.units.iter().any(|u| u.cost.is_quadratic())
        || s.consumers.iter().any(|c| c.quadratic.is_some());
    if has_quadratic && (t > 1 || s.nodes() > 1) {
        return Err(SolveError::Unsupported(
            "quadratic curves are supported for single-period one-node scenarios".into(),
        ));
    }

    let mut best: Option<Rat> = None;
    let mut optima: Vec<DispatchPoint> = Vec::new();
    let mut idx = vec![0usize; unit_atoms.len() + cons_atoms.len()];
    'combo: loop {
        let u_sel: Vec<&Atom> = unit_atoms
            .iter()
            .enumerate()
            .map(|(i, a)| &a[idx[i]])
            .collect();
        let c_sel: Vec<&Atom> = cons_atoms
            .iter()
            .enumerate()
            .map(|(j, a)| &a[idx[unit_atoms.len() + j]])
            .collect();

        if let Some(point) = dispatch_atom(s, &u_sel, &c_sel)? {
            let welfare = evaluate_objective(s, &point);
            let cmp_value = welfare.clone();
            match &best {
                Some(b) if &cmp_value < b => {}
                Some(b) if &cmp_value == b => {
                    if !optima
                        .iter()
                        .any(|o| o.unit_on == point.unit_on && o.cons_v == point.cons_v)
                    {
                        optima.push(point);
                    }
                }
                _ => {
                    best = Some(cmp_value);
                    optima = vec![point];
                }
            }
        }

        // advance mixed-radix index
        let mut k = idx.len();
        loop {
            if k == 0 {
                break 'combo;
            }
            k -= 1;
            idx[k] += 1;
            let len = if k < unit_atoms.len() {
                unit_atoms[k].len()
            } else {
                cons_atoms[k - unit_atoms.len()].len()
            };
            if idx[k] < len {
                break;
            }
            idx[k] = 0;
        }
    }

    let best = best.ok_or_else(|| {
        // name the binding constraint: compare mandatory demand per period
        // against the best deliverable supply over all atoms
        for ti in 0..t {
            let need: Rat = cons_atoms
                .iter()
                .map(|atoms| atoms.iter().map(|a| a.lo[ti].clone()).min().unwrap())
                .sum();
            let supply: Rat = unit_atoms
                .iter()
                .map(|atoms| atoms.iter().map(|a| a.hi[ti].clone()).max().unwrap())
                .sum();
            if need > supply {
                return SolveError::Infeasible(format!(
                    "fixed load unservable in period {ti}: mandatory demand {} exceeds capped supply {}",
                    crate::rat::format_exact(&need),
                    crate::rat::format_exact(&supply),
                ));
            }
        }
        SolveError::Infeasible("no commitment pattern balances the system under the given sets".into())
    })?;
    let value = match kind {
        ObjectiveKind::CostMin => -best.clone(),
        ObjectiveKind::WelfareMax => best.clone(),
    };
    for o in optima.iter_mut() {
        o.objective = value.clone();
    }
    Ok(PrimalSolution {
        kind,
        value,
        optima,
    })
}

/// Welfare (benefit minus cost) of a dispatch point; cost-minimization
/// scenarios report the negated cost internally.
fn evaluate_objective(s: &Scenario, p: &DispatchPoint) -> Rat {
    let mut w = Rat::zero();
    for (j, c) in s.consumers.iter().enumerate() {
        w += c.benefit(&p.cons_v[j], &p.cons_d[j]);
    }
    for (i, u) in s.units.iter().enumerate() {
        w -= u.total_cost(&p.unit_on[i], &p.unit_g[i]);
    }
    w
}

/// Continuous dispatch for a fixed atom combination. Returns None when the
/// balance cannot be met within the atom's bounds.
fn dispatch_atom(
    s: &Scenario,
    units: &[&Atom],
    consumers: &[&Atom],
) -> Result<Option<DispatchPoint>, SolveError> {
    // ramp feasibility at pattern level (transitions to/from offline)
    for (i, a) in units.iter().enumerate() {
        if let Some(ramp) = &a.ramp {
            let ranges: Vec<IntervalUnion> =
                a.lo.iter()
                    .zip(&a.hi)
                    .map(|(l, h)| IntervalUnion {
                        intervals: vec![Interval::closed(l.clone(), h.clone())],
                    })
                    .collect();
            if ramp_polygon_vertices(&ranges, ramp).is_none() {
                let _ = i;
                return Ok(None);
            }
        }
    }
    let t = s.periods();
    let coupled = s.units.iter().any(|u| u.ramp_limit.is_some()) && t > 1;
    if s.nodes() == 1 && t == 1 && !coupled {
        dispatch_merit(s, units, consumers)
    } else {
        dispatch_lp(s, units, consumers)
    }
}

/// Exact merit-order dispatch for one period, one node: find the shadow price
/// where best-response supply meets best-response demand.
fn dispatch_merit(
    s: &Scenario,
    units: &[&Atom],
    consumers: &[&Atom],
) -> Result<Option<DispatchPoint>, SolveError> {
    // candidate shadow prices: every marginal value the best responses can take
    let mut candidates: Vec<Rat> = vec![Rat::zero()];
    for (i, u) in s.units.iter().enumerate() {
        let a = units[i];
        if !a.pattern[0] {
            continue;
        }
        candidates.push(u.cost.slope_right(&a.lo[0]));
        candidates.push(u.cost.slope_left(&a.hi[0]));
        for b in u.cost.breakpoints() {
            if b > a.lo[0] && b < a.hi[0] {
                candidates.push(u.cost.slope_right(&b));
                candidates.push(u.cost.slope_left(&b));
            }
        }
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let a = consumers[j];
        for seg in &c.elastic[0] {
            candidates.push(seg.price.clone());
        }
        if let Some(q) = &c.quadratic {
            // marginal benefit at the atom's reachable ends
            let mut base = c.fixed_load[0].clone();
            for (k, blk) in c.blocks.iter().enumerate() {
                if a.pattern.get(k).copied().unwrap_or(false) {
                    base += blk.quantity[0].clone();
                }
            }
            for d in [&a.lo[0], &a.hi[0]] {
                let e = (d - &base).max(Rat::zero());
                candidates.push(&q.linear + rat(2) * &q.quad * e);
            }
        }
    }
    candidates.sort();
    candidates.dedup();

    let response = |mu: &Rat| -> (Rat, Rat) {
        // (min, max) of aggregate excess supply at shadow price mu
        let mut emin = Rat::zero();
        let mut emax = Rat::zero();
        for (i, u) in s.units.iter().enumerate() {
            let a = units[i];
            let (_, alo, ahi) = crate::curvelib::best_response_interval(
                PlayerRef::Unit(u),
                &a.pattern,
                0,
                &a.lo[0],
                &a.hi[0],
                mu,
            );
            emin += alo;
            emax += ahi;
        }
        for (j, c) in s.consumers.iter().enumerate() {
            let a = consumers[j];
            let (_, alo, ahi) = crate::curvelib::best_response_interval(
                PlayerRef::Consumer(c),
                &a.pattern,
                0,
                &a.lo[0],
                &a.hi[0],
                mu,
            );
            emin -= ahi;
            emax -= alo;
        }
        (emin, emax)
    };

    // global feasibility of the balance within bounds
    let sup_max: Rat = units.iter().map(|a| a.hi[0].clone()).sum();
    let sup_min: Rat = units.iter().map(|a| a.lo[0].clone()).sum();
    let dem_max: Rat = consumers.iter().map(|a| a.hi[0].clone()).sum();
    let dem_min: Rat = consumers.iter().map(|a| a.lo[0].clone()).sum();
    if sup_max < dem_min || sup_min > dem_max {
        return Ok(None);
    }

    let mut chosen: Option<Rat> = None;
    for mu in &candidates {
        let (emin, emax) = response(mu);
        if !emin.is_positive() && !emax.is_negative() {
            chosen = Some(mu.clone());
            break;
        }
    }
    if chosen.is_none() {
        // interior crossing within a piece bounded by adjacent candidates:
        // the excess is affine there, so two probes pin the root exactly
        for w in candidates.windows(2) {
            let p1 = (&w[0] * rat(2) + &w[1]) / rat(3);
            let p2 = (&w[0] + &w[1] * rat(2)) / rat(3);
            let (e1min, e1max) = response(&p1);
            let (e2min, e2max) = response(&p2);
            if e1min != e1max || e2min != e2max {
                continue; // ties live at candidate prices, not inside pieces
            }
            if e1min == e2min {
                if e1min.is_zero() {
                    chosen = Some(p1);
                    break;
                }
                continue;
            }
            let root = &p1 - &e1min * (&p2 - &p1) / (&e2min - &e1min);
            if root > w[0] && root < w[1] {
                let (rmin, rmax) = response(&root);
                if !rmin.is_positive() && !rmax.is_negative() {
                    chosen = Some(root);
                    break;
                }
            }
        }
    }
    // price-insensitive corner: everything pinned, no candidate needed
    let Some(mu) = chosen.or_else(|| {
        let (emin, emax) = response(candidates.last().unwrap_or(&Rat::zero()));
        if !emin.is_positive() && !emax.is_negative() {
            Some(candidates.last().cloned().unwrap_or_else(Rat::zero))
        } else {
            None
        }
    }) else {
        return Ok(None);
    };

    // allocate: start supplies at their argmax minimum, demands at maximum,
    // then close the residual deterministically in player order
    let mut g: Vec<Rat> = Vec::new();
    let mut gslack: Vec<Rat> = Vec::new();
    for (i, u) in s.units.iter().enumerate() {
        let a = units[i];
        let (_, alo, ahi) = crate::curvelib::best_response_interval(
            PlayerRef::Unit(u),
            &a.pattern,
            0,
            &a.lo[0],
            &a.hi[0],
            &mu,
        );
        gslack.push(&ahi - &alo);
        g.push(alo);
    }
    let mut d: Vec<Rat> = Vec::new();
    let mut dslack: Vec<Rat> = Vec::new();
    for (j, c) in s.consumers.iter().enumerate() {
        let a = consumers[j];
        let (_, alo, ahi) = crate::curvelib::best_response_interval(
            PlayerRef::Consumer(c),
            &a.pattern,
            0,
            &a.lo[0],
            &a.hi[0],
            &mu,
        );
        dslack.push(&ahi - &alo);
        d.push(ahi);
    }
    // supplies start at their argmax minimum and demands at their maximum,
    // so the residual is non-negative; close it by raising supplies first,
    // then trimming demands, in player order
    let mut residual: Rat =
        d.iter().fold(Rat::zero(), |a, x| a + x) - g.iter().fold(Rat::zero(), |a, x| a + x);
    if residual.is_negative() {
        return Ok(None);
    }
    for (gi, slack) in g.iter_mut().zip(&gslack) {
        if residual.is_zero() {
            break;
        }
        let take = residual.clone().min(slack.clone());
        *gi += take.clone();
        residual -= take;
    }
    for (dj, slack) in d.iter_mut().zip(&dslack) {
        if residual.is_zero() {
            break;
        }
        let take = residual.clone().min(slack.clone());
        *dj -= take.clone();
        residual -= take;
    }
    if !residual.is_zero() {
        return Ok(None);
    }

    // alternative optima exist iff two distinct players can trade a
    // balance-preserving transfer inside their argmax intervals: one with
    // room to raise net supply and another with room to lower it
    let mut raisers: Vec<usize> = Vec::new(); // player slots that can add net supply
    let mut lowerers: Vec<usize> = Vec::new();
    for (i, u) in s.units.iter().enumerate() {
        let a = units[i];
        let (_, alo, ahi) = crate::curvelib::best_response_interval(
            PlayerRef::Unit(u),
            &a.pattern,
            0,
            &a.lo[0],
            &a.hi[0],
            &mu,
        );
        if g[i] < ahi {
            raisers.push(i);
        }
        if g[i] > alo {
            lowerers.push(i);
        }
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let a = consumers[j];
        let (_, alo, ahi) = crate::curvelib::best_response_interval(
            PlayerRef::Consumer(c),
            &a.pattern,
            0,
            &a.lo[0],
            &a.hi[0],
            &mu,
        );
        let slot = s.units.len() + j;
        if d[j] > alo {
            raisers.push(slot); // consuming less frees supply
        }
        if d[j] < ahi {
            lowerers.push(slot);
        }
    }
    let flat = raisers.iter().any(|r| lowerers.iter().any(|l| l != r));

    Ok(Some(DispatchPoint {
        unit_on: units.iter().map(|a| a.pattern.clone()).collect(),
        unit_g: g.into_iter().map(|x| vec![x]).collect(),
        cons_v: consumers.iter().map(|a| a.pattern.clone()).collect(),
        cons_d: d.into_iter().map(|x| vec![x]).collect(),
        flow: Vec::new(),
        objective: Rat::zero(),
        flat,
    }))
}

/// LP dispatch for coupled periods and/or two nodes (affine data).
fn dispatch_lp(
    s: &Scenario,
    units: &[&Atom],
    consumers: &[&Atom],
) -> Result<Option<DispatchPoint>, SolveError> {
    let t = s.periods();
    let nodes = s.nodes();
    // variables: g_{i,t}, then e_{j,t,seg}, then flow_t (two-node)
    let mut objective: Vec<Rat> = Vec::new();
    let mut bounds: Vec<(Rat, Rat)> = Vec::new();
    let mut g_index = Vec::new();
    for (i, u) in s.units.iter().enumerate() {
        let a = units[i];
        let slope = match &u.cost {
            crate::model::CostCurve::Affine { slope } => slope.clone(),
            _ => {
                return Err(SolveError::Unsupported(
                    "piecewise/quadratic costs need the single-period path".into(),
                ))
            }
        };
        for ti in 0..t {
            g_index.push((i, ti));
            objective.push(-slope.clone());
            bounds.push((a.lo[ti].clone(), a.hi[ti].clone()));
        }
    }
    let mut e_index = Vec::new();
    for (j, c) in s.consumers.iter().enumerate() {
        let a = consumers[j];
        for ti in 0..t {
            let mut base = c.fixed_load[ti].clone();
            for (k, blk) in c.blocks.iter().enumerate() {
                if a.pattern.get(k).copied().unwrap_or(false) {
                    base += blk.quantity[ti].clone();
                }
            }
            for (si, seg) in c.elastic[ti].iter().enumerate() {
                e_index.push((j, ti, si, base.clone()));
                objective.push(seg.price.clone());
                bounds.push((Rat::zero(), seg.quantity.clone()));
            }
        }
    }
    let mut flow_index = Vec::new();
    if let Network::TwoNode { line_capacity } = &s.network {
        for ti in 0..t {
            flow_index.push(ti);
            objective.push(Rat::zero());
            bounds.push((-line_capacity.clone(), line_capacity.clone()));
        }
    }
    let nvars = objective.len();

    let mut rows: Vec<LpRow> = Vec::new();
    // nodal balance rows: sum g - sum d - outflow = 0
    for ti in 0..t {
        for n in 0..nodes {
            let mut coeffs = vec![Rat::zero(); nvars];
            let mut rhs = Rat::zero();
            for (vi, (i, tt)) in g_index.iter().enumerate() {
                if *tt == ti && s.units[*i].node == n {
                    coeffs[vi] = rat(1);
                }
            }
            for (off, (j, tt, _si, base)) in e_index.iter().enumerate() {
                if *tt == ti && s.consumers[*j].node == n {
                    coeffs[g_index.len() + off] = rat(-1);
                    let _ = base;
                }
            }
            // mandatory consumption at this node/period
            for (j, c) in s.consumers.iter().enumerate() {
                if c.node == n {
                    let a = consumers[j];
                    let mut base = c.fixed_load[ti].clone();
                    for (k, blk) in c.blocks.iter().enumerate() {
                        if a.pattern.get(k).copied().unwrap_or(false) {
                            base += blk.quantity[ti].clone();
                        }
                    }
                    rhs += base;
                }
            }
            for (off, tt) in flow_index.iter().enumerate() {
                if *tt == ti {
                    coeffs[g_index.len() + e_index.len() + off] =
                        if n == 0 { rat(-1) } else { rat(1) };
                }
            }
            rows.push(LpRow {
                coeffs,
                relation: Relation::Eq,
                rhs,
            });
        }
    }
    // consumer atom bounds on total flexible consumption per period
    for (j, c) in s.consumers.iter().enumerate() {
        let a = consumers[j];
        for ti in 0..t {
            let mut base = c.fixed_load[ti].clone();
            for (k, blk) in c.blocks.iter().enumerate() {
                if a.pattern.get(k).copied().unwrap_or(false) {
                    base += blk.quantity[ti].clone();
                }
            }
            let elo = (&a.lo[ti] - &base).max(Rat::zero());
            let ehi = &a.hi[ti] - &base;
            if ehi.is_negative() {
                return Ok(None);
            }
            let mut coeffs_hi = vec![Rat::zero(); nvars];
            let mut any = false;
            for (off, (jj, tt, _si, _)) in e_index.iter().enumerate() {
                if *jj == j && *tt == ti {
                    coeffs_hi[g_index.len() + off] = rat(1);
                    any = true;
                }
            }
            if any {
                rows.push(LpRow {
                    coeffs: coeffs_hi.clone(),
                    relation: Relation::Le,
                    rhs: ehi,
                });
                if elo.is_positive() {
                    let neg: Vec<Rat> = coeffs_hi.iter().map(|c| -c.clone()).collect();
                    rows.push(LpRow {
                        coeffs: neg,
                        relation: Relation::Le,
                        rhs: -elo,
                    });
                }
            } else if elo.is_positive() {
                return Ok(None); // demands a flexible floor with no segments
            }
        }
    }
    // ramp rows between consecutive periods, and against the initial output
    for (i, u) in s.units.iter().enumerate() {
        let Some(limit) = &u.ramp_limit else { continue };
        let a = units[i];
        for ti in 0..t {
            let prev: Option<usize> = if ti == 0 { None } else { Some(ti - 1) };
            let gvar = g_index
                .iter()
                .position(|(ii, tt)| *ii == i && *tt == ti)
                .unwrap();
            match prev {
                None => {
                    // |g_0 - initial| <= limit folds into bounds
                    let lo = (&u.initial_output - limit).max(a.lo[0].clone());
                    let hi = (&u.initial_output + limit).min(a.hi[0].clone());
                    if lo > hi {
                        return Ok(None);
                    }
                    bounds[gvar] = (lo, hi);
                }
                Some(tp) => {
                    let pvar = g_index
                        .iter()
                        .position(|(ii, tt)| *ii == i && *tt == tp)
                        .unwrap();
                    for sign in [rat(1), rat(-1)] {
                        let mut coeffs = vec![Rat::zero(); nvars];
                        coeffs[gvar] = sign.clone();
                        coeffs[pvar] = -sign.clone();
                        rows.push(LpRow {
                            coeffs,
                            relation: Relation::Le,
                            rhs: limit.clone(),
                        });
                    }
                }
            }
        }
    }

    let lp = Lp {
        objective,
        rows,
        bounds,
    };
    match solve_lp(&lp) {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(SolveError::Internal("bounded LP reported unbounded".into())),
        LpOutcome::Optimal { solution, .. } => {
            let mut unit_g = vec![vec![Rat::zero(); t]; s.units.len()];
            for (vi, (i, ti)) in g_index.iter().enumerate() {
                unit_g[*i][*ti] = solution[vi].clone();
            }
            let mut cons_d: Vec<Vec<Rat>> = Vec::new();
            for (j, c) in s.consumers.iter().enumerate() {
                let a = consumers[j];
                let mut per = Vec::new();
                for ti in 0..t {
                    let mut base = c.fixed_load[ti].clone();
                    for (k, blk) in c.blocks.iter().enumerate() {
                        if a.pattern.get(k).copied().unwrap_or(false) {
                            base += blk.quantity[ti].clone();
                        }
                    }
                    let mut e = Rat::zero();
                    for (off, (jj, tt, _si, _)) in e_index.iter().enumerate() {
                        if *jj == j && *tt == ti {
                            e += solution[g_index.len() + off].clone();
                        }
                    }
                    per.push(base + e);
                }
                cons_d.push(per);
            }
            let flow: Vec<Rat> = flow_index
                .iter()
                .enumerate()
                .map(|(off, _)| solution[g_index.len() + e_index.len() + off].clone())
                .collect();
            Ok(Some(DispatchPoint {
                unit_on: units.iter().map(|a| a.pattern.clone()).collect(),
                unit_g,
                cons_v: consumers.iter().map(|a| a.pattern.clone()).collect(),
                cons_d,
                flow,
                objective: Rat::zero(),
                flat: false,
            }))
        }
    }
}

/// Objective value at a feasible point; errors when the point violates its
/// feasible sets or the balance.
pub fn welfare_at(s: &Scenario, point: &DispatchPoint) -> Result<Rat, SolveError> {
    let t = s.periods();
    for (i, u) in s.units.iter().enumerate() {
        let set = unit_feasible_set(u, t);
        if !set.contains(&point.unit_on[i], &point.unit_g[i]) {
            return Err(SolveError::Infeasible(format!(
                "unit {} dispatch outside its feasible set",
                u.id
            )));
        }
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let set = consumer_feasible_set(c, t);
        if !set.contains(&point.cons_v[j], &point.cons_d[j]) {
            return Err(SolveError::Infeasible(format!(
                "consumer {} consumption outside its feasible set",
                c.id
            )));
        }
    }
    for res in balance_residuals(s, point) {
        if !res.is_zero() {
            return Err(SolveError::Infeasible("power balance violated".into()));
        }
    }
    let w = evaluate_objective(s, point);
    Ok(match objective_kind(s) {
        ObjectiveKind::CostMin => -w,
        ObjectiveKind::WelfareMax => w,
    })
}

/// Per-(node, period) balance residuals (supply minus demand minus outflow).
pub fn balance_residuals(s: &Scenario, p: &DispatchPoint) -> Vec<Rat> {
    let t = s.periods();
    let nodes = s.nodes();
    let mut out = Vec::new();
    for ti in 0..t {
        for n in 0..nodes {
            let mut r = Rat::zero();
            for (i, u) in s.units.iter().enumerate() {
                if u.node == n {
                    r += p.unit_g[i][ti].clone();
                }
            }
            for (j, c) in s.consumers.iter().enumerate() {
                if c.node == n {
                    r -= p.cons_d[j][ti].clone();
                }
            }
            if nodes == 2 {
                let f = p.flow.get(ti).cloned().unwrap_or_else(Rat::zero);
                if n == 0 {
                    r -= f;
                } else {
                    r += f;
                }
            }
            out.push(r);
        }
    }
    out
}

/// Build the whole-scenario dispatch point for the unique trivial all-off
/// state (used in tests).
pub fn all_off_point(s: &Scenario) -> DispatchPoint {
    let t = s.periods();
    DispatchPoint {
        unit_on: s.units.iter().map(|_| vec![false; t]).collect(),
        unit_g: s.units.iter().map(|_| vec![Rat::zero(); t]).collect(),
        cons_v: s
            .consumers
            .iter()
            .map(|c| vec![false; c.blocks.len()])
            .collect(),
        cons_d: s.consumers.iter().map(|_| vec![Rat::zero(); t]).collect(),
        flow: if s.nodes() == 2 {
            vec![Rat::zero(); t]
        } else {
            Vec::new()
        },
        objective: Rat::zero(),
        flat: false,
    }
}
