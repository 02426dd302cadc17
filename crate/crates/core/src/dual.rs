//! Dual pricing: price-set computation over original or modified player sets,
//! optimality certificates, duality gaps, and uplift accounting.

use crate::curvelib::{profit_max, Interval, IntervalUnion, PlayerRef, StatusOutputSet};
use crate::feasets::{Eps, OpportunitySets, SetChoice};
use crate::model::{Network, RoundingPolicy, Scenario};
use crate::primal::{objective_kind, ObjectiveKind, PrimalSolution, SolveError};
use crate::rat::{rat, round_cents_half_up, Rat};
use crate::simplex::{solve_lp, Lp, LpOutcome, LpRow, Relation};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// One price per (period, node), period-major: index = t * nodes + n.
pub type PriceVector = Vec<Rat>;

fn player_prices(p: &[Rat], node: usize, nodes: usize, periods: usize) -> Vec<Rat> {
    (0..periods).map(|t| p[t * nodes + node].clone()).collect()
}

/// The set of optimal prices, reported exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceSetStructure {
    /// One-dimensional duals: interval union over price, rays allowed.
    Interval(IntervalUnion),
    /// Higher dimensions: certified optimal vertices.
    Points(Vec<PriceVector>),
}

#[derive(Debug, Clone)]
pub struct PriceSetReport {
    /// Lexicographically minimal optimum.
    pub canonical: PriceVector,
    /// Dual optimum in the scenario's own form (cost for fixed load, welfare
    /// otherwise).
    pub dual_value: Rat,
    pub structure: PriceSetStructure,
    /// Mixture certificate at the canonical price.
    pub certificate: Vec<CertRow>,
    /// Set when endpoints came through a sweep-built set.
    pub approx: bool,
}

/// One player's share of a zero-excess-supply mixture.
#[derive(Debug, Clone)]
pub struct CertRow {
    pub player: String,
    pub is_unit: bool,
    /// (pattern, quantities, weight)
    pub weights: Vec<(Vec<bool>, Vec<Rat>, Rat)>,
}

/// Per-player uplift accounting at a given price.
#[derive(Debug, Clone)]
pub struct UpliftRow {
    pub player: String,
    pub is_unit: bool,
    /// Dispatch profit at the settlement price.
    pub dispatch_profit: Rat,
    /// Reported best profit (dispatch profit plus uplift).
    pub best_profit: Rat,
    pub uplift: Rat,
}

#[derive(Debug, Clone)]
pub struct UpliftReport {
    /// Price used for settlement (policy applied).
    pub price_used: PriceVector,
    /// The exact price before rounding.
    pub price_exact: PriceVector,
    pub rounding: RoundingPolicy,
    pub rows: Vec<UpliftRow>,
    /// Transmission-rights row (two-node scenarios).
    pub ftr: Option<UpliftRow>,
    pub total_dispatch_profit: Rat,
    pub total_best_profit: Rat,
    pub total_uplift: Rat,
    /// Congestion rent at the dispatched flow (two-node).
    pub congestion_rent: Rat,
}

/// Evaluate the dual objective (min form) at a fixed price: the sum of all
/// players' best profits over their sets, plus the line term for two-node
/// networks.
pub fn dual_value(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
    p: &[Rat],
) -> Result<Rat, SolveError> {
    let t = s.periods();
    let nodes = s.nodes();
    let mut total = Rat::zero();
    for (i, u) in s.units.iter().enumerate() {
        let prices = player_prices(p, u.node, nodes, t);
        total += profit_max(PlayerRef::Unit(u), &unit_sets[i], &prices)
            .map_err(SolveError::Internal)?
            .value;
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let prices = player_prices(p, c.node, nodes, t);
        total += profit_max(PlayerRef::Consumer(c), &cons_sets[j], &prices)
            .map_err(SolveError::Internal)?
            .value;
    }
    if let Network::TwoNode { line_capacity } = &s.network {
        for ti in 0..t {
            total += line_capacity * (&p[ti * nodes + 1] - &p[ti * nodes]).abs();
        }
    }
    Ok(total)
}

fn dual_value_in_form(kind: ObjectiveKind, min_form: &Rat) -> Rat {
    match kind {
        ObjectiveKind::CostMin => -min_form.clone(),
        ObjectiveKind::WelfareMax => min_form.clone(),
    }
}

// ---------------------------------------------------------------------------
// Membership
// ---------------------------------------------------------------------------

/// True when zero excess supply is attainable by convex combinations of the
/// players' best responses at p (jointly across periods, with a consistent
/// line flow). Returns the mixture certificate on success.
pub fn price_membership(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
    p: &[Rat],
) -> Result<Option<Vec<CertRow>>, SolveError> {
    let t = s.periods();
    let nodes = s.nodes();
    let mut players: Vec<(String, bool, usize, Vec<(Vec<bool>, Vec<Rat>)>)> = Vec::new();
    for (i, u) in s.units.iter().enumerate() {
        let prices = player_prices(p, u.node, nodes, t);
        let pm =
            profit_max(PlayerRef::Unit(u), &unit_sets[i], &prices).map_err(SolveError::Internal)?;
        players.push((u.id.clone(), true, u.node, pm.extreme_points));
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let prices = player_prices(p, c.node, nodes, t);
        let pm = profit_max(PlayerRef::Consumer(c), &cons_sets[j], &prices)
            .map_err(SolveError::Internal)?;
        players.push((c.id.clone(), false, c.node, pm.extreme_points));
    }

    // at equal nodal prices the line flow is free within the band, otherwise
    // it is pinned at the rent-maximizing end
    let mut flow_bounds: Vec<(Rat, Rat)> = Vec::new();
    if let Network::TwoNode { line_capacity } = &s.network {
        for ti in 0..t {
            let d = &p[ti * nodes + 1] - &p[ti * nodes];
            if d.is_zero() {
                flow_bounds.push((-line_capacity.clone(), line_capacity.clone()));
            } else if d.is_positive() {
                flow_bounds.push((line_capacity.clone(), line_capacity.clone()));
            } else {
                flow_bounds.push((-line_capacity.clone(), -line_capacity.clone()));
            }
        }
    }

    let mut objective: Vec<Rat> = Vec::new();
    let mut bounds: Vec<(Rat, Rat)> = Vec::new();
    let mut var_player: Vec<(usize, usize)> = Vec::new();
    for (pi, (_, _, _, pts)) in players.iter().enumerate() {
        for ki in 0..pts.len() {
            var_player.push((pi, ki));
            objective.push(Rat::zero());
            bounds.push((Rat::zero(), rat(1)));
        }
    }
    let flow_base = var_player.len();
    for fb in &flow_bounds {
        objective.push(Rat::zero());
        bounds.push(fb.clone());
    }
    let nvars = objective.len();

    let mut rows: Vec<LpRow> = Vec::new();
    for ti in 0..t {
        for n in 0..nodes {
            let mut coeffs = vec![Rat::zero(); nvars];
            for (vi, (pi, ki)) in var_player.iter().enumerate() {
                let (_, is_unit, node, pts) = &players[*pi];
                if *node == n {
                    let q = &pts[*ki].1[ti];
                    coeffs[vi] = if *is_unit { q.clone() } else { -q.clone() };
                }
            }
            if nodes == 2 {
                coeffs[flow_base + ti] = if n == 0 { rat(-1) } else { rat(1) };
            }
            rows.push(LpRow {
                coeffs,
                relation: Relation::Eq,
                rhs: Rat::zero(),
            });
        }
    }
    for pi in 0..players.len() {
        let mut coeffs = vec![Rat::zero(); nvars];
        for (vi, (pj, _)) in var_player.iter().enumerate() {
            if pj == &pi {
                coeffs[vi] = rat(1);
            }
        }
        rows.push(LpRow {
            coeffs,
            relation: Relation::Eq,
            rhs: rat(1),
        });
    }

    let lp = Lp {
        objective,
        rows,
        bounds,
    };
    match solve_lp(&lp) {
        LpOutcome::Optimal { solution, .. } => {
            let mut cert = Vec::new();
            for (pi, (id, is_unit, _, pts)) in players.iter().enumerate() {
                let mut weights = Vec::new();
                for (vi, (pj, ki)) in var_player.iter().enumerate() {
                    if pj == &pi && !solution[vi].is_zero() {
                        weights.push((
                            pts[*ki].0.clone(),
                            pts[*ki].1.clone(),
                            solution[vi].clone(),
                        ));
                    }
                }
                cert.push(CertRow {
                    player: id.clone(),
                    is_unit: *is_unit,
                    weights,
                });
            }
            Ok(Some(cert))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(SolveError::Internal("membership LP unbounded".into())),
    }
}

// ---------------------------------------------------------------------------
// Dual solvers
// ---------------------------------------------------------------------------

/// Solve the dual over explicit per-player sets.
pub fn solve_dual_over(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
) -> Result<PriceSetReport, SolveError> {
    match s.price_dim() {
        1 => scan_dual_1d(s, unit_sets, cons_sets),
        2 => scan_dual_2d(s, unit_sets, cons_sets),
        d => Err(SolveError::Unsupported(format!(
            "dual dimension {d} not supported (needs periods x nodes <= 2)"
        ))),
    }
}

/// Solve the dual for a set choice; the downward-limit choice extrapolates
/// exact solutions at shrinking inflation widths.
pub fn solve_dual(
    s: &Scenario,
    opp: &OpportunitySets,
    choice: &SetChoice,
) -> Result<PriceSetReport, SolveError> {
    solve_dual_mixed(s, opp, choice, choice)
}

/// Dual with possibly different set choices on the producer and consumer
/// sides (used to contrast projections against original bid sets).
pub fn solve_dual_mixed(
    s: &Scenario,
    opp: &OpportunitySets,
    unit_choice: &SetChoice,
    cons_choice: &SetChoice,
) -> Result<PriceSetReport, SolveError> {
    let needs_limit = matches!(unit_choice, SetChoice::Modified(Eps::Limit))
        || matches!(cons_choice, SetChoice::Modified(Eps::Limit));
    if !needs_limit {
        let (us, _) = opp.player_sets(s, unit_choice);
        let (_, cs) = opp.player_sets(s, cons_choice);
        return solve_dual_over(s, &us, &cs);
    }
    solve_dual_limit(s, opp, unit_choice, cons_choice)
}

fn materialize(choice: &SetChoice, eps: &Rat) -> SetChoice {
    match choice {
        SetChoice::Modified(Eps::Limit) => SetChoice::Modified(Eps::Value(eps.clone())),
        other => other.clone(),
    }
}

/// Downward limit of the modified dual: solve exactly at four shrinking
/// widths, fit each reported coordinate with a degree-one rational function
/// of the width, verify the fit on the spare probe, and read off the limit.
/// The limit dual value and certificates are evaluated on the closed limit
/// sets, where the profit suprema coincide with the limits.
fn solve_dual_limit(
    s: &Scenario,
    opp: &OpportunitySets,
    unit_choice: &SetChoice,
    cons_choice: &SetChoice,
) -> Result<PriceSetReport, SolveError> {
    let mut shift = 0u32;
    let mut last_err: Option<SolveError> = None;
    while shift <= 9 {
        let probes: Vec<Rat> = (0..6)
            .map(|k| Rat::new(BigInt::from(1), BigInt::from(10u8).pow(3 + shift + k)))
            .collect();
        let mut reports = Vec::new();
        for e in &probes {
            let (us, _) = opp.player_sets(s, &materialize(unit_choice, e));
            let (_, cs) = opp.player_sets(s, &materialize(cons_choice, e));
            reports.push(solve_dual_over(s, &us, &cs)?);
        }
        match extrapolate_reports(&probes, &reports) {
            Ok(structure) => {
                let (us, _) = opp.player_sets(s, unit_choice);
                let (_, cs) = opp.player_sets(s, cons_choice);
                let canonical = canonical_of(&structure)
                    .ok_or_else(|| SolveError::Internal("empty extrapolated price set".into()))?;
                let value = dual_value(s, &us, &cs, &canonical)?;
                let certificate = price_membership(s, &us, &cs, &canonical)?.ok_or_else(|| {
                    SolveError::Internal("canonical price failed membership".into())
                })?;
                return Ok(PriceSetReport {
                    canonical,
                    dual_value: dual_value_in_form(objective_kind(s), &value),
                    structure,
                    certificate,
                    approx: reports.iter().any(|r| r.approx),
                });
            }
            Err(e) => last_err = Some(SolveError::Internal(e)),
        }
        shift += 3;
    }
    Err(last_err.unwrap_or_else(|| SolveError::Internal("limit extrapolation failed".into())))
}

fn canonical_of(structure: &PriceSetStructure) -> Option<PriceVector> {
    match structure {
        PriceSetStructure::Interval(iu) => iu.min_element().map(|lo| vec![lo.clone()]),
        PriceSetStructure::Points(pts) => pts.first().cloned(),
    }
}

/// Limit at eps -> 0+ of a coordinate sampled at shrinking widths: fit a
/// rational function of eps (numerator/denominator degrees stepped up until
/// the spare samples verify exactly) and read the value at zero. Returns None
/// when the coordinate diverges (pole at zero).
fn mobius_limit(samples: &[(Rat, Rat)]) -> Result<Option<Rat>, String> {
    let mut last = String::from("no fit attempted");
    for (num_deg, den_deg) in [(1usize, 1usize), (2, 1), (2, 2)] {
        match rational_fit_limit(samples, num_deg, den_deg) {
            Ok(v) => return Ok(v),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Fit f(e) = (a0 + a1 e + ... ) / (b0 + b1 e + ...) exactly through the
/// first num+den+1 samples and verify the remainder.
fn rational_fit_limit(
    samples: &[(Rat, Rat)],
    num_deg: usize,
    den_deg: usize,
) -> Result<Option<Rat>, String> {
    let cols = num_deg + den_deg + 2;
    let fit_n = cols - 1;
    if samples.len() <= fit_n {
        return Err("not enough samples for the fit degree".into());
    }
    let row_of = |e: &Rat, f: &Rat| -> Vec<Rat> {
        let mut row = Vec::with_capacity(cols);
        let mut pow = rat(1);
        for _ in 0..=num_deg {
            row.push(pow.clone());
            pow *= e.clone();
        }
        let mut pow = rat(1);
        for _ in 0..=den_deg {
            row.push(-(f * &pow));
            pow *= e.clone();
        }
        row
    };
    let mut m: Vec<Vec<Rat>> = samples[..fit_n].iter().map(|(e, f)| row_of(e, f)).collect();
    let rows = m.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0usize;
    for c in 0..cols {
        if let Some(pr) = (r..rows).find(|&i| !m[i][c].is_zero()) {
            m.swap(r, pr);
            let pv = m[r][c].clone();
            for x in m[r].iter_mut() {
                *x /= pv.clone();
            }
            for i in 0..rows {
                if i != r && !m[i][c].is_zero() {
                    let f = m[i][c].clone();
                    for cc in 0..cols {
                        let d = &f * &m[r][cc];
                        m[i][cc] -= d;
                    }
                }
            }
            pivot_cols.push(c);
            r += 1;
            if r == rows {
                break;
            }
        }
    }
    let free_col = (0..cols)
        .find(|c| !pivot_cols.contains(c))
        .ok_or("no kernel")?;
    let mut v = vec![Rat::zero(); cols];
    v[free_col] = rat(1);
    for (ri, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = -m[ri][free_col].clone();
    }
    for (e, f) in &samples[fit_n..] {
        let row = row_of(e, f);
        let check: Rat = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        if !check.is_zero() {
            return Err("rational fit failed verification".into());
        }
    }
    // strip common factors of eps so constants fitted at higher degree do not
    // masquerade as poles
    let mut num: Vec<Rat> = v[..=num_deg].to_vec();
    let mut den: Vec<Rat> = v[num_deg + 1..].to_vec();
    while num.first().map(|x| x.is_zero()).unwrap_or(false)
        && den.first().map(|x| x.is_zero()).unwrap_or(false)
        && (num.len() > 1 || den.len() > 1)
    {
        if num.len() > 1 {
            num.remove(0);
        } else {
            num[0] = Rat::zero();
        }
        if den.len() > 1 {
            den.remove(0);
        } else {
            den[0] = Rat::zero();
        }
    }
    let a0 = num.first().cloned().unwrap_or_else(Rat::zero);
    let b0 = den.first().cloned().unwrap_or_else(Rat::zero);
    if b0.is_zero() {
        if den.iter().all(|x| x.is_zero()) {
            return Err("degenerate fit".into());
        }
        Ok(None)
    } else {
        Ok(Some(a0 / b0))
    }
}

fn interval_lists(reports: &[PriceSetReport]) -> Result<Vec<&IntervalUnion>, String> {
    reports
        .iter()
        .map(|r| match &r.structure {
            PriceSetStructure::Interval(iu) => Ok(iu),
            _ => Err("structure kind changed across probes".to_string()),
        })
        .collect()
}

fn point_lists(reports: &[PriceSetReport]) -> Result<Vec<&Vec<PriceVector>>, String> {
    reports
        .iter()
        .map(|r| match &r.structure {
            PriceSetStructure::Points(p) => Ok(p),
            _ => Err("structure kind changed across probes".to_string()),
        })
        .collect()
}

fn extrapolate_reports(
    probes: &[Rat],
    reports: &[PriceSetReport],
) -> Result<PriceSetStructure, String> {
    match &reports[0].structure {
        PriceSetStructure::Interval(_) => {
            let lists = interval_lists(reports)?;
            let n = lists[0].intervals.len();
            if lists.iter().any(|iu| iu.intervals.len() != n) {
                return Err("interval count changed across probes".into());
            }
            let mut out = IntervalUnion::empty();
            for k in 0..n {
                let lo_samples: Option<Vec<(Rat, Rat)>> = probes
                    .iter()
                    .zip(&lists)
                    .map(|(e, iu)| iu.intervals[k].lo.clone().map(|v| (e.clone(), v)))
                    .collect();
                let hi_samples: Option<Vec<(Rat, Rat)>> = probes
                    .iter()
                    .zip(&lists)
                    .map(|(e, iu)| iu.intervals[k].hi.clone().map(|v| (e.clone(), v)))
                    .collect();
                let lo = match lo_samples {
                    Some(ss) => mobius_limit(&ss)?,
                    None => None,
                };
                let hi = match hi_samples {
                    Some(ss) => mobius_limit(&ss)?,
                    None => None,
                };
                if let (Some(l), Some(h)) = (&lo, &hi) {
                    if l > h {
                        return Err("inverted interval after extrapolation".into());
                    }
                }
                out.intervals.push(Interval {
                    lo,
                    hi,
                    lo_open: false,
                    hi_open: false,
                });
            }
            out.normalize();
            Ok(PriceSetStructure::Interval(out))
        }
        PriceSetStructure::Points(p0) => {
            let lists = point_lists(reports)?;
            let n = p0.len();
            if lists.iter().any(|p| p.len() != n) {
                return Err("vertex count changed across probes".into());
            }
            let dim = p0.first().map(|p| p.len()).unwrap_or(0);
            let mut out = Vec::new();
            for k in 0..n {
                let mut point = Vec::new();
                for d in 0..dim {
                    let samples: Vec<(Rat, Rat)> = probes
                        .iter()
                        .zip(&lists)
                        .map(|(e, pts)| (e.clone(), pts[k][d].clone()))
                        .collect();
                    match mobius_limit(&samples)? {
                        Some(v) => point.push(v),
                        None => return Err("price vertex diverges".into()),
                    }
                }
                out.push(point);
            }
            out.sort();
            out.dedup();
            Ok(PriceSetStructure::Points(out))
        }
    }
}

// ---------------------------------------------------------------------------
// One-dimensional exact scan
// ---------------------------------------------------------------------------

/// A candidate vertex of a player's value function: profit(p) = sign*p*q + konst.
struct VertexFn {
    q: Rat,
    konst: Rat,
    sign: i8,
}

fn player_vertices(player: PlayerRef, set: &StatusOutputSet) -> Vec<VertexFn> {
    let sign = if player.is_unit() { 1i8 } else { -1 };
    let mut out = Vec::new();
    for prof in &set.closure().profiles {
        for iv in &prof.ranges[0].intervals {
            let mut qs: Vec<Rat> = Vec::new();
            if let Some(lo) = &iv.lo {
                qs.push(lo.clone());
            }
            if let Some(hi) = &iv.hi {
                if Some(hi) != iv.lo.as_ref() {
                    qs.push(hi.clone());
                }
            }
            if let PlayerRef::Unit(u) = player {
                for b in u.cost.breakpoints() {
                    if iv.contains(&b) {
                        qs.push(b);
                    }
                }
            }
            for q in qs {
                let konst = match player {
                    PlayerRef::Unit(u) => -u.total_cost(&prof.pattern, std::slice::from_ref(&q)),
                    PlayerRef::Consumer(c) => c.benefit(&prof.pattern, std::slice::from_ref(&q)),
                };
                out.push(VertexFn { q, konst, sign });
            }
        }
    }
    out
}

fn pairwise_ties(verts: &[VertexFn], out: &mut Vec<Rat>) {
    for (a_idx, a) in verts.iter().enumerate() {
        for b in verts.iter().skip(a_idx + 1) {
            let dq = rat(a.sign as i64) * &a.q - rat(b.sign as i64) * &b.q;
            if dq.is_zero() {
                continue;
            }
            out.push((&b.konst - &a.konst) / dq);
        }
    }
}

/// Aggregate excess-supply bounds at price p from the argmax extremes.
fn excess_supply_bounds(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
    p: &Rat,
) -> Result<(Rat, Rat), SolveError> {
    let mut emin = Rat::zero();
    let mut emax = Rat::zero();
    let span = |pm: &crate::curvelib::ProfitMax| -> (Rat, Rat) {
        let lo = pm
            .extreme_points
            .iter()
            .map(|(_, q)| q[0].clone())
            .min()
            .unwrap();
        let hi = pm
            .extreme_points
            .iter()
            .map(|(_, q)| q[0].clone())
            .max()
            .unwrap();
        (lo, hi)
    };
    for (i, u) in s.units.iter().enumerate() {
        let pm = profit_max(PlayerRef::Unit(u), &unit_sets[i], std::slice::from_ref(p))
            .map_err(SolveError::Internal)?;
        let (lo, hi) = span(&pm);
        emin += lo;
        emax += hi;
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let pm = profit_max(
            PlayerRef::Consumer(c),
            &cons_sets[j],
            std::slice::from_ref(p),
        )
        .map_err(SolveError::Internal)?;
        let (lo, hi) = span(&pm);
        emin -= hi;
        emax -= lo;
    }
    Ok((emin, emax))
}

fn scan_dual_1d(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
) -> Result<PriceSetReport, SolveError> {
    let mut candidates: Vec<Rat> = vec![Rat::zero()];
    for (i, u) in s.units.iter().enumerate() {
        let verts = player_vertices(PlayerRef::Unit(u), &unit_sets[i]);
        pairwise_ties(&verts, &mut candidates);
        if let crate::model::CostCurve::Quadratic { linear, quad } = &u.cost {
            let charge = &u.no_load_cost + &u.startup_cost;
            for prof in &unit_sets[i].closure().profiles {
                for iv in &prof.ranges[0].intervals {
                    for end in [&iv.lo, &iv.hi].into_iter().flatten() {
                        candidates.push(linear + rat(2) * quad * end);
                    }
                    // off-versus-interior break-even: tangency from the origin,
                    // exact whenever charge/quad has a rational square root
                    if charge.is_positive() && quad.is_positive() {
                        if let (Some(lo), Some(hi)) = (&iv.lo, &iv.hi) {
                            if hi.is_positive() {
                                let tangent = crate::curvelib::rational_sqrt(&(&charge / quad));
                                let g = tangent.max(lo.clone()).min(hi.clone());
                                if g.is_positive() {
                                    candidates.push((&charge + u.cost.eval(&g)) / &g);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let verts = player_vertices(PlayerRef::Consumer(c), &cons_sets[j]);
        pairwise_ties(&verts, &mut candidates);
        for segs in &c.elastic {
            for seg in segs {
                candidates.push(seg.price.clone());
            }
        }
        if let Some(qb) = &c.quadratic {
            for prof in &cons_sets[j].closure().profiles {
                for iv in &prof.ranges[0].intervals {
                    for end in [&iv.lo, &iv.hi].into_iter().flatten() {
                        let flex = end - &c.fixed_load[0];
                        candidates.push(&qb.linear + rat(2) * &qb.quad * flex);
                    }
                }
            }
        }
    }
    candidates.sort();
    candidates.dedup();

    // interior stationary points between candidates (quadratic data only)
    let has_quadratic = s.units.iter().any(|u| u.cost.is_quadratic())
        || s.consumers.iter().any(|c| c.quadratic.is_some());
    if has_quadratic {
        let mut extra = Vec::new();
        for w in candidates.windows(2) {
            let p1 = (&w[0] * rat(2) + &w[1]) / rat(3);
            let p2 = (&w[0] + &w[1] * rat(2)) / rat(3);
            let (e1min, e1max) = excess_supply_bounds(s, unit_sets, cons_sets, &p1)?;
            let (e2min, _) = excess_supply_bounds(s, unit_sets, cons_sets, &p2)?;
            if e1min != e2min && e1min == e1max {
                let root = &p1 - &e1min * (&p2 - &p1) / (&e2min - &e1min);
                if root > w[0] && root < w[1] {
                    extra.push(root);
                }
            }
        }
        candidates.extend(extra);
        candidates.sort();
        candidates.dedup();
    }

    let mut best: Option<Rat> = None;
    let mut values: Vec<Rat> = Vec::new();
    for p in &candidates {
        let v = dual_value(s, unit_sets, cons_sets, std::slice::from_ref(p))?;
        if best.as_ref().map(|b| &v < b).unwrap_or(true) {
            best = Some(v.clone());
        }
        values.push(v);
    }
    let best = best.ok_or_else(|| SolveError::Internal("no dual candidates".into()))?;
    let mut optimal: Vec<Rat> = Vec::new();
    for (p, v) in candidates.iter().zip(&values) {
        if v == &best {
            let (emin, emax) = excess_supply_bounds(s, unit_sets, cons_sets, p)?;
            if !emin.is_positive() && !emax.is_negative() {
                optimal.push(p.clone());
            }
        }
    }
    if optimal.is_empty() {
        return Err(SolveError::Internal(
            "dual scan found no certified optimum among candidates".into(),
        ));
    }

    // flat intervals between consecutive optimal candidates
    let mut structure = IntervalUnion::empty();
    let mut k = 0usize;
    while k < optimal.len() {
        let start = optimal[k].clone();
        let mut end = start.clone();
        while k + 1 < optimal.len() {
            let mid = (&optimal[k] + &optimal[k + 1]) / rat(2);
            let vmid = dual_value(s, unit_sets, cons_sets, std::slice::from_ref(&mid))?;
            if vmid == best {
                end = optimal[k + 1].clone();
                k += 1;
            } else {
                break;
            }
        }
        structure.intervals.push(Interval::closed(start, end));
        k += 1;
    }
    structure.normalize();
    // flat ray above the top candidate
    if let Some(top) = optimal.last().cloned() {
        let near = dual_value(
            s,
            unit_sets,
            cons_sets,
            std::slice::from_ref(&(&top + rat(1))),
        )?;
        let far = dual_value(
            s,
            unit_sets,
            cons_sets,
            std::slice::from_ref(&(&top + rat(1_000_000))),
        )?;
        if near == best && far == best {
            structure.intervals.last_mut().unwrap().hi = None;
        }
    }
    if let Some(bottom) = optimal.first() {
        let far = dual_value(
            s,
            unit_sets,
            cons_sets,
            std::slice::from_ref(&(bottom - rat(1_000_000))),
        )?;
        if far < best {
            return Err(SolveError::Internal(
                "dual objective unbounded below".into(),
            ));
        }
        if far == best {
            structure.intervals.first_mut().unwrap().lo = None;
        }
    }

    let canonical = vec![structure
        .min_element()
        .cloned()
        .ok_or_else(|| SolveError::Internal("price set unbounded below".into()))?];
    let certificate = price_membership(s, unit_sets, cons_sets, &canonical)?
        .ok_or_else(|| SolveError::Internal("canonical price failed membership".into()))?;
    let approx = unit_sets
        .iter()
        .chain(cons_sets.iter())
        .any(|x| x.resolution.is_some());
    Ok(PriceSetReport {
        canonical,
        dual_value: dual_value_in_form(objective_kind(s), &best),
        structure: PriceSetStructure::Interval(structure),
        certificate,
        approx,
    })
}

// ---------------------------------------------------------------------------
// Two-dimensional scan
// ---------------------------------------------------------------------------

/// Affine value function of one candidate vertex in price space.
struct PlaneFn {
    coef: Vec<Rat>,
    konst: Rat,
}

fn plane_vertices(s: &Scenario, player: PlayerRef, set: &StatusOutputSet) -> Vec<PlaneFn> {
    let t = s.periods();
    let nodes = s.nodes();
    let dim = t * nodes;
    let sign = if player.is_unit() { rat(1) } else { rat(-1) };
    let mut out = Vec::new();
    for prof in &set.closure().profiles {
        let pts: Vec<Vec<Rat>> = match &prof.ramp {
            Some(rc) => {
                crate::curvelib::ramp_polygon_vertices(&prof.ranges, rc).unwrap_or_default()
            }
            None => {
                let mut acc: Vec<Vec<Rat>> = vec![Vec::new()];
                for r in &prof.ranges {
                    let mut ends: Vec<Rat> = Vec::new();
                    for iv in &r.intervals {
                        if let Some(lo) = &iv.lo {
                            ends.push(lo.clone());
                        }
                        if let Some(hi) = &iv.hi {
                            ends.push(hi.clone());
                        }
                    }
                    ends.sort();
                    ends.dedup();
                    acc = acc
                        .into_iter()
                        .flat_map(|prefix| {
                            ends.iter().map(move |e| {
                                let mut p = prefix.clone();
                                p.push(e.clone());
                                p
                            })
                        })
                        .collect();
                }
                acc
            }
        };
        for q in pts {
            let mut coef = vec![Rat::zero(); dim];
            for (ti, x) in q.iter().enumerate() {
                coef[ti * nodes + player.node()] = &sign * x;
            }
            let konst = match player {
                PlayerRef::Unit(u) => -u.total_cost(&prof.pattern, &q),
                PlayerRef::Consumer(c) => c.benefit(&prof.pattern, &q),
            };
            out.push(PlaneFn { coef, konst });
        }
    }
    out
}

fn scan_dual_2d(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
) -> Result<PriceSetReport, SolveError> {
    if s.units.iter().any(|u| u.cost.is_quadratic())
        || s.consumers.iter().any(|c| c.quadratic.is_some())
    {
        return Err(SolveError::Unsupported(
            "quadratic curves need a one-dimensional dual".into(),
        ));
    }
    let mut planes_all: Vec<Vec<PlaneFn>> = Vec::new();
    for (i, u) in s.units.iter().enumerate() {
        planes_all.push(plane_vertices(s, PlayerRef::Unit(u), &unit_sets[i]));
    }
    for (j, c) in s.consumers.iter().enumerate() {
        planes_all.push(plane_vertices(s, PlayerRef::Consumer(c), &cons_sets[j]));
    }
    let mut lines: Vec<(Vec<Rat>, Rat)> = Vec::new();
    for planes in &planes_all {
        for (ai, a) in planes.iter().enumerate() {
            for b in planes.iter().skip(ai + 1) {
                let coef: Vec<Rat> = a.coef.iter().zip(&b.coef).map(|(x, y)| x - y).collect();
                if coef.iter().all(|c| c.is_zero()) {
                    continue;
                }
                lines.push((coef, &b.konst - &a.konst));
            }
        }
    }
    if s.nodes() == 2 {
        lines.push((vec![rat(1), rat(-1)], Rat::zero()));
    }
    let mut norm_lines: Vec<(Vec<Rat>, Rat)> = Vec::new();
    for (coef, rhs) in lines {
        let scale = coef.iter().find(|c| !c.is_zero()).cloned().unwrap();
        let n: (Vec<Rat>, Rat) = (coef.iter().map(|c| c / &scale).collect(), &rhs / &scale);
        if !norm_lines.contains(&n) {
            norm_lines.push(n);
        }
    }

    let mut candidates: Vec<PriceVector> = Vec::new();
    for (ai, (c1, r1)) in norm_lines.iter().enumerate() {
        for (c2, r2) in norm_lines.iter().skip(ai + 1) {
            let det = &c1[0] * &c2[1] - &c1[1] * &c2[0];
            if det.is_zero() {
                continue;
            }
            let x = (r1 * &c2[1] - &c1[1] * r2) / &det;
            let y = (&c1[0] * r2 - r1 * &c2[0]) / &det;
            candidates.push(vec![x, y]);
        }
    }
    let mut axis0: Vec<Rat> = vec![Rat::zero()];
    let mut axis1: Vec<Rat> = vec![Rat::zero()];
    for (coef, rhs) in &norm_lines {
        if coef[1].is_zero() && !coef[0].is_zero() {
            axis0.push(rhs / &coef[0]);
        }
        if coef[0].is_zero() && !coef[1].is_zero() {
            axis1.push(rhs / &coef[1]);
        }
    }
    axis0.sort();
    axis0.dedup();
    axis1.sort();
    axis1.dedup();
    for x in &axis0 {
        for y in &axis1 {
            candidates.push(vec![x.clone(), y.clone()]);
        }
    }
    candidates.sort();
    candidates.dedup();
    if candidates.is_empty() {
        candidates.push(vec![Rat::zero(), Rat::zero()]);
    }

    let mut best: Option<Rat> = None;
    let mut values = Vec::new();
    for p in &candidates {
        let v = dual_value(s, unit_sets, cons_sets, p)?;
        if best.as_ref().map(|b| &v < b).unwrap_or(true) {
            best = Some(v.clone());
        }
        values.push(v);
    }
    let best = best.unwrap();
    let mut optimal: Vec<PriceVector> = Vec::new();
    for (p, v) in candidates.iter().zip(&values) {
        if v == &best && price_membership(s, unit_sets, cons_sets, p)?.is_some() {
            optimal.push(p.clone());
        }
    }
    if optimal.is_empty() {
        return Err(SolveError::Internal(
            "two-dimensional dual scan found no certified optimum".into(),
        ));
    }
    optimal.sort();
    optimal.dedup();
    let canonical = optimal[0].clone();
    let certificate = price_membership(s, unit_sets, cons_sets, &canonical)?
        .ok_or_else(|| SolveError::Internal("canonical price failed membership".into()))?;
    let approx = unit_sets
        .iter()
        .chain(cons_sets.iter())
        .any(|x| x.resolution.is_some());
    Ok(PriceSetReport {
        canonical,
        dual_value: dual_value_in_form(objective_kind(s), &best),
        structure: PriceSetStructure::Points(optimal),
        certificate,
        approx,
    })
}

// ---------------------------------------------------------------------------
// Uplift accounting
// ---------------------------------------------------------------------------

/// Settlement uplift rows at a price. Dispatch profits settle at the policy
/// price; each uplift is the exact-price lost profit measured against that
/// settlement, clamped into [0, lost profit at the settlement price] so cent
/// rounding can neither mint nor destroy an opportunity. Consumer rows are
/// shown net of the fixed-load payment.
pub fn uplift_report(
    s: &Scenario,
    unit_sets: &[StatusOutputSet],
    cons_sets: &[StatusOutputSet],
    price_exact: &[Rat],
    primal: &PrimalSolution,
) -> Result<UpliftReport, SolveError> {
    let t = s.periods();
    let nodes = s.nodes();
    let price_used: PriceVector = match s.rounding {
        RoundingPolicy::Exact => price_exact.to_vec(),
        RoundingPolicy::CentPrice => price_exact.iter().map(round_cents_half_up).collect(),
    };
    let point = &primal.optima[0];

    let mut rows = Vec::new();
    let mut total_dispatch = Rat::zero();
    let mut total_uplift = Rat::zero();

    for (i, u) in s.units.iter().enumerate() {
        let pu = player_prices(&price_used, u.node, nodes, t);
        let pe = player_prices(price_exact, u.node, nodes, t);
        let player = PlayerRef::Unit(u);
        let dispatch = player.profit(&point.unit_on[i], &point.unit_g[i], &pu);
        let best_used = profit_max(player, &unit_sets[i], &pu)
            .map_err(SolveError::Internal)?
            .value;
        let best_exact = profit_max(player, &unit_sets[i], &pe)
            .map_err(SolveError::Internal)?
            .value;
        let uplift = clamp_uplift(&dispatch, &best_used, &best_exact);
        total_dispatch += dispatch.clone();
        total_uplift += uplift.clone();
        rows.push(UpliftRow {
            player: u.id.clone(),
            is_unit: true,
            best_profit: &dispatch + &uplift,
            dispatch_profit: dispatch,
            uplift,
        });
    }
    for (j, c) in s.consumers.iter().enumerate() {
        let pu = player_prices(&price_used, c.node, nodes, t);
        let pe = player_prices(price_exact, c.node, nodes, t);
        let player = PlayerRef::Consumer(c);
        // fixed-load payments are sunk: add them back for display
        let offset: Rat = pu.iter().zip(&c.fixed_load).map(|(p, d)| p * d).sum();
        let dispatch = player.profit(&point.cons_v[j], &point.cons_d[j], &pu) + &offset;
        let best_used = profit_max(player, &cons_sets[j], &pu)
            .map_err(SolveError::Internal)?
            .value
            + &offset;
        // the exact-price benchmark carries the same settled fixed payment,
        // so the offsets cancel inside the uplift
        let best_exact = profit_max(player, &cons_sets[j], &pe)
            .map_err(SolveError::Internal)?
            .value
            + pe.iter()
                .zip(&c.fixed_load)
                .map(|(p, d)| p * d)
                .sum::<Rat>()
            + &offset
            - pu.iter()
                .zip(&c.fixed_load)
                .map(|(p, d)| p * d)
                .sum::<Rat>();
        let uplift = clamp_uplift(&dispatch, &best_used, &best_exact);
        total_dispatch += dispatch.clone();
        total_uplift += uplift.clone();
        rows.push(UpliftRow {
            player: c.id.clone(),
            is_unit: false,
            best_profit: &dispatch + &uplift,
            dispatch_profit: dispatch,
            uplift,
        });
    }

    let mut ftr = None;
    let mut congestion_rent = Rat::zero();
    if let Network::TwoNode { line_capacity } = &s.network {
        let mut rent = Rat::zero();
        let mut best_used = Rat::zero();
        let mut best_exact = Rat::zero();
        for ti in 0..t {
            let du = &price_used[ti * nodes + 1] - &price_used[ti * nodes];
            let de = &price_exact[ti * nodes + 1] - &price_exact[ti * nodes];
            let f = point.flow.get(ti).cloned().unwrap_or_else(Rat::zero);
            rent += &du * &f;
            best_used += line_capacity * du.abs();
            best_exact += line_capacity * de.abs();
        }
        congestion_rent = rent.clone();
        let uplift = clamp_uplift(&rent, &best_used, &best_exact);
        total_dispatch += rent.clone();
        total_uplift += uplift.clone();
        ftr = Some(UpliftRow {
            player: "FTR holders".into(),
            is_unit: false,
            best_profit: &rent + &uplift,
            dispatch_profit: rent,
            uplift,
        });
    }

    let total_best = &total_dispatch + &total_uplift;
    Ok(UpliftReport {
        price_used,
        price_exact: price_exact.to_vec(),
        rounding: s.rounding,
        rows,
        ftr,
        total_dispatch_profit: total_dispatch,
        total_best_profit: total_best,
        total_uplift,
        congestion_rent,
    })
}

/// uplift = clamp(best_exact - dispatch, 0, best_used - dispatch).
fn clamp_uplift(dispatch: &Rat, best_used: &Rat, best_exact: &Rat) -> Rat {
    let hi = (best_used - dispatch).max(Rat::zero());
    (best_exact - dispatch).max(Rat::zero()).min(hi)
}

// ---------------------------------------------------------------------------
// Gap summary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GapSummary {
    pub kind: ObjectiveKind,
    pub primal_value: Rat,
    pub dual_value: Rat,
    pub dual_value_modified: Rat,
    /// |primal - dual| per method, exact.
    pub gap: Rat,
    pub gap_modified: Rat,
    /// Settlement-evaluated uplift totals per method.
    pub uplift_total: Rat,
    pub uplift_total_modified: Rat,
}

/// Primal value, both dual values, both gaps; enforces the ordering
/// 0 <= modified gap <= original gap.
pub fn gap_summary(
    s: &Scenario,
    opp: &OpportunitySets,
    primal: &PrimalSolution,
) -> Result<GapSummary, SolveError> {
    let (us, cs) = opp.player_sets(s, &SetChoice::Original);
    let base = solve_dual_over(s, &us, &cs)?;
    let modif = solve_dual(s, opp, &SetChoice::Modified(Eps::Limit))?;
    let gap = (&primal.value - &base.dual_value).abs();
    let gap_mod = (&primal.value - &modif.dual_value).abs();
    if gap_mod > gap {
        return Err(SolveError::Internal(format!(
            "gap ordering violated: modified {gap_mod} exceeds original {gap}"
        )));
    }
    let rep = uplift_report(s, &us, &cs, &base.canonical, primal)?;
    let (mus, mcs) = opp.player_sets(s, &SetChoice::Modified(Eps::Limit));
    let mrep = uplift_report(s, &mus, &mcs, &modif.canonical, primal)?;
    Ok(GapSummary {
        kind: primal.kind,
        primal_value: primal.value.clone(),
        dual_value: base.dual_value,
        dual_value_modified: modif.dual_value,
        gap,
        gap_modified: gap_mod,
        uplift_total: rep.total_uplift,
        uplift_total_modified: mrep.total_uplift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasets::OpportunitySets;
    use crate::model::builtin_example;
    use crate::primal::solve_primal;
    use crate::rat::ratio;

    fn original_sets(s: &Scenario) -> (Vec<StatusOutputSet>, Vec<StatusOutputSet>) {
        let t = s.periods();
        (
            s.units
                .iter()
                .map(|u| crate::curvelib::unit_feasible_set(u, t))
                .collect(),
            s.consumers
                .iter()
                .map(|c| crate::curvelib::consumer_feasible_set(c, t))
                .collect(),
        )
    }

    #[test]
    fn example3_base_price_unique() {
        let s = builtin_example(3, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        assert_eq!(rep.canonical, vec![ratio(963, 32)]); // 30.09375
        match &rep.structure {
            PriceSetStructure::Interval(iu) => {
                assert_eq!(iu.intervals.len(), 1);
                assert!(iu.intervals[0].is_point());
            }
            other => panic!("unexpected structure {other:?}"),
        }
        // cost-form dual value 200p - best profits = 4403.75
        assert_eq!(rep.dual_value, ratio(440375, 100));
    }

    #[test]
    fn example3_modified_price_limit() {
        let s = builtin_example(3, None).unwrap();
        let opp = OpportunitySets::build(&s, None).unwrap();
        let rep = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(rep.canonical, vec![ratio(241, 8)]); // 30.125
        assert_eq!(rep.dual_value, rat(4810));
    }

    #[test]
    fn example4_modified_price_limit() {
        let s = builtin_example(4, None).unwrap();
        let opp = OpportunitySets::build(&s, None).unwrap();
        let rep = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(rep.canonical, vec![ratio(963, 32)]); // 30.09375 again
    }

    #[test]
    fn example1_base_price() {
        let s = builtin_example(1, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        // a + w/g_max = 10 + 500/100 = 15
        assert_eq!(rep.canonical, vec![rat(15)]);
    }

    #[test]
    fn example1_modified_price_ray() {
        let s = builtin_example(1, None).unwrap();
        let opp = OpportunitySets::build(&s, None).unwrap();
        let rep = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(rep.canonical, vec![rat(20)]); // the bid price
        match &rep.structure {
            PriceSetStructure::Interval(iu) => {
                assert_eq!(iu.intervals.len(), 1);
                assert_eq!(iu.intervals[0].lo, Some(rat(20)));
                assert_eq!(iu.intervals[0].hi, None); // ray to +infinity
            }
            other => panic!("unexpected structure {other:?}"),
        }
    }

    #[test]
    fn example5_both_methods_agree_on_price() {
        let s = builtin_example(5, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        assert_eq!(rep.canonical, vec![ratio(101, 5)]); // 20.20
        let opp = OpportunitySets::build(&s, None).unwrap();
        let repm = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(repm.canonical, vec![ratio(101, 5)]);
    }

    #[test]
    fn example6_price_and_consumer_set_contrast() {
        let s = builtin_example(6, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        assert_eq!(rep.canonical, vec![ratio(371, 8)]); // 46.375
        let opp = OpportunitySets::build(&s, None).unwrap();
        let repm = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(repm.canonical, vec![ratio(371, 8)]);
        // replacing the consumer's modified set by its original set leaves
        // the price set unchanged
        let mixed = solve_dual_mixed(
            &s,
            &opp,
            &SetChoice::Modified(Eps::Limit),
            &SetChoice::Original,
        )
        .unwrap();
        assert_eq!(mixed.canonical, repm.canonical);
    }

    #[test]
    fn example7_both_prices_80() {
        let s = builtin_example(7, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        assert_eq!(rep.canonical, vec![rat(80)]);
        let opp = OpportunitySets::build(&s, None).unwrap();
        let repm = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(repm.canonical, vec![rat(80)]);
        match &repm.structure {
            PriceSetStructure::Interval(iu) => {
                assert_eq!(iu.intervals.len(), 1);
                assert!(iu.intervals[0].is_point(), "{iu:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn example8_two_node_prices() {
        let s = builtin_example(8, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        assert_eq!(rep.canonical, vec![ratio(151, 10), rat(10)]);
        let opp = OpportunitySets::build(&s, None).unwrap();
        let repm = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(repm.canonical, vec![ratio(227, 15), ratio(227, 15)]); // 15.1333...
    }

    #[test]
    fn example9_base_and_modified_prices() {
        let s = builtin_example(9, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        assert_eq!(rep.canonical, vec![ratio(158, 5), rat(10)]); // (31.60, 10.00)
        let opp = OpportunitySets::build(&s, None).unwrap();
        let repm = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        assert_eq!(repm.canonical, vec![rat(30), rat(10)]);
        // the published representative and the break-even threshold point
        // both lie in the flat optimal region of the limit problem
        let (mus, mcs) = opp.player_sets(&s, &SetChoice::Modified(Eps::Limit));
        for p in [
            vec![ratio(98, 3), rat(10)],
            vec![ratio(3267, 100), rat(10)],
            vec![ratio(103, 4), rat(10)], // 25.75
        ] {
            assert!(
                price_membership(&s, &mus, &mcs, &p).unwrap().is_some(),
                "membership failed at {p:?}"
            );
        }
    }

    #[test]
    fn example3_membership_cases() {
        let s = builtin_example(3, None).unwrap();
        let (us, cs) = original_sets(&s);
        assert!(price_membership(&s, &us, &cs, &[ratio(963, 32)])
            .unwrap()
            .is_some());
        assert!(price_membership(&s, &us, &cs, &[rat(29)])
            .unwrap()
            .is_none());
    }

    #[test]
    fn example3_uplift_tables() {
        let s = builtin_example(3, None).unwrap();
        let primal = solve_primal(&s, None).unwrap();
        let (us, cs) = original_sets(&s);
        let rep = solve_dual_over(&s, &us, &cs).unwrap();
        let up = uplift_report(&s, &us, &cs, &rep.canonical, &primal).unwrap();
        assert_eq!(up.price_used, vec![ratio(3009, 100)]);
        assert_eq!(up.rows[0].dispatch_profit, ratio(121080, 100));
        assert_eq!(up.rows[0].best_profit, ratio(161440, 100));
        assert_eq!(up.rows[0].uplift, ratio(40360, 100));
        assert_eq!(up.rows[1].dispatch_profit, ratio(-780, 100));
        assert_eq!(up.rows[1].best_profit, Rat::zero());
        assert_eq!(up.rows[1].uplift, ratio(780, 100));
        assert_eq!(up.total_uplift, ratio(41140, 100));

        let opp = OpportunitySets::build(&s, None).unwrap();
        let repm = solve_dual(&s, &opp, &SetChoice::Modified(Eps::Limit)).unwrap();
        let (mus, mcs) = opp.player_sets(&s, &SetChoice::Modified(Eps::Limit));
        let upm = uplift_report(&s, &mus, &mcs, &repm.canonical, &primal).unwrap();
        assert_eq!(upm.price_used, vec![ratio(3013, 100)]);
        assert_eq!(upm.rows[0].dispatch_profit, ratio(121560, 100));
        assert_eq!(upm.rows[0].uplift, Rat::zero());
        assert_eq!(upm.rows[0].best_profit, ratio(121560, 100));
        assert_eq!(upm.rows[1].dispatch_profit, ratio(-460, 100));
        assert_eq!(upm.rows[1].uplift, ratio(460, 100));
        assert_eq!(upm.rows[1].best_profit, Rat::zero());
        assert_eq!(upm.total_uplift, ratio(460, 100));
    }

    #[test]
    fn example3_gap_summary_sandwich() {
        let s = builtin_example(3, None).unwrap();
        let primal = solve_primal(&s, None).unwrap();
        let opp = OpportunitySets::build(&s, None).unwrap();
        let gaps = gap_summary(&s, &opp, &primal).unwrap();
        assert_eq!(gaps.primal_value, rat(4815));
        assert_eq!(gaps.gap, ratio(41125, 100)); // 411.25 exact
        assert_eq!(gaps.gap_modified, rat(5)); // 5.00 exact
        assert_eq!(gaps.uplift_total, ratio(41140, 100));
        assert_eq!(gaps.uplift_total_modified, ratio(460, 100));
    }

    #[test]
    fn weak_duality_at_scattered_prices() {
        for n in [1usize, 3, 5, 6, 7] {
            let s = builtin_example(n, None).unwrap();
            let primal = solve_primal(&s, None).unwrap();
            let (us, cs) = original_sets(&s);
            for k in 0..10i64 {
                let p = vec![ratio(7 * k + 1, 3)];
                let d = dual_value(&s, &us, &cs, &p).unwrap();
                match primal.kind {
                    ObjectiveKind::CostMin => {
                        assert!(-d.clone() <= primal.value, "example {n} at {p:?}")
                    }
                    ObjectiveKind::WelfareMax => {
                        assert!(d >= primal.value, "example {n} at {p:?}")
                    }
                }
            }
        }
    }
}
