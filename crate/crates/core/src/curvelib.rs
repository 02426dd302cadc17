//! One-dimensional convex-analysis primitives: profit maximization over
//! interval unions, economic minimum output, supply correspondences, and
//! convex hulls of non-convex unit cost functions.

use crate::model::{ConsumerSpec, CostCurve, UnitSpec};
use crate::rat::{rat, ratio, Rat};
use num_traits::{Signed, Zero};

/// Closed-by-default interval over quantities or prices. `None` bounds are
/// unbounded ends (used for price rays). Open flags record non-compact
/// opportunity sets; evaluation always happens on closures.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Option<Rat>,
    pub hi: Option<Rat>,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn point(x: Rat) -> Self {
        Interval {
            lo: Some(x.clone()),
            hi: Some(x),
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn closed(lo: Rat, hi: Rat) -> Self {
        debug_assert!(lo <= hi);
        Interval {
            lo: Some(lo),
            hi: Some(hi),
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn ray_from(lo: Rat) -> Self {
        Interval {
            lo: Some(lo),
            hi: None,
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn is_point(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    pub fn contains(&self, x: &Rat) -> bool {
        if let Some(lo) = &self.lo {
            if x < lo || (self.lo_open && x == lo) {
                return false;
            }
        }
        if let Some(hi) = &self.hi {
            if x > hi || (self.hi_open && x == hi) {
                return false;
            }
        }
        true
    }

    fn closure(&self) -> Interval {
        Interval {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            lo_open: false,
            hi_open: false,
        }
    }
}

/// Ordered union of disjoint intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalUnion {
    pub intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion {
            intervals: Vec::new(),
        }
    }

    pub fn point(x: Rat) -> Self {
        IntervalUnion {
            intervals: vec![Interval::point(x)],
        }
    }

    pub fn closed(lo: Rat, hi: Rat) -> Self {
        IntervalUnion {
            intervals: vec![Interval::closed(lo, hi)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    pub fn closure(&self) -> IntervalUnion {
        let mut u = IntervalUnion {
            intervals: self.intervals.iter().map(|i| i.closure()).collect(),
        };
        u.normalize();
        u
    }

    pub fn min_element(&self) -> Option<&Rat> {
        self.intervals.first().and_then(|i| i.lo.as_ref())
    }

    pub fn max_element(&self) -> Option<&Rat> {
        self.intervals.last().and_then(|i| i.hi.as_ref())
    }

    /// Sort and merge touching/overlapping intervals (closure-insensitive
    /// merge: [a,b] and [b,c] join even if one side is open at b).
    pub fn normalize(&mut self) {
        self.intervals.sort_by(|a, b| match (&a.lo, &b.lo) {
            (None, None) => std::cmp::Ordering::Equal,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(x), Some(y)) => x.cmp(y),
        });
        let mut merged: Vec<Interval> = Vec::new();
        for iv in self.intervals.drain(..) {
            if let Some(last) = merged.last_mut() {
                let touches = match (&last.hi, &iv.lo) {
                    (None, _) => true,
                    (Some(h), None) => {
                        let _ = h;
                        true
                    }
                    (Some(h), Some(l)) => l <= h || (l == h && !(last.hi_open && iv.lo_open)),
                };
                if touches {
                    let extend = match (&last.hi, &iv.hi) {
                        (None, _) => false,
                        (Some(_), None) => true,
                        (Some(a), Some(b)) => b > a,
                    };
                    if extend {
                        last.hi = iv.hi;
                        last.hi_open = iv.hi_open;
                    } else if last.hi == iv.hi {
                        last.hi_open = last.hi_open && iv.hi_open;
                    }
                    continue;
                }
            }
            merged.push(iv);
        }
        self.intervals = merged;
    }

    pub fn push(&mut self, iv: Interval) {
        self.intervals.push(iv);
        self.normalize();
    }

    /// Merge intervals whose gap is at most `gap` (grid reconstruction from
    /// sweep points).
    pub fn merge_within(&mut self, gap: &Rat) {
        self.normalize();
        let mut merged: Vec<Interval> = Vec::new();
        for iv in self.intervals.drain(..) {
            if let Some(last) = merged.last_mut() {
                if let (Some(h), Some(l)) = (&last.hi, &iv.lo) {
                    if l - h <= *gap {
                        if iv.hi.as_ref().map(|x| x > h).unwrap_or(true) {
                            last.hi = iv.hi;
                            last.hi_open = iv.hi_open;
                        }
                        continue;
                    }
                }
            }
            merged.push(iv);
        }
        self.intervals = merged;
    }

    /// Inflate every interval by `eps` on both sides, clip to [clip_lo, clip_hi],
    /// and close. Intervals entirely outside the clip window vanish.
    pub fn inflate_clip(&self, eps: &Rat, clip_lo: &Rat, clip_hi: &Rat) -> IntervalUnion {
        let mut out = IntervalUnion::empty();
        for iv in &self.intervals {
            let lo = iv
                .lo
                .as_ref()
                .map(|l| (l - eps).max(clip_lo.clone()))
                .unwrap_or_else(|| clip_lo.clone());
            let hi = iv
                .hi
                .as_ref()
                .map(|h| (h + eps).min(clip_hi.clone()))
                .unwrap_or_else(|| clip_hi.clone());
            if lo <= hi {
                out.intervals.push(Interval::closed(lo, hi));
            }
        }
        out.normalize();
        out
    }

    /// Representative sample: endpoints (closed ones) and midpoints.
    pub fn sample_points(&self) -> Vec<Rat> {
        let mut pts = Vec::new();
        for iv in &self.intervals {
            if let (Some(lo), Some(hi)) = (&iv.lo, &iv.hi) {
                if !iv.lo_open {
                    pts.push(lo.clone());
                }
                if lo != hi {
                    pts.push((lo + hi) / rat(2));
                    if !iv.hi_open {
                        pts.push(hi.clone());
                    }
                }
            }
        }
        pts.dedup();
        pts
    }
}

/// Cross-period coupling for ramp-limited units.
#[derive(Debug, Clone, PartialEq)]
pub struct RampChain {
    pub limit: Rat,
    pub initial_output: Rat,
}

/// One commitment (or block) pattern with per-period quantity ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    /// Unit commitment per period, or consumer block selection per block.
    pub pattern: Vec<bool>,
    /// Quantity ranges per period.
    pub ranges: Vec<IntervalUnion>,
    pub ramp: Option<RampChain>,
}

impl Profile {
    pub fn closure(&self) -> Profile {
        Profile {
            pattern: self.pattern.clone(),
            ranges: self.ranges.iter().map(|r| r.closure()).collect(),
            ramp: self.ramp.clone(),
        }
    }
}

/// Finite union of (pattern, ranges) profiles: individual feasible sets,
/// opportunity projections, sunk-state sets, and modified sets all live here.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusOutputSet {
    pub profiles: Vec<Profile>,
    /// Present when the set came from a grid sweep: the grid resolution.
    pub resolution: Option<Rat>,
}

impl StatusOutputSet {
    pub fn new(profiles: Vec<Profile>) -> Self {
        StatusOutputSet {
            profiles,
            resolution: None,
        }
    }

    pub fn closure(&self) -> StatusOutputSet {
        StatusOutputSet {
            profiles: self.profiles.iter().map(|p| p.closure()).collect(),
            resolution: self.resolution.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Point membership. Ramp feasibility is enforced when present.
    pub fn contains(&self, pattern: &[bool], q: &[Rat]) -> bool {
        self.profiles.iter().any(|p| {
            p.pattern == pattern
                && p.ranges.iter().zip(q).all(|(r, x)| r.contains(x))
                && ramp_ok(&p.ramp, q)
        })
    }

    /// Merge profiles with equal pattern/ramp by uniting their ranges when the
    /// ranges differ in exactly one period (keeps sweeps compact).
    pub fn coalesce(&mut self) {
        let mut changed = true;
        while changed {
            changed = false;
            'outer: for i in 0..self.profiles.len() {
                for j in (i + 1)..self.profiles.len() {
                    if self.profiles[i].pattern != self.profiles[j].pattern
                        || self.profiles[i].ramp != self.profiles[j].ramp
                    {
                        continue;
                    }
                    let diff: Vec<usize> = (0..self.profiles[i].ranges.len())
                        .filter(|&t| self.profiles[i].ranges[t] != self.profiles[j].ranges[t])
                        .collect();
                    if diff.len() <= 1 {
                        let other = self.profiles.remove(j);
                        if let Some(&t) = diff.first() {
                            let m = &mut self.profiles[i].ranges[t];
                            for iv in other.ranges[t].intervals.clone() {
                                m.intervals.push(iv);
                            }
                            m.normalize();
                        }
                        changed = true;
                        break 'outer;
                    }
                }
            }
        }
    }
}

fn ramp_ok(ramp: &Option<RampChain>, q: &[Rat]) -> bool {
    let Some(r) = ramp else { return true };
    let mut prev = r.initial_output.clone();
    for x in q {
        if (x - &prev).abs() > r.limit {
            return false;
        }
        prev = x.clone();
    }
    true
}

// ---------------------------------------------------------------------------
// Feasible sets of the players
// ---------------------------------------------------------------------------

/// The unit's individual feasible set as profiles over commitment patterns.
pub fn unit_feasible_set(u: &UnitSpec, periods: usize) -> StatusOutputSet {
    let mut profiles = Vec::new();
    for bits in 0..(1usize << periods) {
        let pattern: Vec<bool> = (0..periods).map(|t| bits & (1 << t) != 0).collect();
        let ranges: Vec<IntervalUnion> = pattern
            .iter()
            .map(|on| {
                if *on {
                    IntervalUnion::closed(u.g_min.clone(), u.g_max.clone())
                } else {
                    IntervalUnion::point(Rat::zero())
                }
            })
            .collect();
        let ramp = u.ramp_limit.as_ref().map(|limit| RampChain {
            limit: limit.clone(),
            initial_output: u.initial_output.clone(),
        });
        if let Some(r) = &ramp {
            if profile_box_infeasible(&pattern, &ranges, r) {
                continue;
            }
        }
        profiles.push(Profile {
            pattern,
            ranges,
            ramp,
        });
    }
    StatusOutputSet::new(profiles)
}

/// Quick reject for ramp chains: empty reachable window in some period.
fn profile_box_infeasible(_pattern: &[bool], ranges: &[IntervalUnion], r: &RampChain) -> bool {
    let mut lo = r.initial_output.clone();
    let mut hi = r.initial_output.clone();
    for range in ranges {
        let (Some(blo), Some(bhi)) = (range.min_element(), range.max_element()) else {
            return true;
        };
        let wlo = (lo - &r.limit).max(blo.clone());
        let whi = (hi + &r.limit).min(bhi.clone());
        if wlo > whi {
            return true;
        }
        lo = wlo;
        hi = whi;
    }
    false
}

/// The consumer's individual feasible set over block patterns. Quantities are
/// total consumption per period (fixed + blocks taken + price-sensitive part).
pub fn consumer_feasible_set(c: &ConsumerSpec, periods: usize) -> StatusOutputSet {
    let nblocks = c.blocks.len();
    let mut profiles = Vec::new();
    for bits in 0..(1usize << nblocks) {
        let pattern: Vec<bool> = (0..nblocks).map(|k| bits & (1 << k) != 0).collect();
        let ranges: Vec<IntervalUnion> = (0..periods)
            .map(|t| {
                let mut base = c.fixed_load[t].clone();
                for (k, b) in c.blocks.iter().enumerate() {
                    if pattern[k] {
                        base += b.quantity[t].clone();
                    }
                }
                let flex = if let Some(q) = &c.quadratic {
                    q.d_max.clone()
                } else {
                    c.elastic[t]
                        .iter()
                        .map(|s| s.quantity.clone())
                        .fold(Rat::zero(), |a, b| a + b)
                };
                IntervalUnion::closed(base.clone(), base + flex)
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
// Profit maximization
// ---------------------------------------------------------------------------

/// A market player seen by the profit/dispatch machinery.
#[derive(Debug, Clone, Copy)]
pub enum PlayerRef<'a> {
    Unit(&'a UnitSpec),
    Consumer(&'a ConsumerSpec),
}

impl<'a> PlayerRef<'a> {
    pub fn id(&self) -> &str {
        match self {
            PlayerRef::Unit(u) => &u.id,
            PlayerRef::Consumer(c) => &c.id,
        }
    }

    pub fn node(&self) -> usize {
        match self {
            PlayerRef::Unit(u) => u.node,
            PlayerRef::Consumer(c) => c.node,
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, PlayerRef::Unit(_))
    }

    /// Full profit of a point at the player's nodal prices (one per period).
    /// Producers earn revenue p·g − C; consumers earn B − p·d including the
    /// payment for any fixed load.
    pub fn profit(&self, pattern: &[bool], q: &[Rat], prices: &[Rat]) -> Rat {
        let linear: Rat = prices.iter().zip(q).map(|(p, x)| p * x).sum();
        match self {
            PlayerRef::Unit(u) => linear - u.total_cost(pattern, q),
            PlayerRef::Consumer(c) => c.benefit(pattern, q) - linear,
        }
    }
}

/// Result of maximizing a player's profit over a StatusOutputSet.
#[derive(Debug, Clone)]
pub struct ProfitMax {
    pub value: Rat,
    /// Full argmax geometry (intervals kept when the optimum is flat).
    pub argmax: StatusOutputSet,
    /// Extreme points of the convex hull of the argmax, as (pattern, point).
    pub extreme_points: Vec<(Vec<bool>, Vec<Rat>)>,
}

/// Exact supremum of the player's profit over the closure of `set` at the
/// given per-period prices.
pub fn profit_max(
    player: PlayerRef,
    set: &StatusOutputSet,
    prices: &[Rat],
) -> Result<ProfitMax, String> {
    if set.is_empty() {
        return Err(format!("profit_max over empty set for {}", player.id()));
    }
    let closed = set.closure();
    let mut best: Option<Rat> = None;
    let mut arg_profiles: Vec<Profile> = Vec::new();
    let mut extremes: Vec<(Vec<bool>, Vec<Rat>)> = Vec::new();

    for profile in &closed.profiles {
        let Some(res) = profile_max(player, profile, prices)? else {
            continue;
        };
        match &best {
            Some(b) if res.value < *b => {}
            Some(b) if res.value == *b => {
                arg_profiles.extend(res.arg_profiles.clone());
                extremes.extend(res.extremes.clone());
            }
            _ => {
                best = Some(res.value.clone());
                arg_profiles = res.arg_profiles.clone();
                extremes = res.extremes.clone();
            }
        }
    }
    let value = best.ok_or_else(|| format!("all profiles infeasible for {}", player.id()))?;
    extremes.sort();
    extremes.dedup();
    Ok(ProfitMax {
        value,
        argmax: StatusOutputSet::new(arg_profiles),
        extreme_points: extremes,
    })
}

struct ProfileMax {
    value: Rat,
    arg_profiles: Vec<Profile>,
    extremes: Vec<(Vec<bool>, Vec<Rat>)>,
}

fn profile_max(
    player: PlayerRef,
    profile: &Profile,
    prices: &[Rat],
) -> Result<Option<ProfileMax>, String> {
    if profile.ramp.is_some() {
        return Ok(ramp_profile_max(player, profile, prices));
    }
    // Separable case: optimize each period over its interval union.
    let constant = pattern_constant(player, &profile.pattern, profile.ranges.len());
    let mut value = constant;
    let mut per_period: Vec<IntervalUnion> = Vec::new();
    for (t, range) in profile.ranges.iter().enumerate() {
        if range.is_empty() {
            return Ok(None);
        }
        let (v, arg) = period_max(player, &profile.pattern, t, range, &prices[t])?;
        value += v;
        per_period.push(arg);
    }
    let arg_profile = Profile {
        pattern: profile.pattern.clone(),
        ranges: per_period.clone(),
        ramp: None,
    };
    // extreme points: products of per-period argmax endpoints
    let mut points: Vec<Vec<Rat>> = vec![Vec::new()];
    for arg in &per_period {
        let mut ends: Vec<Rat> = Vec::new();
        for iv in &arg.intervals {
            ends.push(iv.lo.clone().expect("bounded argmax"));
            if iv.lo != iv.hi {
                ends.push(iv.hi.clone().expect("bounded argmax"));
            }
        }
        ends.dedup();
        points = points
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
    let extremes = points
        .into_iter()
        .map(|q| (profile.pattern.clone(), q))
        .collect();
    Ok(Some(ProfileMax {
        value,
        arg_profiles: vec![arg_profile],
        extremes,
    }))
}

/// Pattern-level constants: no-load and startup charges for units; block
/// benefits for consumers (block payments are part of the linear term).
fn pattern_constant(player: PlayerRef, pattern: &[bool], periods: usize) -> Rat {
    match player {
        PlayerRef::Unit(u) => {
            let mut c = Rat::zero();
            let mut prev_on = u.initial_on;
            for on in pattern {
                if *on {
                    c += u.no_load_cost.clone();
                    if !prev_on {
                        c += u.startup_cost.clone();
                    }
                }
                prev_on = *on;
            }
            -c
        }
        PlayerRef::Consumer(c) => {
            let mut b = Rat::zero();
            for (k, blk) in c.blocks.iter().enumerate() {
                if pattern.get(k).copied().unwrap_or(false) {
                    for t in 0..periods {
                        b += &blk.price * &blk.quantity[t];
                    }
                }
            }
            b
        }
    }
}

/// Maximize the single-period contribution over an interval union.
fn period_max(
    player: PlayerRef,
    pattern: &[bool],
    t: usize,
    range: &IntervalUnion,
    price: &Rat,
) -> Result<(Rat, IntervalUnion), String> {
    let mut best: Option<Rat> = None;
    let mut arg = IntervalUnion::empty();
    for iv in &range.intervals {
        let lo = iv.lo.clone().ok_or("quantity sets must be bounded below")?;
        let hi = iv.hi.clone().ok_or("quantity sets must be bounded above")?;
        let (v, alo, ahi) = concave_max_on_interval(player, pattern, t, &lo, &hi, price);
        match &best {
            Some(b) if v < *b => {}
            Some(b) if v == *b => arg.intervals.push(Interval::closed(alo, ahi)),
            _ => {
                best = Some(v);
                arg = IntervalUnion {
                    intervals: vec![Interval::closed(alo, ahi)],
                };
            }
        }
    }
    arg.normalize();
    Ok((best.expect("non-empty range"), arg))
}

/// Maximize the concave per-period profit term on [lo, hi]; returns
/// (value, argmax_lo, argmax_hi).
fn concave_max_on_interval(
    player: PlayerRef,
    pattern: &[bool],
    t: usize,
    lo: &Rat,
    hi: &Rat,
    price: &Rat,
) -> (Rat, Rat, Rat) {
    match player {
        PlayerRef::Unit(u) => {
            let phi = |g: &Rat| price * g - u.cost.eval(g);
            match &u.cost {
                CostCurve::Affine { slope } => {
                    if price > slope {
                        (phi(hi), hi.clone(), hi.clone())
                    } else if price < slope {
                        (phi(lo), lo.clone(), lo.clone())
                    } else {
                        (phi(lo), lo.clone(), hi.clone())
                    }
                }
                CostCurve::Quadratic { linear, quad } => {
                    if quad.is_zero() {
                        return concave_max_affine(&phi, linear, price, lo, hi);
                    }
                    // stationary point of p*g - (l*g + q*g^2)
                    let star = (price - linear) / (rat(2) * quad);
                    let g = star.max(lo.clone()).min(hi.clone());
                    (phi(&g), g.clone(), g)
                }
                CostCurve::Piecewise { .. } => {
                    // walk breakpoints: slopes non-decreasing, profit concave
                    let mut alo = lo.clone();
                    let mut ahi = lo.clone();
                    let mut cursor = lo.clone();
                    let mut bps = u.cost.breakpoints();
                    bps.retain(|b| b > lo && b < hi);
                    bps.push(hi.clone());
                    let mut rising = true;
                    for b in bps {
                        let s = u.cost.slope_right(&cursor);
                        if rising {
                            if price > &s {
                                alo = b.clone();
                                ahi = b.clone();
                            } else if price == &s {
                                ahi = b.clone();
                                rising = false;
                            } else {
                                rising = false;
                            }
                        }
                        cursor = b;
                    }
                    (phi(&alo), alo, ahi)
                }
            }
        }
        PlayerRef::Consumer(c) => {
            // base = fixed load + taken blocks in this period
            let mut base = c.fixed_load[t].clone();
            for (k, blk) in c.blocks.iter().enumerate() {
                if pattern.get(k).copied().unwrap_or(false) {
                    base += blk.quantity[t].clone();
                }
            }
            let elo = (lo - &base).max(Rat::zero());
            let ehi = hi - &base;
            if ehi < elo {
                // range entirely below the mandatory part: stay at lo
                let v = -(price * lo);
                return (v, lo.clone(), lo.clone());
            }
            if let Some(qb) = &c.quadratic {
                let bene = |e: &Rat| &qb.linear * e + &qb.quad * e * e;
                let val = |e: &Rat| bene(e) - price * (&base + e);
                if qb.quad.is_zero() {
                    let (v, a, b) = concave_max_affine(
                        &|e| bene(e) - price * (&base + e),
                        &qb.linear,
                        price,
                        &elo,
                        &ehi,
                    );
                    return (v, &base + a, &base + b);
                }
                let star = (price - &qb.linear) / (rat(2) * &qb.quad);
                let e = star.max(elo.clone()).min(ehi.clone());
                (val(&e), &base + &e, base + e)
            } else {
                // greedy over decreasing step bids; ties at price flatten
                let mut taken = Rat::zero();
                let mut flat_hi = Rat::zero();
                let mut offset = Rat::zero();
                let mut value_best: Option<(Rat, Rat, Rat)> = None;
                let mut surplus = Rat::zero();
                // candidate consumption levels: cumulative segment boundaries
                // clipped to [elo, ehi], scanning marginal price vs price
                let mut consider = |e: &Rat, surplus_at: &Rat| {
                    let v = surplus_at - price * (&base + e);
                    match &mut value_best {
                        Some((bv, blo, bhi)) => {
                            if v > *bv {
                                *bv = v;
                                *blo = e.clone();
                                *bhi = e.clone();
                            } else if v == *bv {
                                if e < blo {
                                    *blo = e.clone();
                                }
                                if e > bhi {
                                    *bhi = e.clone();
                                }
                            }
                        }
                        None => value_best = Some((v, e.clone(), e.clone())),
                    }
                };
                let eval_at = |e: &Rat, c: &ConsumerSpec| -> Rat {
                    // elastic benefit at e, greedy through segments
                    let mut rem = e.clone();
                    let mut acc = Rat::zero();
                    for seg in &c.elastic[t] {
                        if rem.is_zero() {
                            break;
                        }
                        let take = rem.clone().min(seg.quantity.clone());
                        acc += &seg.price * &take;
                        rem -= take;
                    }
                    acc
                };
                let _ = (&mut taken, &mut flat_hi, &mut offset, &mut surplus);
                // evaluate at elo, ehi, and every cumulative boundary in between
                let mut marks = vec![elo.clone(), ehi.clone()];
                let mut cum = Rat::zero();
                for seg in &c.elastic[t] {
                    cum += seg.quantity.clone();
                    if cum > elo && cum < ehi {
                        marks.push(cum.clone());
                    }
                }
                marks.sort();
                marks.dedup();
                for m in &marks {
                    consider(m, &eval_at(m, c));
                }
                let (v, alo, ahi) = value_best.expect("non-empty marks");
                (v, &base + alo, &base + ahi)
            }
        }
    }
}

/// Single-period best response of a player to a shadow price: maximize the
/// per-period profit term over [lo, hi]. Returns (value, argmax_lo, argmax_hi).
/// The dispatch solver uses this to intersect supply and demand responses.
pub fn best_response_interval(
    player: PlayerRef,
    pattern: &[bool],
    t: usize,
    lo: &Rat,
    hi: &Rat,
    price: &Rat,
) -> (Rat, Rat, Rat) {
    concave_max_on_interval(player, pattern, t, lo, hi, price)
}

/// Affine helper: profit slope is (price - slope) throughout.
fn concave_max_affine(
    phi: &dyn Fn(&Rat) -> Rat,
    slope: &Rat,
    price: &Rat,
    lo: &Rat,
    hi: &Rat,
) -> (Rat, Rat, Rat) {
    if price > slope {
        (phi(hi), hi.clone(), hi.clone())
    } else if price < slope {
        (phi(lo), lo.clone(), lo.clone())
    } else {
        (phi(lo), lo.clone(), hi.clone())
    }
}

/// Ramp-coupled two-period maximization: linear objective over the clipped
/// box polygon. Only affine costs reach this path.
fn ramp_profile_max(player: PlayerRef, profile: &Profile, prices: &[Rat]) -> Option<ProfileMax> {
    let PlayerRef::Unit(u) = player else {
        panic!("ramp coupling applies to units only");
    };
    debug_assert!(
        !u.cost.is_quadratic(),
        "quadratic cost with ramp unsupported"
    );
    let slope = match &u.cost {
        CostCurve::Affine { slope } => slope.clone(),
        _ => panic!("ramp profiles require affine cost"),
    };
    let ramp = profile.ramp.as_ref().unwrap();
    let vertices = ramp_polygon_vertices(&profile.ranges, ramp)?;
    let constant = pattern_constant(player, &profile.pattern, profile.ranges.len());
    let objective = |q: &Vec<Rat>| -> Rat {
        prices
            .iter()
            .zip(q)
            .map(|(p, x)| (p - &slope) * x)
            .fold(constant.clone(), |a, b| a + b)
    };
    let mut best: Option<Rat> = None;
    let mut arg: Vec<Vec<Rat>> = Vec::new();
    for v in &vertices {
        let val = objective(v);
        match &best {
            Some(b) if val < *b => {}
            Some(b) if val == *b => arg.push(v.clone()),
            _ => {
                best = Some(val);
                arg = vec![v.clone()];
            }
        }
    }
    let value = best?;
    let arg_profile = Profile {
        pattern: profile.pattern.clone(),
        ranges: vec![argmax_span(&arg, 0), argmax_span(&arg, 1)],
        ramp: Some(ramp.clone()),
    };
    Some(ProfileMax {
        value,
        arg_profiles: vec![arg_profile],
        extremes: arg
            .into_iter()
            .map(|q| (profile.pattern.clone(), q))
            .collect(),
    })
}

fn argmax_span(points: &[Vec<Rat>], t: usize) -> IntervalUnion {
    let lo = points.iter().map(|p| p[t].clone()).min().unwrap();
    let hi = points.iter().map(|p| p[t].clone()).max().unwrap();
    IntervalUnion::closed(lo, hi)
}

/// Vertices of {q in box : |q_t - q_{t-1}| <= limit, q_0 = initial}. Returns
/// None when empty. Handles one or two periods.
pub fn ramp_polygon_vertices(ranges: &[IntervalUnion], ramp: &RampChain) -> Option<Vec<Vec<Rat>>> {
    let bounds: Vec<(Rat, Rat)> = ranges
        .iter()
        .map(|r| {
            (
                r.min_element().cloned().expect("bounded"),
                r.max_element().cloned().expect("bounded"),
            )
        })
        .collect();
    match bounds.len() {
        1 => {
            let lo = bounds[0].0.clone().max(&ramp.initial_output - &ramp.limit);
            let hi = bounds[0].1.clone().min(&ramp.initial_output + &ramp.limit);
            if lo > hi {
                None
            } else {
                Some(vec![vec![lo.clone()], vec![hi]])
            }
        }
        2 => {
            let lo1 = bounds[0].0.clone().max(&ramp.initial_output - &ramp.limit);
            let hi1 = bounds[0].1.clone().min(&ramp.initial_output + &ramp.limit);
            if lo1 > hi1 {
                return None;
            }
            // clip the rectangle [lo1,hi1]x[lo2,hi2] by |q2 - q1| <= limit
            let (lo2, hi2) = bounds[1].clone();
            let mut poly: Vec<(Rat, Rat)> = vec![
                (lo1.clone(), lo2.clone()),
                (hi1.clone(), lo2.clone()),
                (hi1.clone(), hi2.clone()),
                (lo1.clone(), hi2.clone()),
            ];
            // half-plane q2 - q1 <= limit, then q1 - q2 <= limit
            for (sign_q1, sign_q2) in [(-rat(1), rat(1)), (rat(1), -rat(1))] {
                let f = |p: &(Rat, Rat)| &sign_q1 * &p.0 + &sign_q2 * &p.1 - &ramp.limit;
                let mut next: Vec<(Rat, Rat)> = Vec::new();
                let n = poly.len();
                for i in 0..n {
                    let a = poly[i].clone();
                    let b = poly[(i + 1) % n].clone();
                    let fa = f(&a);
                    let fb = f(&b);
                    if !fa.is_positive() {
                        next.push(a.clone());
                    }
                    if (fa.is_positive() && !fb.is_positive())
                        || (!fa.is_positive() && fb.is_positive())
                    {
                        let t = &fa / (&fa - &fb);
                        next.push((&a.0 + &t * (&b.0 - &a.0), &a.1 + &t * (&b.1 - &a.1)));
                    }
                }
                poly = next;
                if poly.is_empty() {
                    return None;
                }
            }
            poly.dedup();
            if poly.len() > 1 && poly.first() == poly.last() {
                poly.pop();
            }
            Some(poly.into_iter().map(|(a, b)| vec![a, b]).collect())
        }
        _ => panic!("ramp coupling supported for one or two periods"),
    }
}

// ---------------------------------------------------------------------------
// Economic minimum output, supply correspondence, convex hull
// ---------------------------------------------------------------------------

/// Smallest output at which marginal revenue at the unit's own marginal cost
/// covers average total cost; below it the unit never appears on its supply
/// curve. Single-period view.
pub fn economic_min_output(u: &UnitSpec) -> Rat {
    if u.no_load_cost.is_zero() {
        return u.g_min.clone();
    }
    match &u.cost {
        CostCurve::Affine { .. } => u.g_max.clone(),
        CostCurve::Quadratic { quad, .. } => {
            if quad.is_zero() {
                return u.g_max.clone();
            }
            // condition w + c(g) <= g c'(g) reduces to g^2 >= w/quad
            let target = &u.no_load_cost / quad;
            let root = rational_sqrt(&target);
            let g = root.max(u.g_min.clone());
            if g < u.g_max {
                g
            } else {
                u.g_max.clone()
            }
        }
        CostCurve::Piecewise { .. } => {
            let mut candidates = vec![u.g_min.clone()];
            for b in u.cost.breakpoints() {
                if b > u.g_min && b < u.g_max {
                    candidates.push(b);
                }
            }
            candidates.sort();
            for g in candidates {
                let s = u.cost.slope_right(&g);
                if !g.is_zero() && &u.no_load_cost + u.cost.eval(&g) <= &g * &s {
                    return g;
                }
            }
            u.g_max.clone()
        }
    }
}

/// sqrt of a non-negative rational: exact when both parts are perfect squares,
/// otherwise a tight rational enclosure midpoint (width < 1e-30).
pub fn rational_sqrt(x: &Rat) -> Rat {
    use num_bigint::BigInt;
    assert!(!x.is_negative(), "sqrt of negative rational");
    if x.is_zero() {
        return Rat::zero();
    }
    let ns = x.numer().sqrt();
    let ds = x.denom().sqrt();
    if &(&ns * &ns) == x.numer() && &(&ds * &ds) == x.denom() {
        return Rat::new(ns, ds);
    }
    // bisection to 1e-30
    let mut lo = Rat::zero();
    let mut hi = x.clone().max(rat(1));
    let tol = Rat::new(BigInt::from(1), BigInt::from(10u8).pow(30));
    while &hi - &lo > tol {
        let mid = (&lo + &hi) / rat(2);
        if &mid * &mid <= *x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (&lo + &hi) / rat(2)
}

/// Output set maximizing the unit's single-period profit at price p.
pub fn supply_correspondence(u: &UnitSpec, p: &Rat) -> IntervalUnion {
    let set = unit_feasible_set(u, 1);
    let pm =
        profit_max(PlayerRef::Unit(u), &set, std::slice::from_ref(p)).expect("unit set non-empty");
    let mut out = IntervalUnion::empty();
    for prof in &pm.argmax.profiles {
        for iv in &prof.ranges[0].intervals {
            out.intervals.push(iv.clone());
        }
    }
    out.normalize();
    out
}

/// A piece of the closed convex hull of the unit's all-in cost.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPiece {
    pub lo: Rat,
    pub hi: Rat,
    /// value at lo
    pub base: Rat,
    /// affine slope; quadratic pieces add `quad * (g - lo)^2`
    pub slope: Rat,
    pub quad: Rat,
}

/// Closed convex hull of f(g) = startup-equivalent fixed charge + c(g) on
/// {0} ∪ [g_min, g_max], described piecewise on [0, g_max].
#[derive(Debug, Clone, PartialEq)]
pub struct HullCurve {
    pub pieces: Vec<HullPiece>,
}

impl HullCurve {
    pub fn eval(&self, g: &Rat) -> Rat {
        for p in &self.pieces {
            if g >= &p.lo && g <= &p.hi {
                let d = g - &p.lo;
                return &p.base + &p.slope * &d + &p.quad * &d * &d;
            }
        }
        panic!("hull evaluated outside [0, g_max]");
    }

    pub fn domain_hi(&self) -> &Rat {
        &self.pieces.last().expect("non-empty hull").hi
    }

    /// subgradient bounds at g: (left, right); right is None at the domain top.
    pub fn subgradient(&self, g: &Rat) -> (Option<Rat>, Option<Rat>) {
        let mut left: Option<Rat> = None;
        let mut right: Option<Rat> = None;
        for p in &self.pieces {
            if g > &p.lo && g < &p.hi {
                let s = &p.slope + rat(2) * &p.quad * (g - &p.lo);
                return (Some(s.clone()), Some(s));
            }
            if g == &p.hi {
                left = Some(&p.slope + rat(2) * &p.quad * (&p.hi - &p.lo));
            }
            if g == &p.lo {
                right = Some(p.slope.clone());
                if left.is_none() && p.lo.is_zero() {
                    left = None; // domain bottom
                }
                break;
            }
        }
        (left, right)
    }
}

/// Build the convex hull of the unit's single-period all-in cost (variable
/// cost plus its per-period fixed charge). The hull is a ray through the
/// origin up to the largest minimizer of average total cost, then the
/// original cost.
pub fn convex_hull_cost(u: &UnitSpec) -> HullCurve {
    let w = &u.no_load_cost;
    if u.g_max.is_zero() {
        return HullCurve {
            pieces: vec![HullPiece {
                lo: Rat::zero(),
                hi: Rat::zero(),
                base: Rat::zero(),
                slope: Rat::zero(),
                quad: Rat::zero(),
            }],
        };
    }
    // minimize average total cost (w + c(g))/g over (0, g_max]
    let mut candidates: Vec<Rat> = vec![u.g_max.clone()];
    if u.g_min.is_positive() {
        candidates.push(u.g_min.clone());
    }
    for b in u.cost.breakpoints() {
        if b > u.g_min && b < u.g_max && b.is_positive() {
            candidates.push(b);
        }
    }
    if let CostCurve::Quadratic { quad, .. } = &u.cost {
        if quad.is_positive() && w.is_positive() {
            let g = rational_sqrt(&(w / quad));
            if g > u.g_min && g < u.g_max && g.is_positive() {
                candidates.push(g);
            }
        }
    }
    if u.g_min.is_zero() && w.is_zero() {
        // ATC tends to the initial slope at 0+; seed with a tiny point
        candidates.push(ratio(1, 1_000_000).min(u.g_max.clone()));
    }
    candidates.sort();
    candidates.dedup();
    let atc = |g: &Rat| (w + u.cost.eval(g)) / g;
    let min_atc = candidates.iter().map(&atc).min().expect("candidates");
    // largest candidate achieving the minimum; within flat affine segments the
    // segment top is always a candidate
    let gamma = candidates
        .iter()
        .filter(|g| atc(g) == min_atc)
        .max()
        .cloned()
        .expect("achieving candidate");

    let mut pieces = vec![HullPiece {
        lo: Rat::zero(),
        hi: gamma.clone(),
        base: Rat::zero(),
        slope: min_atc.clone(),
        quad: Rat::zero(),
    }];
    if gamma < u.g_max {
        // tail = original cost; keep breakpoint structure
        match &u.cost {
            CostCurve::Affine { slope } => pieces.push(HullPiece {
                lo: gamma.clone(),
                hi: u.g_max.clone(),
                base: w + u.cost.eval(&gamma),
                slope: slope.clone(),
                quad: Rat::zero(),
            }),
            CostCurve::Quadratic { linear, quad } => pieces.push(HullPiece {
                lo: gamma.clone(),
                hi: u.g_max.clone(),
                base: w + u.cost.eval(&gamma),
                slope: linear + rat(2) * quad * &gamma,
                quad: quad.clone(),
            }),
            CostCurve::Piecewise { .. } => {
                let mut lo = gamma.clone();
                let mut bps = u.cost.breakpoints();
                bps.retain(|b| *b > gamma && *b < u.g_max);
                bps.push(u.g_max.clone());
                for b in bps {
                    pieces.push(HullPiece {
                        lo: lo.clone(),
                        hi: b.clone(),
                        base: w + u.cost.eval(&lo),
                        slope: u.cost.slope_right(&lo),
                        quad: Rat::zero(),
                    });
                    lo = b;
                }
            }
        }
    }
    HullCurve { pieces }
}

/// Threshold price (minimum average total cost) and the largest break-even
/// output at it. At the threshold the unit is indifferent between staying off
/// and producing at the break-even volume.
pub fn breakeven_threshold(u: &UnitSpec) -> (Rat, Rat) {
    let hull = convex_hull_cost(u);
    let gamma = hull.pieces[0].hi.clone();
    (hull.pieces[0].slope.clone(), gamma)
}
