//! Scenario data model: players, cost/benefit curves, network, validation,
//! and the built-in desk examples.

use crate::rat::{parse_decimal, rat, Rat};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema violation in {field}: {message}")]
    Schema { field: String, message: String },
    #[error("invariant violation in {field}: {message}")]
    Invariant { field: String, message: String },
}

fn invariant(field: &str, message: impl Into<String>) -> ModelError {
    ModelError::Invariant {
        field: field.to_string(),
        message: message.into(),
    }
}

fn schema_err(field: &str, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Planning horizon. Exact solvers handle one or two periods; the oracle
/// accepts more.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub periods: usize,
}

/// Variable cost of a generating unit, anchored at c(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum CostCurve {
    Affine { slope: Rat },
    Quadratic { linear: Rat, quad: Rat },
    Piecewise { segments: Vec<PwaSegment> },
}

/// One affine piece of a piecewise cost: applies up to `upto` MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct PwaSegment {
    pub upto: Rat,
    pub slope: Rat,
}

impl CostCurve {
    pub fn affine(slope: i64) -> Self {
        CostCurve::Affine { slope: rat(slope) }
    }

    /// c(g). Callers keep g within the unit's box; beyond the last piecewise
    /// breakpoint the final slope extends.
    pub fn eval(&self, g: &Rat) -> Rat {
        match self {
            CostCurve::Affine { slope } => slope * g,
            CostCurve::Quadratic { linear, quad } => linear * g + quad * g * g,
            CostCurve::Piecewise { segments } => {
                let mut acc = Rat::zero();
                let mut lo = Rat::zero();
                for seg in segments {
                    if *g <= seg.upto {
                        return acc + &seg.slope * (g - &lo);
                    }
                    acc += &seg.slope * (&seg.upto - &lo);
                    lo = seg.upto.clone();
                }
                let last = segments.last().expect("non-empty piecewise");
                acc + &last.slope * (g - &lo)
            }
        }
    }

    /// Right derivative of c at g.
    pub fn slope_right(&self, g: &Rat) -> Rat {
        match self {
            CostCurve::Affine { slope } => slope.clone(),
            CostCurve::Quadratic { linear, quad } => linear + rat(2) * quad * g,
            CostCurve::Piecewise { segments } => {
                for seg in segments {
                    if *g < seg.upto {
                        return seg.slope.clone();
                    }
                }
                segments.last().expect("non-empty piecewise").slope.clone()
            }
        }
    }

    /// Left derivative of c at g (equals the right one away from breakpoints).
    pub fn slope_left(&self, g: &Rat) -> Rat {
        match self {
            CostCurve::Affine { slope } => slope.clone(),
            CostCurve::Quadratic { linear, quad } => linear + rat(2) * quad * g,
            CostCurve::Piecewise { segments } => {
                for seg in segments {
                    if *g <= seg.upto {
                        return seg.slope.clone();
                    }
                }
                segments.last().expect("non-empty piecewise").slope.clone()
            }
        }
    }

    /// Interior slope-change points, for breakpoint scans.
    pub fn breakpoints(&self) -> Vec<Rat> {
        match self {
            CostCurve::Piecewise { segments } => segments[..segments.len().saturating_sub(1)]
                .iter()
                .map(|s| s.upto.clone())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, CostCurve::Quadratic { quad, .. } if !quad.is_zero())
    }

    fn validate(&self, field: &str) -> Result<(), ModelError> {
        match self {
            CostCurve::Affine { slope } => {
                if slope.is_negative() {
                    return Err(invariant(field, "affine slope must be non-negative"));
                }
            }
            CostCurve::Quadratic { linear, quad } => {
                if linear.is_negative() || quad.is_negative() {
                    return Err(invariant(
                        field,
                        "quadratic cost must be convex and non-decreasing (coefficients >= 0)",
                    ));
                }
            }
            CostCurve::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(invariant(
                        field,
                        "piecewise cost needs at least one segment",
                    ));
                }
                let mut prev_upto: Option<&Rat> = None;
                let mut prev_slope: Option<&Rat> = None;
                for (i, seg) in segments.iter().enumerate() {
                    if seg.slope.is_negative() {
                        return Err(invariant(field, format!("segment {i} slope negative")));
                    }
                    if let Some(p) = prev_slope {
                        if &seg.slope < p {
                            return Err(invariant(field, format!("segment {i} breaks convexity")));
                        }
                    }
                    if let Some(u) = prev_upto {
                        if &seg.upto <= u {
                            return Err(invariant(
                                field,
                                format!("segment {i} breakpoints not increasing"),
                            ));
                        }
                    }
                    prev_upto = Some(&seg.upto);
                    prev_slope = Some(&seg.slope);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSpec {
    pub id: String,
    pub node: usize,
    pub g_min: Rat,
    pub g_max: Rat,
    /// MW per hour; absent means unconstrained between periods.
    pub ramp_limit: Option<Rat>,
    pub cost: CostCurve,
    /// $ per online period.
    pub no_load_cost: Rat,
    /// $ per off-to-on transition, judged against `initial_on`.
    pub startup_cost: Rat,
    pub initial_on: bool,
    pub initial_output: Rat,
}

impl UnitSpec {
    /// Total cost of a committed pattern and dispatch, including no-load and
    /// startup charges. `u` and `g` have one entry per period.
    pub fn total_cost(&self, u: &[bool], g: &[Rat]) -> Rat {
        let mut cost = Rat::zero();
        let mut prev_on = self.initial_on;
        for (t, on) in u.iter().enumerate() {
            if *on {
                cost += self.cost.eval(&g[t]) + self.no_load_cost.clone();
                if !prev_on {
                    cost += self.startup_cost.clone();
                }
            }
            prev_on = *on;
        }
        cost
    }
}

/// One price-quantity step of a consumer bid. Steps within a period must have
/// strictly decreasing prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticSegment {
    pub price: Rat,
    pub quantity: Rat,
}

/// Single-segment concave benefit `linear*d + quad*d^2` on [0, d_max].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBenefit {
    pub linear: Rat,
    pub quad: Rat,
    pub d_max: Rat,
}

/// All-or-nothing consumption block (demand-side non-convexity).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBlock {
    pub price: Rat,
    /// Quantity per period when the block is taken.
    pub quantity: Vec<Rat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerSpec {
    pub id: String,
    pub node: usize,
    /// Price-insensitive demand per period.
    pub fixed_load: Vec<Rat>,
    /// Step bids per period (may be empty).
    pub elastic: Vec<Vec<ElasticSegment>>,
    pub quadratic: Option<QuadraticBenefit>,
    pub blocks: Vec<DiscreteBlock>,
}

impl ConsumerSpec {
    /// Elastic benefit of consuming `d` per period with block pattern `v`.
    /// The fixed-load part carries no benefit term; it enters only as a
    /// constraint, so welfare and profits are reported net of it.
    pub fn benefit(&self, v: &[bool], d: &[Rat]) -> Rat {
        let mut total = Rat::zero();
        for (t, dt) in d.iter().enumerate() {
            let mut remaining = dt - &self.fixed_load[t];
            // block consumption first: it is all-or-nothing at a known price
            for (k, b) in self.blocks.iter().enumerate() {
                if v.get(k).copied().unwrap_or(false) {
                    total += &b.price * &b.quantity[t];
                    remaining -= &b.quantity[t];
                }
            }
            if remaining.is_negative() {
                continue; // infeasible points are caught by feasibility checks
            }
            if let Some(q) = &self.quadratic {
                total += &q.linear * &remaining + &q.quad * &remaining * &remaining;
            } else {
                for seg in &self.elastic[t] {
                    if remaining.is_zero() {
                        break;
                    }
                    let take = remaining.clone().min(seg.quantity.clone());
                    total += &seg.price * &take;
                    remaining -= take;
                }
            }
        }
        total
    }

    /// Maximum total consumption in a period.
    pub fn d_max(&self, t: usize) -> Rat {
        let mut cap = self.fixed_load[t].clone();
        for b in &self.blocks {
            cap += b.quantity[t].clone();
        }
        if let Some(q) = &self.quadratic {
            cap += q.d_max.clone();
        } else {
            for seg in &self.elastic[t] {
                cap += seg.quantity.clone();
            }
        }
        cap
    }

    pub fn has_discrete(&self) -> bool {
        !self.blocks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    OneNode,
    TwoNode { line_capacity: Rat },
}

impl Network {
    pub fn node_count(&self) -> usize {
        match self {
            Network::OneNode => 1,
            Network::TwoNode { .. } => 2,
        }
    }
}

/// How published prices are treated when computing payments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingPolicy {
    Exact,
    /// Settle at the price rounded to the cent (halves away from zero).
    CentPrice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub time: TimeGrid,
    pub units: Vec<UnitSpec>,
    pub consumers: Vec<ConsumerSpec>,
    pub network: Network,
    pub rounding: RoundingPolicy,
}

impl Scenario {
    pub fn periods(&self) -> usize {
        self.time.periods
    }

    pub fn nodes(&self) -> usize {
        self.network.node_count()
    }

    /// Price dimension of the dual problem: one price per (node, period).
    pub fn price_dim(&self) -> usize {
        self.periods() * self.nodes()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let t = self.time.periods;
        if t < 1 {
            return Err(invariant("periods", "at least one period required"));
        }
        if self.units.is_empty() {
            return Err(invariant("units", "at least one unit required"));
        }
        if let Network::TwoNode { line_capacity } = &self.network {
            if !line_capacity.is_positive() {
                return Err(invariant("network.line_capacity", "must be positive"));
            }
        }
        let nodes = self.nodes();
        for u in &self.units {
            let f = |s: &str| format!("units[{}].{}", u.id, s);
            if u.node >= nodes {
                return Err(invariant(
                    &f("node"),
                    format!("node {} not in network", u.node),
                ));
            }
            if u.g_min.is_negative() {
                return Err(invariant(&f("g_min"), "must be non-negative"));
            }
            if u.g_min > u.g_max {
                return Err(invariant(&f("g_min"), "g_min exceeds g_max"));
            }
            if u.no_load_cost.is_negative() || u.startup_cost.is_negative() {
                return Err(invariant(
                    &f("no_load_cost"),
                    "fixed charges must be non-negative",
                ));
            }
            if !u.initial_on && !u.initial_output.is_zero() {
                return Err(invariant(
                    &f("initial_output"),
                    "offline initial status requires zero initial output",
                ));
            }
            if let Some(r) = &u.ramp_limit {
                if !r.is_positive() {
                    return Err(invariant(&f("ramp_limit"), "must be positive when present"));
                }
            }
            u.cost.validate(&f("cost"))?;
        }
        for c in &self.consumers {
            let f = |s: &str| format!("consumers[{}].{}", c.id, s);
            if c.node >= nodes {
                return Err(invariant(
                    &f("node"),
                    format!("node {} not in network", c.node),
                ));
            }
            if c.fixed_load.len() != t {
                return Err(invariant(&f("fixed_load"), "needs one entry per period"));
            }
            if c.elastic.len() != t {
                return Err(invariant(&f("elastic"), "needs one entry per period"));
            }
            for (ti, dt) in c.fixed_load.iter().enumerate() {
                if dt.is_negative() {
                    return Err(invariant(
                        &f(&format!("fixed_load[{ti}]")),
                        "must be non-negative",
                    ));
                }
            }
            for (ti, segs) in c.elastic.iter().enumerate() {
                let mut prev: Option<&Rat> = None;
                for (si, seg) in segs.iter().enumerate() {
                    if seg.quantity.is_negative() {
                        return Err(invariant(
                            &f(&format!("elastic[{ti}][{si}].quantity")),
                            "must be non-negative",
                        ));
                    }
                    if let Some(p) = prev {
                        if &seg.price >= p {
                            return Err(invariant(
                                &f(&format!("elastic[{ti}][{si}].price")),
                                "segment prices must be strictly decreasing",
                            ));
                        }
                    }
                    prev = Some(&seg.price);
                }
                if !segs.is_empty() && c.quadratic.is_some() {
                    return Err(invariant(
                        &f("quadratic_benefit"),
                        "a consumer uses at most one of step bids and quadratic benefit",
                    ));
                }
            }
            if let Some(q) = &c.quadratic {
                if q.quad.is_positive() {
                    return Err(invariant(
                        &f("quadratic_benefit.quad"),
                        "benefit must be concave",
                    ));
                }
                if q.linear.is_negative() || (&q.linear + &q.quad * &q.d_max).is_negative() {
                    return Err(invariant(
                        &f("quadratic_benefit"),
                        "benefit must be non-negative on [0, d_max]",
                    ));
                }
                if q.d_max.is_negative() {
                    return Err(invariant(
                        &f("quadratic_benefit.d_max"),
                        "must be non-negative",
                    ));
                }
            }
            for (bi, b) in c.blocks.iter().enumerate() {
                if b.quantity.len() != t {
                    return Err(invariant(
                        &f(&format!("blocks[{bi}].quantity")),
                        "needs one entry per period",
                    ));
                }
            }
        }
        // demand must be coverable: per node-period with worst-case line help
        for ti in 0..t {
            for n in 0..nodes {
                let need: Rat = self
                    .consumers
                    .iter()
                    .filter(|c| c.node == n)
                    .map(|c| c.fixed_load[ti].clone())
                    .fold(Rat::zero(), |a, b| a + b);
                let local: Rat = self
                    .units
                    .iter()
                    .filter(|u| u.node == n)
                    .map(|u| u.g_max.clone())
                    .fold(Rat::zero(), |a, b| a + b);
                let import = match &self.network {
                    Network::OneNode => Rat::zero(),
                    Network::TwoNode { line_capacity } => line_capacity.clone(),
                };
                if need > local + import {
                    return Err(invariant(
                        "consumers.fixed_load",
                        format!("fixed load at node {n} period {ti} exceeds deliverable capacity"),
                    ));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

mod raw {
    use serde::{Deserialize, Serialize};
    use serde_json::Value;

    #[derive(Serialize, Deserialize)]
    pub struct RawScenario {
        pub periods: usize,
        pub network: RawNetwork,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub rounding: Option<String>,
        pub units: Vec<RawUnit>,
        #[serde(default)]
        pub consumers: Vec<RawConsumer>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawNetwork {
        pub kind: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub line_capacity: Option<Value>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawUnit {
        pub id: String,
        #[serde(default)]
        pub node: usize,
        pub g_min: Value,
        pub g_max: Value,
        pub cost: RawCost,
        #[serde(default)]
        pub no_load_cost: Option<Value>,
        #[serde(default)]
        pub startup_cost: Option<Value>,
        #[serde(default)]
        pub ramp_limit: Option<Value>,
        #[serde(default)]
        pub initial_status: Option<String>,
        #[serde(default)]
        pub initial_output: Option<Value>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawCost {
        pub kind: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub slope: Option<Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub linear: Option<Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub quad: Option<Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub segments: Option<Vec<RawSegment>>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawSegment {
        pub upto: Value,
        pub slope: Value,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawConsumer {
        pub id: String,
        #[serde(default)]
        pub node: usize,
        pub fixed_load: Vec<Value>,
        #[serde(default)]
        pub elastic: Option<Vec<Vec<RawStep>>>,
        #[serde(default)]
        pub quadratic_benefit: Option<RawQuad>,
        #[serde(default)]
        pub blocks: Option<Vec<RawBlock>>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawStep {
        pub price: Value,
        pub quantity: Value,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawQuad {
        pub linear: Value,
        pub quad: Value,
        pub d_max: Value,
    }

    #[derive(Serialize, Deserialize)]
    pub struct RawBlock {
        pub price: Value,
        pub quantity: Vec<Value>,
    }
}

fn value_to_rat(v: &serde_json::Value, field: &str) -> Result<Rat, ModelError> {
    let text = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        other => {
            return Err(schema_err(
                field,
                format!("expected numeric literal, got {other}"),
            ));
        }
    };
    parse_decimal(&text).map_err(|e| schema_err(field, e))
}

fn rat_to_value(r: &Rat) -> serde_json::Value {
    serde_json::Value::String(crate::rat::format_exact(r))
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ModelError> {
    let raw: raw::RawScenario =
        serde_json::from_str(text).map_err(|e| schema_err("document", e.to_string()))?;
    let t = raw.periods;

    let network = match raw.network.kind.as_str() {
        "one_node" => Network::OneNode,
        "two_node" => {
            let cap = raw
                .network
                .line_capacity
                .as_ref()
                .ok_or_else(|| schema_err("network.line_capacity", "required for two_node"))?;
            Network::TwoNode {
                line_capacity: value_to_rat(cap, "network.line_capacity")?,
            }
        }
        other => {
            return Err(schema_err(
                "network.kind",
                format!("unknown kind {other:?}"),
            ))
        }
    };

    let rounding = match raw.rounding.as_deref() {
        None | Some("cent") => RoundingPolicy::CentPrice,
        Some("exact") => RoundingPolicy::Exact,
        Some(other) => return Err(schema_err("rounding", format!("unknown policy {other:?}"))),
    };

    let mut units = Vec::new();
    for ru in &raw.units {
        let f = |s: &str| format!("units[{}].{}", ru.id, s);
        let cost = match ru.cost.kind.as_str() {
            "affine" => CostCurve::Affine {
                slope: value_to_rat(
                    ru.cost
                        .slope
                        .as_ref()
                        .ok_or_else(|| schema_err(&f("cost.slope"), "required"))?,
                    &f("cost.slope"),
                )?,
            },
            "quadratic" => CostCurve::Quadratic {
                linear: value_to_rat(
                    ru.cost
                        .linear
                        .as_ref()
                        .ok_or_else(|| schema_err(&f("cost.linear"), "required"))?,
                    &f("cost.linear"),
                )?,
                quad: value_to_rat(
                    ru.cost
                        .quad
                        .as_ref()
                        .ok_or_else(|| schema_err(&f("cost.quad"), "required"))?,
                    &f("cost.quad"),
                )?,
            },
            "piecewise" => {
                let segs = ru
                    .cost
                    .segments
                    .as_ref()
                    .ok_or_else(|| schema_err(&f("cost.segments"), "required"))?;
                CostCurve::Piecewise {
                    segments: segs
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            Ok(PwaSegment {
                                upto: value_to_rat(
                                    &s.upto,
                                    &f(&format!("cost.segments[{i}].upto")),
                                )?,
                                slope: value_to_rat(
                                    &s.slope,
                                    &f(&format!("cost.segments[{i}].slope")),
                                )?,
                            })
                        })
                        .collect::<Result<_, ModelError>>()?,
                }
            }
            other => {
                return Err(schema_err(
                    &f("cost.kind"),
                    format!("unknown kind {other:?}"),
                ))
            }
        };
        let initial_on = match ru.initial_status.as_deref() {
            None | Some("off") => false,
            Some("on") => true,
            Some(other) => {
                return Err(schema_err(
                    &f("initial_status"),
                    format!("unknown status {other:?}"),
                ))
            }
        };
        units.push(UnitSpec {
            id: ru.id.clone(),
            node: ru.node,
            g_min: value_to_rat(&ru.g_min, &f("g_min"))?,
            g_max: value_to_rat(&ru.g_max, &f("g_max"))?,
            ramp_limit: ru
                .ramp_limit
                .as_ref()
                .map(|v| value_to_rat(v, &f("ramp_limit")))
                .transpose()?,
            cost,
            no_load_cost: ru
                .no_load_cost
                .as_ref()
                .map(|v| value_to_rat(v, &f("no_load_cost")))
                .transpose()?
                .unwrap_or_else(Rat::zero),
            startup_cost: ru
                .startup_cost
                .as_ref()
                .map(|v| value_to_rat(v, &f("startup_cost")))
                .transpose()?
                .unwrap_or_else(Rat::zero),
            initial_on,
            initial_output: ru
                .initial_output
                .as_ref()
                .map(|v| value_to_rat(v, &f("initial_output")))
                .transpose()?
                .unwrap_or_else(Rat::zero),
        });
    }

    let mut consumers = Vec::new();
    for rc in &raw.consumers {
        let f = |s: &str| format!("consumers[{}].{}", rc.id, s);
        let fixed_load = rc
            .fixed_load
            .iter()
            .enumerate()
            .map(|(i, v)| value_to_rat(v, &f(&format!("fixed_load[{i}]"))))
            .collect::<Result<Vec<_>, _>>()?;
        let elastic = match &rc.elastic {
            None => vec![Vec::new(); t],
            Some(per_period) => {
                if per_period.len() != t {
                    return Err(schema_err(&f("elastic"), "needs one list per period"));
                }
                per_period
                    .iter()
                    .map(|segs| {
                        segs.iter()
                            .enumerate()
                            .map(|(i, s)| {
                                Ok(ElasticSegment {
                                    price: value_to_rat(
                                        &s.price,
                                        &f(&format!("elastic[{i}].price")),
                                    )?,
                                    quantity: value_to_rat(
                                        &s.quantity,
                                        &f(&format!("elastic[{i}].quantity")),
                                    )?,
                                })
                            })
                            .collect::<Result<Vec<_>, ModelError>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        consumers.push(ConsumerSpec {
            id: rc.id.clone(),
            node: rc.node,
            fixed_load,
            elastic,
            quadratic: rc
                .quadratic_benefit
                .as_ref()
                .map(|q| {
                    Ok::<_, ModelError>(QuadraticBenefit {
                        linear: value_to_rat(&q.linear, &f("quadratic_benefit.linear"))?,
                        quad: value_to_rat(&q.quad, &f("quadratic_benefit.quad"))?,
                        d_max: value_to_rat(&q.d_max, &f("quadratic_benefit.d_max"))?,
                    })
                })
                .transpose()?,
            blocks: rc
                .blocks
                .as_ref()
                .map(|bs| {
                    bs.iter()
                        .enumerate()
                        .map(|(i, b)| {
                            Ok(DiscreteBlock {
                                price: value_to_rat(&b.price, &f(&format!("blocks[{i}].price")))?,
                                quantity: b
                                    .quantity
                                    .iter()
                                    .map(|q| value_to_rat(q, &f(&format!("blocks[{i}].quantity"))))
                                    .collect::<Result<_, _>>()?,
                            })
                        })
                        .collect::<Result<Vec<_>, ModelError>>()
                })
                .transpose()?
                .unwrap_or_default(),
        });
    }

    let scenario = Scenario {
        time: TimeGrid { periods: t },
        units,
        consumers,
        network,
        rounding,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Serialize back to the document form accepted by `load_scenario`.
pub fn scenario_to_json(s: &Scenario) -> String {
    let raw = raw::RawScenario {
        periods: s.time.periods,
        network: match &s.network {
            Network::OneNode => raw::RawNetwork {
                kind: "one_node".into(),
                line_capacity: None,
            },
            Network::TwoNode { line_capacity } => raw::RawNetwork {
                kind: "two_node".into(),
                line_capacity: Some(rat_to_value(line_capacity)),
            },
        },
        rounding: Some(
            match s.rounding {
                RoundingPolicy::CentPrice => "cent",
                RoundingPolicy::Exact => "exact",
            }
            .into(),
        ),
        units: s
            .units
            .iter()
            .map(|u| raw::RawUnit {
                id: u.id.clone(),
                node: u.node,
                g_min: rat_to_value(&u.g_min),
                g_max: rat_to_value(&u.g_max),
                cost: match &u.cost {
                    CostCurve::Affine { slope } => raw::RawCost {
                        kind: "affine".into(),
                        slope: Some(rat_to_value(slope)),
                        linear: None,
                        quad: None,
                        segments: None,
                    },
                    CostCurve::Quadratic { linear, quad } => raw::RawCost {
                        kind: "quadratic".into(),
                        slope: None,
                        linear: Some(rat_to_value(linear)),
                        quad: Some(rat_to_value(quad)),
                        segments: None,
                    },
                    CostCurve::Piecewise { segments } => raw::RawCost {
                        kind: "piecewise".into(),
                        slope: None,
                        linear: None,
                        quad: None,
                        segments: Some(
                            segments
                                .iter()
                                .map(|seg| raw::RawSegment {
                                    upto: rat_to_value(&seg.upto),
                                    slope: rat_to_value(&seg.slope),
                                })
                                .collect(),
                        ),
                    },
                },
                no_load_cost: Some(rat_to_value(&u.no_load_cost)),
                startup_cost: Some(rat_to_value(&u.startup_cost)),
                ramp_limit: u.ramp_limit.as_ref().map(rat_to_value),
                initial_status: Some(if u.initial_on { "on" } else { "off" }.into()),
                initial_output: Some(rat_to_value(&u.initial_output)),
            })
            .collect(),
        consumers: s
            .consumers
            .iter()
            .map(|c| raw::RawConsumer {
                id: c.id.clone(),
                node: c.node,
                fixed_load: c.fixed_load.iter().map(rat_to_value).collect(),
                elastic: Some(
                    c.elastic
                        .iter()
                        .map(|segs| {
                            segs.iter()
                                .map(|seg| raw::RawStep {
                                    price: rat_to_value(&seg.price),
                                    quantity: rat_to_value(&seg.quantity),
                                })
                                .collect()
                        })
                        .collect(),
                ),
                quadratic_benefit: c.quadratic.as_ref().map(|q| raw::RawQuad {
                    linear: rat_to_value(&q.linear),
                    quad: rat_to_value(&q.quad),
                    d_max: rat_to_value(&q.d_max),
                }),
                blocks: if c.blocks.is_empty() {
                    None
                } else {
                    Some(
                        c.blocks
                            .iter()
                            .map(|b| raw::RawBlock {
                                price: rat_to_value(&b.price),
                                quantity: b.quantity.iter().map(rat_to_value).collect(),
                            })
                            .collect(),
                    )
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("scenario serialization")
}

// ---------------------------------------------------------------------------
// Built-in examples
// ---------------------------------------------------------------------------

/// Parameters for the two parametric built-ins.
#[derive(Debug, Clone)]
pub struct ExampleParams {
    pub a: Rat,
    pub b: Rat,
    pub w: Rat,
    pub d_max: Rat,
    pub g_max: Rat,
}

fn unit(id: &str, g_min: i64, g_max: i64, slope: i64, fixed: i64) -> UnitSpec {
    UnitSpec {
        id: id.into(),
        node: 0,
        g_min: rat(g_min),
        g_max: rat(g_max),
        ramp_limit: None,
        cost: CostCurve::affine(slope),
        no_load_cost: rat(fixed),
        startup_cost: Rat::zero(),
        initial_on: false,
        initial_output: Rat::zero(),
    }
}

fn one_step_consumer(id: &str, price: Rat, quantity: Rat) -> ConsumerSpec {
    ConsumerSpec {
        id: id.into(),
        node: 0,
        fixed_load: vec![Rat::zero()],
        elastic: vec![vec![ElasticSegment { price, quantity }]],
        quadratic: None,
        blocks: Vec::new(),
    }
}

fn fixed_consumer(id: &str, load: i64) -> ConsumerSpec {
    ConsumerSpec {
        id: id.into(),
        node: 0,
        fixed_load: vec![rat(load)],
        elastic: vec![Vec::new()],
        quadratic: None,
        blocks: Vec::new(),
    }
}

/// Build example `n` (1..=9). Examples 1 and 2 are parametric and check their
/// stated parameter inequalities exactly; pass `None` to use reference values.
pub fn builtin_example(n: usize, params: Option<ExampleParams>) -> Result<Scenario, ModelError> {
    let scenario = match n {
        1 => {
            let p = params.unwrap_or(ExampleParams {
                a: rat(10),
                b: rat(20),
                w: rat(500),
                d_max: rat(40),
                g_max: rat(100),
            });
            // requires a >= 0, a + w/g_max < b, and b*d_max < a*d_max + w
            if p.a.is_negative() {
                return Err(invariant("params.a", "requires a >= 0"));
            }
            if !(&p.a + &p.w / &p.g_max < p.b) {
                return Err(invariant("params.b", "requires a + w/g_max < b"));
            }
            if !(&p.b * &p.d_max < &p.a * &p.d_max + &p.w) {
                return Err(invariant("params.w", "requires b*d_max < a*d_max + w"));
            }
            let mut u = unit("producer", 0, 0, 0, 0);
            u.g_max = p.g_max.clone();
            u.cost = CostCurve::Affine { slope: p.a.clone() };
            u.no_load_cost = p.w.clone();
            Scenario {
                time: TimeGrid { periods: 1 },
                units: vec![u],
                consumers: vec![one_step_consumer("consumer", p.b.clone(), p.d_max.clone())],
                network: Network::OneNode,
                rounding: RoundingPolicy::Exact,
            }
        }
        2 => {
            let p = params.unwrap_or(ExampleParams {
                a: rat(1),
                b: Rat::zero(), // unused
                w: rat(10),
                d_max: rat(60),
                g_max: rat(100),
            });
            // requires 6w/a <= d_max < g_max
            if !p.a.is_positive() {
                return Err(invariant("params.a", "requires a > 0"));
            }
            if !(rat(6) * &p.w / &p.a <= p.d_max) {
                return Err(invariant("params.d_max", "requires 6w/a <= d_max"));
            }
            if !(p.d_max < p.g_max) {
                return Err(invariant("params.g_max", "requires d_max < g_max"));
            }
            let mut u = unit("producer", 0, 0, 0, 0);
            u.g_max = p.g_max.clone();
            u.cost = CostCurve::Affine { slope: p.a.clone() };
            u.no_load_cost = p.w.clone();
            // inverse demand 2a(1 - d/d_max) integrates to 2a d - a d^2 / d_max
            let consumer = ConsumerSpec {
                id: "consumer".into(),
                node: 0,
                fixed_load: vec![Rat::zero()],
                elastic: vec![Vec::new()],
                quadratic: Some(QuadraticBenefit {
                    linear: rat(2) * &p.a,
                    quad: -(&p.a / &p.d_max),
                    d_max: p.d_max.clone(),
                }),
                blocks: Vec::new(),
            };
            Scenario {
                time: TimeGrid { periods: 1 },
                units: vec![u],
                consumers: vec![consumer],
                network: Network::OneNode,
                rounding: RoundingPolicy::Exact,
            }
        }
        3 => Scenario {
            time: TimeGrid { periods: 1 },
            units: vec![
                unit("unit1", 80, 160, 20, 0),
                unit("unit2", 80, 160, 30, 15),
            ],
            consumers: vec![fixed_consumer("load", 200)],
            network: Network::OneNode,
            rounding: RoundingPolicy::CentPrice,
        },
        4 => Scenario {
            time: TimeGrid { periods: 1 },
            units: vec![unit("unit1", 0, 160, 20, 0), unit("unit2", 80, 160, 30, 15)],
            consumers: vec![fixed_consumer("load", 200)],
            network: Network::OneNode,
            rounding: RoundingPolicy::CentPrice,
        },
        5 => Scenario {
            time: TimeGrid { periods: 1 },
            units: vec![unit("producer", 250, 250, 20, 50)],
            consumers: vec![
                one_step_consumer("consumer1", rat(100), rat(100)),
                one_step_consumer("consumer2", rat(15), rat(300)),
            ],
            network: Network::OneNode,
            rounding: RoundingPolicy::CentPrice,
        },
        6 => Scenario {
            time: TimeGrid { periods: 1 },
            units: vec![
                unit("producer1", 0, 80, 40, 510),
                unit("producer2", 0, 80, 40, 510),
            ],
            consumers: vec![one_step_consumer("consumer", rat(50), rat(100))],
            network: Network::OneNode,
            rounding: RoundingPolicy::CentPrice,
        },
        7 => Scenario {
            time: TimeGrid { periods: 1 },
            units: vec![unit("producer", 250, 250, 20, 50)],
            consumers: vec![
                one_step_consumer("consumer1", rat(100), rat(100)),
                ConsumerSpec {
                    id: "consumer2".into(),
                    node: 0,
                    fixed_load: vec![Rat::zero()],
                    elastic: vec![Vec::new()],
                    quadratic: None,
                    blocks: vec![DiscreteBlock {
                        price: rat(80),
                        quantity: vec![rat(200)],
                    }],
                },
            ],
            network: Network::OneNode,
            rounding: RoundingPolicy::CentPrice,
        },
        8 => {
            let mut u1 = unit("producer1", 100, 200, 15, 20);
            u1.node = 0;
            let mut u2 = unit("producer2", 150, 200, 10, 0);
            u2.node = 1;
            let mut load = fixed_consumer("load", 150);
            load.node = 0;
            Scenario {
                time: TimeGrid { periods: 1 },
                units: vec![u1, u2],
                consumers: vec![load],
                network: Network::TwoNode {
                    line_capacity: rat(100),
                },
                rounding: RoundingPolicy::Exact,
            }
        }
        9 => {
            let producer = UnitSpec {
                id: "producer".into(),
                node: 0,
                g_min: rat(20),
                g_max: rat(100),
                ramp_limit: Some(rat(50)),
                cost: CostCurve::affine(20),
                no_load_cost: rat(80),
                startup_cost: Rat::zero(),
                initial_on: true,
                initial_output: rat(50),
            };
            let consumer = ConsumerSpec {
                id: "consumer".into(),
                node: 0,
                fixed_load: vec![rat(80), rat(10)],
                elastic: vec![
                    Vec::new(),
                    vec![ElasticSegment {
                        price: rat(10),
                        quantity: rat(30),
                    }],
                ],
                quadratic: None,
                blocks: Vec::new(),
            };
            Scenario {
                time: TimeGrid { periods: 2 },
                units: vec![producer],
                consumers: vec![consumer],
                network: Network::OneNode,
                rounding: RoundingPolicy::Exact,
            }
        }
        other => {
            return Err(schema_err(
                "example",
                format!("no built-in example {other}"),
            ));
        }
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::ratio;

    #[test]
    fn builtins_validate() {
        for n in 1..=9 {
            let s = builtin_example(n, None).unwrap_or_else(|e| panic!("example {n}: {e}"));
            s.validate().unwrap();
        }
    }

    #[test]
    fn example3_matches_reference_parameters() {
        let s = builtin_example(3, None).unwrap();
        assert_eq!(s.units.len(), 2);
        assert_eq!(s.units[0].g_min, rat(80));
        assert_eq!(s.units[0].g_max, rat(160));
        assert_eq!(s.units[0].cost, CostCurve::affine(20));
        assert_eq!(s.units[0].no_load_cost, rat(0));
        assert_eq!(s.units[1].cost, CostCurve::affine(30));
        assert_eq!(s.units[1].no_load_cost, rat(15));
        assert_eq!(s.consumers[0].fixed_load[0], rat(200));
    }

    #[test]
    fn example8_reference_parameters() {
        let s = builtin_example(8, None).unwrap();
        assert_eq!(
            s.network,
            Network::TwoNode {
                line_capacity: rat(100)
            }
        );
        assert_eq!(s.units[0].node, 0);
        assert_eq!(s.units[1].node, 1);
        assert_eq!(s.units[1].g_min, rat(150));
        assert_eq!(s.consumers[0].fixed_load[0], rat(150));
    }

    #[test]
    fn example9_reference_parameters() {
        let s = builtin_example(9, None).unwrap();
        assert_eq!(s.time.periods, 2);
        let u = &s.units[0];
        assert_eq!(u.ramp_limit, Some(rat(50)));
        assert_eq!(u.no_load_cost, rat(80));
        assert_eq!(u.startup_cost, rat(0));
        assert!(u.initial_on);
        assert_eq!(u.initial_output, rat(50));
        assert_eq!(s.consumers[0].fixed_load, vec![rat(80), rat(10)]);
        assert_eq!(s.consumers[0].elastic[1][0].price, rat(10));
        assert_eq!(s.consumers[0].elastic[1][0].quantity, rat(30));
    }

    #[test]
    fn example2_parameter_inequalities() {
        let ok = ExampleParams {
            a: rat(1),
            b: Rat::zero(),
            w: rat(10),
            d_max: rat(60),
            g_max: rat(100),
        };
        assert!(builtin_example(2, Some(ok)).is_ok());
        let bad = ExampleParams {
            a: rat(1),
            b: Rat::zero(),
            w: rat(11), // 6*11 = 66 > 60
            d_max: rat(60),
            g_max: rat(100),
        };
        let err = builtin_example(2, Some(bad)).unwrap_err();
        assert!(err.to_string().contains("6w/a"));
    }

    #[test]
    fn gmin_above_gmax_rejected() {
        let mut s = builtin_example(3, None).unwrap();
        s.units[0].g_min = rat(200);
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("g_min"));
    }

    #[test]
    fn document_round_trip() {
        for n in [3usize, 5, 7, 8, 9] {
            let s = builtin_example(n, None).unwrap();
            let text = scenario_to_json(&s);
            let back = load_scenario(&text).unwrap();
            assert_eq!(s, back, "round trip failed for example {n}");
        }
    }

    #[test]
    fn plain_json_numbers_parse_exactly() {
        let doc = r#"{
            "periods": 1,
            "network": {"kind": "one_node"},
            "units": [{"id": "u", "g_min": 0, "g_max": 100.5,
                       "cost": {"kind": "affine", "slope": 20.25}}],
            "consumers": [{"id": "c", "fixed_load": [50]}]
        }"#;
        let s = load_scenario(doc).unwrap();
        assert_eq!(s.units[0].g_max, ratio(201, 2));
        assert_eq!(
            s.units[0].cost,
            CostCurve::Affine {
                slope: ratio(81, 4)
            }
        );
    }

    #[test]
    fn cost_curve_eval() {
        let pw = CostCurve::Piecewise {
            segments: vec![
                PwaSegment {
                    upto: rat(50),
                    slope: rat(10),
                },
                PwaSegment {
                    upto: rat(100),
                    slope: rat(30),
                },
            ],
        };
        assert_eq!(pw.eval(&rat(0)), rat(0));
        assert_eq!(pw.eval(&rat(50)), rat(500));
        assert_eq!(pw.eval(&rat(80)), rat(500) + rat(900));
        assert_eq!(pw.slope_right(&rat(50)), rat(30));
        assert_eq!(pw.slope_left(&rat(50)), rat(10));
    }
}
