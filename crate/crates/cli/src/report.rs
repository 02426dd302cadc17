//! Report assembly and rendering: a deterministic document per run (timings
//! go to stderr so identical inputs produce byte-identical reports).

use chp_core::dual::{PriceSetReport, PriceSetStructure, UpliftReport};
use chp_core::model::Scenario;
use chp_core::primal::{ObjectiveKind, PrimalSolution};
use chp_core::rat::{display_money, format_exact, Rat};
use serde::Serialize;

#[derive(Serialize)]
pub struct RunReport {
    pub scenario_digest: String,
    pub periods: usize,
    pub nodes: usize,
    pub rounding: String,
    pub primal: PrimalDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chp: Option<MethodDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mchp: Option<MethodDoc>,
}

#[derive(Serialize)]
pub struct PrimalDoc {
    pub kind: String,
    pub value: NumDoc,
    pub optima: Vec<OptimumDoc>,
}

#[derive(Serialize)]
pub struct OptimumDoc {
    pub unit_on: Vec<Vec<bool>>,
    pub unit_g: Vec<Vec<String>>,
    pub cons_d: Vec<Vec<String>>,
    pub cons_blocks: Vec<Vec<bool>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flow: Vec<String>,
    pub flat_dispatch: bool,
}

#[derive(Serialize)]
pub struct MethodDoc {
    pub price: Vec<NumDoc>,
    pub price_set: String,
    pub dual_value: NumDoc,
    pub gap_exact: NumDoc,
    pub rows: Vec<RowDoc>,
    pub total: RowDoc,
    pub congestion_rent: NumDoc,
    pub certificate: Vec<CertDoc>,
}

#[derive(Serialize)]
pub struct RowDoc {
    pub player: String,
    pub dispatch_profit: NumDoc,
    pub best_profit: NumDoc,
    pub uplift: NumDoc,
}

#[derive(Serialize)]
pub struct CertDoc {
    pub player: String,
    pub mixture: Vec<(String, String)>,
}

/// Money/price values carry both the 2-decimal display and the exact payload.
#[derive(Serialize)]
pub struct NumDoc {
    pub display: String,
    pub exact: String,
}

pub fn num(x: &Rat) -> NumDoc {
    NumDoc {
        display: display_money(x),
        exact: format_exact(x),
    }
}

/// FNV-1a over the canonical scenario document.
pub fn digest(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

pub fn method_doc(price: &PriceSetReport, uplift: &UpliftReport, primal_value: &Rat) -> MethodDoc {
    let gap = (primal_value - &price.dual_value).clone();
    let gap = if gap < Rat::from_integer(0.into()) {
        -gap
    } else {
        gap
    };
    let mut rows: Vec<RowDoc> = uplift
        .rows
        .iter()
        .map(|r| RowDoc {
            player: r.player.clone(),
            dispatch_profit: num(&r.dispatch_profit),
            best_profit: num(&r.best_profit),
            uplift: num(&r.uplift),
        })
        .collect();
    if let Some(f) = &uplift.ftr {
        rows.push(RowDoc {
            player: f.player.clone(),
            dispatch_profit: num(&f.dispatch_profit),
            best_profit: num(&f.best_profit),
            uplift: num(&f.uplift),
        });
    }
    MethodDoc {
        price: uplift.price_used.iter().map(num).collect(),
        price_set: price_set_text(&price.structure),
        dual_value: num(&price.dual_value),
        gap_exact: num(&gap),
        rows,
        total: RowDoc {
            player: "Total".into(),
            dispatch_profit: num(&uplift.total_dispatch_profit),
            best_profit: num(&uplift.total_best_profit),
            uplift: num(&uplift.total_uplift),
        },
        congestion_rent: num(&uplift.congestion_rent),
        certificate: price
            .certificate
            .iter()
            .map(|c| CertDoc {
                player: c.player.clone(),
                mixture: c
                    .weights
                    .iter()
                    .map(|(_, q, w)| {
                        (
                            format!(
                                "[{}]",
                                q.iter().map(format_exact).collect::<Vec<_>>().join(", ")
                            ),
                            format_exact(w),
                        )
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn price_set_text(structure: &PriceSetStructure) -> String {
    match structure {
        PriceSetStructure::Interval(iu) => {
            let parts: Vec<String> = iu
                .intervals
                .iter()
                .map(|iv| {
                    let lo = iv
                        .lo
                        .as_ref()
                        .map(format_exact)
                        .unwrap_or_else(|| "-inf".into());
                    let hi = iv
                        .hi
                        .as_ref()
                        .map(format_exact)
                        .unwrap_or_else(|| "+inf".into());
                    if iv.lo == iv.hi && iv.lo.is_some() {
                        format!("{{{lo}}}")
                    } else {
                        format!("[{lo}, {hi}]")
                    }
                })
                .collect();
            parts.join(" u ")
        }
        PriceSetStructure::Points(pts) => {
            let parts: Vec<String> = pts
                .iter()
                .map(|p| {
                    format!(
                        "({})",
                        p.iter().map(format_exact).collect::<Vec<_>>().join(", ")
                    )
                })
                .collect();
            parts.join(", ")
        }
    }
}

pub fn primal_doc(sol: &PrimalSolution) -> PrimalDoc {
    PrimalDoc {
        kind: match sol.kind {
            ObjectiveKind::CostMin => "cost".into(),
            ObjectiveKind::WelfareMax => "welfare".into(),
        },
        value: num(&sol.value),
        optima: sol
            .optima
            .iter()
            .map(|p| OptimumDoc {
                unit_on: p.unit_on.clone(),
                unit_g: p
                    .unit_g
                    .iter()
                    .map(|g| g.iter().map(format_exact).collect())
                    .collect(),
                cons_d: p
                    .cons_d
                    .iter()
                    .map(|d| d.iter().map(format_exact).collect())
                    .collect(),
                cons_blocks: p.cons_v.clone(),
                flow: p.flow.iter().map(format_exact).collect(),
                flat_dispatch: p.flat,
            })
            .collect(),
    }
}

pub fn render_text(s: &Scenario, report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scenario digest {}  periods={} nodes={} rounding={}\n",
        report.scenario_digest, report.periods, report.nodes, report.rounding
    ));
    out.push_str(&format!(
        "primal {}: {}\n",
        report.primal.kind, report.primal.value.display
    ));
    for (k, opt) in report.primal.optima.iter().enumerate() {
        out.push_str(&format!("  optimum {}:", k + 1));
        for (i, u) in s.units.iter().enumerate() {
            out.push_str(&format!(" {}=[{}]", u.id, opt.unit_g[i].join(", ")));
        }
        for (j, c) in s.consumers.iter().enumerate() {
            out.push_str(&format!(" {}=[{}]", c.id, opt.cons_d[j].join(", ")));
        }
        if !opt.flow.is_empty() {
            out.push_str(&format!(" flow=[{}]", opt.flow.join(", ")));
        }
        if opt.flat_dispatch {
            out.push_str(" (flat)");
        }
        out.push('\n');
    }
    for (name, m) in [("chp", &report.chp), ("mchp", &report.mchp)] {
        let Some(m) = m else { continue };
        out.push_str(&format!(
            "\n{} price [{}]  set {}  dual {}  exact gap {}\n",
            name,
            m.price
                .iter()
                .map(|p| p.display.clone())
                .collect::<Vec<_>>()
                .join(", "),
            m.price_set,
            m.dual_value.display,
            m.gap_exact.display
        ));
        out.push_str(&format!(
            "{:<16}{:>14}{:>14}{:>12}\n",
            "player", "pi*", "pi+", "uplift"
        ));
        for r in &m.rows {
            out.push_str(&format!(
                "{:<16}{:>14}{:>14}{:>12}\n",
                r.player, r.dispatch_profit.display, r.best_profit.display, r.uplift.display
            ));
        }
        out.push_str(&format!(
            "{:<16}{:>14}{:>14}{:>12}\n",
            "Total",
            m.total.dispatch_profit.display,
            m.total.best_profit.display,
            m.total.uplift.display
        ));
        if report.nodes == 2 {
            out.push_str(&format!("congestion rent {}\n", m.congestion_rent.display));
        }
    }
    out
}
