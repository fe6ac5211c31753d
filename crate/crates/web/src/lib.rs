//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain strings/numbers and returns a JSON
//! document; the `*_json` functions hold the logic and are usable (and
//! tested) natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use resbin::algebra::{check_identity, check_lattice, check_residuation, derive_order, IdentityCheck};
use resbin::dsl::{parse_identity, parse_law_list};
use resbin::encode::{decode_model, encode_search};
use resbin::oracle::enumerate_lattices;
use resbin::report::HasseLayout;
use resbin::sat::{solve_builtin, Budget};
use resbin::{EncodeOptions, FiniteBinar, Law, OrderRelation, SearchTask, Status};

/// Largest size offered by the search panel; the built-in solver has no
/// clock in the browser, so it runs under a decision budget instead.
pub const MAX_SEARCH_SIZE: usize = 6;
pub const DECISION_BUDGET: u64 = 2_000_000;
pub const MAX_LATTICE_SIZE: usize = 6;

/// Hasse diagram as an inline SVG, bottom element at the bottom.
pub fn hasse_svg(order: &OrderRelation) -> String {
    const STEP_X: f64 = 56.0;
    const STEP_Y: f64 = 64.0;
    const MARGIN: f64 = 24.0;
    let layout = HasseLayout::new(order);
    let widest = layout.levels.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let width = (widest - 1.0) * STEP_X + 2.0 * MARGIN;
    let height = (layout.levels.len() as f64 - 1.0) * STEP_Y + 2.0 * MARGIN;
    let pos = |x: usize| {
        (width / 2.0 + layout.offset(x) * STEP_X, height - MARGIN - layout.rank[x] as f64 * STEP_Y)
    };
    let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#);
    for &(a, b) in &layout.edges {
        let ((x1, y1), (x2, y2)) = (pos(a), pos(b));
        s.push_str(&format!(r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="black"/>"#));
    }
    for x in 0..order.size() {
        let (cx, cy) = pos(x);
        s.push_str(&format!(
            r#"<circle cx="{cx}" cy="{cy}" r="11" fill="white" stroke="black"/><text x="{cx}" y="{}" text-anchor="middle" font-size="12">{x}</text>"#,
            cy + 4.0
        ));
    }
    s.push_str("</svg>");
    s
}

fn model_value(model: &FiniteBinar) -> Value {
    serde_json::to_value(model).expect("models serialize")
}

fn parse_task(size: usize, assume: &str, refute: &str, distributive: bool) -> Result<SearchTask, String> {
    if size == 0 || size > MAX_SEARCH_SIZE {
        return Err(format!("size must be between 1 and {MAX_SEARCH_SIZE}"));
    }
    let mut laws = parse_law_list(assume).map_err(|e| e.to_string())?;
    if distributive {
        laws.insert(Law::LD);
    }
    let refute = match refute.trim() {
        "" | "none" => None,
        name => Some(name.parse::<Law>().map_err(|e| e.to_string())?),
    };
    SearchTask::new(size, laws, refute).map_err(|e| e.to_string())
}

/// Searches with the built-in solver and verifies the model.
pub fn search_json(size: usize, assume: &str, refute: &str, distributive: bool) -> Result<Value, String> {
    let task = parse_task(size, assume, refute, distributive)?;
    let cnf = encode_search(&task, EncodeOptions::default()).map_err(|e| e.to_string())?;
    let budget = Budget { max_decisions: Some(DECISION_BUDGET), ..Budget::default() };
    let r = solve_builtin(&cnf, &budget);
    let mut out = json!({
        "task": task.to_string(),
        "status": r.status.to_string(),
        "decisions": r.stats.decisions,
        "variables": cnf.num_vars(),
        "clauses": cnf.num_clauses(),
    });
    if let Some(reason) = &r.reason {
        out["reason"] = json!(reason);
    }
    if r.status == Status::Sat {
        let map = cnf.varmap.as_ref().expect("encoder attaches a varmap");
        let model = decode_model(r.assignment.as_ref().expect("SAT has a model"), map).map_err(|e| e.to_string())?;
        let report = task.verify(&model);
        if !report.pass() {
            return Err(format!("model failed verification: {}", report.violations[0]));
        }
        out["model"] = model_value(&model);
        out["svg"] = json!(hasse_svg(&derive_order(&model).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

/// Checks an identity such as `x * (y ^ z) = (x * y) ^ (x * z)` (or a
/// catalogue name like `D1`) on a model given as JSON.
pub fn check_json(model: &str, identity: &str) -> Result<Value, String> {
    let model = FiniteBinar::from_json_str(model).map_err(|e| e.to_string())?;
    let id = match identity.trim().parse::<Law>() {
        Ok(law) => law.identity(),
        Err(_) => parse_identity(identity).map_err(|e| e.to_string())?,
    };
    let mut out = json!({
        "identity": format!("{} = {}", id.lhs, id.rhs),
        "lattice": check_lattice(&model).pass(),
        "residuated": check_residuation(&model).pass(),
    });
    match check_identity(&model, &id) {
        IdentityCheck::Holds => out["holds"] = json!(true),
        IdentityCheck::Counter(v) => {
            out["holds"] = json!(false);
            out["counterexample"] = json!({
                "assignment": v.assignment.iter().map(|(k, e)| (k.clone(), json!(e))).collect::<serde_json::Map<_, _>>(),
                "lhs": v.lhs,
                "rhs": v.rhs,
            });
        }
    }
    Ok(out)
}

/// All lattices of size `n` up to isomorphism, each with its diagram.
pub fn lattices_json(n: usize) -> Result<Value, String> {
    if n == 0 || n > MAX_LATTICE_SIZE {
        return Err(format!("size must be between 1 and {MAX_LATTICE_SIZE}"));
    }
    let catalogue = enumerate_lattices(n, true).map_err(|e| e.to_string())?;
    let items: Vec<Value> = catalogue
        .lattices
        .iter()
        .map(|l| {
            let order = l.order();
            let distributive = (0..n).all(|x| {
                (0..n).all(|y| {
                    (0..n).all(|z| {
                        l.meet.get(x, l.join.get(y, z)) == l.join.get(l.meet.get(x, y), l.meet.get(x, z))
                    })
                })
            });
            json!({
                "meet": l.meet.rows(),
                "join": l.join.rows(),
                "distributive": distributive,
                "svg": hasse_svg(&order),
            })
        })
        .collect();
    Ok(json!({ "size": n, "count": items.len(), "lattices": items }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn search(size: usize, assume: &str, refute: &str, distributive: bool) -> Result<String, JsError> {
    to_js(search_json(size, assume, refute, distributive))
}

#[wasm_bindgen]
pub fn check(model: &str, identity: &str) -> Result<String, JsError> {
    to_js(check_json(model, identity))
}

#[wasm_bindgen]
pub fn lattices(n: usize) -> Result<String, JsError> {
    to_js(lattices_json(n))
}
