//! Browser bindings. Every export takes strings and returns one JSON
//! document, with an `error` key on failure.

use k5kit::{
    decide as decide_in, parse, uniform_interpolant, uniform_lyndon_interpolant, Atom, Decision,
    FrameClass, KripkeModel, Literal,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn decide_json(formula: &str, logic: &str) -> Result<Value, String> {
    let logic: FrameClass = logic.parse()?;
    let phi = parse(formula).map_err(|e| e.to_string())?;
    let decision = decide_in(&phi, logic);
    Ok(match &decision {
        Decision::Valid(tree) => json!({
            "logic": logic.name(),
            "result": "valid",
            "proof": tree.to_text(),
        }),
        Decision::Invalid { model, .. } => json!({
            "logic": logic.name(),
            "result": "invalid",
            "world": decision.refuting_world().unwrap_or(model.root()),
            "model": model.to_json_value(),
        }),
    })
}

fn interpolate_json(formula: &str, eliminate: &str) -> Result<Value, String> {
    let phi = parse(formula).map_err(|e| e.to_string())?;
    let eliminate = eliminate.trim();
    // `~p` or `p` eliminates one literal, `p*` the whole atom
    let r = match eliminate.strip_suffix('*') {
        Some(atom) => {
            let atom = Atom::new(atom.trim()).map_err(|e| e.to_string())?;
            uniform_interpolant(&phi, &atom)
        }
        None => {
            let lit = Literal::parse(eliminate).map_err(|e| e.to_string())?;
            uniform_lyndon_interpolant(&phi, &lit)
        }
    }
    .map_err(|e| e.to_string())?;
    Ok(json!({ "eliminated": eliminate, "interpolant": r.to_string() }))
}

fn model_eval_json(model: &str, world: &str, formula: &str) -> Result<Value, String> {
    let m = KripkeModel::from_json(model).map_err(|e| e.to_string())?;
    let phi = parse(formula).map_err(|e| e.to_string())?;
    let holds = m.eval(world, &phi).map_err(|e| e.to_string())?;
    Ok(json!({ "holds": holds, "world": world }))
}

/// `{"result": "valid", "proof": ..}` or `{"result": "invalid", "model": .., "world": ..}`.
#[wasm_bindgen]
pub fn decide(formula: &str, logic: &str) -> String {
    respond(decide_json(formula, logic))
}

/// K5 only.
#[wasm_bindgen]
pub fn interpolate(formula: &str, eliminate: &str) -> String {
    respond(interpolate_json(formula, eliminate))
}

#[wasm_bindgen]
pub fn model_eval(model: &str, world: &str, formula: &str) -> String {
    respond(model_eval_json(model, world, formula))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn decide_round_trip() {
        let d = doc(decide("[]p -> [][]p", "k5"));
        assert_eq!(d["result"], "invalid");
        let model = d["model"].to_string();
        let world = d["world"].as_str().unwrap();
        assert_eq!(doc(model_eval(&model, world, "[]p -> [][]p"))["holds"], false);
        assert_eq!(doc(decide("[]p -> [][]p", "k45"))["result"], "valid");
    }

    #[test]
    fn interpolation() {
        let d = doc(interpolate("~p | <><>(p|q)", "p"));
        assert_eq!(d["interpolant"], "~p | <><>q");
        assert_eq!(doc(interpolate("p & q", "p*"))["interpolant"], "F");
    }

    #[test]
    fn errors_are_reported() {
        assert!(doc(decide("p &", "k5"))["error"].is_string());
        assert!(doc(decide("p", "k9"))["error"].is_string());
        assert!(doc(model_eval("{}", "a", "p"))["error"].is_string());
    }
}
