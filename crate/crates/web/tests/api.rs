use resbin::algebra::examples::m3_model;
use resbin_web::{check_json, lattices_json, search_json};

#[test]
fn search_returns_a_verified_model_with_diagram() {
    let r = search_json(4, "", "D1", false).unwrap();
    assert_eq!(r["status"], "SAT");
    assert_eq!(r["model"]["size"], 4);
    assert!(r["svg"].as_str().unwrap().starts_with("<svg"));
    assert_eq!(search_json(1, "", "D1", false).unwrap()["status"], "UNSAT");
    assert_eq!(search_json(3, "D4,D5", "D3", true).unwrap()["status"], "UNSAT");
}

#[test]
fn search_rejects_bad_input() {
    assert!(search_json(0, "", "D1", false).is_err());
    assert!(search_json(9, "", "D1", false).is_err());
    assert!(search_json(3, "D7", "D1", false).is_err());
    assert!(search_json(3, "D1", "D1", false).is_err());
}

#[test]
fn check_reports_counterexamples() {
    let model = m3_model().to_json_string();
    let r = check_json(&model, "LD").unwrap();
    assert_eq!(r["holds"], false);
    assert!(r["counterexample"]["assignment"].is_object());
    let r = check_json(&model, "x ^ y = y ^ x").unwrap();
    assert_eq!((r["holds"].as_bool(), r["lattice"].as_bool()), (Some(true), Some(true)));
    assert!(check_json(&model, "x ^ = y").is_err());
    assert!(check_json("{}", "D1").is_err());
}

#[test]
fn lattice_gallery() {
    let r = lattices_json(5).unwrap();
    assert_eq!(r["count"], 5);
    let non_distributive = r["lattices"].as_array().unwrap().iter().filter(|l| l["distributive"] == false).count();
    assert_eq!(non_distributive, 2);
    assert!(lattices_json(7).is_err());
}
