use nlburgers_web::{dispersion_json, profile_json, simulate_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn alpha1_scenario_decays() {
    let v = parse(&simulate_json("alpha1", 1.0, 2.0, 1.0, 256, 0.5, 10, "sines:-4,10").unwrap());
    assert_eq!(v["status"], "reached_t_final");
    let frames = v["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 11);
    assert_eq!(frames[0]["p"].as_array().unwrap().len(), 256);
    let linf = v["series"]["linf_p"].as_array().unwrap();
    assert!(linf.last().unwrap().as_f64().unwrap() < 0.1 * linf[0].as_f64().unwrap());
}

#[test]
fn alpha0_scenario_is_flagged() {
    let v = parse(&simulate_json("alpha0", 0.0, 2.0, 1.0, 1024, 0.5, 20, "sines:-2,4").unwrap());
    assert_ne!(v["status"], "reached_t_final");
    let t_end = v["t_end"].as_f64().unwrap();
    let frames = v["frames"].as_array().unwrap();
    assert_eq!(frames.last().unwrap()["t"].as_f64().unwrap(), t_end);
}

#[test]
fn dispersion_matches_hand_values() {
    let v = parse(&dispersion_json(1.0, 2.0, 1.0, 4).unwrap());
    assert_eq!(v["k"][3], 4);
    assert!((v["re"][3].as_f64().unwrap() + 4.8).abs() < 1e-12);
    assert!((v["im"][3].as_f64().unwrap() + 5.6).abs() < 1e-12);
    let v = parse(&dispersion_json(2.0, 2.0, 1.0, 1).unwrap());
    assert!((v["re"][0].as_f64().unwrap() + 1.2).abs() < 1e-12);
    assert!((v["im"][0].as_f64().unwrap() + 1.4).abs() < 1e-12);
}

#[test]
fn chirp_profile_is_projected() {
    let v = parse(&profile_json("chirp:-6,4", 512).unwrap());
    assert_eq!(v["amplitude"][0].as_f64().unwrap(), 0.0);
    assert_eq!(v["k"].as_array().unwrap().len(), 257);
    assert!(v["linf_p"].as_f64().unwrap() > 5.0);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(simulate_json("full_system", 2.0, 2.0, 1.0, 64, 0.1, 1, "sines:1,1").is_err());
    assert!(simulate_json("alpha2", 2.0, 2.0, 1.0, 4096, 0.1, 1, "sines:1,1").is_err());
    assert!(simulate_json("alpha2", 2.0, -2.0, 1.0, 64, 0.1, 1, "sines:1,1").is_err());
    assert!(profile_json("wave:1", 64).is_err());
}
