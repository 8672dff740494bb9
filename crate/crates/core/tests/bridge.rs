use std::sync::Arc;
use std::time::{Duration, Instant};

use sbt_core::fitness::{critical_by_name, fitness_by_name};
use sbt_core::scenario::{pedestrian_crossing_spec, AdasProblem, TestInput};
use sbt_core::search::{Nsga2, Optimizer, SearchConfig, SearchError};
use sbt_core::sim::protocol::{BridgeRequest, BridgeResponse};
use sbt_core::sim::{simulate_batch, BuiltinSimulator, SimError, Simulator, SubprocessSimulator};

fn bridge_command(extra: &str) -> String {
    format!("'{}' {extra}", env!("CARGO_BIN_EXE_sbt-bridge-sim"))
}

fn inputs() -> Vec<TestInput> {
    vec![
        TestInput::new(vec![2.0, 20.5, 30.0]),
        TestInput::new(vec![1.0, 5.0, 10.0]),
        TestInput::new(vec![3.0, 22.0, 60.0]),
        TestInput::new(vec![0.5, 1.0, 0.0]),
        TestInput::new(vec![1.75, 21.0, 30.0]),
    ]
}

#[test]
fn bridge_matches_builtin() {
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new(bridge_command(""));
    let builtin = BuiltinSimulator::default();
    for (i, x) in inputs().iter().enumerate() {
        let a = bridge.simulate(&spec, x, i as u64).unwrap();
        let b = builtin.simulate(&spec, x, i as u64).unwrap();
        assert_eq!(a, b, "input {x:?}");
    }
}

#[test]
fn parallel_bridge_batch_keeps_order() {
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new(bridge_command("--delay-ms 5"));
    let many: Vec<TestInput> = inputs().into_iter().cycle().take(20).collect();
    let via_bridge = simulate_batch(&bridge, &spec, &many, 100, 4);
    let direct = simulate_batch(&BuiltinSimulator::default(), &spec, &many, 100, 1);
    for (a, b) in via_bridge.into_iter().zip(direct) {
        assert_eq!(a.unwrap(), b.unwrap());
    }
}

#[test]
fn child_exit_is_reported_as_terminated() {
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new(bridge_command("--exit-after 1"));
    let x = &inputs()[0];
    bridge.simulate(&spec, x, 0).unwrap();
    let err = bridge.simulate(&spec, x, 1).unwrap_err();
    assert!(matches!(err, SimError::Terminated(_)), "{err}");
    // a fresh child is spawned for the next call
    bridge.simulate(&spec, x, 2).unwrap();
}

#[test]
fn silent_child_times_out() {
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new("exec sleep 30").with_timeout(Duration::from_millis(300));
    let started = Instant::now();
    let err = bridge.simulate(&spec, &inputs()[0], 0).unwrap_err();
    assert!(matches!(err, SimError::Timeout(_)), "{err}");
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[test]
fn garbage_output_is_malformed() {
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new("read line; echo 'this is not json'; sleep 5");
    let err = bridge.simulate(&spec, &inputs()[0], 0).unwrap_err();
    assert!(matches!(err, SimError::Malformed(_)), "{err}");
}

#[test]
fn missing_command_is_terminated() {
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new("exec /nonexistent/simulator-binary");
    let err = bridge.simulate(&spec, &inputs()[0], 0).unwrap_err();
    assert!(matches!(err, SimError::Terminated(_) | SimError::Io(_)), "{err}");
}

const TINY: &str = r#""dt":0.5,"actors":{"ego":[[0,0,0,0,2],[0.5,1,0,0,2]],"pedestrian":[[0,5,0,0,0],[0.5,5,0,0,0]]},"collision":false,"collision_time":null"#;

#[test]
fn responses_matched_by_id() {
    // stray response for another id arrives first
    let script = format!(
        "read line; printf '%s\\n' '{{\"id\":99,{TINY},\"metadata\":{{\"which\":\"stray\"}}}}' '{{\"id\":0,{TINY},\"metadata\":{{\"which\":\"mine\"}}}}'; sleep 5"
    );
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new(script).with_timeout(Duration::from_secs(10));
    let out = bridge.simulate(&spec, &inputs()[0], 0).unwrap();
    assert_eq!(out.metadata["which"], "mine");
}

#[test]
fn inconsistent_lengths_rejected() {
    let bad = r#"{"id":0,"dt":0.5,"actors":{"ego":[[0,0,0,0,2],[0.5,1,0,0,2]],"pedestrian":[[0,5,0,0,0]]},"collision":false,"collision_time":null}"#;
    let spec = pedestrian_crossing_spec();
    let bridge = SubprocessSimulator::new(format!("read line; echo '{bad}'; sleep 5"));
    let err = bridge.simulate(&spec, &inputs()[0], 0).unwrap_err();
    assert!(err.to_string().contains("inconsistent trajectory lengths"), "{err}");
}

#[test]
fn response_round_trip_is_lossless() {
    let spec = pedestrian_crossing_spec();
    let out = BuiltinSimulator::default().simulate(&spec, &inputs()[0], 3).unwrap();
    let line = BridgeResponse::from_output(3, &out).to_line();
    let back = BridgeResponse::parse(&line).unwrap();
    assert_eq!(back.id, 3);
    assert_eq!(back.into_output().unwrap(), out);
    let req = BridgeRequest::new(5, &spec, &inputs()[0], 0.01, 9);
    let parsed: BridgeRequest = serde_json::from_str(&req.to_line()).unwrap();
    assert_eq!(parsed, req);
}

#[test]
fn failing_backend_aborts_search_with_partial_archive() {
    let problem = AdasProblem::new(
        "bridge",
        pedestrian_crossing_spec(),
        fitness_by_name("min_distance_velocity").unwrap(),
        critical_by_name("adas_distance_velocity").unwrap(),
        Arc::new(SubprocessSimulator::new(bridge_command("--exit-after 15"))),
    );
    let mut opt = Nsga2::default();
    let config = SearchConfig { population_size: 10, max_generations: 3, seed: 1, ..Default::default() };
    opt.init(Arc::new(problem), config).unwrap();
    let err = opt.run().unwrap_err();
    assert!(matches!(err, SearchError::Simulation { .. }), "{err}");
    let archive = err.partial_archive().unwrap();
    // the child answers 15 requests; the 16th evaluation fails
    assert_eq!(archive.len(), 15);
    assert!(archive.iter().enumerate().all(|(i, r)| r.index == i));
}
