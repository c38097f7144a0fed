use wiener_topo::graphio::{threshold_edges, Topology};
use wiener_topo::{
    compare, estimate_covariances, identify_all, random_spec, simulate, EdgeRule, Method, SimulationOptions,
    SparsifierConfig,
};

fn model(seed: u64) -> (wiener_topo::netsim::Simulation, wiener_topo::CovarianceModel) {
    let spec = random_spec(10, EdgeRule::MaxInDegree(2), 3, seed).unwrap();
    let sim = simulate(&spec, SimulationOptions::new(6000).with_snr(8.0)).unwrap();
    let model = estimate_covariances(&sim.data.clone().centered(), 20).unwrap();
    (sim, model)
}

#[test]
fn worker_count_does_not_change_the_result() {
    let (sim, model) = model(1);
    let ids = sim.data.node_ids().to_vec();
    for method in [Method::Cols, Method::Rwls, Method::Exhaustive] {
        let serial = SparsifierConfig { workers: Some(1), ..SparsifierConfig::default().with_m(2) };
        let parallel = SparsifierConfig { workers: Some(4), ..serial.clone() };
        let a = identify_all(&model, &ids, &serial, method).unwrap();
        let b = identify_all(&model, &ids, &parallel, method).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap(), "{method}");
    }
}

#[test]
fn sparse_network_recovered_end_to_end() {
    let (sim, model) = model(2);
    let ids = sim.data.node_ids().to_vec();
    let truth = Topology::from_spec(&sim.spec, ids.clone()).unwrap();
    let est = identify_all(&model, &ids, &SparsifierConfig::default().with_m(2), Method::Cols).unwrap();
    let report = compare(&truth, &est).unwrap();
    assert!(report.recall >= 0.6, "{report:?}");

    // Thresholding can only remove edges.
    let thin = threshold_edges(&est, 0.05).unwrap();
    assert!(thin.edge_set().is_subset(&est.edge_set()));
    assert!(compare(&truth, &thin).unwrap().recall <= report.recall);
}
