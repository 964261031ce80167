mod common;

use dnr::network::load_network;
use dnr::topology::enumerate_radial;

#[test]
fn enumeration_count_matches_kirchhoff_determinant() {
    for name in ["net4.json", "net7.json", "net5_gap.json"] {
        let net =
            load_network(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let trees = enumerate_radial(&net, 100_000).unwrap();
        let det = common::spanning_tree_count(&net);
        assert!(
            (trees.len() as f64 - det).abs() < 1e-6,
            "{name}: enumerated {} vs determinant {det}",
            trees.len()
        );
    }
}
