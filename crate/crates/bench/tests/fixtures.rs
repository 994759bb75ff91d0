use kagome_bench::{cylinder, torus};

#[test]
fn fixture_sizes() {
    assert_eq!(torus(3, 2).num_sites(), 18);
    let c = cylinder(40, 12);
    assert!(!c.is_torus());
    assert_eq!(c.num_sites(), 3 * 40 * 12);
}
