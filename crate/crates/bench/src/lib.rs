//! Fixtures shared by the criterion benchmarks in `benches/`.

use kagome_core::{build_lattice, Boundary, Lattice};

pub fn torus(l1: usize, l2: usize) -> Lattice {
    build_lattice(l1, l2, Boundary::Torus).expect("valid torus size")
}

pub fn cylinder(l1: usize, l2: usize) -> Lattice {
    build_lattice(l1, l2, Boundary::Cylinder).expect("valid cylinder size")
}
