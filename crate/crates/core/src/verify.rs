//! Desk-scale verification suite with per-invariant margins.
//!
//! Every invariant carries a signed margin: non-negative (positive for strict
//! inequalities) when it holds.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bloch::band_summary;
use crate::circuit::{apply_circuit, c2t_layout_check, dressed_operator_defect, GateLayout};
use crate::entanglement::{correlation_spectrum, cusp_entry, free_many_body_es, schmidt_es, DEFAULT_EPS_MAX};
use crate::error::Result;
use crate::fock::{
    annihilation_residual, anticommutator, build_ground_state, full_spectrum, ground_space_dimension,
    verify_unique_ground_state, HexOperator,
};
use crate::geometry::{bounds_report, euler_class, Method, Orientation};
use crate::lattice::{build_lattice, Boundary, Lattice};
use crate::linalg::spectrum_distance;
use crate::peps::{evaluate_peps, MapTensor, PepsInput};
use crate::realspace::{cylinder_spectrum, many_body_metric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub passed: bool,
}

impl Invariant {
    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Invariant {
        let margin = bound - value;
        Invariant { name: name.into(), value, bound, margin, passed: margin >= 0.0 }
    }

    /// `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Invariant {
        let margin = value - bound;
        Invariant { name: name.into(), value, bound, margin, passed: margin >= 0.0 }
    }

    /// `value > bound`.
    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Invariant {
        let margin = value - bound;
        Invariant { name: name.into(), value, bound, margin, passed: margin > 0.0 }
    }

    /// `|value - target| <= tol`.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Invariant {
        let margin = tol - (value - target).abs();
        Invariant { name: name.into(), value, bound: target, margin, passed: margin >= 0.0 }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Invariant {
        let v = if ok { 1.0 } else { 0.0 };
        Invariant { name: name.into(), value: v, bound: 1.0, margin: v - 1.0, passed: ok }
    }

    /// A precondition or resource error, reported as a failed invariant.
    pub fn error(name: impl Into<String>, err: &crate::Error) -> Invariant {
        Invariant {
            name: format!("{}: {err}", name.into()),
            value: f64::NAN,
            bound: f64::NAN,
            margin: f64::NEG_INFINITY,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: Option<u8>,
    pub name: String,
    pub passed: bool,
    pub invariants: Vec<Invariant>,
}

impl Check {
    pub fn new(criterion: Option<u8>, name: &str, invariants: Vec<Invariant>) -> Check {
        Check {
            criterion,
            name: name.to_string(),
            passed: invariants.iter().all(|i| i.passed),
            invariants,
        }
    }

    /// The violated invariant with the most negative margin, or the tightest one.
    pub fn worst(&self) -> Option<&Invariant> {
        self.invariants.iter().min_by(|a, b| {
            a.passed
                .cmp(&b.passed)
                .then(a.margin.total_cmp(&b.margin))
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutations {
    /// Flip the sign of `M^0_{10}` in the map tensor.
    pub map_sign_flip: bool,
    /// Flip the sign of the first gate in the circuit layout.
    pub sigma_flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn torus(l1: usize, l2: usize) -> Result<Lattice> {
    build_lattice(l1, l2, Boundary::Torus)
}

fn guarded(criterion: u8, name: &str, f: impl FnOnce() -> Result<Vec<Invariant>>) -> Check {
    match f() {
        Ok(inv) => Check::new(Some(criterion), name, inv),
        Err(e) => Check::new(Some(criterion), name, vec![Invariant::error(name, &e)]),
    }
}

pub fn check_flat_bands() -> Check {
    let mut inv = Vec::new();
    for mu in [-2.0, -1.0, 0.0] {
        let s = band_summary(101, mu);
        inv.push(Invariant::at_most(format!("std E1 at mu={mu}"), s.std[0], 1e-9));
        inv.push(Invariant::at_most(format!("std E2 at mu={mu}"), s.std[1], 1e-9));
        inv.push(Invariant::at_most(format!("|E + 2 + mu| at mu={mu}"), s.max_deviation, 1e-9));
    }
    Check::new(Some(1), "flat bands", inv)
}

pub fn check_gap() -> Check {
    let gap = band_summary(301, 0.0).min_gap;
    Check::new(Some(2), "gap", vec![Invariant::near("min gap on 301 grid", gap, 3.0, 1e-3)])
}

pub fn check_euler() -> Check {
    let chi = euler_class(401, Method::AnalyticN, Orientation::D2CrossD1);
    let flipped = euler_class(401, Method::AnalyticN, Orientation::D1CrossD2);
    Check::new(
        Some(3),
        "Euler class",
        vec![
            Invariant::near("|chi|", chi.abs(), 1.0, 1e-4),
            Invariant::at_most("chi + chi(flipped)", (chi + flipped).abs(), 1e-12),
        ],
    )
}

pub fn check_geometry() -> Check {
    let closed = bounds_report(401, Method::ClosedForm, Orientation::default());
    let analytic = bounds_report(401, Method::AnalyticN, Orientation::default());
    Check::new(
        Some(4),
        "ideal geometry",
        vec![
            Invariant::at_most("sqrt det g - |Eu| (closed form)", closed.max_ideal_violation, 1e-10),
            Invariant::at_most("sqrt det g - |Eu| (analytic n)", analytic.max_ideal_violation, 1e-6),
            Invariant::near("quantum volume", analytic.quantum_volume, 2.0 * PI, 1e-3),
            Invariant::at_least("Tr g - 2|Eu|", closed.min_trace_margin.min(analytic.min_trace_margin), -1e-12),
        ],
    )
}

pub fn check_peps(m: &Mutations) -> Check {
    guarded(5, "PEPS correctness", || {
        let mut inv = Vec::new();
        for (l1, l2) in [(2, 2), (3, 2)] {
            let lat = torus(l1, l2)?;
            let fock = build_ground_state(&lat, None)?;
            let mut input = PepsInput::new(&lat, None);
            if m.map_sign_flip {
                input.map = MapTensor::default().with_entry(0, 1, 0, -1.0);
            }
            let fid = match evaluate_peps(&lat, &input) {
                Ok(peps) => {
                    inv.push(Invariant::at_most(
                        format!("PEPS annihilation residual {l1}x{l2}"),
                        annihilation_residual(&lat, &peps, None)?,
                        1e-12,
                    ));
                    fock.fidelity(&peps)
                }
                Err(crate::Error::ZeroState) => 0.0,
                Err(e) => return Err(e),
            };
            inv.push(Invariant::at_least(format!("PEPS fidelity {l1}x{l2}"), fid, 1.0 - 1e-10));
            inv.push(Invariant::at_most(
                format!("hexagon annihilation residual {l1}x{l2}"),
                annihilation_residual(&lat, &fock, None)?,
                1e-12,
            ));
            let filling = 2 * lat.num_sites() / 3;
            inv.push(Invariant::holds(
                format!("filling 2N/3 {l1}x{l2}"),
                fock.particle_numbers() == vec![filling],
            ));
        }
        Ok(inv)
    })
}

pub fn check_uniqueness() -> Check {
    guarded(6, "uniqueness and gap", || {
        let lat = torus(2, 2)?;
        let mut inv = Vec::new();
        for mu in [-1.0, 0.0, 0.5] {
            match verify_unique_ground_state(&lat, mu, 0.0) {
                Ok(r) => {
                    inv.push(Invariant::at_least(format!("ground fidelity mu={mu}"), r.fidelity, 1.0 - 1e-10));
                    inv.push(Invariant::near(format!("gap mu={mu}"), r.gap, (mu + 2.0f64).min(1.0 - mu), 1e-8));
                }
                Err(e) => inv.push(Invariant::error(format!("unique ground state mu={mu}"), &e)),
            }
        }
        let deg = ground_space_dimension(&lat, -2.0)?.ed_dimension.unwrap_or(0);
        inv.push(Invariant::near("degeneracy at mu=-2", deg as f64, 256.0, 0.0));
        Ok(inv)
    })
}

pub fn check_anticommutators() -> Check {
    guarded(7, "anticommutators", || {
        let lat = torus(3, 3)?;
        let hex = lat.hexagons();
        let ops = (0..hex.len()).map(|h| HexOperator::uniform(&lat, h)).collect::<Result<Vec<_>>>()?;
        let mut worst = [0.0f64; 3];
        for (i, a) in ops.iter().enumerate() {
            for (j, b) in ops.iter().enumerate() {
                let shared = hex[i].sites.iter().filter(|s| hex[j].sites.contains(s)).count();
                let (slot, target) = match (i == j, shared) {
                    (true, _) => (0, 1.0),
                    (false, 1) => (1, 1.0 / 6.0),
                    _ => (2, 0.0),
                };
                worst[slot] = worst[slot].max((anticommutator(a, b) - target).norm());
            }
        }
        Ok(vec![
            Invariant::at_most("same hexagon", worst[0], 1e-14),
            Invariant::at_most("corner sharing", worst[1], 1e-14),
            Invariant::at_most("disjoint", worst[2], 1e-14),
        ])
    })
}

pub fn check_circuit() -> Check {
    guarded(8, "circuit iso-spectrality", || {
        let lat = torus(2, 2)?;
        let base = full_spectrum(&lat, 0.0, 0.0)?;
        let mut inv = Vec::new();
        for alpha in [0.3, PI / 2.0, PI] {
            let s = full_spectrum(&lat, 0.0, alpha)?;
            inv.push(Invariant::at_most(format!("spectrum distance alpha={alpha:.6}"), spectrum_distance(&s, &base), 1e-9));
        }
        let layout = GateLayout::new(&lat);
        let mut dressed: f64 = 0.0;
        for s in 0..lat.num_sites() {
            dressed = dressed.max(dressed_operator_defect(&layout, s, 0.7)?);
        }
        inv.push(Invariant::at_most("dressed-operator identity", dressed, 1e-12));
        Ok(inv)
    })
}

pub fn check_layout(m: &Mutations) -> Check {
    let run = || -> Result<Vec<Invariant>> {
        let lat = torus(3, 3)?;
        let mut layout = GateLayout::new(&lat);
        if m.sigma_flip {
            layout = layout.with_flipped(0);
        }
        Ok(match c2t_layout_check(&lat, &layout) {
            Ok(_) => vec![Invariant::holds("C2T gate layout", true)],
            Err(e) => vec![Invariant::error("C2T gate layout", &e)],
        })
    };
    let inv = run().unwrap_or_else(|e| vec![Invariant::error("C2T gate layout", &e)]);
    Check::new(None, "circuit layout", inv)
}

pub fn check_peschel() -> Check {
    guarded(9, "entanglement oracle equivalence", || {
        let lat = torus(3, 2)?;
        let psi = build_ground_state(&lat, None)?;
        let schmidt = schmidt_es(&psi, &lat, 1, true)?;
        let free = free_many_body_es(&correlation_spectrum(3, 2, 1)?, (2, 3), 40.0)?;
        let ceiling = 20.0;
        let pick = |v: Vec<f64>| {
            let mut v: Vec<f64> = v.into_iter().filter(|&e| e <= ceiling).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let a = pick(schmidt.es_levels().iter().map(|l| l.epsilon + schmidt.offset).collect());
        let b = pick(free.levels.iter().map(|l| l.epsilon + free.offset).collect());
        let d = if a.len() == b.len() { spectrum_distance(&a, &b) } else { f64::INFINITY };
        Ok(vec![Invariant::at_most("Schmidt vs correlation-matrix levels", d, 1e-8)])
    })
}

pub fn check_es_features() -> Check {
    guarded(10, "ES features", || {
        let modes = correlation_spectrum(120, 6, 60)?;
        let es = free_many_body_es(&modes, (2, 3), DEFAULT_EPS_MAX)?;
        let lowest = |k: i64, ch: &[i64]| {
            es.levels
                .iter()
                .filter(|l| l.k == k && ch.contains(&l.channel))
                .map(|l| l.epsilon.abs())
                .fold(f64::INFINITY, f64::min)
        };
        let mut inv = vec![
            Invariant::at_least("in-gap modes", modes.in_gap(0.3) as f64, 1.0),
            Invariant::at_most("reference level at K=0", lowest(0, &[0]), 1e-10),
            Invariant::at_most("zero level at K=pi, +-1 channel", lowest(3, &[1, -1]), 1e-10),
        ];
        let lat = torus(2, 4)?;
        let psi = build_ground_state(&lat, None)?;
        for alpha in [0.0, 0.1 * PI, 0.2 * PI] {
            let sp = schmidt_es(&apply_circuit(&lat, &psi, alpha), &lat, 1, true)?;
            let e = cusp_entry(alpha, &sp.es_levels());
            inv.push(Invariant::above(
                format!("cusp margin alpha={alpha:.6}"),
                e.margin.unwrap_or(f64::NEG_INFINITY),
                crate::entanglement::CUSP_TOL,
            ));
        }
        Ok(inv)
    })
}

pub fn check_edge() -> Check {
    guarded(11, "edge spectrum", || {
        let lat = build_lattice(40, 12, Boundary::Cylinder)?;
        let r = cylinder_spectrum(&lat, -1.0)?;
        Ok(vec![
            Invariant::holds("no mid-gap crossing between sectors", !r.mid_gap_crossed),
            Invariant::at_most("lowest 2 L1 levels at -2 - mu", r.valence_flatness, 1e-9),
        ])
    })
}

pub fn check_metric() -> Check {
    guarded(12, "many-body metric", || {
        let r = many_body_metric(&torus(6, 6)?, 0.0, 1e-3)?;
        Ok(vec![
            Invariant::near("tr g(0) vs mean tr g(k)", r.trace, r.rhs, 1e-4),
            Invariant::above("tr g(0) above the many-body bound", r.trace, r.bound),
        ])
    })
}

/// Every acceptance criterion plus the gate-layout check.
pub fn run_all(m: &Mutations) -> Verdict {
    let checks = vec![
        check_flat_bands(),
        check_gap(),
        check_euler(),
        check_geometry(),
        check_peps(m),
        check_uniqueness(),
        check_anticommutators(),
        check_circuit(),
        check_layout(m),
        check_peschel(),
        check_es_features(),
        check_edge(),
        check_metric(),
    ];
    Verdict { passed: checks.iter().all(|c| c.passed), checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_margins() {
        assert!(Invariant::at_most("x", 1.0, 2.0).passed);
        assert_eq!(Invariant::at_most("x", 3.0, 2.0).margin, -1.0);
        assert!(!Invariant::above("x", 1.0, 1.0).passed);
        assert!(Invariant::near("x", 1.0 + 1e-9, 1.0, 1e-8).passed);
    }

    #[test]
    fn mutations_are_caught() {
        let m = Mutations { map_sign_flip: true, sigma_flip: true };
        assert!(!check_peps(&m).passed);
        assert!(!check_layout(&m).passed);
        assert!(check_layout(&Mutations::default()).passed);
    }

    #[test]
    fn worst_prefers_failures() {
        let c = Check::new(
            None,
            "c",
            vec![Invariant::at_most("tight", 1.0, 1.0), Invariant::at_most("broken", 2.0, 1.5)],
        );
        assert_eq!(c.worst().unwrap().name, "broken");
    }
}
