//! One function per subcommand. Each returns the invariants it checked and a
//! JSON summary; artifacts go through the `Sink`.

use std::f64::consts::PI;

use kagome_core::bloch::{band_summary, bands_csv};
use kagome_core::circuit::{c2t_layout_check, dressed_operator_defect, locality_report, GateLayout};
use kagome_core::entanglement::{
    correlation_spectrum, cusp_entry, es_csv, free_many_body_es, schmidt_es, CUSP_TOL, DEFAULT_EPS_MAX,
    MAX_SCHMIDT_MODES,
};
use kagome_core::fock::{annihilation_residual, build_ground_state, full_spectrum};
use kagome_core::geometry::{bounds_report, geometry_csv, geometry_field};
use kagome_core::io::{csv_from_rows, fmt_f64};
use kagome_core::linalg::spectrum_distance;
use kagome_core::peps::{
    assemble_interacting_tensor, assemble_site_tensor, evaluate_peps, leg_signs, MapTensor, PepsInput, WVariant,
};
use kagome_core::realspace::{cylinder_csv, cylinder_spectrum, many_body_metric, HexWeights};
use kagome_core::verify::{run_all, Invariant, Mutations};
use kagome_core::{build_lattice, Boundary, Error, Lattice, Sublattice, C64};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::Sink;
use crate::CliError;

pub struct Outcome {
    pub invariants: Vec<Invariant>,
    pub data: Value,
}

pub fn run(command: &str, cfg: &RunConfig, mutations: &Mutations, sink: &mut Sink) -> Result<Outcome, CliError> {
    match command {
        "bands" => bands(cfg, sink),
        "topology" => topology(cfg, sink),
        "state" => state(cfg, mutations, sink),
        "entanglement" => entanglement(cfg, sink),
        "circuit" => circuit(cfg, mutations, sink),
        "metric" => metric(cfg),
        "verify-all" => verify_all(mutations, sink),
        other => Err(CliError::Config(format!("unknown command {other:?}"))),
    }
}

fn lattice(cfg: &RunConfig, default: (usize, usize)) -> Result<Lattice, CliError> {
    let (l1, l2) = cfg.size(default);
    Ok(build_lattice(l1, l2, cfg.boundary())?)
}

fn beta(cfg: &RunConfig) -> Result<Option<HexWeights>, CliError> {
    match cfg.model.beta {
        None => Ok(None),
        Some(b) => Ok(Some(HexWeights::new(b.map(|[re, im]| C64::new(re, im)))?)),
    }
}

fn bands(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let grid = cfg.numerics.grid.unwrap_or(301);
    let mu = cfg.mu(0.0);
    let flat = cfg.tol(|t| t.flat, 1e-9);
    let s = band_summary(grid, mu);
    sink.table("bands", &bands_csv(grid, mu))?;
    let mut inv = vec![
        Invariant::at_most("std E1", s.std[0], flat),
        Invariant::at_most("std E2", s.std[1], flat),
        Invariant::at_most("|E + 2 + mu| on flat bands", s.max_deviation, flat),
        Invariant::near("min gap", s.min_gap, 3.0, cfg.tol(|t| t.gap, 1e-3)),
    ];
    let mut data = json!({ "grid": grid, "mu": mu, "flat_energy": -2.0 - mu, "summary": s });
    if cfg.boundary() == Boundary::Cylinder {
        let lat = lattice(cfg, (40, 12))?;
        let r = cylinder_spectrum(&lat, mu)?;
        sink.table("cylinder", &cylinder_csv(&r))?;
        inv.push(Invariant::holds("no mid-gap crossing between sectors", !r.mid_gap_crossed));
        inv.push(Invariant::at_most("lowest 2 L1 levels at -2 - mu", r.valence_flatness, flat));
        data["cylinder"] = json!({
            "L1": lat.l1(),
            "L2": lat.l2(),
            "mid_gap": r.mid_gap,
            "below_mid": r.below_mid,
            "closest_to_mid": r.closest_to_mid,
            "min_sector_gap": r.min_sector_gap,
            "valence_flatness": r.valence_flatness,
            "flat_count": r.flat_count,
            "flat_detachment": r.flat_detachment,
        });
    }
    Ok(Outcome { invariants: inv, data })
}

fn topology(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let grid = cfg.numerics.grid.unwrap_or(401);
    let method = cfg.method().map_err(CliError::Config)?;
    let orientation = cfg.numerics.orientation.unwrap_or_default();
    sink.table("geometry", &geometry_csv(&geometry_field(grid, method, orientation)))?;
    let s = bounds_report(grid, method, orientation);
    let inv = vec![
        Invariant::near("|chi|", s.chi.abs(), 1.0, cfg.tol(|t| t.chi, 1e-4)),
        Invariant::near("quantum volume", s.quantum_volume, 2.0 * PI, cfg.tol(|t| t.volume, 1e-3)),
        Invariant::at_most("sqrt det g - |Eu|", s.max_ideal_violation, cfg.tol(|t| t.ideal, 1e-6)),
        Invariant::at_least("Tr g - 2|Eu|", s.min_trace_margin, -1e-12),
    ];
    let data = json!({ "grid": grid, "method": format!("{method:?}"), "orientation": orientation, "summary": s });
    Ok(Outcome { invariants: inv, data })
}

fn state(cfg: &RunConfig, m: &Mutations, sink: &mut Sink) -> Result<Outcome, CliError> {
    let lat = lattice(cfg, (2, 2))?;
    let beta = beta(cfg)?;
    let fid_tol = cfg.tol(|t| t.fidelity, 1e-10);
    let res_tol = cfg.tol(|t| t.residual, 1e-12);
    let fock = build_ground_state(&lat, beta.as_ref())?;
    sink.text("fock_state.txt", &fock.to_text())?;
    let mut input = PepsInput::new(&lat, beta.as_ref());
    if m.map_sign_flip {
        input.map = MapTensor::default().with_entry(0, 1, 0, -1.0);
    }
    let mut inv = Vec::new();
    let fidelity = match evaluate_peps(&lat, &input) {
        Ok(peps) => {
            sink.text("peps_state.txt", &peps.to_text())?;
            inv.push(Invariant::at_most(
                "PEPS annihilation residual",
                annihilation_residual(&lat, &peps, beta.as_ref())?,
                res_tol,
            ));
            fock.fidelity(&peps)
        }
        Err(Error::ZeroState) => 0.0,
        Err(e) => return Err(e.into()),
    };
    inv.push(Invariant::at_least("PEPS fidelity", fidelity, 1.0 - fid_tol));
    inv.push(Invariant::at_most(
        "hexagon annihilation residual",
        annihilation_residual(&lat, &fock, beta.as_ref())?,
        res_tol,
    ));
    let filling = 2 * lat.num_sites() / 3;
    let numbers = fock.particle_numbers();
    inv.push(Invariant::holds("filling 2N/3", numbers == vec![filling]));

    let d2 = assemble_site_tensor(WVariant::D2);
    sink.json("site_tensor_d2.json", &d2.to_json())?;
    sink.json("site_tensor_d6.json", &assemble_site_tensor(WVariant::D6).to_json())?;
    let alpha = cfg.alpha(0.0);
    let mut interacting = serde_json::Map::new();
    for sub in [Sublattice::A, Sublattice::B, Sublattice::C] {
        let t = assemble_interacting_tensor(&d2, alpha, leg_signs(sub))?;
        interacting.insert(format!("{sub:?}"), t.to_json());
    }
    sink.json("interacting_tensors.json", &Value::Object(interacting))?;

    let data = json!({
        "L1": lat.l1(),
        "L2": lat.l2(),
        "sites": lat.num_sites(),
        "particles": numbers,
        "fock_terms": fock.len(),
        "fidelity": fidelity,
        "map_sign_flip": m.map_sign_flip,
    });
    Ok(Outcome { invariants: inv, data })
}

fn entanglement(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome, CliError> {
    let lat = lattice(cfg, (2, 4))?;
    if !lat.is_torus() {
        return Err(Error::RequiresTorus.into());
    }
    let (l1, l2) = (lat.l1(), lat.l2());
    let cut = cfg.lattice.cut.unwrap_or(1);
    let alpha = cfg.alpha(0.0);
    let eps_max = cfg.numerics.eps_max.unwrap_or(DEFAULT_EPS_MAX);

    let modes = correlation_spectrum(l1, l2, cut)?;
    sink.table("correlation", &modes.to_csv())?;
    let mut data = json!({
        "L1": l1,
        "L2": l2,
        "cut": cut,
        "alpha": alpha,
        "eps_max": eps_max,
        "correlation_modes": modes.mode_count(),
        "in_gap_modes": modes.in_gap(0.3),
        "free_entropy": modes.entropy(),
    });
    let mut inv = Vec::new();

    let schmidt_fits = lat.num_sites() <= MAX_SCHMIDT_MODES;
    if alpha != 0.0 && !schmidt_fits {
        return Err(Error::SizeLimit { what: "Schmidt decomposition sites", size: lat.num_sites(), limit: MAX_SCHMIDT_MODES }
            .into());
    }
    let free = if alpha == 0.0 {
        let free = free_many_body_es(&modes, (2, 3), eps_max)?;
        sink.table("es_free", &es_csv(&[(alpha, l2, free.levels.clone())]))?;
        data["free_levels"] = json!(free.levels.len());
        data["free_truncated"] = json!(free.truncated);
        Some(free)
    } else {
        None
    };

    let levels = if schmidt_fits {
        let psi = build_ground_state(&lat, None)?;
        let psi = kagome_core::circuit::apply_circuit(&lat, &psi, alpha);
        let sp = schmidt_es(&psi, &lat, cut, true)?;
        let levels = sp.es_levels();
        let kept: Vec<_> = levels.iter().filter(|l| l.epsilon <= eps_max).copied().collect();
        sink.table("es_schmidt", &es_csv(&[(alpha, l2, kept)]))?;
        inv.push(Invariant::near("sum of Schmidt weights", sp.total(), 1.0, 1e-10));
        data["schmidt_entropy"] = json!(sp.entropy());
        if alpha == 0.0 {
            let wide = free_many_body_es(&modes, (2, 3), 40.0)?;
            let ceiling = 20.0;
            let pick = |v: Vec<f64>| {
                let mut v: Vec<f64> = v.into_iter().filter(|&e| e <= ceiling).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let a = pick(levels.iter().map(|l| l.epsilon + sp.offset).collect());
            let b = pick(wide.levels.iter().map(|l| l.epsilon + wide.offset).collect());
            let d = if a.len() == b.len() { spectrum_distance(&a, &b) } else { f64::INFINITY };
            inv.push(Invariant::at_most("Schmidt vs correlation-matrix levels", d, 1e-8));
        }
        levels
    } else {
        free.map(|f| f.levels).unwrap_or_default()
    };
    let cusp = cusp_entry(alpha, &levels);
    inv.push(Invariant::above("cusp margin", cusp.margin.unwrap_or(f64::NEG_INFINITY), CUSP_TOL));
    data["cusp"] = json!(cusp);
    data["spectrum_source"] = json!(if schmidt_fits { "schmidt" } else { "free" });
    Ok(Outcome { invariants: inv, data })
}

fn circuit(cfg: &RunConfig, m: &Mutations, sink: &mut Sink) -> Result<Outcome, CliError> {
    let lat = lattice(cfg, (2, 2))?;
    let mu = cfg.mu(0.0);
    let alpha = cfg.alpha(PI / 2.0);
    let tol = cfg.tol(|t| t.spectrum, 1e-9);
    let mut layout = GateLayout::new(&lat);
    if m.sigma_flip {
        layout = layout.with_flipped(0);
    }
    sink.json("layout.json", &layout.to_json())?;
    let base = full_spectrum(&lat, mu, 0.0)?;
    let dressed = full_spectrum(&lat, mu, alpha)?;
    sink.table(
        "circuit_spectrum",
        &csv_from_rows(
            &["index", "E_H", "E_Hprime"],
            base.iter().zip(&dressed).enumerate().map(|(i, (a, b))| vec![i as f64, *a, *b]),
        ),
    )?;
    let distance = spectrum_distance(&base, &dressed);
    let mut inv = vec![Invariant::at_most("spectrum distance H vs H'", distance, tol)];
    inv.push(match c2t_layout_check(&lat, &layout) {
        Ok(_) => Invariant::holds("C2T gate layout", true),
        Err(e) => Invariant::error("C2T gate layout", &e),
    });
    let loc = locality_report(&lat, &layout);
    inv.push(Invariant::at_most("non-local a'^dag a' terms", loc.violations as f64, 0.0));
    let mut defect: f64 = 0.0;
    for s in 0..lat.num_sites() {
        defect = defect.max(dressed_operator_defect(&layout, s, alpha)?);
    }
    inv.push(Invariant::at_most("dressed-operator identity", defect, 1e-12));
    let data = json!({
        "L1": lat.l1(),
        "L2": lat.l2(),
        "mu": mu,
        "alpha": alpha,
        "levels": base.len(),
        "ground_energy": base.first().copied(),
        "spectrum_distance": distance,
        "locality": loc,
        "sigma_flip": m.sigma_flip,
    });
    Ok(Outcome { invariants: inv, data })
}

fn metric(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let lat = lattice(cfg, (6, 6))?;
    let mu = cfg.mu(0.0);
    let step = cfg.numerics.fd_step.unwrap_or(1e-3);
    let r = many_body_metric(&lat, mu, step)?;
    let inv = vec![
        Invariant::near("tr g(0) vs mean tr g(k)", r.trace, r.rhs, cfg.tol(|t| t.metric, 1e-4)),
        Invariant::above("tr g(0) above the many-body bound", r.trace, r.bound),
    ];
    Ok(Outcome { invariants: inv, data: json!(r) })
}

fn verify_all(m: &Mutations, sink: &mut Sink) -> Result<Outcome, CliError> {
    let verdict = run_all(m);
    sink.json("verify.json", &verdict)?;
    let inv = verdict
        .checks
        .iter()
        .flat_map(|c| {
            c.invariants.iter().map(move |i| {
                let mut i = i.clone();
                i.name = match c.criterion {
                    Some(n) => format!("[{n}] {}: {}", c.name, i.name),
                    None => format!("{}: {}", c.name, i.name),
                };
                i
            })
        })
        .collect();
    let summary: Vec<Value> = verdict
        .checks
        .iter()
        .map(|c| {
            json!({
                "criterion": c.criterion,
                "name": c.name,
                "passed": c.passed,
                "worst_margin": c.worst().map(|w| fmt_f64(w.margin)),
            })
        })
        .collect();
    Ok(Outcome { invariants: inv, data: json!({ "passed": verdict.passed, "checks": summary }) })
}
