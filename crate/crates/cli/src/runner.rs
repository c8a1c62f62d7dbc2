//! Scenario execution: builds the model and generator, resolves the symmetry
//! datum, runs the requested experiment and collects every check into the
//! report (verification failures are collected, not fail-fast).

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use bqms_core::channel::BimoduleChannel;
use bqms_core::error::{Error, Result};
use bqms_core::generator::Lindbladian;
use bqms_core::gradientflow::{
    self, fermion_model, find_intertwining, flow, joint_spectrum, FermionModel, FlowTrace,
};
use bqms_core::inclusion::{InclusionModel, ModelKind};
use bqms_core::instances;
use bqms_core::numerics::{self, identity, zeros, CMatrix};
use bqms_core::symmetry::{
    self, check_bimodule_gns, check_equilibrium, modular_multiplier, semigroup_limit, solve_delta,
    SolveDelta, SymmetryDatum,
};
use bqms_core::tol::Tol;

use crate::report::Report;
use crate::scenario::{
    parse_matrix, DeltaSpec, ExperimentSpec, GeneratorSpec, ModelSpec, Scenario,
};

pub struct Outcome {
    pub report: Report,
    pub csv: Option<String>,
}

pub fn run(sc: &Scenario, name: &str) -> Result<Outcome> {
    let mut tol = Tol::default();
    if let Some(v) = sc.tolerances.herm {
        tol.herm = v;
    }
    if let Some(v) = sc.tolerances.eig_floor {
        tol.eig_floor = v;
    }
    if let Some(v) = sc.tolerances.eq {
        tol.eq = v;
    }
    if let Some(v) = sc.tolerances.scale {
        tol.scale = v;
    }
    if let Ok(s) = std::env::var("BQMS_TOL_SCALE") {
        if let Ok(f) = s.parse::<f64>() {
            tol.scale *= f;
        }
    }

    let mut report = Report::new(name, sc.seed);
    let mut rng = ChaCha20Rng::seed_from_u64(sc.seed);

    // model and, for the fermion case, the whole bundled construction
    let fermion: Option<FermionModel> = match &sc.model {
        ModelSpec::Fermion { m, a, beta } => Some(fermion_model(*m, a, *beta)?),
        _ => None,
    };
    let model = match &sc.model {
        ModelSpec::Spin { n } => InclusionModel::spin(*n).with_tol(tol),
        ModelSpec::Full { n } => InclusionModel::full_matrix(*n).with_tol(tol),
        ModelSpec::Fermion { .. } => fermion.as_ref().unwrap().model.clone().with_tol(tol),
    };

    let lind: Option<Lindbladian> = match (&sc.generator, &fermion) {
        (_, Some(fm)) => Some(fm.lindbladian.clone()),
        (Some(g), None) => Some(build_generator(&model, g)?),
        (None, None) => None,
    };

    // the channel interpretation of the scenario: the direct multiplier when
    // the generator spec names one, otherwise the time-one evolution
    let channel = channel_of(&model, &sc.generator, lind.as_ref())?;

    let delta: Option<SymmetryDatum> = match &sc.delta {
        DeltaSpec::None => fermion.as_ref().map(|fm| fm.delta.clone()),
        DeltaSpec::Modular { rho } => Some(modular_multiplier(&model, &parse_matrix(rho)?)?),
        DeltaSpec::Explicit { delta_hat } => Some(SymmetryDatum::new(&model, parse_matrix(delta_hat)?, false)?),
        DeltaSpec::Solve => {
            match solve_delta(&channel)? {
                SolveDelta::Found { delta, state_realizable, witness } => {
                    report.value("delta_state_realizable", serde_json::json!(state_realizable));
                    if !witness.is_empty() {
                        report.witness = Some(
                            witness
                                .iter()
                                .map(|c| {
                                    format!(
                                        "t{} = ({}) t{} direct vs t{} = ({}) t{} via t1",
                                        c.k + 1,
                                        ratio_str_inv(&c.direct),
                                        c.j + 1,
                                        c.k + 1,
                                        ratio_str_inv(&c.via_first),
                                        c.j + 1
                                    )
                                })
                                .collect(),
                        );
                    }
                    Some(delta)
                }
                SolveDelta::Infeasible { what } => {
                    report.check_detail("solve_delta", 1.0, 0.0, &format!("infeasible: {what}"));
                    None
                }
                SolveDelta::Underdetermined => {
                    report.check_detail("solve_delta", 1.0, 0.0, "underdetermined");
                    None
                }
            }
        }
    };

    let mut csv = None;
    match &sc.experiment {
        ExperimentSpec::Classify => {
            let ch = &channel;
            let rep = ch.classify();
            report.check("classify.expectation_route", rep.expectation_residual, 1e-10 * tol.scale);
            report.value("classify.cp", serde_json::json!(rep.cp));
            report.value("classify.unital", serde_json::json!(rep.unital));
            report.value("classify.trace_preserving", serde_json::json!(rep.trace_preserving));
            report.value("classify.min_multiplier_eig", serde_json::json!(rep.min_multiplier_eig));
            if let Some(l) = &lind {
                let v = l.validate();
                report.check("validate.herm", v.herm_residual, model.tol.herm_tol());
                report.check("validate.unitality", v.unitality_residual, model.tol.eq_tol());
                report.check("validate.l0_positive", (-v.min_l0_eig).max(0.0), model.tol.eig_floor_tol());
            }
            if let Some(d) = &delta {
                let target = lind.as_ref().map(|l| l.lhat.data.clone()).unwrap_or(ch.multiplier.data.clone());
                let g = check_bimodule_gns(&model, &target, d)?;
                report.check("check_bimodule_gns.defining", g.defining_residual, model.tol.eq_tol().max(1e-10));
                report.check("check_bimodule_gns.consequences", g.commute_delta_residual.max(g.normality_residual).max(g.range_identity_residual), model.tol.eq_tol().max(1e-10));
            }
            if let DeltaSpec::Modular { rho } = &sc.delta {
                let r = parse_matrix(rho)?;
                let eq = check_equilibrium(&ch, &r)?;
                report.value("check_equilibrium.state_residual", serde_json::json!(eq.state_residual));
                report.value("check_equilibrium.multiplier_residual", serde_json::json!(eq.multiplier_residual));
                report.value("check_equilibrium.pass", serde_json::json!(eq.equilibrium));
                let gs = symmetry::check_gns_state(&ch, &r)?;
                report.value("check_gns_state.residual", serde_json::json!(gs.bilinear_residual));
            }
        }
        ExperimentSpec::Poincare => {
            let l = lind.as_ref().ok_or_else(|| missing("generator"))?;
            let rep = l.poincare_margins()?;
            report.value("poincare.beta_hat", serde_json::json!(rep.beta_hat));
            report.value("poincare.beta", serde_json::json!(rep.beta));
            report.value("poincare.connected", serde_json::json!(rep.connected));
            if rep.connected {
                let mut worst = f64::INFINITY;
                for _ in 0..100 {
                    let x = traceless_probe(&model, &mut rng);
                    worst = worst.min(l.poincare_margin(&rep, &x));
                }
                report.check_detail("poincare_margins", (-worst).max(0.0), 1e-9 * tol.scale, "min margin over 100 traceless probes");
            }
        }
        ExperimentSpec::Flow { grid, d0 } => {
            let l = lind.as_ref().ok_or_else(|| missing("generator"))?;
            let d = delta.as_ref().ok_or_else(|| missing("delta"))?;
            let d0m = density_from(&model, d0)?;
            let tr = flow(l, d, &d0m, grid, None)?;
            push_flow_checks(&mut report, &model, &tr);
            csv = Some(emit_csv(&tr));
        }
        ExperimentSpec::Lsi { grid, d0, beta } => {
            let l = lind.as_ref().ok_or_else(|| missing("generator"))?;
            let d = delta.as_ref().ok_or_else(|| missing("delta"))?;
            let d0m = density_from(&model, d0)?;
            let b = resolve_beta(*beta, &fermion)?;
            let tr = gradientflow::lsi_report(l, d, &d0m, grid, b)?;
            push_flow_checks(&mut report, &model, &tr);
            let worst = tr.lsi_margins.iter().cloned().fold(f64::INFINITY, f64::min);
            report.check("lsi_report.margin", (-worst).max(0.0), 1e-8 * tol.scale);
            report.value("lsi_report.beta", serde_json::json!(b));
            csv = Some(emit_csv(&tr));
        }
        ExperimentSpec::Talagrand { grid, d0, beta } => {
            let l = lind.as_ref().ok_or_else(|| missing("generator"))?;
            let d = delta.as_ref().ok_or_else(|| missing("delta"))?;
            let d0m = density_from(&model, d0)?;
            let b = resolve_beta(*beta, &fermion)?;
            let (len, bound) = gradientflow::talagrand_report(l, d, &d0m, grid, b)?;
            report.check_detail("talagrand_report", (len - bound).max(0.0), 1e-6 * tol.scale, "path length minus bound");
            report.value("talagrand.path_length", serde_json::json!(len));
            report.value("talagrand.bound", serde_json::json!(bound));
            let tr = flow(l, d, &d0m, grid, Some(b))?;
            csv = Some(emit_csv(&tr));
        }
        ExperimentSpec::Intertwine => {
            let fm = fermion.as_ref().ok_or_else(|| missing("fermion model"))?;
            let (idx, bt, res) = find_intertwining(&fm.lindbladian, &fm.candidates, &fm.directions)?;
            report.check_detail("find_intertwining", res, 1e-9 * tol.scale, &fm.candidates[idx].name);
            report.value("intertwining.beta", serde_json::json!(bt));
            report.value("intertwining.extension", serde_json::json!(fm.candidates[idx].name));
        }
        ExperimentSpec::Limit => {
            let l = lind.as_ref().ok_or_else(|| missing("generator"))?;
            let d = delta.as_ref().ok_or_else(|| missing("delta"))?;
            let lim = semigroup_limit(l, d)?;
            // numeric limit at t = 50 / gap, gap from beta-hat when available
            let gap = l.poincare_margins().map(|p| p.beta_hat.max(1e-2)).unwrap_or(1.0);
            let t_far = 50.0 / gap;
            let far = l.evolve(t_far)?;
            let res = numerics::max_abs(&(&far.multiplier.data - &lim.multiplier));
            report.check_detail("semigroup_limit.multiplier", res, 1e-8 * tol.scale, &format!("t = {t_far:.2}"));
            // dual density limit on a seeded probe
            let probe = density_probe(&model, &mut rng);
            let e = numerics::expm_general(&l.dual_transfer().scale(-t_far));
            let dlim = model.unvec_m(&(e * model.vec_m(&probe)));
            let expect = lim.density.scale(model.tau_m(&probe).re);
            report.check("semigroup_limit.dual_density", numerics::max_abs(&(dlim - expect)), 1e-8 * tol.scale);
            report.value(
                "limit.density",
                serde_json::to_value(crate::scenario::emit_matrix(&lim.density)).unwrap_or_default(),
            );
        }
    }

    Ok(Outcome { report, csv })
}

fn ratio_str_inv(r: &num_rational::Ratio<i64>) -> String {
    // witnesses phrase t_k in terms of t_j, so invert the t_j/t_k ratio
    let inv = num_rational::Ratio::new(*r.denom(), *r.numer());
    if *inv.denom() == 1 {
        format!("{}", inv.numer())
    } else {
        format!("{}/{}", inv.numer(), inv.denom())
    }
}

fn missing(what: &str) -> Error {
    Error::ShapeMismatch { expected: what.to_string(), got: "absent".to_string() }
}

fn build_generator(model: &InclusionModel, g: &GeneratorSpec) -> Result<Lindbladian> {
    match g {
        GeneratorSpec::ExplicitMultiplier { lhat } => Lindbladian::from_lhat(model, &parse_matrix(lhat)?),
        GeneratorSpec::L0PlusL1 { l0, l1 } => Lindbladian::build(model, &parse_matrix(l0)?, &parse_matrix(l1)?),
        GeneratorSpec::Jumps { items } => {
            let n = model.n();
            if !matches!(model.kind, ModelKind::FullMatrix(_)) {
                return Err(Error::ShapeMismatch {
                    expected: "full matrix model for jump-form generators".into(),
                    got: "spin".into(),
                });
            }
            let mut l0 = zeros(model.dim_b2, model.dim_b2);
            for item in items {
                let v = parse_matrix(&item.v)?;
                if v.nrows() != n || v.ncols() != n {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{n}x{n} jump"),
                        got: format!("{}x{}", v.nrows(), v.ncols()),
                    });
                }
                let xi = CMatrix::from_fn(n * n, 1, |t, _| v[(t / n, t % n)].conj());
                l0 += (&xi * xi.adjoint()).scale(item.omega);
            }
            Lindbladian::build(model, &l0, &zeros(n, n))
        }
        GeneratorSpec::PaperExampleC4 => {
            if model.gns_dim != 4 || !matches!(model.kind, ModelKind::Spin(4)) {
                return Err(Error::ShapeMismatch { expected: "spin model with n = 4".into(), got: format!("{:?}", model.kind) });
            }
            let l0 = model.multiplier_of_transfer(&instances::c4_example_transfer())?;
            Lindbladian::build(model, &l0, &zeros(4, 4))
        }
    }
}

fn channel_of(model: &InclusionModel, g: &Option<GeneratorSpec>, lind: Option<&Lindbladian>) -> Result<BimoduleChannel> {
    match g {
        Some(GeneratorSpec::ExplicitMultiplier { lhat }) => BimoduleChannel::from_multiplier(model, parse_matrix(lhat)?),
        Some(GeneratorSpec::PaperExampleC4) => BimoduleChannel::from_superoperator(model, &instances::c4_example_transfer()),
        _ => match lind {
            Some(l) => l.evolve(1.0),
            None => Ok(BimoduleChannel::identity_channel(model)),
        },
    }
}

fn density_from(model: &InclusionModel, m: &crate::scenario::Matrix) -> Result<CMatrix> {
    let d = parse_matrix(m)?;
    if d.nrows() != model.n() || d.ncols() != model.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} density", model.n()),
            got: format!("{}x{}", d.nrows(), d.ncols()),
        });
    }
    let t = model.tau_m(&d).re;
    if t <= 0.0 {
        return Err(Error::NotPositiveDensity { min_eig: t });
    }
    Ok(d.scale(1.0 / t))
}

fn resolve_beta(beta: Option<f64>, fermion: &Option<FermionModel>) -> Result<f64> {
    if let Some(b) = beta {
        if b > 0.0 {
            return Ok(b);
        }
        return Err(Error::NoBeta);
    }
    match fermion {
        Some(fm) => {
            let (_, bt, res) = find_intertwining(&fm.lindbladian, &fm.candidates, &fm.directions)?;
            if res > 1e-6 || bt <= 0.0 {
                return Err(Error::NoBeta);
            }
            Ok(bt)
        }
        None => Err(Error::NoBeta),
    }
}

fn push_flow_checks(report: &mut Report, model: &InclusionModel, tr: &FlowTrace) {
    let ts = model.tol.scale;
    let mut worst_increase = 0.0f64;
    for w in tr.entropies.windows(2) {
        worst_increase = worst_increase.max(w[1] - w[0]);
    }
    report.check("flow.entropy_monotone", worst_increase, 1e-10 * ts);
    let mut trace_drift = 0.0f64;
    let t0 = model.tau_m(&tr.densities[0]).re;
    for d in &tr.densities {
        trace_drift = trace_drift.max((model.tau_m(d).re - t0).abs());
    }
    report.check("flow.trace_constant", trace_drift, 1e-10 * ts);
}

fn traceless_probe(model: &InclusionModel, rng: &mut ChaCha20Rng) -> CMatrix {
    let n = model.n();
    let mut x = match model.kind {
        ModelKind::Spin(_) => {
            let v = numerics::rand_complex(rng, n, 1);
            CMatrix::from_fn(n, n, |i, j| if i == j { v[(i, 0)] } else { numerics::ZERO })
        }
        ModelKind::FullMatrix(_) => numerics::rand_complex(rng, n, n),
    };
    let t = model.tau_m(&x);
    for i in 0..n {
        x[(i, i)] -= t;
    }
    x
}

fn density_probe(model: &InclusionModel, rng: &mut ChaCha20Rng) -> CMatrix {
    let n = model.n();
    match model.kind {
        ModelKind::Spin(_) => {
            let mut d: Vec<f64> = (0..n).map(|_| rand::Rng::gen::<f64>(rng) + 0.3).collect();
            let s: f64 = d.iter().sum::<f64>() / n as f64;
            for v in &mut d {
                *v /= s;
            }
            CMatrix::from_fn(n, n, |i, j| if i == j { numerics::cr(d[i]) } else { numerics::ZERO })
        }
        ModelKind::FullMatrix(_) => numerics::rand_density(rng, n),
    }
}

/// CSV with header t,entropy,metric_norm,lsi_margin,talagrand_slack; floats
/// carry 17 significant digits; rows follow the grid order.
pub fn emit_csv(tr: &FlowTrace) -> String {
    let mut out = String::from("t,entropy,metric_norm,lsi_margin,talagrand_slack\n");
    for i in 0..tr.times.len() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            tr.times[i], tr.entropies[i], tr.metric_norms[i], tr.lsi_margins[i], tr.talagrand_slacks[i]
        ));
    }
    out
}

/// The built-in suite over the exactly-printed instances.
pub fn verify_paper(seed: u64) -> Result<Report> {
    let mut report = Report::new("verify-paper", seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // identity multiplier in both worked models
    for (label, model) in [
        ("spin4", InclusionModel::spin(4)),
        ("full3", InclusionModel::full_matrix(3)),
    ] {
        let ch = BimoduleChannel::identity_channel(&model);
        let expect = model.e2().scale(model.lambda.powf(-0.5));
        report.check_detail(
            "identity_multiplier",
            numerics::max_abs(&(&ch.multiplier.data - &expect)),
            1e-12,
            label,
        );
    }

    // printed Fourier images of matrix units
    {
        let m = InclusionModel::spin(2);
        let x = bqms_core::inclusion::BoxElement::b1(numerics::unit(2, 0, 1));
        let y = m.fourier(&x)?;
        let mut expect = zeros(2, 2);
        expect[(0, 1)] = numerics::cr(2f64.sqrt());
        report.check("fourier.spin_unit", numerics::max_abs(&(&y.data - &expect)), 1e-14);

        let mf = InclusionModel::full_matrix(2);
        let xf = bqms_core::inclusion::BoxElement::b1(numerics::kron(&numerics::unit(2, 0, 0), &numerics::unit(2, 1, 1)));
        let yf = mf.fourier(&xf)?;
        let ef = numerics::kron(&numerics::unit(2, 1, 0), &numerics::unit(2, 1, 0));
        report.check("fourier.full_unit", numerics::max_abs(&(&yf.data - &ef)), 1e-14);
    }

    // the C^4 channel: classification, printed Delta, witness
    {
        let m = InclusionModel::spin(4);
        let ch = BimoduleChannel::from_superoperator(&m, &instances::c4_example_transfer())?;
        let cls = ch.classify();
        report.check_detail(
            "classify.c4",
            if cls.cp && cls.unital && !cls.trace_preserving { 0.0 } else { 1.0 },
            0.5,
            "cp and unital but not trace preserving",
        );
        let delta = SymmetryDatum::new(&m, instances::c4_example_delta_transfer().transpose().scale(2.0), false)?;
        let gns = check_bimodule_gns(&m, &ch.multiplier.data, &delta)?;
        report.check("check_bimodule_gns.c4_printed_delta", gns.defining_residual, 1e-12);

        match solve_delta(&ch)? {
            SolveDelta::Found { state_realizable, witness, .. } => {
                report.check_detail(
                    "solve_delta.c4_infeasible_state",
                    if state_realizable { 1.0 } else { 0.0 },
                    0.5,
                    "no compatible faithful state",
                );
                let c34 = witness.iter().find(|c| c.j == 2 && c.k == 3);
                let ok = c34.is_some_and(|c| {
                    c.direct == num_rational::Ratio::new(3, 4) && c.via_first == num_rational::Ratio::new(3, 2)
                });
                report.check_detail(
                    "solve_delta.c4_witness",
                    if ok { 0.0 } else { 1.0 },
                    0.5,
                    "t4 = (4/3) t3 direct against t4 = (2/3) t3 via t1, exact rationals",
                );
                report.witness = Some(
                    witness
                        .iter()
                        .map(|c| format!("t{}/t{}: direct {} vs via-t1 {}", c.j + 1, c.k + 1, c.direct, c.via_first))
                        .collect(),
                );
            }
            _ => report.check_detail("solve_delta.c4", 1.0, 0.5, "solver failed"),
        }

        // the same kernel as a generator: valid, GNS symmetric, margins
        let l0 = m.multiplier_of_transfer(&instances::c4_example_transfer())?;
        let l = Lindbladian::build(&m, &l0, &zeros(4, 4))?;
        let v = l.validate();
        report.check("validate.c4", v.herm_residual.max(v.unitality_residual).max((-v.min_l0_eig).max(0.0)), 1e-10);
        let gns2 = check_bimodule_gns(&m, &l.lhat.data, &delta)?;
        report.check("check_bimodule_gns.c4_generator", gns2.defining_residual, 1e-12);
        let pm = l.poincare_margins()?;
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let x = traceless_probe(&m, &mut rng);
            worst = worst.min(l.poincare_margin(&pm, &x));
        }
        report.check("poincare_margins.c4", (-worst).max(0.0), 1e-9);
    }

    // kappa-twisted projection pair
    {
        let m = InclusionModel::spin(4);
        let kappa = 1.3f64;
        let mut p = zeros(4, 4);
        p[(0, 1)] = numerics::ONE;
        p[(2, 3)] = numerics::ONE;
        let pbar = p.transpose();
        let mult = p.scale(kappa) + pbar.scale(1.0 / kappa);
        let delta_m = m.e2()
            + p.scale(kappa * kappa)
            + pbar.scale(1.0 / (kappa * kappa))
            + (&m.b2_identity() - &m.e2() - &p - &pbar).scale(0.8);
        let datum = SymmetryDatum::new(&m, delta_m, false)?;
        let rep = check_bimodule_gns(&m, &mult, &datum)?;
        report.check("check_bimodule_gns.kappa_twisted", rep.defining_residual, 1e-12);
    }

    // fermion instance: relations, symmetry, intertwining, entropy decay
    {
        let fm = fermion_model(2, &[1.0, 1.0], 1.0)?;
        report.check(
            "fermion_model.relations",
            0.0, // construction already guards the Clifford relations
            1.0,
        );
        let gns = check_bimodule_gns(&fm.model, &fm.lindbladian.lhat.data, &fm.delta)?;
        report.check("check_bimodule_gns.fermion", gns.defining_residual, 1e-10);
        let js = joint_spectrum(&fm.lindbladian, &fm.delta)?;
        let mut mu_ok = true;
        for it in &js.items {
            let e = 1.0f64.exp();
            if (it.mu - e).abs() > 1e-8 && (it.mu - 1.0 / e).abs() > 1e-8 {
                mu_ok = false;
            }
        }
        report.check_detail("joint_spectrum.fermion_mu", if mu_ok { 0.0 } else { 1.0 }, 0.5, "mu = e^{±beta a}");
        let (idx, bt, res) = find_intertwining(&fm.lindbladian, &fm.candidates, &fm.directions)?;
        report.check_detail("find_intertwining.fermion", res, 1e-9, &fm.candidates[idx].name);
        report.value("fermion.beta_tilde", serde_json::json!(bt));
        let d0 = numerics::rand_density(&mut rng, 4);
        let grid: Vec<f64> = (0..8).map(|i| 1.5 * i as f64).collect();
        let tr = flow(&fm.lindbladian, &fm.delta, &d0, &grid, Some(bt))?;
        let worst_lsi = tr.lsi_margins.iter().cloned().fold(f64::INFINITY, f64::min);
        report.check("lsi_report.fermion", (-worst_lsi).max(0.0), 1e-8);
        let worst_tala = tr.talagrand_slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        report.check("talagrand_report.fermion", (-worst_tala).max(0.0), 1e-6);
    }

    // modular semigroup limit
    {
        let m = InclusionModel::full_matrix(2);
        let (l0, rho) = instances::davies_kernel(2, &mut rng);
        let l = Lindbladian::build(&m, &l0, &zeros(2, 2))?;
        let delta = modular_multiplier(&m, &rho)?;
        let lim = semigroup_limit(&l, &delta)?;
        let far = l.evolve(90.0)?;
        report.check(
            "semigroup_limit.davies",
            numerics::max_abs(&(&far.multiplier.data - &lim.multiplier)),
            1e-8,
        );
        let probe = numerics::rand_density(&mut rng, 2);
        let e = numerics::expm_general(&l.dual_transfer().scale(-90.0));
        let dlim = m.unvec_m(&(e * m.vec_m(&probe)));
        report.check(
            "semigroup_limit.dual_density",
            numerics::max_abs(&(dlim - rho.scale(m.tau_m(&probe).re))),
            1e-8,
        );
        let _ = identity(2);
    }

    Ok(report)
}
