use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::Serialize;
use serde_json::{json, Value};
use tllsize::cpwa::{sample_controller, CpwaError, AuditReport, CpwaInterpolant, OmegaVector};
use tllsize::dynamics::{
    check_ads, check_delta_tau_invariance, deviation_audit, sysid_deviation_audit, ControlSystemModel,
    FiniteTransitionSystem,
};
use tllsize::geometry::{build_eta_grid, extra_corners, interpolation_hypercubes, sup_distance, BoxDomain, EtaGrid};
use tllsize::probe::probe_set;
use tllsize::sizing::{self, size_all, SizingResult};
use tllsize::tll::{arch_descriptor, compile_tll, equivalence_audit, TllError, TllNetwork};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::oracle::Controller;

/// Everything a command needs besides its own flags.
pub struct Context {
    pub cfg: RunConfig,
    /// Directory of the config file; relative input paths resolve here.
    pub config_dir: PathBuf,
    /// Artifact and report directory.
    pub out: PathBuf,
    pub seed: u64,
}

/// Command output: a results object and an overall verdict.
pub struct Outcome {
    pub results: Value,
    pub pass: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

impl Context {
    fn artifact(&self, p: &Path) -> PathBuf {
        self.out.join(p)
    }

    fn input(&self, p: &Path) -> PathBuf {
        self.config_dir.join(p)
    }

    fn write(&self, p: &Path, text: &str) -> Result<PathBuf, CliError> {
        let path = self.artifact(p);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn read(&self, path: &Path) -> Result<String, CliError> {
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
    }

    fn controller(&self, n: usize) -> Result<Controller, CliError> {
        let spec = self
            .cfg
            .controller
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a controller".into()))?;
        Controller::from_spec(spec, n, self.cfg.control_dim()?, &self.config_dir)
    }

    fn sizing(&self) -> Result<SizingResult, CliError> {
        let x = self.cfg.state_domain()?;
        let u = self.cfg.control_domain()?;
        let ext_xu = u.map(|u| x.product(&u).extent());
        Ok(size_all(
            &self.cfg.budget(),
            x.dim(),
            self.cfg.control_dim()?,
            x.extent(),
            ext_xu,
            self.cfg.eta.map(|e| e.0),
        )?)
    }

    fn grid(&self) -> Result<EtaGrid, CliError> {
        let eta = self.sizing()?.eta;
        Ok(build_eta_grid(&self.cfg.state_domain()?, eta)?)
    }

    fn load_interpolant(&self) -> Result<CpwaInterpolant, CliError> {
        let path = self.artifact(&self.cfg.artifacts.interpolant);
        Ok(CpwaInterpolant::from_json(&self.read(&path)?)?)
    }

    fn load_network(&self, p: &Path) -> Result<TllNetwork, CliError> {
        let path = self.artifact(p);
        Ok(TllNetwork::from_json(&self.read(&path)?)?)
    }

    fn probes(&self, domain: &BoxDomain) -> Vec<Vec<f64>> {
        probe_set(domain, self.cfg.probes.count, self.seed)
    }
}

pub fn size(ctx: &Context) -> Result<Outcome, CliError> {
    let r = ctx.sizing()?;
    let path = ctx.write(Path::new("sizing.json"), &serde_json::to_string_pretty(&r).expect("serializable"))?;
    Ok(Outcome {
        results: json!({ "sizing": r, "written": path }),
        pass: true,
    })
}

pub fn grid(ctx: &Context) -> Result<Outcome, CliError> {
    let g = ctx.grid()?;
    let covers = g.covers();
    let cubes = interpolation_hypercubes(&g).len();
    let extras = extra_corners(&g)?.len();
    let path = ctx.write(&ctx.cfg.artifacts.grid, &g.to_json())?;
    Ok(Outcome {
        results: json!({
            "eta": g.eta(),
            "points": g.len(),
            "interpolation_hypercubes": cubes,
            "extra_corners": extras,
            "covers": { "value": covers, "oracle": "exact lattice-cell coverage check" },
            "written": path,
        }),
        pass: covers,
    })
}

pub fn build(ctx: &Context) -> Result<Outcome, CliError> {
    let g = ctx.grid()?;
    let controller = ctx.controller(g.dimension())?;
    let m = ctx.cfg.control_dim()?;
    let points = g.points();
    let rows = controller
        .eval_batch(&points)
        .map_err(|e| CliError::Numerical(format!("controller {}: {e}", controller.label())))?;
    let values = (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let omega = OmegaVector::new(values, g.len())?;
    let interp = CpwaInterpolant::build(g, omega, ctx.cfg.budget().k_cont)?;
    ctx.write(&ctx.cfg.artifacts.grid, &interp.grid().to_json())?;
    let path = ctx.write(&ctx.cfg.artifacts.interpolant, &interp.to_json())?;
    Ok(Outcome {
        results: json!({
            "controller": controller.label(),
            "eta": interp.grid().eta(),
            "grid_points": interp.grid().len(),
            "simplices": interp.simplex_count(),
            "regions": interp.region_count(),
            "region_bound": { "value": interp.region_bound().to_string(), "formula": "n! * ceil(ext(X) / eta + 2)^n" },
            "written": path,
        }),
        pass: true,
    })
}

pub fn compile(ctx: &Context) -> Result<Outcome, CliError> {
    let interp = ctx.load_interpolant()?;
    let net = compile_tll(&interp)?;
    let path = ctx.write(&ctx.cfg.artifacts.network, &net.to_json())?;
    let (arch, pass) = match arch_descriptor(&net, &interp.region_bound()) {
        Ok(a) => (to_value(&a), true),
        Err(e @ TllError::BoundViolated { .. }) => (json!({ "error": e.to_string() }), false),
        Err(e) => return Err(e.into()),
    };
    Ok(Outcome {
        results: json!({ "architecture": arch, "provenance": net.provenance(), "written": path }),
        pass,
    })
}

fn rejected(metric: &str, value: f64, bound: f64, detail: String) -> AuditReport {
    AuditReport {
        metric: metric.into(),
        value,
        bound,
        pass: false,
        seed: None,
        probes: 0,
        detail: Some(detail),
    }
}

pub fn verify(ctx: &Context, which: &[String]) -> Result<Outcome, CliError> {
    let interp = ctx.load_interpolant()?;
    let domain = interp.grid().domain().clone();
    let probes = ctx.probes(&domain);
    let tol = &ctx.cfg.tolerances;
    let mut audits = serde_json::Map::new();
    let mut pass = true;
    for w in which {
        let report = match w.as_str() {
            "approx" => {
                let controller = ctx.controller(interp.input_dim())?;
                let bound = match tol.approximation {
                    Some(b) => b.0,
                    None => ctx.sizing()?.mu_max.ok_or_else(|| {
                        CliError::Config("mu_max is unbounded; set tolerances.approximation".into())
                    })?,
                };
                let r = interp.approximation_audit(|x| controller.eval(x), &probes, bound, Some(ctx.seed))?;
                controller.ensure_ok()?;
                r
            }
            "lipschitz" => match interp.lipschitz_audit() {
                Ok(r) => r,
                Err(e @ CpwaError::BudgetExceeded { value, bound, .. }) => {
                    rejected("lipschitz", value, bound, e.to_string())
                }
                Err(e) => return Err(e.into()),
            },
            "continuity" => match interp.continuity_audit(tol.continuity_samples_per_face, tol.continuity.0, ctx.seed) {
                Ok(r) => r,
                Err(e @ CpwaError::DiscontinuityDetected { jump, tol, .. }) => {
                    rejected("continuity", jump, tol, e.to_string())
                }
                Err(e) => return Err(e.into()),
            },
            "tll-equiv" => {
                let net = ctx.load_network(&ctx.cfg.artifacts.network)?;
                equivalence_audit(&net, &interp, &probes, tol.equivalence.0, Some(ctx.seed))?
            }
            "regions" => {
                let counts = interp.region_count();
                let bound = interp.region_bound();
                let worst = counts.iter().copied().max().unwrap_or(0);
                AuditReport {
                    metric: "regions".into(),
                    value: worst as f64,
                    bound: bound.to_string().parse().unwrap_or(f64::INFINITY),
                    pass: BigUint::from(worst) <= bound,
                    seed: None,
                    probes: interp.simplex_count(),
                    detail: Some(format!("distinct pieces per output {counts:?}, bound {bound}")),
                }
            }
            other => return Err(CliError::Config(format!("unknown verify target {other:?}"))),
        };
        pass &= report.pass;
        audits.insert(w.clone(), to_value(&report));
    }
    Ok(Outcome {
        results: json!({ "audits": audits, "provenance": { "eta": interp.grid().eta(), "k_cont": interp.k_cont() } }),
        pass,
    })
}

fn field_surrogate(model: &ControlSystemModel, net: TllNetwork) -> Result<ControlSystemModel, CliError> {
    if net.input_dim() != model.n + model.m || net.output_dim() != model.n {
        return Err(CliError::Config(format!(
            "surrogate network maps R^{} -> R^{}, model needs R^{} -> R^{}",
            net.input_dim(),
            net.output_dim(),
            model.n + model.m,
            model.n
        )));
    }
    let name = format!("{}_tll", model.name);
    Ok(model.with_field(
        name,
        std::sync::Arc::new(move |x: &[f64], u: &[f64]| {
            let mut z = x.to_vec();
            z.extend_from_slice(u);
            net.eval(&z)
        }),
    ))
}

pub fn audit(ctx: &Context, which: &[String]) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let budget = ctx.cfg.budget();
    let step = ctx.cfg.rk_step();
    let controller = ctx.controller(model.n)?;
    let probes = ctx.probes(&model.x);
    let mut audits = serde_json::Map::new();
    let mut pass = true;
    for w in which {
        let (value, ok) = match w.as_str() {
            "invariance" => {
                let r = check_delta_tau_invariance(
                    &model,
                    |x| controller.eval(x),
                    budget.delta,
                    budget.tau,
                    step,
                    ctx.cfg.integrator.invariance_density,
                )?;
                (to_value(&r), r.pass)
            }
            "gronwall" => {
                let net = ctx.load_network(&ctx.cfg.artifacts.network)?;
                let r = deviation_audit(
                    &model,
                    |x| controller.eval(x),
                    |x| net.eval(x),
                    budget.tau,
                    step,
                    &probes,
                    0.0,
                    3.0 * budget.k_cont,
                    Some(budget.delta),
                )?;
                (
                    json!({ "report": r, "formula": "min(delta, K_u mu tau exp((K_x + 3 K_u K_cont) tau))" }),
                    r.pass,
                )
            }
            "sysid" => {
                let net = ctx.load_network(&ctx.cfg.artifacts.sysid_network)?;
                let xu = model.state_control_box();
                let lattice = probe_set(&xu, ctx.cfg.probes.count, ctx.seed);
                let n = model.n;
                let mu = lattice
                    .iter()
                    .map(|z| sup_distance(&model.eval(&z[..n], &z[n..]), &net.eval(z)))
                    .fold(0.0, f64::max);
                let surrogate = field_surrogate(&model, net)?;
                let r = sysid_deviation_audit(
                    &model,
                    &surrogate,
                    |x| controller.eval(x),
                    budget.tau,
                    step,
                    &probes,
                    mu,
                    budget.k_cont,
                )?;
                (
                    json!({ "report": r, "formula": "K_u mu tau exp((K_x + K_u K_cont) tau)", "mu_oracle": "sup |f - f_nn| on X x U probes and visited pairs" }),
                    r.pass,
                )
            }
            other => return Err(CliError::Config(format!("unknown audit target {other:?}"))),
        };
        controller.ensure_ok()?;
        pass &= ok;
        audits.insert(w.clone(), value);
    }
    Ok(Outcome {
        results: json!({ "model": model.name, "controller": controller.label(), "audits": audits }),
        pass,
    })
}

pub fn ads_check(ctx: &Context) -> Result<Outcome, CliError> {
    let ads = ctx
        .cfg
        .ads
        .as_ref()
        .ok_or_else(|| CliError::Config("ads-check needs an ads section".into()))?;
    let load = |p: &Path| -> Result<FiniteTransitionSystem, CliError> {
        Ok(FiniteTransitionSystem::from_json(&ctx.read(&ctx.input(p))?)?)
    };
    let left = load(&ads.left)?;
    let right = load(&ads.right)?;
    let outcome = check_ads(&left, &right, ads.delta.0);
    Ok(Outcome {
        pass: outcome.is_total(),
        results: json!({
            "delta": ads.delta.0,
            "left_states": left.state_count(),
            "right_states": right.state_count(),
            "outcome": outcome,
        }),
    })
}

pub fn sysid(ctx: &Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let xu = model.state_control_box();
    let settings = ctx.cfg.sysid.clone().unwrap_or_default();
    let eta = match settings.eta {
        Some(e) => e.0,
        None => ctx.sizing()?.eta,
    };
    let k_field = settings.k_field.map_or(model.k_x + model.k_u, |k| k.0);
    let grid = build_eta_grid(&xu, eta)?;
    let n = model.n;
    let omega = sample_controller(|z| model.eval(&z[..n], &z[n..]), &grid, n)?;
    let interp = CpwaInterpolant::build(grid, omega, k_field)?;
    let net = compile_tll(&interp)?;
    let bound = sizing::sysid_size(n, model.m, xu.extent(), eta)?;
    let banks: Vec<usize> = net.outputs().iter().map(|o| o.bank_size()).collect();
    let within = banks.iter().all(|b| BigUint::from(*b) <= bound);
    let probes = ctx.probes(&xu);
    let mu = probes
        .iter()
        .map(|z| sup_distance(&model.eval(&z[..n], &z[n..]), &net.eval(z)))
        .fold(0.0, f64::max);
    ctx.write(&ctx.cfg.artifacts.sysid_interpolant, &interp.to_json())?;
    let path = ctx.write(&ctx.cfg.artifacts.sysid_network, &net.to_json())?;
    Ok(Outcome {
        results: json!({
            "model": model.name,
            "eta": eta,
            "k_field": k_field,
            "bank_sizes": banks,
            "bound": { "value": bound.to_string(), "formula": "(n+m)! * ceil(ext(X x U) / eta + 2)^(n+m)" },
            "mu_measured": { "value": mu, "probes": probes.len(), "oracle": "sup |f - f_nn| on probes" },
            "written": path,
        }),
        pass: within,
    })
}

pub fn export(ctx: &Context, expanded: bool) -> Result<Outcome, CliError> {
    let net = ctx.load_network(&ctx.cfg.artifacts.network)?;
    if !expanded {
        let path = ctx.write(&ctx.cfg.artifacts.network, &net.to_json())?;
        return Ok(Outcome {
            results: json!({ "format": "network", "written": path }),
            pass: true,
        });
    }
    let e = net.expand();
    let domain = match ctx.cfg.state_domain() {
        Ok(x) if x.dim() == net.input_dim() => x,
        _ => BoxDomain::cube(net.input_dim(), -1.0, 1.0)?,
    };
    let probes = ctx.probes(&domain);
    let gap = probes
        .iter()
        .map(|x| sup_distance(&e.eval(x), &net.eval(x)))
        .fold(0.0, f64::max);
    let text = serde_json::to_string(&e).expect("serializable");
    let path = ctx.write(&ctx.cfg.artifacts.expanded, &text)?;
    let tol = ctx.cfg.tolerances.equivalence.0;
    Ok(Outcome {
        results: json!({
            "format": "expanded",
            "hidden_widths": e.widths(),
            "expansion_gap": { "value": gap, "bound": tol, "probes": probes.len(), "oracle": "lattice evaluation on X, or [-1, 1]^n without a state box" },
            "written": path,
        }),
        pass: gap <= tol,
    })
}
