//! Subcommand implementations. Each command builds everything it needs from
//! the configuration first (failures there are configuration errors), then
//! runs and returns its artifacts in memory.

use std::sync::Arc;

use serde::Serialize;
use tamed_em_core::controls::{check_superadditivity, dyadic_partition, partition_cell_ratio};
use tamed_em_core::diagnostics::{
    estimate_varpi, khasminskii_check, solve_backward_pde, solve_with_default_lambda, varpi_bound_from_norms, KhasminskiiConfig,
    KhasminskiiReport, VarpiBound, VarpiBoundMode, VarpiConfig, VarpiEstimate, ZvonkinSolution, MIN_KHASMINSKII_PATHS,
};
use tamed_em_core::fields::condition_a_check;
use tamed_em_core::grid::verify_kernel_bounds;
use tamed_em_core::rates::{
    fit_rate, mlmc_estimate, strong_error, DriftedBrownian, GeometricBrownian, LinearOde, MlmcConfig, RateFit,
};
use tamed_em_core::scheme::LevelScheme;
use tamed_em_core::taming::{admissible_chi, verify_condition_b, AdmissibleParams, ConditionBCertificate};
use tamed_em_core::transport::{
    grid_index, linear_transport_oracle, solve_transport, weighted_transport_error, TransportErrorTable, TransportProblem,
    TransportRun,
};
use tamed_em_core::{
    BrownianPath, ControlFn, DiffusionField, DriftField, DriftModel, DriftSpec, RateConfig, Reference, SchemeConfig, TamedDrift,
    Workers,
};

use crate::config::{
    BoundSpec, ExperimentConfig, Payoff, Record, ReferenceSpec, SchemeSection, TransportReference, ValidateSection,
};
use crate::output::{csv_bytes, fmt_f64, json_bytes, Artifacts};
use crate::CliError;

fn cfg<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

fn num<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Numerical(format!("{context}: {e}"))
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

/// Fields and scheme built from `[scheme]`.
struct Built {
    base: DriftField,
    sigma: DiffusionField,
    scheme: SchemeConfig,
}

fn build(s: &SchemeSection) -> Result<Built, CliError> {
    let base = s.drift.build().map_err(cfg("scheme.drift"))?;
    let sigma = s.diffusion.build().map_err(cfg("scheme.diffusion"))?;
    let drift = match s.taming {
        Some(strategy) => DriftModel::Tamed {
            base: base.clone(),
            strategy,
            options: s.tame_options(),
        },
        None => DriftModel::Plain(base.clone()),
    };
    let mut scheme = SchemeConfig::new(s.n, s.x0.clone(), drift, sigma.clone());
    scheme.quadrature_nodes = s.quadrature_nodes;
    scheme.validate().map_err(cfg("scheme"))?;
    // Surfaces taming parameter errors before any run.
    scheme.drift.at_level(s.n).map_err(cfg("scheme.taming"))?;
    Ok(Built { base, sigma, scheme })
}

fn scheme_section(c: &ExperimentConfig) -> Result<(&SchemeSection, Built), CliError> {
    let s = section(&c.scheme, "scheme")?;
    Ok((s, build(s)?))
}

fn check_levels(levels: &[usize], name: &str) -> Result<(), CliError> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!(
            "{name} must be positive and strictly increasing, got {levels:?}"
        )));
    }
    Ok(())
}

fn x_headers(prefix: &[&str], d: usize, suffix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    if d == 1 {
        h.push("x".into());
    } else {
        h.extend((1..=d).map(|i| format!("x{i}")));
    }
    h.extend(suffix.iter().map(|s| s.to_string()));
    h
}

pub fn simulate(c: &ExperimentConfig, workers: Workers) -> Result<Artifacts, CliError> {
    let (s, built) = scheme_section(c)?;
    let sim = section(&c.simulate, "simulate")?;
    if sim.paths == 0 {
        return Err(CliError::Config("simulate.paths must be positive".into()));
    }
    let d = built.scheme.dim();
    let level: LevelScheme = built.scheme.prepare(s.n).map_err(cfg("scheme"))?;
    let seed = c.master_seed;
    let rows = workers
        .map(sim.paths, |i| {
            let w = BrownianPath::generate(seed, i as u64, d, s.n);
            let path = level.simulate(&w)?;
            let mut out = Vec::new();
            match sim.record {
                Record::Terminal => {
                    let mut row = vec![i.to_string()];
                    row.extend(path.terminal().iter().map(|v| f(*v)));
                    out.push(row);
                }
                Record::Full => {
                    for j in 0..=s.n {
                        let mut row = vec![i.to_string(), j.to_string(), f(j as f64 / s.n as f64)];
                        row.extend(path.at(j).iter().map(|v| f(*v)));
                        out.push(row);
                    }
                }
            }
            Ok((out, path.terminal().to_vec()))
        })
        .map_err(num("simulate"))?;

    let headers = match sim.record {
        Record::Terminal => x_headers(&["path"], d, &[]),
        Record::Full => x_headers(&["path", "j", "t"], d, &[]),
    };
    let mut mean = vec![0.0; d];
    for (_, terminal) in &rows {
        for (m, v) in mean.iter_mut().zip(terminal) {
            *m += v / sim.paths as f64;
        }
    }
    let body: Vec<Vec<String>> = rows.into_iter().flat_map(|(r, _)| r).collect();

    #[derive(Serialize)]
    struct Summary {
        n: usize,
        paths: usize,
        terminal_mean: Vec<f64>,
    }
    let mut a = Artifacts::default();
    a.push("paths.csv", csv_bytes(&headers, &body)?);
    a.push(
        "simulate.json",
        json_bytes(&Summary {
            n: s.n,
            paths: sim.paths,
            terminal_mean: mean,
        })?,
    );
    Ok(a)
}

pub fn rate(c: &ExperimentConfig, workers: Workers) -> Result<Artifacts, CliError> {
    let (s, built) = scheme_section(c)?;
    let r = section(&c.rate, "rate")?;
    check_levels(&r.levels, "rate.levels")?;
    let d = built.scheme.dim();
    let reference = match &r.reference {
        ReferenceSpec::SelfConvergence { n_ref } => Reference::SelfConvergence { n_ref: *n_ref },
        ReferenceSpec::ExactGbm { mu, sigma } => Reference::Exact(Arc::new(GeometricBrownian { mu: *mu, sigma: *sigma })),
        ReferenceSpec::ExactLinearOde { a } => Reference::Exact(Arc::new(LinearOde { a: *a, dim: d })),
        ReferenceSpec::ExactDriftedBrownian { c } => Reference::Exact(Arc::new(DriftedBrownian { c: c.clone() })),
    };
    if let Reference::Exact(sol) = &reference {
        if sol.dim() != d {
            return Err(CliError::Config(format!(
                "rate.reference has dimension {}, scheme has {d}",
                sol.dim()
            )));
        }
    }
    if let ReferenceSpec::SelfConvergence { n_ref } = r.reference {
        let max = *r.levels.last().expect("checked nonempty");
        if n_ref <= max || n_ref % max != 0 {
            return Err(CliError::Config(format!(
                "rate.reference.n_ref = {n_ref} must be a multiple of the finest level {max}"
            )));
        }
    }
    let rc = RateConfig {
        levels: r.levels.clone(),
        reference,
        paths: r.paths,
        p_bar: r.p_bar,
        master_seed: c.master_seed,
        workers,
        batches: r.batches,
    };
    let mut report = strong_error(&built.scheme, &rc).map_err(num("rate"))?;
    if let Some(strategy) = s.taming {
        let params = AdmissibleParams {
            kind: strategy.kind(),
            p: built.base.p(),
            q: built.base.q(),
            d,
            alpha: s.alpha,
            p0: None,
            q0: None,
        };
        match admissible_chi(&params) {
            Ok(adm) if adm.contains(strategy.chi()) => report.predicted = Some(adm.predicted_exponent(strategy.chi())),
            Ok(adm) => report.notes.push(format!(
                "chi = {} is outside the admissible range (0, {}]",
                strategy.chi(),
                adm.chi_upper
            )),
            Err(e) => report.notes.push(format!("no predicted rate: {e}")),
        }
    }
    let body: Vec<Vec<String>> = report
        .levels
        .iter()
        .map(|l| vec![l.n.to_string(), f(l.error), f(l.stderr)])
        .collect();
    let mut a = Artifacts::default();
    a.push("rate.csv", csv_bytes(&["n", "error", "stderr"], &body)?);
    a.push("rate.json", json_bytes(&report)?);
    Ok(a)
}

pub fn mlmc(c: &ExperimentConfig, workers: Workers) -> Result<Artifacts, CliError> {
    let (_, built) = scheme_section(c)?;
    let m = section(&c.mlmc, "mlmc")?;
    let mc = MlmcConfig {
        n0: m.n0,
        paths_per_level: m.paths_per_level.clone(),
        master_seed: c.master_seed,
        workers,
    };
    let payoff = m.payoff.clone();
    let g = move |x: &[f64]| match &payoff {
        Payoff::Identity => x[0],
        Payoff::Square => x.iter().map(|v| v * v).sum(),
        Payoff::Call { strike } => (x[0] - strike).max(0.0),
    };
    let report = mlmc_estimate(&built.scheme, &mc, g).map_err(num("mlmc"))?;
    let body: Vec<Vec<String>> = report
        .levels
        .iter()
        .map(|l| {
            vec![
                l.level.to_string(),
                l.n.to_string(),
                l.paths.to_string(),
                f(l.mean),
                f(l.variance),
                f(l.cost),
            ]
        })
        .collect();
    let mut a = Artifacts::default();
    a.push(
        "mlmc.csv",
        csv_bytes(&["level", "n", "paths", "mean", "variance", "cost"], &body)?,
    );
    a.push("mlmc.json", json_bytes(&report)?);
    Ok(a)
}

pub fn transport(c: &ExperimentConfig, workers: Workers) -> Result<Artifacts, CliError> {
    let (s, built) = scheme_section(c)?;
    let t = section(&c.transport, "transport")?;
    check_levels(&t.levels, "transport.levels")?;
    let problem = TransportProblem {
        drift: built.scheme.drift.clone(),
        rho: t.rho.clone(),
        taus: t.taus.clone(),
        points: t.points.clone(),
        quadrature_nodes: s.quadrature_nodes,
    };
    let run = TransportRun {
        paths: t.paths,
        master_seed: c.master_seed,
        brownian_steps: t.brownian_steps,
        workers,
    };
    let mut all_levels = t.levels.clone();
    if let TransportReference::SelfConvergence { n_ref } = t.reference {
        all_levels.push(n_ref);
    }
    for &n in &all_levels {
        if t.brownian_steps % n != 0 {
            return Err(CliError::Config(format!(
                "level {n} does not divide transport.brownian_steps = {}",
                t.brownian_steps
            )));
        }
        for &tau in &t.taus {
            grid_index(tau, n).map_err(cfg("transport.taus"))?;
        }
    }
    let oracle = match t.reference {
        TransportReference::Linear { kappa } => {
            let linear = matches!(s.drift, DriftSpec::Linear { a, .. } if a == -kappa) && s.taming.is_none();
            if !linear {
                return Err(CliError::Config(format!(
                    "the linear reference needs an untamed linear drift with a = {}",
                    -kappa
                )));
            }
            linear_transport_oracle(kappa, &problem, &run).map_err(num("transport oracle"))?
        }
        TransportReference::SelfConvergence { n_ref } => {
            solve_transport(&problem, n_ref, &run).map_err(num("transport reference"))?
        }
    };
    let mut tables: Vec<TransportErrorTable> = Vec::new();
    for &n in &t.levels {
        let samples = solve_transport(&problem, n, &run).map_err(num("transport"))?;
        let table = weighted_transport_error(&samples, &oracle, t.r_bar, t.l, t.p, t.batches).map_err(num("transport error"))?;
        tables.push(table);
    }
    let d = built.scheme.dim();
    let mut body = Vec::new();
    for table in &tables {
        for row in &table.rows {
            let mut r = vec![table.n.to_string(), f(row.tau)];
            r.extend(row.x.iter().map(|v| f(*v)));
            r.push(f(row.weighted_error));
            r.push(f(row.stderr));
            body.push(r);
        }
    }
    let ns: Vec<usize> = tables.iter().map(|t| t.n).collect();
    let maxes: Vec<f64> = tables.iter().map(|t| t.max).collect();
    let fit: Option<RateFit> = if maxes.iter().filter(|m| **m > 0.0).count() >= 3 {
        fit_rate(&ns, &maxes, None).ok()
    } else {
        None
    };

    #[derive(Serialize)]
    struct Report<'a> {
        tables: &'a [TransportErrorTable],
        fit_of_max: Option<RateFit>,
    }
    let mut a = Artifacts::default();
    a.push(
        "transport.csv",
        csv_bytes(&x_headers(&["n", "tau"], d, &["weighted_error", "stderr"]), &body)?,
    );
    a.push(
        "transport.json",
        json_bytes(&Report {
            tables: &tables,
            fit_of_max: fit,
        })?,
    );
    Ok(a)
}

pub fn zvonkin(c: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let (s, built) = scheme_section(c)?;
    let z = section(&c.zvonkin, "zvonkin")?;
    let bn = built.scheme.drift.at_level(s.n).map_err(cfg("scheme.taming"))?;
    let solutions: Vec<ZvonkinSolution> = if z.lambdas.is_empty() {
        vec![solve_with_default_lambda(bn.as_ref(), &built.sigma, &z.grid).map_err(num("zvonkin"))?]
    } else {
        z.lambdas
            .iter()
            .map(|&l| solve_backward_pde(bn.as_ref(), &built.sigma, l, &z.grid).map_err(num("zvonkin")))
            .collect::<Result<_, _>>()?
    };
    let d = built.scheme.dim();
    let mut summary = Vec::new();
    let mut trace = Vec::new();
    for sol in &solutions {
        summary.push(vec![f(sol.lambda), f(sol.sup_grad_u), f(sol.max_abs())]);
        for (t, u) in sol.center_trace() {
            let mut row = vec![f(sol.lambda), f(t)];
            row.extend(u.iter().map(|v| f(*v)));
            trace.push(row);
        }
    }
    let mut trace_headers = vec!["lambda".to_string(), "t".to_string()];
    trace_headers.extend((1..=d).map(|i| format!("u{i}")));

    #[derive(Serialize)]
    struct Entry {
        lambda: f64,
        sup_grad_u: f64,
        max_abs_u: f64,
    }
    #[derive(Serialize)]
    struct Report {
        n: usize,
        grid: tamed_em_core::diagnostics::PdeGrid,
        solutions: Vec<Entry>,
    }
    let report = Report {
        n: s.n,
        grid: z.grid,
        solutions: solutions
            .iter()
            .map(|s| Entry {
                lambda: s.lambda,
                sup_grad_u: s.sup_grad_u,
                max_abs_u: s.max_abs(),
            })
            .collect(),
    };
    let mut a = Artifacts::default();
    a.push("zvonkin.csv", csv_bytes(&["lambda", "sup_grad_u", "max_abs_u"], &summary)?);
    a.push("zvonkin_center.csv", csv_bytes(&trace_headers, &trace)?);
    a.push("zvonkin.json", json_bytes(&report)?);
    Ok(a)
}

pub fn varpi(c: &ExperimentConfig, workers: Workers) -> Result<Artifacts, CliError> {
    let (s, built) = scheme_section(c)?;
    let v = section(&c.varpi, "varpi")?;
    check_levels(&v.levels, "varpi.levels")?;
    let mode = v.bound.as_ref().map(|b| match b {
        BoundSpec::MixedNorm { p1, q1 } => VarpiBoundMode::MixedNorm { p1: *p1, q1: *q1 },
        BoundSpec::Bessel { nu, p, q, nodes } => VarpiBoundMode::Bessel {
            nu: *nu,
            p: *p,
            q: *q,
            nodes: *nodes,
        },
    });
    let vc = VarpiConfig {
        n_ref: v.n_ref,
        paths: v.paths,
        p_bar: v.p_bar,
        master_seed: c.master_seed,
        workers,
        batches: v.batches,
    };
    let norm_grid = s.norm_grid.unwrap_or_default();

    #[derive(Serialize)]
    struct Row {
        n: usize,
        estimate: VarpiEstimate,
        lambda: Option<f64>,
        bound: Option<VarpiBound>,
    }
    let mut rows = Vec::new();
    for &n in &v.levels {
        let bn = built.scheme.drift.at_level(n).map_err(cfg("scheme.taming"))?;
        let z = if v.with_grad_u {
            Some(solve_with_default_lambda(bn.as_ref(), &built.sigma, &v.grid).map_err(num("zvonkin"))?)
        } else {
            None
        };
        let estimate = estimate_varpi(&built.base, bn.as_ref(), z.as_ref(), &built.scheme, &vc).map_err(num("varpi"))?;
        let bound = match &mode {
            Some(m) => Some(varpi_bound_from_norms(&built.base, bn.as_ref(), m, &norm_grid).map_err(num("varpi bound"))?),
            None => None,
        };
        rows.push(Row {
            n,
            estimate,
            lambda: z.map(|z| z.lambda),
            bound,
        });
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                f(r.estimate.value),
                f(r.estimate.stderr),
                r.bound.as_ref().map_or(String::new(), |b| f(b.value)),
            ]
        })
        .collect();
    let mut a = Artifacts::default();
    a.push("varpi.csv", csv_bytes(&["n", "varpi", "stderr", "bound"], &body)?);
    a.push("varpi.json", json_bytes(&rows)?);
    Ok(a)
}

pub fn khasminskii(c: &ExperimentConfig, workers: Workers) -> Result<Artifacts, CliError> {
    let k = section(&c.khasminskii, "khasminskii")?;
    if k.lambdas.is_empty() {
        return Err(CliError::Config("khasminskii.lambdas is empty".into()));
    }
    if k.paths < MIN_KHASMINSKII_PATHS {
        return Err(CliError::Config(format!(
            "khasminskii.paths must be at least {MIN_KHASMINSKII_PATHS}"
        )));
    }
    let w = ControlFn::scaled(ControlFn::elapsed(0.0, 1.0).map_err(cfg("khasminskii"))?, k.w_scale)
        .map_err(cfg("khasminskii.w_scale"))?;
    let beta = k.beta;
    let mut reports: Vec<KhasminskiiReport> = Vec::new();
    for &lambda in &k.lambdas {
        let kc = KhasminskiiConfig {
            lambda,
            gamma: k.gamma,
            paths: k.paths,
            steps: k.steps,
            dim: k.dim,
            master_seed: c.master_seed,
            workers,
            batches: k.batches,
        };
        reports.push(khasminskii_check(|p: &BrownianPath| beta.integrate(p), &w, &kc).map_err(num("khasminskii"))?);
    }
    for r in reports.iter().filter(|r| !r.pass) {
        log::warn!("khasminskii bound fails at lambda = {}", r.lambda);
    }
    let body: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                f(r.lambda),
                f(r.empirical),
                f(r.stderr),
                f(r.bound),
                r.overflow.to_string(),
                r.pass.to_string(),
            ]
        })
        .collect();
    let mut a = Artifacts::default();
    a.push(
        "khasminskii.csv",
        csv_bytes(&["lambda", "empirical", "stderr", "bound", "overflow", "pass"], &body)?,
    );
    a.push("khasminskii.json", json_bytes(&reports)?);
    Ok(a)
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// The deterministic verifier suite. Returns the checks; the caller decides
/// what to do with failures.
pub fn validate(c: &ExperimentConfig) -> Result<(Artifacts, Vec<Check>), CliError> {
    let v = c.validate.clone().unwrap_or_default();
    let mut checks = Vec::new();

    let kernel = verify_kernel_bounds(v.kernel_trials, c.master_seed).map_err(num("kernel bounds"))?;
    checks.push(Check {
        name: "grid kernel bounds".into(),
        pass: kernel.violations.is_empty(),
        detail: format!(
            "{} checks, {} violations, min slack {:e}",
            kernel.checks,
            kernel.violations.len(),
            kernel.min_slack
        ),
    });

    checks.extend(control_checks(&v, c.master_seed)?);

    if let Some(s) = &c.scheme {
        let built = build(s)?;
        match built.sigma.condition_a() {
            Some(_) => {
                let r = condition_a_check(&built.sigma, v.condition_a_samples, c.master_seed, 8.0);
                checks.push(Check {
                    name: "condition A".into(),
                    pass: r.holds(),
                    detail: format!(
                        "eigenvalues in [{}, {}], worst Hölder ratio {}{}",
                        r.min_eig,
                        r.max_eig,
                        r.worst_holder_ratio,
                        r.violations.iter().map(|v| format!("; {v}")).collect::<String>()
                    ),
                });
            }
            None => log::info!("diffusion declares no Condition A constants; check skipped"),
        }
        if let Some(strategy) = s.taming {
            checks.extend(taming_checks(c, s, &built, strategy, &v)?);
        }
    }

    let body: Vec<Vec<String>> = checks
        .iter()
        .map(|ch| vec![ch.name.clone(), ch.pass.to_string(), ch.detail.clone()])
        .collect();
    let mut a = Artifacts::default();
    a.push("validate.csv", csv_bytes(&["check", "pass", "detail"], &body)?);
    a.push("validate.json", json_bytes(&checks)?);
    Ok((a, checks))
}

fn control_checks(v: &ValidateSection, seed: u64) -> Result<Vec<Check>, CliError> {
    let elapsed = ControlFn::elapsed(0.0, 1.0).map_err(num("controls"))?;
    let weight = ControlFn::singular_weight(0.5, 0.1, 1.0).map_err(num("controls"))?;
    let controls = [
        elapsed.clone(),
        ControlFn::lq_density(|r| 1.0 + r * r, 4.0, 0.0, 1.0).map_err(num("controls"))?,
        weight.clone(),
        ControlFn::product(elapsed.clone(), weight.clone(), 0.5).map_err(num("controls"))?,
        ControlFn::sum(elapsed.clone(), weight.clone()).map_err(num("controls"))?,
        ControlFn::sum_with_power(elapsed.clone(), weight, 2.0).map_err(num("controls"))?,
    ];
    let mut checks = Vec::new();
    for (i, w) in controls.iter().enumerate() {
        let r = check_superadditivity(w, v.control_triples, 1e-12, seed.wrapping_add(i as u64));
        let mut worst_cell = 0.0f64;
        for h in 0..=10 {
            let points = dyadic_partition(w, 0.1, 0.9, h).map_err(num("dyadic partition"))?;
            worst_cell = worst_cell.max(partition_cell_ratio(w, &points, h));
        }
        checks.push(Check {
            name: format!("control {:?}", w.kind()),
            pass: r.violations == 0 && worst_cell <= 1.0 + 1e-9,
            detail: format!(
                "{} violations in {} triples, worst cell ratio {worst_cell}",
                r.violations, r.triples
            ),
        });
    }
    Ok(checks)
}

fn taming_checks(
    c: &ExperimentConfig,
    s: &SchemeSection,
    built: &Built,
    strategy: tamed_em_core::TamingStrategy,
    v: &ValidateSection,
) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let d = built.scheme.dim();
    let params = AdmissibleParams {
        kind: strategy.kind(),
        p: built.base.p(),
        q: built.base.q(),
        d,
        alpha: s.alpha,
        p0: None,
        q0: None,
    };
    match admissible_chi(&params) {
        Ok(adm) => checks.push(Check {
            name: "taming admissibility".into(),
            pass: adm.contains(strategy.chi()),
            detail: format!(
                "chi = {} against upper limit {} ({})",
                strategy.chi(),
                adm.chi_upper,
                if adm.upper_inclusive { "closed" } else { "open" }
            ),
        }),
        Err(e) => checks.push(Check {
            name: "taming admissibility".into(),
            pass: false,
            detail: e.to_string(),
        }),
    }
    let levels = if !v.levels.is_empty() {
        v.levels.clone()
    } else if let Some(r) = &c.rate {
        r.levels.clone()
    } else {
        vec![s.n]
    };
    let opts = s.tame_options();
    for n in levels {
        let tamed = TamedDrift::new(built.base.clone(), strategy, n, &opts).map_err(cfg("scheme.taming"))?;
        let cert = ConditionBCertificate::standard(&tamed, &opts.norm_grid).map_err(num("condition B certificate"))?;
        let r = verify_condition_b(&tamed, &cert, v.condition_b_windows, c.master_seed ^ n as u64);
        checks.push(Check {
            name: format!("condition B n={n}"),
            pass: r.holds,
            detail: format!(
                "theta = {}, {} windows, {} violations, worst ratio {}",
                r.theta, r.windows, r.violations, r.worst_ratio
            ),
        });
    }
    Ok(checks)
}
