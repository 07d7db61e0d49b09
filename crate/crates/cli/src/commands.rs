//! One function per subcommand. Each writes its tables to `out` and returns
//! the verdicts.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use contraction_bounds::bounds::{
    all_requests, build_envelope, envelope_from_constants, moment_bound, EnvelopeRequest, MomentKind,
};
use contraction_bounds::chains::{simulate, FunctionalSpec};
use contraction_bounds::coefficients::{asymptotics_report, compute_K};
use contraction_bounds::envelopes::{BoundEnvelope, TailBound};
use contraction_bounds::erm::excess_risk_experiment;
use contraction_bounds::montecarlo::{
    check_domination, enumerate_exact_tail, estimate_moment_norm, estimate_tail, GridPolicy, TabulatedEnvelope,
};
use contraction_bounds::norms::NormIndex;
use contraction_bounds::par::Exec;
use contraction_bounds::rng::derive_seed;
use contraction_bounds::sa::{bias_constant_c0, exact_mean_errors, sa_experiment, SaRun};
use contraction_bounds::selftest::{run_all, SelftestConfig};
use contraction_bounds::BoundError;

use crate::config::Config;
use crate::output::{cell, write_csv, Report};

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn expand_forms(forms: &[String]) -> Result<Vec<EnvelopeRequest>> {
    let mut out = Vec::new();
    for f in forms {
        if f == "all" {
            out.extend(all_requests());
        } else {
            out.push(EnvelopeRequest::parse(f)?);
        }
    }
    Ok(out)
}

/// Errors that mean "this envelope does not apply to this model".
fn not_applicable(e: &BoundError) -> bool {
    matches!(
        e,
        BoundError::NotApplicable(_) | BoundError::MissingConstant(_) | BoundError::OrderOutOfRange { .. }
    )
}

pub fn coeffs(cfg: &Config, out: &Path, report: &mut Report) -> Result<()> {
    let c = cfg.section(&cfg.coeffs, "coeffs")?;
    let s = c.schedule.build(cfg)?;
    let t = compute_K(&s, c.n).context("coeffs")?;
    let rows: Vec<Vec<String>> = t
        .rows()
        .into_iter()
        .map(|(k, kk, tau, xi, rho)| vec![k.to_string(), kk.to_string(), cell(tau), cell(xi), cell(rho)])
        .collect();
    write_csv(out, "coeffs.csv", &header(&["k", "K_kn", "tau_k", "xi_k", "rho_k"]), &rows, report)?;
    if c.asymptotics_grid.is_empty() {
        return Ok(());
    }
    let r = asymptotics_report(&s, &c.asymptotics_grid).context("coeffs: asymptotics")?;
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            vec![
                row.n.to_string(),
                row.max_k_noise.to_string(),
                row.max_k_tau_over.to_string(),
                row.max_k_tau_times.to_string(),
                row.k1n.to_string(),
            ]
        })
        .collect();
    write_csv(
        out,
        "asymptotics.csv",
        &header(&["n", "max_K_noise", "max_K_tau_over_k_alpha", "max_K_tau_times_k_alpha", "K_1n"]),
        &rows,
        report,
    )?;
    if r.log_product_checked > 0 {
        report.verdict(
            "log_product",
            r.log_product_violations.is_empty(),
            format!(
                "{} (k, l) pairs, {} violations",
                r.log_product_checked,
                r.log_product_violations.len()
            ),
        );
    }
    Ok(())
}

pub fn bound(cfg: &Config, out: &Path, report: &mut Report) -> Result<()> {
    let b = cfg.section(&cfg.bound, "bound")?;
    let u_grid = match &b.grid {
        GridPolicy::Auto { .. } => bail!("bound: the grid must be `explicit` or `linear`"),
        g => g.resolve(0.0, 0.0).context("bound: grid")?,
    };
    let envs: Vec<(EnvelopeRequest, contraction_bounds::Result<BoundEnvelope>)> = match &b.constants {
        None => {
            let m = cfg.model()?;
            let f = FunctionalSpec::SumOfStates;
            expand_forms(&b.forms)?
                .into_iter()
                .map(|r| (r, build_envelope(&m, &f, b.n, r)))
                .collect()
        }
        Some(mc) => {
            let s = b.schedule.build(cfg)?;
            let t = compute_K(&s, b.n).context("bound")?;
            let model = cfg.model.as_ref().map(|_| cfg.model()).transpose()?;
            let d = b.d.or(model.as_ref().map(|m| m.d())).unwrap_or(1);
            let p = NormIndex::new(b.p.or(model.as_ref().map(|m| m.p().value())).unwrap_or(2.0))?;
            expand_forms(&b.forms)?
                .into_iter()
                .map(|r| {
                    let mut mc = mc.clone();
                    if EnvelopeRequest::needs_q(r.form) && mc.q.is_none() {
                        mc.q = r.q;
                    }
                    (r, envelope_from_constants(&t, &mc, d, p, r, None))
                })
                .collect()
        }
    };
    let mut rows = Vec::new();
    for (req, env) in envs {
        let env = match env {
            Ok(e) => e,
            Err(e) if not_applicable(&e) => {
                report.skip(req.label(), e);
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("bound: {}", req.label())),
        };
        let label = env.label();
        let mut prev = 1.0;
        let mut sane = true;
        for &u in &u_grid {
            let v = env.eval_parts(u);
            sane &= (0.0..=1.0).contains(&v.total) && v.total <= prev;
            prev = v.total;
            rows.push(vec![
                u.to_string(),
                v.x.to_string(),
                v.total.to_string(),
                v.i1.to_string(),
                v.martingale.to_string(),
                label.clone(),
            ]);
        }
        report.verdict(label, sane, "values in [0, 1] and nonincreasing on the grid");
    }
    write_csv(
        out,
        "bound.csv",
        &header(&["u", "x", "bound_total", "bound_I1", "bound_martingale", "form_tag"]),
        &rows,
        report,
    )
}

pub fn verify(cfg: &Config, out: &Path, seed: u64, exec: Exec, report: &mut Report) -> Result<()> {
    let v = cfg.section(&cfg.verify, "verify")?;
    let m = cfg.model()?;
    let f = v.functional.spec();
    let start = Instant::now();
    let tail = if v.exact {
        enumerate_exact_tail(&m, &f, v.n, &v.grid).context("verify: enumeration")?
    } else {
        estimate_tail(&m, &f, v.n, v.reps, &v.grid, seed, exec).context("verify: tail estimation")?
    };
    report.timings.push(("tail_secs".into(), start.elapsed().as_secs_f64()));
    let mut bounds: Vec<Box<dyn TailBound>> = Vec::new();
    for req in expand_forms(&v.forms)? {
        match build_envelope(&m, &f, v.n, req) {
            Ok(e) => bounds.push(Box::new(e)),
            Err(e) if not_applicable(&e) => report.skip(req.label(), e),
            Err(e) => return Err(e).with_context(|| format!("verify: {}", req.label())),
        }
    }
    if let Some(scale) = v.fake_scale {
        bounds.push(Box::new(TabulatedEnvelope::scaled(&tail, scale)));
    }
    let mut cols = header(&["u", "p_hat", "p_lcb", "p_ucb"]);
    let mut values = Vec::new();
    for b in &bounds {
        let rep = check_domination(&tail, b.as_ref()).context("verify: domination")?;
        let detail = format!(
            "{} violations over {} thresholds, min margin {:.3e}",
            rep.violations.len(),
            tail.u_grid.len(),
            rep.min_margin
        );
        report.verdict(rep.label.clone(), rep.pass(), detail);
        cols.push(format!("bound_{}", rep.label));
        values.push(rep.bounds);
    }
    let rows: Vec<Vec<String>> = (0..tail.u_grid.len())
        .map(|i| {
            let mut r = vec![
                tail.u_grid[i].to_string(),
                tail.p_hat[i].to_string(),
                tail.p_lcb[i].to_string(),
                tail.p_ucb[i].to_string(),
            ];
            r.extend(values.iter().map(|b| b[i].to_string()));
            r
        })
        .collect();
    write_csv(out, "verify.csv", &cols, &rows, report)
}

pub fn moments(cfg: &Config, out: &Path, seed: u64, exec: Exec, report: &mut Report) -> Result<()> {
    let c = cfg.section(&cfg.moments, "moments")?;
    let m = cfg.model()?;
    let f = FunctionalSpec::SumOfStates;
    let orders = c
        .mz_orders
        .iter()
        .map(|q| (MomentKind::Mz, *q))
        .chain(c.vbe_orders.iter().map(|q| (MomentKind::Vbe, *q)));
    let mut rows = Vec::new();
    for (kind, q) in orders {
        let name = format!("{}_q{q}", kind.tag());
        let bound = match moment_bound(&m, c.n, kind, q) {
            Ok(b) => b,
            Err(e) if not_applicable(&e) => {
                report.skip(name, e);
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("moments: {name}")),
        };
        let est = estimate_moment_norm(&m, &f, c.n, c.reps, q, seed, exec).with_context(|| format!("moments: {name}"))?;
        report.verdict(
            name,
            est.ucb99 <= bound,
            format!(
                "Monte-Carlo upper bound {:.4} vs bound {:.4}{}",
                est.ucb99,
                bound,
                if est.heuristic { " (heuristic band)" } else { "" }
            ),
        );
        rows.push(vec![
            kind.tag().to_string(),
            q.to_string(),
            bound.to_string(),
            est.estimate.to_string(),
            est.ucb99.to_string(),
            est.heuristic.to_string(),
        ]);
    }
    write_csv(out, "moments.csv", &header(&["kind", "q", "bound", "mc_estimate", "mc_ucb", "heuristic"]), &rows, report)
}

pub fn sa(cfg: &Config, out: &Path, seed: u64, exec: Exec, report: &mut Report) -> Result<()> {
    let c = cfg.section(&cfg.sa, "sa")?;
    let m = cfg.model()?;
    let run = SaRun::new(&m).context("sa")?;
    match bias_constant_c0(&run) {
        Ok(c0) => {
            let e1 = contraction_bounds::sa::initial_error(&run).max(f64::MIN_POSITIVE);
            let worst = exact_mean_errors(&run, c.exact_check_n)
                .context("sa: exact means")?
                .iter()
                .enumerate()
                .map(|(i, e)| (e.1 - c0 / (i + 1) as f64) / e1)
                .fold(f64::NEG_INFINITY, f64::max);
            report.verdict(
                "uniform_bias_below_c0_over_n",
                worst <= 1e-9,
                format!("n <= {}, max excess {worst:.2e} relative to the initial error", c.exact_check_n),
            );
        }
        Err(e) => report.skip("uniform_bias_below_c0_over_n", e),
    }
    let rep = sa_experiment(&run, &c.checkpoints, c.reps, seed, exec).context("sa: experiment")?;
    if let Some([lo, hi]) = c.slope_window {
        for (name, s) in [("slope_uniform", rep.slope_uniform), ("slope_suffix", rep.slope_suffix)] {
            report.verdict(name, (lo..=hi).contains(&s), format!("{s:.4} in [{lo}, {hi}]"));
        }
    }
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.err_final.to_string(),
                r.err_uniform.to_string(),
                r.err_suffix.to_string(),
                cell(r.bias_bound),
                cell(r.c0_over_n),
            ]
        })
        .collect();
    write_csv(
        out,
        "sa.csv",
        &header(&["n", "err_final", "err_uniform", "err_suffix", "bias_bound", "C0_over_n"]),
        &rows,
        report,
    )
}

pub fn erm(cfg: &Config, out: &Path, seed: u64, exec: Exec, report: &mut Report) -> Result<()> {
    let c = cfg.section(&cfg.erm, "erm")?;
    let rep = excess_risk_experiment(&c.problem, &c.n_grid, c.reps, seed, exec).context("erm")?;
    let need = c.min_dominated.unwrap_or((9 * c.reps).div_ceil(10));
    report.verdict(
        "median_excess_decreasing",
        rep.medians_strictly_decrease(),
        format!("{} horizons", rep.rows.len()),
    );
    if rep.rows.len() > 1 {
        report.verdict(
            "fitted_envelope_dominates",
            rep.dominated_reps >= need,
            format!("{}/{} repetitions (need {need}), C_hat {:.4}", rep.dominated_reps, rep.reps, rep.c_hat),
        );
    }
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.excess_median.to_string(),
                r.excess_q10.to_string(),
                r.excess_q90.to_string(),
                r.fitted_envelope.to_string(),
            ]
        })
        .collect();
    write_csv(
        out,
        "erm.csv",
        &header(&["n", "excess_median", "excess_q10", "excess_q90", "fitted_envelope"]),
        &rows,
        report,
    )
}

pub fn simulate_cmd(cfg: &Config, out: &Path, seed: u64, report: &mut Report) -> Result<()> {
    let c = cfg.section(&cfg.simulate, "simulate")?;
    let m = cfg.model()?;
    let t = simulate(&m, c.n, seed).context("simulate")?;
    let mut cols = header(&["step"]);
    cols.extend((1..=t.d).map(|i| format!("x_{i}")));
    let rows: Vec<Vec<String>> = (1..=t.len())
        .map(|k| {
            let mut r = vec![k.to_string()];
            r.extend(t.state(k).iter().map(|x| x.to_string()));
            r
        })
        .collect();
    write_csv(out, "trajectories.csv", &cols, &rows, report)
}

pub fn selftest(seed: u64, exec: Exec, out: &Path, report: &mut Report) -> Result<()> {
    let results = run_all(&SelftestConfig { seed, exec });
    let mut rows = Vec::new();
    for r in &results {
        println!("{}", r.line());
        report.verdict(format!("criterion_{}", r.id), r.pass, r.detail.clone());
        report.timings.push((format!("criterion_{}_secs", r.id), r.elapsed_secs));
        rows.push(vec![r.id.to_string(), r.name.to_string(), r.verdict().to_string(), r.detail.clone()]);
    }
    // Runtimes stay out of the table so that reruns are byte-identical.
    write_csv(out, "selftest.csv", &header(&["id", "name", "verdict", "detail"]), &rows, report)
}

/// Seed of one subcommand, derived from the master seed.
pub fn sub_seed(master: u64, sub: &str) -> u64 {
    derive_seed(master, sub)
}
