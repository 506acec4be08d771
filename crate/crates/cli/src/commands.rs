//! One function per subcommand, each turning a validated scenario into a [`Report`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use segmarket::designer::{design_with, DesignOptions};
use segmarket::efficiency::{check_hosios_with_tol, hosios_compatible_split, HOSIOS_TOL};
use segmarket::equilibrium::{solve_equilibrium, EquilibriumOutcome};
use segmarket::market::{Prior, Segmentation};
use segmarket::meeting::MeetingFunction;
use segmarket::oracle::{enumerate_bp, find_u_bar_scaled, lp_value, PartitionMode};
use segmarket::planner::{first_best_benchmark, solve_first_best, PlannerOutcome};

use crate::error::CliError;
use crate::output::{format_float, Report};
use crate::scenario::Validated;

/// Command-line overrides of the scenario's `options`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mesh: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub exhaustive: bool,
    pub max_n: Option<usize>,
}

const DEFAULT_MAX_N: usize = 8;

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("solver outputs serialize")
}

fn f(x: f64) -> String {
    format_float(x)
}

fn segmentation_json(seg: &Segmentation) -> Value {
    json!({ "kind": "explicit", "submarkets": to_value(&seg.submarkets()) })
}

fn meeting_rows(
    mf: &MeetingFunction,
    prior: &Prior,
    seg: &Segmentation,
    k: f64,
    tightness: &[f64],
) -> Result<Vec<Vec<String>>, CliError> {
    let means = seg.posterior_means(prior)?;
    let weights = seg.weights();
    let mut rows = Vec::with_capacity(seg.len());
    for (s, ((&mean, &w), &t)) in means.iter().zip(&weights).zip(tightness).enumerate() {
        let m = mf.m(t)?;
        let buyer = if t > 0.0 { m / t } else { mf.beta() };
        rows.push(vec![s.to_string(), f(mean), f(w), f(t), f(buyer), f(m), f(k * w * m * mean)]);
    }
    Ok(rows)
}

const EQUILIBRIUM_COLUMNS: [&str; 7] =
    ["submarket_index", "posterior_mean", "weight", "tightness", "meet_prob_buyer", "meet_prob_seller", "surplus_contrib"];

fn equilibrium_json(eq: &EquilibriumOutcome) -> Value {
    to_value(eq)
}

pub fn equilibrium(s: &Validated) -> Result<Report, CliError> {
    let eq = solve_equilibrium(&s.prior, &s.segmentation, &s.meeting, s.k, &s.lambda)?;
    let mut json = equilibrium_json(&eq);
    json["posterior_means"] = to_value(&s.segmentation.posterior_means(&s.prior)?);
    json["weights"] = to_value(&s.segmentation.weights());
    let rows = meeting_rows(&s.meeting, &s.prior, &s.segmentation, s.k, eq.tightness.values())?;
    Ok(Report { json, csv_header: EQUILIBRIUM_COLUMNS.to_vec(), csv_rows: rows })
}

fn first_best_json(fb: &PlannerOutcome) -> Value {
    json!({
        "eta": fb.eta,
        "tightness": to_value(&fb.tightness),
        "surplus": fb.total_surplus,
        "active": fb.active,
        "feasibility_residual": fb.feasibility_residual,
    })
}

pub fn first_best(s: &Validated) -> Result<Report, CliError> {
    let fb = solve_first_best(&s.prior, &s.segmentation, &s.meeting, s.k)?;
    let means = s.segmentation.posterior_means(&s.prior)?;
    let weights = s.segmentation.weights();
    let mut rows = Vec::new();
    for ((&mean, &w), &t) in means.iter().zip(&weights).zip(fb.tightness.values()) {
        let meetings = s.k * w * s.meeting.m(t)?;
        let share = if fb.total_surplus > 0.0 { meetings * mean / fb.total_surplus } else { 0.0 };
        rows.push(vec![f(mean), f(w), f(t), f(meetings), f(share)]);
    }
    Ok(Report {
        json: first_best_json(&fb),
        csv_header: vec!["submarket_mean", "weight", "tightness", "meetings", "surplus_share"],
        csv_rows: rows,
    })
}

pub fn hosios(s: &Validated, o: &Overrides) -> Result<Report, CliError> {
    let tol = o.tol.or(s.options.tol).unwrap_or(HOSIOS_TOL);
    let r = check_hosios_with_tol(&s.prior, &s.meeting, s.k, &s.lambda, tol)?;
    let fb = first_best_benchmark(&s.prior, &s.meeting, s.k)?;
    let lambda = s.lambda.values_on(&s.prior)?;
    let mut json = json!({
        "holds": r.holds,
        "eta_ps": r.eta_ps,
        "cutoff": r.cutoff,
        "lambda_at_cutoff": r.lambda_at_cutoff,
        "tol": tol,
        "violations": { "below": r.max_violation_below, "above": r.max_violation_above },
    });
    let table = match s.options.lambda_at_cutoff {
        Some(lc) => {
            let h = hosios_compatible_split(&s.prior, &s.meeting, s.k, lc)?;
            json["lambda_table"] = json!({ "values": h.split.values_on(&s.prior)?, "clamped": h.clamped });
            Some(h.split.values_on(&s.prior)?)
        }
        None => None,
    };
    let rows = s
        .prior
        .grid()
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            vec![
                j.to_string(),
                f(theta),
                f(s.prior.weights()[j]),
                f(lambda[j]),
                table.as_ref().map_or(String::new(), |t| f(t[j])),
                f(fb.tightness.values()[j]),
            ]
        })
        .collect();
    Ok(Report {
        json,
        csv_header: vec!["type_index", "theta", "weight", "lambda", "lambda_hosios", "first_best_tightness"],
        csv_rows: rows,
    })
}

fn require_constant_ell(s: &Validated, what: &str) -> Result<f64, CliError> {
    s.constant_ell().ok_or_else(|| {
        CliError::from(segmarket::Error::Unsupported(format!("{what} needs a constant buyer share")))
    })
}

fn random_segmentation(rng: &mut ChaCha8Rng, prior: &Prior) -> Result<Segmentation, CliError> {
    let s = rng.gen_range(1..=prior.len().clamp(1, 6));
    let kernel: Vec<Vec<f64>> = (0..prior.len())
        .map(|_| {
            let raw: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect();
    Ok(Segmentation::from_kernel(prior, &kernel)?)
}

pub fn design(s: &Validated, o: &Overrides) -> Result<Report, CliError> {
    let ell = require_constant_ell(s, "design")?;
    let mesh = o.mesh.or(s.options.mesh);
    let d = design_with(&s.prior, &s.meeting, s.k, ell, &DesignOptions { mesh, ..DesignOptions::default() })?;
    let mut json = json!({
        "curvature": to_value(&d.curvature),
        "structure": to_value(&d.structure),
        "segmentation": d.segmentation.as_ref().map_or(Value::Null, segmentation_json),
        "u_bar": d.u_bar,
        "surplus": d.surplus,
    });
    if let Some(c) = &d.cutoff {
        json["theta_c"] = json!(c.theta_c);
        json["cutoff"] = to_value(c);
    }
    if let Some(c) = &d.certificate {
        json["certificate"] = to_value(c);
    }
    if let Some(eq) = &d.equilibrium {
        json["equilibrium"] = equilibrium_json(eq);
    }
    if let Some(a) = &d.alternative {
        json["alternative"] = to_value(a);
    }
    if let Some(lp) = &d.lp {
        json["lp"] = json!({ "support": lp.support, "masses": lp.support_masses, "value": lp.value });
    }
    if let Some(mesh) = mesh {
        let lp_u = find_u_bar_scaled(&s.meeting, &s.prior, s.k, ell, mesh)?;
        json["oracle_gap"] = json!((lp_u - d.u_bar).abs());
    }
    let probes = s.options.probes.unwrap_or(0);
    if probes > 0 {
        let seed = o.seed.or(s.options.seed).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..probes {
            let seg = random_segmentation(&mut rng, &s.prior)?;
            worst = worst.max(solve_equilibrium(&s.prior, &seg, &s.meeting, s.k, &s.lambda)?.u_star);
        }
        json["probes"] = json!({
            "count": probes,
            "seed": seed,
            "max_u_star": worst,
            "bound_holds": worst <= d.u_bar + 1e-8,
        });
    }
    let (header, rows) = match (&d.segmentation, &d.equilibrium, &d.lp) {
        (Some(seg), Some(eq), _) => {
            (EQUILIBRIUM_COLUMNS.to_vec(), meeting_rows(&s.meeting, &s.prior, seg, s.k, eq.tightness.values())?)
        }
        (_, _, Some(lp)) => (
            vec!["support_index", "point", "mass"],
            lp.support.iter().zip(&lp.support_masses).enumerate().map(|(i, (x, m))| vec![i.to_string(), f(*x), f(*m)]).collect(),
        ),
        _ => (EQUILIBRIUM_COLUMNS.to_vec(), Vec::new()),
    };
    Ok(Report { json, csv_header: header, csv_rows: rows })
}

pub fn oracle(s: &Validated, o: &Overrides) -> Result<Report, CliError> {
    let n = s.prior.len();
    let max_n = o.max_n.or(s.options.max_n).unwrap_or(DEFAULT_MAX_N);
    let exhaustive = o.exhaustive || s.options.exhaustive.unwrap_or(false);
    let mut json = json!({});
    let mut rows = Vec::new();
    match s.constant_ell() {
        Some(ell) => {
            let mesh = o.mesh.or(s.options.mesh).unwrap_or(4 * n);
            let u = match s.options.u {
                Some(u) => u,
                None => {
                    let u = find_u_bar_scaled(&s.meeting, &s.prior, s.k, ell, mesh)?;
                    json["u_bar"] = json!(u);
                    u
                }
            };
            let lp = lp_value(&s.meeting, &s.prior, ell, u, mesh)?;
            json["u"] = json!(u);
            json["mesh"] = json!(mesh);
            json["value"] = json!(lp.value);
            json["support"] = to_value(&lp.support);
            json["masses"] = to_value(&lp.support_masses);
            json["duality_gap"] = json!(lp.duality_gap);
            for (i, (x, m)) in lp.support.iter().zip(&lp.support_masses).enumerate() {
                rows.push(vec!["lp_support".into(), i.to_string(), f(*x), f(*m)]);
            }
        }
        None if n > max_n => {
            return Err(CliError::from(segmarket::Error::Unsupported(format!(
                "non-constant buyer share: only enumeration applies, but n = {n} exceeds max-n = {max_n}"
            ))));
        }
        None => {}
    }
    if n <= max_n {
        let mode = if exhaustive { PartitionMode::Exhaustive } else { PartitionMode::Interval };
        let bp = enumerate_bp(&s.prior, &s.meeting, s.k, &s.lambda, mode)?;
        let means = bp.segmentation.posterior_means(&s.prior)?;
        for (i, (m, w)) in means.iter().zip(bp.segmentation.weights()).enumerate() {
            rows.push(vec!["bp_submarket".into(), i.to_string(), f(*m), f(w)]);
        }
        json["enumeration"] = json!({
            "mode": to_value(&mode),
            "labels": bp.labels,
            "u_star": bp.u_star,
            "surplus": bp.surplus,
            "candidates": bp.candidates,
            "segmentation": segmentation_json(&bp.segmentation),
        });
    }
    Ok(Report { json, csv_header: vec!["kind", "index", "x", "mass"], csv_rows: rows })
}

pub fn compare(s: &Validated) -> Result<Report, CliError> {
    let fb = solve_first_best(&s.prior, &s.segmentation, &s.meeting, s.k)?;
    let eq = solve_equilibrium(&s.prior, &s.segmentation, &s.meeting, s.k, &s.lambda)?;
    let delta: Vec<f64> = eq.tightness.values().iter().zip(fb.tightness.values()).map(|(a, b)| a - b).collect();
    let json = json!({
        "gap": eq.total_surplus / fb.total_surplus,
        "first_best": first_best_json(&fb),
        "equilibrium": equilibrium_json(&eq),
        "tightness_delta": delta,
        "segmentation": segmentation_json(&s.segmentation),
    });
    let means = s.segmentation.posterior_means(&s.prior)?;
    let rows = means
        .iter()
        .zip(s.segmentation.weights())
        .enumerate()
        .map(|(i, (m, w))| {
            vec![i.to_string(), f(*m), f(w), f(eq.tightness.values()[i]), f(fb.tightness.values()[i]), f(delta[i])]
        })
        .collect();
    Ok(Report {
        json,
        csv_header: vec!["submarket_index", "posterior_mean", "weight", "tightness_equilibrium", "tightness_first_best", "delta"],
        csv_rows: rows,
    })
}
