mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segmarket::designer::{design, DesignStructure};
use segmarket::efficiency::{check_hosios, hosios_compatible_split};
use segmarket::equilibrium::{reservation_map, solve_equilibrium};
use segmarket::market::*;
use segmarket::meeting::MeetingFunction;
use segmarket::oracle::{enumerate_bp, find_u_bar, PartitionMode};
use segmarket::planner::{first_best_benchmark, solve_first_best};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn ell(x: f64) -> SurplusSplit {
    SurplusSplit::constant(x).unwrap()
}

fn pooled_closed_form() -> Check {
    let p = Prior::uniform(2).map_err(|e| e.to_string())?;
    let seg = pooled_segmentation(&p);
    let (eq, dt) = timed(|| solve_equilibrium(&p, &seg, &ces1(), 1.0, &ell(1.0)));
    let eq = eq.map_err(|e| e.to_string())?;
    let du = (eq.u_star - 0.25).abs();
    let dt_tau = (eq.tightness.values()[0] - 1.0).abs();
    ensure(du <= 1e-9 && dt_tau <= 1e-9, format!("u* err {du:e}, tau err {dt_tau:e}"))?;
    ensure(dt < Duration::from_millis(10), format!("runtime {dt:?}"))?;
    Ok(format!("u* err {du:.1e}, tau err {dt_tau:.1e}, {dt:?}"))
}

fn boundary_activity() -> Check {
    let p = Prior::uniform(4).map_err(|e| e.to_string())?;
    let b = binary_segmentation(&p, 2, None).map_err(|e| e.to_string())?;
    ensure((b.low_mean - 0.25).abs() < 1e-15 && (b.high_mean - 0.75).abs() < 1e-15, "means are not (0.25, 0.75)")?;
    let eq = solve_equilibrium(&p, &b.segmentation, &ces1(), 1.0, &ell(1.0)).map_err(|e| e.to_string())?;
    let tau = eq.tightness.values();
    let err = (eq.u_star - 0.25).abs().max(tau[0].abs()).max((tau[1] - 2.0).abs());
    ensure(err <= 1e-9, format!("max error {err:e}"))?;
    ensure(eq.fixed_point_residual.abs() <= 1e-9, format!("fixed-point residual {:e}", eq.fixed_point_residual))?;
    Ok(format!("max error {err:.1e}, fixed-point residual {:.1e}", eq.fixed_point_residual))
}

fn first_best_closed_forms() -> Check {
    let limit = Duration::from_millis(100);
    let p2 = Prior::uniform(2).map_err(|e| e.to_string())?;
    let (pooled, t1) = timed(|| solve_first_best(&p2, &pooled_segmentation(&p2), &ces1(), 1.0));
    let e1 = (pooled.map_err(|e| e.to_string())?.eta - 0.125).abs();
    ensure(e1 <= 1e-9 && t1 < limit, format!("pooled eta err {e1:e} in {t1:?}"))?;

    let p4 = Prior::uniform(4).map_err(|e| e.to_string())?;
    let seg = binary_segmentation(&p4, 2, None).map_err(|e| e.to_string())?.segmentation;
    let (two, t2) = timed(|| solve_first_best(&p4, &seg, &ces1(), 1.0));
    let expect = ((0.25f64.sqrt() + 0.75f64.sqrt()) / 4.0).powi(2);
    let e2 = (two.map_err(|e| e.to_string())?.eta - expect).abs();
    ensure(e2 <= 1e-8 && t2 < limit, format!("two-point eta err {e2:e} in {t2:?}"))?;

    let p401 = Prior::uniform(401).map_err(|e| e.to_string())?;
    let (perfect, t3) = timed(|| first_best_benchmark(&p401, &ces1(), 1.0));
    let e3 = (perfect.map_err(|e| e.to_string())?.eta - continuum_eta()).abs();
    ensure(e3 <= 2e-3 && t3 < limit, format!("n=401 eta err {e3:e} in {t3:?}"))?;
    Ok(format!("errors {e1:.1e} / {e2:.1e} / {e3:.1e}; runtimes {t1:?} / {t2:?} / {t3:?}"))
}

fn affine_design() -> Check {
    let p = Prior::uniform(401).map_err(|e| e.to_string())?;
    let d = design(&p, &ces1(), 1.0, 1.0).map_err(|e| e.to_string())?;
    let err = (d.u_bar - (2.0 - 3f64.sqrt())).abs();
    ensure(err <= 2e-3, format!("u_bar err {err:e}"))?;
    let alt = d.alternative.as_ref().ok_or("no binary alternative for the affine class")?;
    let tie = (alt.surplus - d.surplus).abs();
    ensure(tie <= 1e-6, format!("binary/perfect surplus gap {tie:e}"))?;
    let cert = d.certificate.as_ref().ok_or("no certificate")?;
    ensure(cert.passes(), format!("certificate checks {:?}", cert.checks))?;
    Ok(format!("u_bar err {err:.1e}, tie {tie:.1e}, certificate (a)(b)(c) pass"))
}

fn curvature_dispatch() -> Check {
    let p = Prior::uniform(51).map_err(|e| e.to_string())?;
    let concave = MeetingFunction::ces(1.0, 1.0, 0.5).map_err(|e| e.to_string())?;
    let dc = design(&p, &concave, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(dc.structure == DesignStructure::Perfect, format!("CES rho=0.5 gave {:?}", dc.structure))?;
    let du = design(&p, &urn(), 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(du.structure == DesignStructure::Binary, format!("urn-ball gave {:?}", du.structure))?;
    let eq = du.equilibrium.as_ref().ok_or("no equilibrium")?;
    let tau = eq.tightness.values();
    ensure(tau.len() == 2 && tau[0] == 0.0 && tau[1] > 0.0, format!("urn-ball tightness {tau:?}"))?;

    let mut gaps = Vec::new();
    let mut slowest = Duration::ZERO;
    for (mf, d) in [(&concave, &dc), (&urn(), &du)] {
        let (ub, dt) = timed(|| find_u_bar(mf, &p, 1.0, 204));
        let ub = ub.map_err(|e| e.to_string())?;
        // k = 1 and ell = 1: the LP's u_bar is also its surplus
        let gap = (ub - d.surplus).abs();
        ensure(gap <= 1e-3, format!("LP surplus gap {gap:e}"))?;
        ensure(dt < Duration::from_secs(30), format!("LP runtime {dt:?}"))?;
        gaps.push(gap);
        slowest = slowest.max(dt);
    }
    Ok(format!("perfect / binary; LP gaps {:.1e} / {:.1e}; slowest LP {slowest:?}", gaps[0], gaps[1]))
}

fn hosios_decentralization() -> Check {
    let p = Prior::uniform(201).map_err(|e| e.to_string())?;
    let perfect = perfect_segmentation(&p);
    let fb = first_best_benchmark(&p, &ces1(), 1.0).map_err(|e| e.to_string())?;
    let h = hosios_compatible_split(&p, &ces1(), 1.0, 0.5).map_err(|e| e.to_string())?;
    let report = check_hosios(&p, &ces1(), 1.0, &h.split).map_err(|e| e.to_string())?;
    ensure(report.holds, "constructed split fails the condition")?;
    let eq = solve_equilibrium(&p, &perfect, &ces1(), 1.0, &h.split).map_err(|e| e.to_string())?;
    let sup = eq
        .tightness
        .values()
        .iter()
        .zip(fb.tightness.values())
        .zip(&eq.active)
        .filter(|(_, &a)| a)
        .map(|((a, b), _)| (a - b).abs())
        .fold(0.0, f64::max);
    let du = (eq.u_star - report.lambda_at_cutoff * fb.eta).abs();
    ensure(sup <= 1e-6 && du <= 1e-8, format!("sup tau gap {sup:e}, u* gap {du:e}"))?;

    let half = ell(0.5);
    let bad = check_hosios(&p, &ces1(), 1.0, &half).map_err(|e| e.to_string())?;
    ensure(!bad.holds, "constant 0.5 reported as satisfying the condition")?;
    let eq_half = solve_equilibrium(&p, &perfect, &ces1(), 1.0, &half).map_err(|e| e.to_string())?;
    let loss = fb.total_surplus - eq_half.total_surplus;
    ensure(loss >= 1e-4, format!("surplus loss {loss:e}"))?;
    Ok(format!("sup tau gap {sup:.1e}, u* gap {du:.1e}; constant 0.5 loses {loss:.3e}"))
}

fn invariant_suites() -> Check {
    const CASES: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut worst_rt: f64 = 0.0;
    for _ in 0..CASES {
        let mf = random_mf(&mut rng);
        let y = 1.0 / mf.beta() * (1.0 + rng.gen_range(1e-6f64..1e3));
        let t = mf.g(y).map_err(|e| e.to_string())?;
        worst_rt = worst_rt.max((mf.odds(t).map_err(|e| e.to_string())? - y).abs() / y);
        let s = mf.f(y).map_err(|e| e.to_string())?;
        worst_rt = worst_rt.max((1.0 / mf.m_prime(s).map_err(|e| e.to_string())? - y).abs() / y);
    }
    ensure(worst_rt <= 1e-9, format!("f/g round trip relative error {worst_rt:e}"))?;

    let mut worst_feas: f64 = 0.0;
    for _ in 0..CASES {
        let prior = random_prior(&mut rng, 12);
        let seg = random_segmentation(&mut rng, &prior, 5);
        let mf = random_mf(&mut rng);
        let k = rng.gen_range(0.3..3.0);
        let split = ell(rng.gen_range(0.1..=1.0));
        let values = seg.expectations(&prior, &split.buyer_values_on(&prior).unwrap()).unwrap();
        let w = seg.weights();
        let hi = mf.beta() * values.iter().copied().fold(0.0, f64::max);
        let a = rng.gen_range(1e-6 * hi..hi);
        let b = rng.gen_range(a..=hi);
        ensure(
            reservation_map(&mf, &w, &values, k, a) >= reservation_map(&mf, &w, &values, k, b),
            "reservation map increased",
        )?;
        let eq = solve_equilibrium(&prior, &seg, &mf, k, &split).map_err(|e| e.to_string())?;
        for ((&t, &v), &act) in eq.tightness.values().iter().zip(&values).zip(&eq.active) {
            ensure(act == (mf.beta() * v > eq.u_star) && act == (t > 0.0), "active-set rule violated")?;
        }
        worst_feas = worst_feas.max(eq.feasibility_residual.abs());
        let dist = posterior_mean_distribution(&seg, &prior).map_err(|e| e.to_string())?;
        ensure(verify_mpc(&dist, &prior).map_err(|e| e.to_string())?.holds, "posterior means fail MPC")?;
    }
    ensure(worst_feas <= 1e-9, format!("feasibility residual {worst_feas:e}"))?;

    let prior = Prior::uniform(15).unwrap();
    let families = [
        ces1(),
        urn(),
        MeetingFunction::ces(0.8, 0.6, 2.0).unwrap(),
        MeetingFunction::urn_ball(0.6, 0.9).unwrap(),
    ];
    let mut dominance_cases = 0;
    for mf in &families {
        let best = first_best_benchmark(&prior, mf, 1.0).map_err(|e| e.to_string())?.total_surplus;
        for _ in 0..50 {
            let seg = random_segmentation(&mut rng, &prior, 6);
            let s = solve_first_best(&prior, &seg, mf, 1.0).map_err(|e| e.to_string())?.total_surplus;
            ensure(best >= s - 1e-9, format!("segmentation beats perfect first best by {:e}", s - best))?;
            dominance_cases += 1;
        }
    }

    let prior = Prior::uniform(40).unwrap();
    let families = [
        urn(),
        ces1(),
        MeetingFunction::ces(1.0, 1.0, 0.5).unwrap(),
        MeetingFunction::ces(0.9, 0.7, 3.0).unwrap(),
        MeetingFunction::urn_ball(0.7, 0.8).unwrap(),
        MeetingFunction::ces(0.6, 1.0, 1.5).unwrap(),
        MeetingFunction::urn_ball(1.0, 0.5).unwrap(),
    ];
    let mut bound_cases = 0;
    for mf in &families {
        let d = design(&prior, mf, 1.0, 1.0).map_err(|e| e.to_string())?;
        for _ in 0..30 {
            let seg = random_segmentation(&mut rng, &prior, 6);
            let u = solve_equilibrium(&prior, &seg, mf, 1.0, &ell(1.0)).map_err(|e| e.to_string())?.u_star;
            ensure(u <= d.u_bar + 1e-8, format!("u* {u} exceeds u_bar {}", d.u_bar))?;
            bound_cases += 1;
        }
    }
    Ok(format!(
        "{CASES} cases per suite; round trip {worst_rt:.1e}, feasibility {worst_feas:.1e}; \
         {dominance_cases} dominance and {bound_cases} u_bar-bound cases"
    ))
}

fn enumeration_agreement() -> Check {
    let p = Prior::uniform(6).map_err(|e| e.to_string())?;
    let d = design(&p, &urn(), 1.0, 1.0).map_err(|e| e.to_string())?;
    let ((interval, exhaustive), dt) = timed(|| {
        (
            enumerate_bp(&p, &urn(), 1.0, &ell(1.0), PartitionMode::Interval),
            enumerate_bp(&p, &urn(), 1.0, &ell(1.0), PartitionMode::Exhaustive),
        )
    });
    let interval = interval.map_err(|e| e.to_string())?;
    let exhaustive = exhaustive.map_err(|e| e.to_string())?;
    let gap = (interval.surplus - d.surplus).abs();
    let gain = exhaustive.surplus - interval.surplus;
    ensure(gap <= 1e-6, format!("interval vs designer {gap:e}"))?;
    ensure(gain <= 1e-8, format!("exhaustive improves by {gain:e}"))?;
    ensure(dt < Duration::from_secs(60), format!("runtime {dt:?}"))?;
    Ok(format!("designer gap {gap:.1e}, exhaustive gain {gain:.1e}, {dt:?}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("pooled closed-form equilibrium", pooled_closed_form),
        ("boundary-activity equilibrium", boundary_activity),
        ("first-best closed forms", first_best_closed_forms),
        ("affine-odds design", affine_design),
        ("curvature dispatch vs LP", curvature_dispatch),
        ("Hosios decentralization", hosios_decentralization),
        ("invariant suites", invariant_suites),
        ("partition enumeration agreement", enumeration_agreement),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {} {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {} {name}: panicked", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
