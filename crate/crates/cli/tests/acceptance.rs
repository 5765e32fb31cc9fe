//! Acceptance suite. Every scenario runs through the lab exactly as the CLI
//! would; the verdicts are recomputed from the files the runs leave behind,
//! against oracles written out here. One line per criterion; the process
//! fails if any criterion fails.

#[path = "../../core/tests/symbolic/mod.rs"]
mod symbolic;

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ricci_lab::output::read_columns;
use ricci_lab::ricci_core::collar::{FermiBackground, LogPowerSeries};
use ricci_lab::{replay_check, Manifest, Scenario};

/// `sup|R+1|` must stay below this on the stationary funnel.
const STATIONARY_TOL: f64 = 1e-5;
const STATIONARY_BUDGET: Duration = Duration::from_secs(120);
const ODE_TOL: f64 = 1e-3;
const BLOWUP_WINDOW: (f64, f64) = (0.40, 0.41);
const DECAY_MIN: f64 = 0.8;
const ENVELOPE_FACTOR: f64 = 1.2;
const ENVELOPE_FROM: f64 = 0.5;
const DECAY_BUDGET: Duration = Duration::from_secs(300);
const CONSISTENCY_TOL: f64 = 1e-2;
const CONSISTENCY_GAIN: f64 = 3.0;
const GREEN_REL_TOL: f64 = 0.02;
const GREEN_RANGE: (f64, f64) = (0.5, 2.0);
const MONOTONE_TOL: f64 = 1e-12;
const BALL_RATIO_MAX: f64 = 2.0;
const MIN_POLES: usize = 5;
const RATE_MAX: f64 = 4.0;
const ROUND_TRIP_TOL: f64 = 1e-12;
const FLAT_TOL: f64 = 1e-13;
const SLOPE_N4: f64 = 4.5;
const SLOPE_N6: f64 = 6.5;
const CUSP_FACTOR: f64 = 5.0;
/// Observed order `log₂(e₂₅₆/e₅₁₂)` accepted as second order.
const CUSP_ORDER_MIN: f64 = 1.8;

type Verdict = Result<(bool, String), String>;

struct Lab {
    out: PathBuf,
    runs: Vec<PathBuf>,
}

impl Lab {
    fn run(&mut self, text: &str) -> Result<(PathBuf, Manifest), String> {
        let s = Scenario::parse(text, None).map_err(|e| e.to_string())?;
        let done = ricci_lab::run(&s, &self.out).map_err(|e| format!("{}: {e}", s.name))?;
        self.runs.push(done.dir.clone());
        Ok((done.dir, done.manifest))
    }
}

fn columns(dir: &Path, file: &str) -> Result<BTreeMap<String, Vec<f64>>, String> {
    read_columns(&dir.join(file)).map_err(|e| e.to_string())
}

fn col<'a>(c: &'a BTreeMap<String, Vec<f64>>, name: &str) -> Result<&'a [f64], String> {
    c.get(name).map(Vec::as_slice).ok_or_else(|| format!("missing column {name}"))
}

fn metric(m: &Manifest, key: &str) -> Result<f64, String> {
    m.metric(key).ok_or_else(|| format!("{}: metric {key} missing or null", m.name))
}

fn check(m: &Manifest, key: &str) -> bool {
    m.check(key) == Some(true)
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn stationarity(lab: &mut Lab) -> Verdict {
    let clock = Instant::now();
    let (dir, _) = lab.run(
        "name = stationary\nkind = flow\n[surface]\ntype = funnel\nr_max = 6\nn_s = 256\nn_theta = 128\n[run]\nT = 5\n",
    )?;
    let took = clock.elapsed();
    let d = columns(&dir, "diagnostics.csv")?;
    let worst = col(&d, "sup_R_plus_1")?
        .iter()
        .zip(col(&d, "inf_R_plus_1")?)
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let t_end = col(&d, "t")?.last().copied().unwrap_or(0.0);
    let pass = worst <= STATIONARY_TOL && (t_end - 5.0).abs() < 1e-9 && took <= STATIONARY_BUDGET;
    Ok((pass, format!("max sup|R+1| = {worst:.2e} to t = {t_end}, {:.1} s", took.as_secs_f64())))
}

/// Closed-form solution of `Ṙ = R(R+1)`.
fn ode(r0: f64, t: f64) -> f64 {
    let e = t.exp();
    r0 * e / (1.0 + r0 - r0 * e)
}

fn homogeneous(lab: &mut Lab) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for (r0, t_end, blowup) in [(2.0, 0.5, true), (-0.5, 3.0, false)] {
        let (dir, m) = lab.run(&format!(
            "name = torus_{}\nkind = flow\n[surface]\ntype = flat_torus\ncurvature = {r0}\nn_s = 32\nn_theta = 32\n[run]\nT = {t_end}\nexpect_blowup = {blowup}\n",
            if r0 > 0.0 { "positive" } else { "negative" }
        ))?;
        let d = columns(&dir, "diagnostics.csv")?;
        let t = col(&d, "t")?;
        let mut worst = 0.0f64;
        for column in ["sup_R_plus_1", "inf_R_plus_1"] {
            for (ti, v) in t.iter().zip(col(&d, column)?) {
                let exact = ode(r0, *ti);
                let err = (v - 1.0 - exact).abs() / exact.abs().max(1.0);
                worst = worst.max(err);
            }
        }
        pass &= worst <= ODE_TOL;
        notes.push(format!("R0 = {r0}: {} samples, max rel err {worst:.1e}", t.len()));
        if blowup {
            let tb = m.metric("blowup_time");
            let inside = tb.is_some_and(|x| (BLOWUP_WINDOW.0..=BLOWUP_WINDOW.1).contains(&x));
            pass &= inside;
            notes.push(format!("blow-up at {tb:?} (oracle ln 1.5 = {:.6})", 1.5f64.ln()));
        }
    }
    Ok((pass, notes.join("; ")))
}

struct PotentialRuns {
    coarse: (PathBuf, Manifest),
    fine: (PathBuf, Manifest),
    fine_seconds: f64,
}

fn potential_runs(lab: &mut Lab) -> Result<PotentialRuns, String> {
    let text = |n: usize| {
        format!(
            "name = bump_{n}\nkind = potential\n[surface]\ntype = funnel\nr_max = 6\nn_s = {n}\nn_theta = 32\n\
             [perturbation]\namplitude = 0.1\ncenter = 0\nwidth = 0.35\n[run]\nT = 4\nsnapshot_every = 0.25\n"
        )
    };
    let coarse = lab.run(&text(128))?;
    let clock = Instant::now();
    let fine = lab.run(&text(256))?;
    Ok(PotentialRuns {
        coarse,
        fine,
        fine_seconds: clock.elapsed().as_secs_f64(),
    })
}

fn decay(runs: &PotentialRuns) -> Verdict {
    let (dir, m) = &runs.fine;
    let lambda = metric(m, "decay_lambda")?;
    // Independent fit of ln sup(R+1) on the window where decay is asserted.
    let d = columns(dir, "diagnostics.csv")?;
    let (t, sup) = (col(&d, "t")?, col(&d, "sup_R_plus_1")?);
    let (x, y): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(sup)
        .filter(|(t, v)| **t >= ENVELOPE_FROM && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .unzip();
    let lambda_ls = -slope(&x, &y);
    let p = columns(dir, "potential.csv")?;
    let (pt, h) = (col(&p, "t")?, col(&p, "sup_H")?);
    let h0 = h[0];
    let ratio = pt
        .iter()
        .zip(h)
        .filter(|(t, _)| **t >= ENVELOPE_FROM - 1e-12)
        .map(|(t, v)| v / (h0 * (-t).exp()))
        .fold(0.0, f64::max);
    let pass = lambda >= DECAY_MIN
        && lambda_ls >= DECAY_MIN
        && ratio <= ENVELOPE_FACTOR
        && runs.fine_seconds <= DECAY_BUDGET.as_secs_f64();
    Ok((
        pass,
        format!(
            "lambda = {lambda:.3} (independent fit {lambda_ls:.3}), max H(t)/(H(0)e^-t) = {ratio:.3}, {:.1} s",
            runs.fine_seconds
        ),
    ))
}

fn consistency(runs: &PotentialRuns) -> Verdict {
    let worst = |(dir, _): &(PathBuf, Manifest)| -> Result<f64, String> {
        let p = columns(dir, "potential.csv")?;
        Ok(col(&p, "consistency_err")?.iter().fold(0.0, |a: f64, b| a.max(b.abs())))
    };
    let (c128, c256) = (worst(&runs.coarse)?, worst(&runs.fine)?);
    let (m128, m256) = (metric(&runs.coarse.1, "consistency_max")?, metric(&runs.fine.1, "consistency_max")?);
    let (dt128, dt256) = (metric(&runs.coarse.1, "dt_max")?, metric(&runs.fine.1, "dt_max")?);
    let gain = m128 / m256;
    let pass = m128 <= CONSISTENCY_TOL && c128 <= CONSISTENCY_TOL && gain >= CONSISTENCY_GAIN && dt256 <= 0.5 * dt128;
    Ok((
        pass,
        format!(
            "128: {m128:.2e} (snapshots {c128:.2e}), 256: {m256:.2e} (snapshots {c256:.2e}), gain {gain:.1}, dt {dt128:.2e} -> {dt256:.2e}"
        ),
    ))
}

/// `(1/2π) log coth(d/2)`.
fn plane_green(d: f64) -> f64 {
    (1.0 / (d / 2.0).tanh()).ln() / (2.0 * PI)
}

fn green_oracle(lab: &mut Lab) -> Verdict {
    let (dir, m) = lab.run(
        "name = green_plane\nkind = green_sweep\n[surface]\ntype = funnel\nwaist = 2\nr_max = 8\nn_s = 64\nn_theta = 256\n\
         [tolerances]\nexhaustion = 1e-6\n[sweep]\nx0 = -1\npoles = 0, 1\n",
    )?;
    let p = columns(&dir, "green_profile.csv")?;
    let (d, g) = (col(&p, "distance")?, col(&p, "G")?);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (d, g) in d.iter().zip(g) {
        if (GREEN_RANGE.0..=GREEN_RANGE.1).contains(d) {
            worst = worst.max((g / plane_green(*d) - 1.0).abs());
            count += 1;
        }
    }
    let monotone = metric(&m, "monotone_defect_max")?;
    let (sym, bound) = (metric(&m, "symmetry_defect")?, metric(&m, "symmetry_bound")?);
    let pass = count > 0 && worst <= GREEN_REL_TOL && monotone <= MONOTONE_TOL && sym <= bound;
    Ok((
        pass,
        format!("{count} cells, max rel err {worst:.2e}; monotone defect {monotone:.1e}; symmetry {sym:.1e} <= {bound:.1e}"),
    ))
}

fn funnel_sweep(lab: &mut Lab) -> Result<(PathBuf, Manifest), String> {
    lab.run(
        "name = funnel_sweep\nkind = green_sweep\n[surface]\ntype = funnel\nr_max = 12\nn_s = 256\nn_theta = 128\n\
         [sweep]\nx0 = -2.5\npoles = -1.5, -0.5, 0.5, 1.5, 2.5\nextend = 1.5\n",
    )
}

fn ball_uniformity((dir, _): &(PathBuf, Manifest)) -> Verdict {
    let c = columns(dir, "green_sweep.csv")?;
    let (r, ball) = (col(&c, "r_to_x0")?, col(&c, "ball_integral")?);
    let lo = ball.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ball.iter().copied().fold(0.0, f64::max);
    let (rmin, rmax) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
    let spread = rmin <= 1.5 && rmax >= 4.5;
    let pass = ball.len() >= MIN_POLES && lo > 0.0 && hi / lo <= BALL_RATIO_MAX && spread;
    Ok((
        pass,
        format!("{} poles at distance {rmin:.2}..{rmax:.2}, ball integrals {lo:.4}..{hi:.4}, ratio {:.3}", ball.len(), hi / lo),
    ))
}

fn rate_fit((_, m): &(PathBuf, Manifest)) -> Verdict {
    let (a, b) = (metric(m, "fit_a")?, metric(m, "fit_b")?);
    let (a2, b2) = (metric(m, "fit_a_extended")?, metric(m, "fit_b_extended")?);
    let pass = a <= RATE_MAX && a2 <= a && b.is_finite() && b2.is_finite() && b > 0.0 && b2 > 0.0;
    Ok((pass, format!("A = {a}, B = {b:.3e}; extended 1.5x: A = {a2}, B = {b2:.3e}")))
}

fn eta_of(dir: &Path, n: usize) -> Result<LogPowerSeries, String> {
    let text = std::fs::read_to_string(dir.join(format!("eta_N{n}.json"))).map_err(|e| e.to_string())?;
    LogPowerSeries::from_json(&text).map_err(|e| e.to_string())
}

fn fuchsian(lab: &mut Lab) -> Verdict {
    const SEED: u64 = 42;
    const CAP: usize = 8;
    let (dir, _) = lab.run(&format!(
        "name = collar_random\nkind = collar_order\n[surface]\ntype = collar\nbackground = random:1:0.5\nmodes = {CAP}\n\
         [run]\nseed = {SEED}\n[collar]\norders = 4, 6\n"
    ))?;
    let eta = eta_of(&dir, 6)?;
    let bg = FermiBackground::random(SEED, 6, CAP, 1, 0.5).map_err(|e| e.to_string())?;
    let eq = symbolic::oracle_equation(&eta, &bg, 7, 6);
    let random_gap = eq.c.iter().map(|v| v.norm()).fold(0.0, f64::max);

    let (dir, _) = lab.run(&format!(
        "name = collar_flat\nkind = collar_order\n[surface]\ntype = collar\nbackground = flat\nmodes = {CAP}\n[collar]\norders = 4, 6\n"
    ))?;
    let eta = eta_of(&dir, 6)?;
    let mut flat_dev = (eta.a(0, 0).mode(0) - 1.0).norm();
    for i in 0..=6 {
        for j in 0..=i {
            for m in -(CAP as i64)..=CAP as i64 {
                if (i, j, m) != (0, 0, 0) {
                    flat_dev = flat_dev.max(eta.a(i, j).mode(m).norm());
                }
            }
        }
    }
    let pass = random_gap <= ROUND_TRIP_TOL && flat_dev <= FLAT_TOL;
    Ok((pass, format!("random background: equation residual {random_gap:.1e} through N = 6; flat: |eta - 1| = {flat_dev:.1e}")))
}

fn collar_slopes(lab: &mut Lab) -> Verdict {
    let (dir, m) = lab.run(
        "name = collar_exact\nkind = collar_order\n[surface]\ntype = collar\nbackground = radial:1,2,1\nmodes = 8\n[collar]\norders = 4, 6\n",
    )?;
    let shown = |n: usize| m.metric(&format!("N{n}_slope")).map_or("exact".to_string(), |s| format!("{s:.3}"));
    let checks = check(&m, "slope_N4") && check(&m, "slope_N6") && check(&m, "slope_monotone");
    let s4 = m.metric("N4_slope").unwrap_or(f64::INFINITY);
    let s6 = m.metric("N6_slope").unwrap_or(f64::INFINITY);
    // A = (1+r)² has the closed-form solution η = 1 + r/2.
    let eta = eta_of(&dir, 6)?;
    let mut dev = (eta.a(1, 0).mode(0) - 0.5).norm().max((eta.a(0, 0).mode(0) - 1.0).norm());
    for i in 0..=6 {
        for j in 0..=i {
            for k in -8i64..=8 {
                if !matches!((i, j, k), (0, 0, 0) | (1, 0, 0)) {
                    dev = dev.max(eta.a(i, j).mode(k).norm());
                }
            }
        }
    }
    let profile_max = |n: usize| -> Result<f64, String> {
        let c = columns(&dir, &format!("residual_order_N{n}.csv"))?;
        Ok(col(&c, "residual")?.iter().copied().fold(0.0, f64::max))
    };
    let (r4, r6) = (profile_max(4)?, profile_max(6)?);
    let pass = checks && s4 >= SLOPE_N4 && s6 >= SLOPE_N6 && s6 >= s4 && dev <= FLAT_TOL;
    let generic = lab.run(
        "name = collar_generic\nkind = collar_order\n[surface]\ntype = collar\nbackground = radial:1,1,0,0.5\nmodes = 8\n[collar]\norders = 4, 6\n",
    )?;
    let gs = |n: usize| generic.1.metric(&format!("N{n}_slope")).map_or(f64::NAN, |s| s);
    Ok((
        pass,
        format!(
            "(1+r)^2: N4 {}, N6 {} (max residual {r4:.1e}, {r6:.1e}; |eta - (1 + r/2)| = {dev:.1e}); \
             1 + r + r^3/2 for reference: N4 {:.3}, N6 {:.3}",
            shown(4),
            shown(6),
            gs(4),
            gs(6)
        ),
    ))
}

fn cusp(lab: &mut Lab) -> Verdict {
    let mut defects = Vec::new();
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [256, 512] {
        let (dir, m) = lab.run(&format!(
            "name = cusp_{n}\nkind = poisson_check\n[surface]\ntype = cusp\nrho_range = 1e-4, 1e-1\nn_s = {n}\nn_theta = 64\n"
        ))?;
        let c = columns(&dir, "curvature.csv")?;
        let worst = col(&c, "R_min")?
            .iter()
            .chain(col(&c, "R_max")?)
            .map(|r| (r + 1.0).abs())
            .fold(0.0, f64::max);
        let h = metric(&m, "h_s")?;
        pass &= worst <= CUSP_FACTOR * h * h;
        notes.push(format!("n = {n}: max|R+1| = {worst:.2e} = {:.3} h^2", worst / (h * h)));
        defects.push(worst);
    }
    let order = (defects[0] / defects[1]).ln() / LN_2;
    pass &= order >= CUSP_ORDER_MIN;
    notes.push(format!("observed order {order:.2}"));
    Ok((pass, notes.join("; ")))
}

fn monitors(runs: &PotentialRuns) -> Verdict {
    let keys = [
        "monitor_consistency_upper",
        "monitor_consistency_lower",
        "monitor_h_envelope",
        "growth_norms_finite",
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (dir, m) in [&runs.coarse, &runs.fine] {
        let all = keys.iter().all(|k| check(m, k));
        let tol = metric(m, "monitor_tol")?;
        let p = columns(dir, "potential.csv")?;
        let consistency = col(&p, "consistency_err")?.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        let norms = ["growth_norm_u", "growth_norm_grad_u", "growth_norm_lap_u"]
            .iter()
            .map(|k| metric(m, k))
            .collect::<Result<Vec<_>, _>>()?;
        pass &= all && consistency <= tol && norms.iter().all(|x| x.is_finite());
        notes.push(format!(
            "{}: monitors {}, |dtu - R - 1| {consistency:.1e} <= {tol:.1e}, norms {:.2e}/{:.2e}/{:.2e}",
            m.name,
            if all { "true" } else { "false" },
            norms[0],
            norms[1],
            norms[2]
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn determinism(runs: &[PathBuf]) -> Verdict {
    let results: Vec<(String, Result<bool, String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|dir| scope.spawn(move || replay_check(dir).map_err(|e| e.to_string())))
            .collect();
        runs.iter()
            .zip(handles)
            .map(|(dir, h)| {
                let name = dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
                (name, h.join().unwrap_or_else(|_| Err("replay panicked".into())))
            })
            .collect()
    });
    let failed: Vec<String> = results
        .iter()
        .filter(|(_, r)| !matches!(r, Ok(true)))
        .map(|(n, r)| format!("{n} ({r:?})"))
        .collect();
    Ok((
        !runs.is_empty() && failed.is_empty(),
        if failed.is_empty() {
            format!("{} runs replayed bit for bit", runs.len())
        } else {
            format!("not identical: {}", failed.join(", "))
        },
    ))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let mut lab = Lab {
        out: scratch.path().to_path_buf(),
        runs: Vec::new(),
    };
    let mut lines: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |id: usize, title: &'static str, v: Verdict| {
        let (mark, text) = match &v {
            Ok((true, d)) => ("PASS", d.clone()),
            Ok((false, d)) => ("FAIL", d.clone()),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        println!("{mark} {id:>2} {title}: {text}");
        lines.push((id, title, v));
    };

    record(1, "stationary funnel", stationarity(&mut lab));
    record(2, "homogeneous torus vs scalar ODE", homogeneous(&mut lab));
    match potential_runs(&mut lab) {
        Ok(runs) => {
            record(3, "decay after a bump", decay(&runs));
            record(4, "potential consistency", consistency(&runs));
            record(11, "maximum-principle monitors", monitors(&runs));
        }
        Err(e) => {
            for (id, title) in [(3, "decay after a bump"), (4, "potential consistency"), (11, "maximum-principle monitors")] {
                record(id, title, Err(e.clone()));
            }
        }
    }
    record(5, "Green's function oracle", green_oracle(&mut lab));
    match funnel_sweep(&mut lab) {
        Ok(sweep) => {
            record(6, "uniform ball integrals", ball_uniformity(&sweep));
            record(7, "relative Green constants", rate_fit(&sweep));
        }
        Err(e) => {
            record(6, "uniform ball integrals", Err(e.clone()));
            record(7, "relative Green constants", Err(e));
        }
    }
    record(8, "Fuchsian recursion", fuchsian(&mut lab));
    record(9, "collar residual order", collar_slopes(&mut lab));
    record(10, "cusp chart curvature", cusp(&mut lab));
    record(12, "determinism", determinism(&lab.runs));

    let failed: Vec<usize> = lines.iter().filter(|(_, _, v)| !matches!(v, Ok((true, _)))).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        lines.len() - failed.len(),
        lines.len(),
        if failed.is_empty() { String::new() } else { format!(" (failed: {failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
