//! Acceptance suite: one line per criterion, nonzero exit when any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use mmbl_core::diagnostics::stream_divergence;
use mmbl_core::io::certificate::Study;
use mmbl_core::io::config::Config;
use mmbl_core::linear_step::TimeScheme;
use mmbl_core::pipeline;
use mmbl_core::studies;
use mmbl_core::{Field, Grid, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn observed(s: &Study) -> f64 {
    s.observed.unwrap_or(f64::NAN)
}

fn strictly_decreasing(s: &Study) -> bool {
    s.rows.windows(2).all(|w| w[1].error < w[0].error)
}

fn algebraic_identities() -> Result<Outcome> {
    let r = studies::invariant_suite(10_000, 7)?;
    let pass = r.max_sa0 <= 1e-12
        && r.max_sb0 <= 1e-12
        && r.max_asym == 0.0
        && r.min_s > 0.0
        && r.min_b > 0.0
        && r.min_s_over_bound >= 1.0
        && r.min_b_over_bound >= 1.0;
    Ok(outcome(
        pass,
        format!(
            "|SA0-A| {:.2e}, |SB0-B| {:.2e}, |A-A^T| {:.1e}, eig(S)/bound {:.4}, eig(B)/bound {:.4}",
            r.max_sa0, r.max_sb0, r.max_asym, r.min_s_over_bound, r.min_b_over_bound
        ),
    ))
}

fn bernoulli() -> Result<Outcome> {
    let dev = studies::bernoulli_constant(100)?;
    let s = studies::bernoulli_translation(3)?;
    Ok(outcome(
        dev <= 1e-10 && observed(&s) >= 1.8,
        format!("constant drift {dev:.2e}, translation order {:.3}", observed(&s)),
    ))
}

fn round_trip() -> Result<Outcome> {
    let s = studies::transform_round_trip(3, 0.1)?;
    let c = studies::transform_round_trip_constant(0.1)?;
    Ok(outcome(
        (observed(&s) - 2.0).abs() <= 0.2 && c <= 1e-12,
        format!("order {:.3}, constant h1 error {c:.2e}", observed(&s)),
    ))
}

/// ψ with x- and y-structure on a nonuniform spread of scales.
fn stream_function() -> Result<f64> {
    let g = Arc::new(Grid::uniform_2pi(48, 97, 12.0)?);
    let psi = Field::from_fn(&g, |x, y| {
        1.2 * y + 0.3 * (2.0 * x).sin() * (1.0 - (-y).exp()) + 0.1 * x.cos() * y * (-0.5 * y).exp()
    });
    Ok(stream_divergence(&psi))
}

fn divergence(res: &studies::ResidualStudy) -> Result<Outcome> {
    let direct = stream_function()?;
    let mixed = res
        .studies
        .iter()
        .find(|s| s.name == "residual-mixed-divergence")
        .expect("mixed study");
    let worst = direct.max(res.max_stream_divergence);
    Ok(outcome(
        worst <= 1e-12 && observed(mixed) >= 1.8,
        format!(
            "one-psi residual {worst:.2e}, mixed route order {:.3}",
            observed(mixed)
        ),
    ))
}

fn mms() -> Result<Outcome> {
    let space = studies::mms_space(3)?;
    let euler = studies::mms_time(TimeScheme::ImexEuler, 3)?;
    let cnab = studies::mms_time(TimeScheme::Cnab2, 3)?;
    let (s, e, c) = (observed(&space), observed(&euler), observed(&cnab));
    Ok(outcome(
        s >= 1.8 && e >= 0.9 && c >= 1.8,
        format!("space {s:.3}, time first-order {e:.3}, time second-order {c:.3}"),
    ))
}

fn contraction(run: &pipeline::RunOutcome) -> Outcome {
    let ladder = run.ladder.as_ref().expect("ladder requested");
    let ratios: Vec<String> = ladder
        .rungs
        .iter()
        .map(|r| match r.max_ratio {
            Some(m) => format!("{}:{m:.3}", r.window),
            None => format!("{}:-", r.window),
        })
        .collect();
    let all_below = ladder
        .rungs
        .iter()
        .all(|r| r.ratios.iter().skip(1).all(|&x| x < 1.0));
    outcome(
        ladder.accepted.is_some() && ladder.monotone(0.05) && all_below,
        format!("max ratio per window [{}]", ratios.join(", ")),
    )
}

fn bounds(run: &pipeline::RunOutcome) -> Outcome {
    let b = &run.picard.bounds;
    outcome(
        b.holds() && b.lower > 0.0 && b.upper > 0.0,
        format!(
            "margins q1-delta {:.4}, P-delta-q1 {:.4} over {} levels",
            b.lower,
            b.upper,
            run.picard.lifted.len()
        ),
    )
}

fn residual_oracle(res: &studies::ResidualStudy) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for s in res.studies.iter().take(4) {
        pass &= observed(s) >= 0.9 && strictly_decreasing(s);
        parts.push(format!("{} {:.3}", s.name.trim_start_matches("residual-"), observed(s)));
    }
    let div = &res.studies[4];
    let div_max = div.rows.iter().map(|r| r.error).fold(0.0, f64::max);
    pass &= div_max <= 1e-12;
    parts.push(format!("divergence at {div_max:.1e}"));
    outcome(pass, parts.join(", "))
}

fn envelope(run: &pipeline::RunOutcome) -> Outcome {
    let e = &run.envelope;
    let c = e.c.unwrap_or(f64::NAN);
    let g = e.growth.unwrap_or(f64::NAN);
    outcome(
        !e.undefined && c.is_finite() && g <= 10.0,
        format!("C = {c:.4e}, E(T)/E(0) = {g:.4}"),
    )
}

fn sobolev() -> Result<Outcome> {
    let s = studies::sobolev_study(100, 7, 3)?;
    let change = s.refinement_change().unwrap_or(f64::NAN);
    let maxima: Vec<String> = s.maxima.iter().map(|(ny, m)| format!("ny={ny}:{m:.4}")).collect();
    Ok(outcome(
        s.scaling_error <= 1e-12 && s.maxima.iter().all(|m| m.1.is_finite()) && change <= 0.05,
        format!(
            "scaling {:.1e}, maxima [{}], finest change {change:.2e}",
            s.scaling_error,
            maxima.join(", ")
        ),
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let canonical = Config::canonical();
    let run = pipeline::run(&canonical, true);
    let residuals = studies::residual_refinement(&canonical, 3, 0.2);

    let on_run = |r: &std::result::Result<pipeline::RunOutcome, mmbl_core::Error>,
                f: fn(&pipeline::RunOutcome) -> Outcome| match r {
        Ok(run) => Ok(f(run)),
        Err(e) => Err(mmbl_core::Error::Internal(e.to_string())),
    };
    let on_residuals = |f: fn(&studies::ResidualStudy) -> Result<Outcome>| match &residuals {
        Ok(r) => f(r),
        Err(e) => Err(mmbl_core::Error::Internal(e.to_string())),
    };

    let results: Vec<(&str, Result<Outcome>)> = vec![
        ("algebraic identities", algebraic_identities()),
        ("bernoulli trivial states", bernoulli()),
        ("transform round trip", round_trip()),
        ("divergence-free field", on_residuals(divergence)),
        ("linear-step MMS", mms()),
        ("picard contraction", on_run(&run, contraction)),
        ("bound preservation", on_run(&run, bounds)),
        ("original-system residuals", on_residuals(|r| Ok(residual_oracle(r)))),
        ("energy envelope", on_run(&run, envelope)),
        ("sobolev ratio", sobolev()),
    ];

    let mut failed = 0;
    for (k, (name, r)) in results.into_iter().enumerate() {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name}: {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        10 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
