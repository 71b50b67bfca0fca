use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use mmbl_core::diagnostics::ResidualNorms;
use mmbl_core::io::certificate::{Certificate, Margins, Study, Timing};
use mmbl_core::io::config::Config;
use mmbl_core::io::snapshot::{
    write_orders, write_physical_series, write_trace, write_transformed_series,
};
use mmbl_core::linear_step::TimeScheme;
use mmbl_core::outflow::bernoulli_residual;
use mmbl_core::pipeline::{self, Problem};
use mmbl_core::studies;
use mmbl_core::{Error, Result};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file; the canonical configuration when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    /// Also run the window ladder.
    #[arg(long)]
    ladder: bool,
    /// Also run a residual refinement study with this many levels on a
    /// 0.2 window.
    #[arg(long)]
    refine: Option<usize>,
    /// Gzip the written series.
    #[arg(long)]
    gzip: bool,
    /// Record wall-clock timings in the certificate.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
pub struct BernoulliArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Levels of the translation study.
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

#[derive(Debug, Args)]
pub struct MmsArgs {
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

#[derive(Debug, Args)]
pub struct RoundTripArgs {
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
}

#[derive(Debug, Args)]
pub struct InvariantArgs {
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Members of the Sobolev-ratio family.
    #[arg(long, default_value_t = 100)]
    family: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    certificate: PathBuf,
}

/// Every `n`-th element plus the last one.
fn every_nth<T>(items: &[T], n: usize) -> Vec<&T> {
    let last = items.len().saturating_sub(1);
    items
        .iter()
        .enumerate()
        .filter(|(k, _)| k % n.max(1) == 0 || *k == last)
        .map(|(_, t)| t)
        .collect()
}

fn load(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::canonical()),
    }
}

/// Print every check, write the certificate and report overall success.
fn finish(cert: &Certificate, dir: &Path, file: &str) -> Result<bool> {
    for c in &cert.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag}\t{}\t{}", c.name, c.detail);
    }
    let path = dir.join(file);
    cert.write(&path)?;
    println!("certificate: {}", path.display());
    Ok(cert.passed())
}

fn print_study(s: &Study) {
    println!("{}", s.name);
    println!("  {:>5} {:>12} {:>12} {:>7}", "level", "h", "error", "order");
    for r in &s.rows {
        let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
        println!("  {:>5} {:>12.4e} {:>12.4e} {:>7}", r.level, r.h, r.error, order);
    }
}

fn write_study(dir: &Path, s: &Study) -> Result<()> {
    write_orders(&dir.join(format!("{}.txt", s.name)), &s.name, &s.rows)
}

/// Pass when the finest-pair order reaches `required`.
fn order_check(cert: &mut Certificate, s: &Study) {
    if let Some(req) = s.required {
        let pass = s.observed.is_some_and(|o| o >= req);
        let detail = match s.observed {
            Some(o) => format!("order {o:.3}, required {req}"),
            None => "no observed order".into(),
        };
        cert.check(&s.name, pass, detail);
    }
}

fn echo(cfg: &Config) -> Config {
    let mut c = cfg.clone();
    c.base_dir = PathBuf::from(".");
    c
}

pub fn run(args: &RunArgs, dir: &Path) -> Result<bool> {
    let cfg = load(args.config.as_deref())?;
    if args.print_defaults {
        print!("{}", cfg.to_text());
        return Ok(true);
    }
    let mut timings = Vec::new();
    let t0 = Instant::now();
    let out = pipeline::run(&cfg, args.ladder)?;
    timings.push(Timing {
        name: "pipeline".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });

    let mut cert = Certificate::new("run");
    cert.seed = Some(cfg.solver.seed);
    cert.config = Some(echo(&cfg));
    let b = &out.picard.bounds;
    cert.margins = Some(Margins {
        lower: b.lower,
        upper: b.upper,
        holds: b.holds(),
    });
    cert.set_iterations(&out.report().records);
    cert.envelope = Some(out.envelope.clone());
    cert.residuals = out.residuals.clone();
    cert.measured.insert("min_s".into(), out.picard.min_s);
    if let Some(r) = out.report().max_ratio_from(2) {
        cert.measured.insert("max_ratio_from_2".into(), r);
    }

    cert.check(
        "picard-converged",
        out.report().converged,
        format!("{} iterations", out.report().records.len()),
    );
    cert.check(
        "bounds",
        b.holds() && b.lower > 0.0 && b.upper > 0.0,
        format!("margins lower {:.4e}, upper {:.4e}", b.lower, b.upper),
    );
    let env = &out.envelope;
    cert.check(
        "energy-envelope",
        env.pass,
        match (env.c, env.growth) {
            (Some(c), Some(g)) => format!("C = {c:.4e}, E(T)/E(0) = {g:.4e}"),
            _ => "envelope undefined".into(),
        },
    );
    let worst = out.residuals.iter().map(ResidualNorms::max_eq).fold(0.0, f64::max);
    cert.check(
        "residuals-finite",
        worst.is_finite(),
        format!("largest residual norm {worst:.4e}"),
    );

    if let Some(ladder) = &out.ladder {
        cert.ladder = ladder.rungs.clone();
        let accepted = ladder.accepted.map(|i| ladder.rungs[i].window);
        cert.check(
            "ladder-contraction",
            accepted.is_some(),
            match accepted {
                Some(w) => format!("window {w} meets ratio target {}", cfg.solver.ladder_target),
                None => "no window met the ratio target".into(),
            },
        );
        cert.check(
            "ladder-monotone",
            ladder.monotone(0.05),
            format!("{} windows", ladder.rungs.len()),
        );
    }

    if let Some(levels) = args.refine {
        let t1 = Instant::now();
        let study = studies::residual_refinement(&cfg, levels, 0.2)?;
        timings.push(Timing {
            name: "residual-refinement".into(),
            seconds: t1.elapsed().as_secs_f64(),
        });
        for s in &study.studies {
            print_study(s);
            write_study(dir, s)?;
            order_check(&mut cert, s);
        }
        cert.measured.insert("max_stream_divergence".into(), study.max_stream_divergence);
        cert.check(
            "stream-divergence",
            study.max_stream_divergence <= 1e-12,
            format!("max {:.3e}", study.max_stream_divergence),
        );
        cert.studies = study.studies;
    }

    let every = cfg.solver.snapshot_every;
    let ext = if args.gzip { "txt.gz" } else { "txt" };
    write_trace(&dir.join("trace.txt"), &out.trace)?;
    let phys = every_nth(&out.physical.states, every);
    write_physical_series(&dir.join(format!("physical.{ext}")), &phys, args.gzip)?;
    let lifted = every_nth(&out.picard.lifted, every);
    write_transformed_series(&dir.join(format!("transformed.{ext}")), &lifted, args.gzip)?;

    if args.timings {
        cert.timings = Some(timings);
    }
    finish(&cert, dir, "run.cert")
}

pub fn bernoulli(args: &BernoulliArgs, dir: &Path) -> Result<bool> {
    let cfg = load(args.config.as_deref())?;
    let problem = Problem::new(&cfg)?;
    let trace = problem.trace(cfg.solver.t_window, cfg.solver.dt)?;
    write_trace(&dir.join("trace.txt"), &trace)?;
    let mut cert = Certificate::new("bernoulli");
    cert.config = Some(echo(&cfg));
    let res = bernoulli_residual(&trace, &problem.params)?;
    let worst = res.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    cert.measured.insert("max_trace_residual".into(), worst);
    cert.check(
        "trace-residual-finite",
        worst.is_finite(),
        format!("largest residual {worst:.4e}"),
    );

    let dev = studies::bernoulli_constant(100)?;
    cert.measured.insert("constant_state_deviation".into(), dev);
    cert.check(
        "constant-state",
        dev <= 1e-10,
        format!("max deviation {dev:.3e} over 100 steps"),
    );
    let s = studies::bernoulli_translation(args.levels)?;
    print_study(&s);
    write_study(dir, &s)?;
    order_check(&mut cert, &s);
    cert.studies.push(s);
    finish(&cert, dir, "bernoulli.cert")
}

pub fn mms(args: &MmsArgs, dir: &Path) -> Result<bool> {
    let mut cert = Certificate::new("mms");
    let all = [
        studies::mms_space(args.levels)?,
        studies::mms_time(TimeScheme::ImexEuler, args.levels)?,
        studies::mms_time(TimeScheme::Cnab2, args.levels)?,
    ];
    for s in all {
        print_study(&s);
        write_study(dir, &s)?;
        order_check(&mut cert, &s);
        cert.studies.push(s);
    }
    finish(&cert, dir, "mms.cert")
}

pub fn round_trip(args: &RoundTripArgs, dir: &Path) -> Result<bool> {
    let mut cert = Certificate::new("transform-roundtrip");
    let s = studies::transform_round_trip(args.levels, args.delta)?;
    print_study(&s);
    write_study(dir, &s)?;
    let o = s.observed.unwrap_or(f64::NAN);
    cert.check(
        "roundtrip-order",
        (o - 2.0).abs() <= 0.2,
        format!("order {o:.3}, required 2 ± 0.2"),
    );
    let c = studies::transform_round_trip_constant(args.delta)?;
    cert.measured.insert("constant_h1_error".into(), c);
    cert.check("roundtrip-constant", c <= 1e-12, format!("error {c:.3e}"));
    cert.studies.push(s);
    finish(&cert, dir, "transform-roundtrip.cert")
}

pub fn invariants(args: &InvariantArgs, dir: &Path) -> Result<bool> {
    if args.samples == 0 {
        return Err(Error::Config("--samples must be positive".into()));
    }
    let mut cert = Certificate::new("check-invariants");
    cert.seed = Some(args.seed);
    let r = studies::invariant_suite(args.samples, args.seed)?;
    let m = &mut cert.measured;
    m.insert("samples".into(), r.samples as f64);
    m.insert("max_sa0_minus_a".into(), r.max_sa0);
    m.insert("max_sb0_minus_b".into(), r.max_sb0);
    m.insert("max_a_asymmetry".into(), r.max_asym);
    m.insert("min_s_eigenvalue".into(), r.min_s);
    m.insert("min_b_eigenvalue".into(), r.min_b);
    m.insert("min_s_over_bound".into(), r.min_s_over_bound);
    m.insert("min_b_over_bound".into(), r.min_b_over_bound);
    cert.check("s-a0-identity", r.max_sa0 <= 1e-12, format!("max relative error {:.3e}", r.max_sa0));
    cert.check("s-b0-identity", r.max_sb0 <= 1e-12, format!("max relative error {:.3e}", r.max_sb0));
    cert.check("a-symmetric", r.max_asym == 0.0, format!("max |A - A^T| {:.3e}", r.max_asym));
    cert.check(
        "s-lower-bound",
        r.min_s > 0.0 && r.min_s_over_bound >= 1.0,
        format!("min eigenvalue / bound {:.4}", r.min_s_over_bound),
    );
    cert.check(
        "b-lower-bound",
        r.min_b > 0.0 && r.min_b_over_bound >= 1.0,
        format!("min eigenvalue / bound {:.4}", r.min_b_over_bound),
    );
    if args.family > 0 {
        let s = studies::sobolev_study(args.family, args.seed, 3)?;
        cert.measured.insert("sobolev_scaling_error".into(), s.scaling_error);
        for (ny, max) in &s.maxima {
            cert.measured.insert(format!("sobolev_max_ny{ny}"), *max);
        }
        cert.check(
            "sobolev-scaling",
            s.scaling_error <= 1e-12,
            format!("max change {:.3e}", s.scaling_error),
        );
        let change = s.refinement_change().unwrap_or(f64::NAN);
        cert.check(
            "sobolev-family-stable",
            change <= 0.05,
            format!("finest-level maximum {:.4}, relative change {change:.3e}", s.maxima[s.maxima.len() - 1].1),
        );
    }
    finish(&cert, dir, "check-invariants.cert")
}

pub fn report(args: &ReportArgs) -> Result<bool> {
    if !args.certificate.exists() {
        return Err(Error::Config(format!(
            "certificate not found: {}",
            args.certificate.display()
        )));
    }
    let cert = Certificate::read(&args.certificate)?;
    print!("{}", cert.to_text()?);
    for c in cert.failures() {
        println!("FAIL\t{}\t{}", c.name, c.detail);
    }
    Ok(cert.passed())
}

#[cfg(test)]
mod tests {
    use super::every_nth;

    #[test]
    fn snapshots_keep_first_and_last() {
        let v: Vec<usize> = (0..=23).collect();
        let picked: Vec<usize> = every_nth(&v, 10).into_iter().copied().collect();
        assert_eq!(picked, [0, 10, 20, 23]);
        assert_eq!(every_nth(&v[..1], 10).len(), 1);
    }
}
