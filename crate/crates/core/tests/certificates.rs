use std::collections::BTreeMap;

use mmbl_core::diagnostics::{Envelope, ResidualNorms};
use mmbl_core::io::certificate::{Certificate, Check, Margins, Study, Timing};
use mmbl_core::io::config::Config;
use mmbl_core::io::snapshot::OrderRow;
use mmbl_core::picard::IterationRecord;
use mmbl_core::pipeline::LadderRung;
use proptest::prelude::*;

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        prop::num::f64::NORMAL,
        -10.0f64..10.0,
    ]
}

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,12}"
}

fn study() -> impl Strategy<Value = Study> {
    (
        name(),
        prop::collection::vec((real(), real(), prop::option::of(real())), 0..4),
        prop::option::of(real()),
        prop::option::of(real()),
    )
        .prop_map(|(name, rows, observed, required)| Study {
            name,
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(level, (h, error, order))| OrderRow { level, h, error, order })
                .collect(),
            observed,
            required,
        })
}

fn residual() -> impl Strategy<Value = ResidualNorms> {
    (real(), prop::array::uniform5(real()), real()).prop_map(|(t, eqs, mixed_divergence)| {
        ResidualNorms { t, eqs, mixed_divergence }
    })
}

fn record() -> impl Strategy<Value = IterationRecord> {
    (0usize..60, real(), prop::option::of(real()), real(), real()).prop_map(
        |(n, norm, ratio, lower_margin, upper_margin)| IterationRecord {
            n,
            norm,
            ratio,
            lower_margin,
            upper_margin,
            wall_seconds: 0.0,
        },
    )
}

fn rung() -> impl Strategy<Value = LadderRung> {
    (
        real(),
        real(),
        prop::option::of(real()),
        prop::collection::vec(real(), 0..4),
        any::<bool>(),
        prop::option::of("[ -~]{0,30}"),
    )
        .prop_map(|(window, dt, max_ratio, ratios, converged, failure)| LadderRung {
            window,
            dt,
            max_ratio,
            ratios,
            converged,
            failure,
        })
}

fn certificate() -> impl Strategy<Value = Certificate> {
    let head = (
        name(),
        prop::option::of(any::<u64>()),
        any::<bool>(),
        prop::option::of((real(), real(), any::<bool>())),
        prop::collection::vec(record(), 0..4),
        prop::collection::vec(rung(), 0..3),
    );
    let tail = (
        prop::option::of((prop::option::of(real()), prop::option::of(real()), any::<bool>(), any::<bool>())),
        prop::collection::vec(residual(), 0..3),
        prop::collection::vec(study(), 0..3),
        prop::collection::btree_map(name(), real(), 0..5),
        prop::collection::vec((name(), any::<bool>(), "[ -~]{0,40}"), 0..5),
        prop::option::of(prop::collection::vec((name(), 0.0f64..100.0), 0..3)),
    );
    (head, tail).prop_map(
        |((command, seed, with_config, margins, iterations, ladder), (env, residuals, studies, measured, checks, timings))| {
            Certificate {
                command,
                seed,
                config: with_config.then(Config::canonical),
                margins: margins.map(|(lower, upper, holds)| Margins { lower, upper, holds }),
                iterations,
                ladder,
                envelope: env.map(|(c, growth, pass, undefined)| Envelope { c, growth, pass, undefined }),
                residuals,
                studies,
                measured: measured.into_iter().collect::<BTreeMap<_, _>>(),
                checks: checks
                    .into_iter()
                    .map(|(n, pass, detail)| Check::new(&n, pass, detail))
                    .collect(),
                timings: timings.map(|t| {
                    t.into_iter()
                        .map(|(name, seconds)| Timing { name, seconds })
                        .collect()
                }),
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn certificates_round_trip(c in certificate()) {
        let text = c.to_text().unwrap();
        prop_assert!(text.starts_with("# mmbl-certificate v1\n"));
        let back = Certificate::parse(&text, "generated").unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_text().unwrap(), text);
    }
}

#[test]
fn file_round_trip_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/c.cert");
    let mut c = Certificate::new("run");
    c.check("bounds", true, "ok");
    c.check("ladder", false, "no window met the target");
    c.write(&path).unwrap();
    let back = Certificate::read(&path).unwrap();
    assert_eq!(back, c);
    assert!(!back.passed());
    let names: Vec<&str> = back.failures().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["ladder"]);
}

#[test]
fn wall_clock_times_are_not_recorded() {
    let mut c = Certificate::new("run");
    let r = IterationRecord {
        n: 0,
        norm: 1.0,
        ratio: None,
        lower_margin: 0.1,
        upper_margin: 0.2,
        wall_seconds: 3.5,
    };
    c.set_iterations(&[r]);
    assert_eq!(c.iterations[0].wall_seconds, 0.0);
    assert!(!c.to_text().unwrap().contains("wall"));
}
