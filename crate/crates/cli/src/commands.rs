use std::f64::consts::PI;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use freedens::densities::ENUMERATION_LIMIT;
use freedens::spectrum::first_oracle_mismatch;
use freedens::*;
use std::result::Result;

use crate::report::{Cell, PlotSpec, Report};
use crate::{
    Context, Failure, GcdArgs, LatticeArgs, LatticeMethod, LltArgs, OracleArgs, SampleArgs, SampleMode,
    SeriesArgs, Target, TestArgs, TestMethod, ZetaArgs,
};

type Outcome = Result<Report, Failure>;

const THEORY_EPS: f64 = 1e-12;

fn plot(x: &str, y: &[&str], title: String, reference: Option<(String, f64)>) -> Option<PlotSpec> {
    Some(PlotSpec {
        x: x.into(),
        y: y.iter().map(|s| s.to_string()).collect(),
        title,
        reference,
        log_y: false,
    })
}

/// Runs `f`, reporting its wall time on stderr.
fn timed<T>(what: &str, f: impl FnOnce() -> T) -> T {
    eprint!("freedens: {what} ... ");
    let start = Instant::now();
    let out = f();
    eprintln!("{:.2}s", start.elapsed().as_secs_f64());
    out
}

fn table(ctx: &Context, k: usize, n_max: usize) -> Result<CountTable, Failure> {
    Ok(timed(&format!("count table k={k} n<={n_max}"), || {
        build_count_table_with_budget(k, n_max, ctx.budget)
    })?)
}

fn value_name(v: impl clap::ValueEnum) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn f64_of(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn lattice_density(ctx: &Context, a: &LatticeArgs) -> Outcome {
    let set = match (a.t, &a.set) {
        (Some(t), _) => GcdClassSet::exactly(t),
        (None, Some(set)) => set.clone(),
        (None, None) => GcdClassSet::visible(),
    };
    if a.even_visible && a.k != 2 {
        return Err(Failure::Usage("--even-visible needs k = 2".into()));
    }
    if a.method == LatticeMethod::Mobius && (a.norm != Norm::LInf || a.even_visible) {
        return Err(Failure::Usage("--method mobius counts L∞ balls by gcd class only".into()));
    }
    let (target, theory) = if a.even_visible {
        ("even visible".to_string(), 2.0 / (PI * PI))
    } else {
        (set.to_string(), gcd_class_set_density(a.k, &set, THEORY_EPS)?)
    };
    let mut report = Report::new(
        ctx.config(&[
            ("command", "lattice-density".into()),
            ("k", a.k.to_string()),
            ("set", target.clone()),
            ("norm", format!("{:?}", a.norm)),
            ("method", value_name(a.method)),
        ]),
        ["r", "hits", "total", "density", "theory", "error"],
    );
    for &r in &a.r {
        let count = timed(&format!("lattice scan r={r}"), || {
            if a.even_visible {
                even_visible_density(a.k, r).map(|(c, _)| c)
            } else if a.method == LatticeMethod::Mobius {
                if r < 0.0 || r.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!("--method mobius needs integer radii, got {r}")));
                }
                count_in_linf_ball_mobius(a.k, r as u64, &set)
            } else {
                count_in_ball(a.k, a.norm, r, &set)
            }
        })?;
        report.push(vec![
            Cell::Float(r),
            Cell::int(count.hits),
            Cell::int(count.total),
            Cell::ratio_u64(count.hits, count.total),
            Cell::Float(theory),
            Cell::Float((count.density_f64() - theory).abs()),
        ]);
    }
    report.plot = plot("r", &["density"], format!("density of {target}, k={}", a.k), Some(("limit".into(), theory)));
    Ok(report)
}

pub fn zeta(ctx: &Context, a: &ZetaArgs) -> Outcome {
    let mut report = Report::new(
        ctx.config(&[("command", "zeta".into()), ("eps", format!("{:e}", a.eps))]),
        ["k", "zeta", "visible_density"],
    );
    for &k in &a.k {
        let z = freedens::zeta(k, a.eps)?;
        report.push(vec![Cell::int(k), Cell::Float(z), Cell::Float(1.0 / z)]);
    }
    report.plot = plot("k", &["zeta"], "zeta(k)".into(), Some(("1".into(), 1.0)));
    Ok(report)
}

fn series_limit(k: usize, target: &Target) -> Result<f64, Failure> {
    Ok(match target {
        Target::Classes(set) => gcd_class_set_density(k, set, THEORY_EPS)?,
        Target::TestElements => 1.0 - 6.0 / (PI * PI),
    })
}

fn series_for(ctx: &Context, k: usize, target: &Target, n_max: usize) -> Result<DensitySeries, Failure> {
    if n_max < 1 {
        return Err(Failure::Usage("--n-max must be at least 1".into()));
    }
    let t = table(ctx, k, n_max)?;
    Ok(match target {
        Target::Classes(set) => spherical_series(&t, set, n_max)?,
        Target::TestElements => {
            if k != 2 {
                return Err(Failure::Usage("test elements are classified only for k = 2".into()));
            }
            timed("test-element series", || test_element_series_hybrid(&t, n_max, ctx.budget))?
        }
    })
}

const SERIES_COLUMNS: [&str; 8] = ["n", "hits", "sphere", "spherical", "annular", "ball", "limit", "annular_error"];

fn series_row(p: &SeriesPoint, limit: f64) -> Vec<Cell> {
    let annular = p.annular.as_ref();
    vec![
        Cell::int(p.n),
        Cell::int(&p.hits),
        Cell::int(&p.sphere),
        Cell::ratio(&p.hits, &p.sphere),
        annular.map_or(Cell::Missing, Cell::rational),
        Cell::rational(&p.ball),
        Cell::Float(limit),
        annular.map_or(Cell::Missing, |q| Cell::Float((f64_of(q) - limit).abs())),
    ]
}

pub fn group_series(ctx: &Context, a: &SeriesArgs) -> Outcome {
    let limit = series_limit(a.k, &a.set)?;
    let series = series_for(ctx, a.k, &a.set, a.n_max)?;
    let mut report = Report::new(
        ctx.config(&[
            ("command", "group-series".into()),
            ("k", a.k.to_string()),
            ("set", a.set.to_string()),
            ("n_max", a.n_max.to_string()),
            ("every", a.every.to_string()),
        ]),
        SERIES_COLUMNS,
    );
    for p in &series.points {
        if (p.n as u64).is_multiple_of(a.every) || p.n == a.n_max {
            report.push(series_row(p, limit));
        }
    }
    report.plot = plot(
        "n",
        &["spherical", "annular"],
        format!("{} in F_{}", a.set, a.k),
        Some(("limit".into(), limit)),
    );
    Ok(report)
}

pub fn test_elements(ctx: &Context, a: &TestArgs) -> Outcome {
    if let Some(delta) = a.bounds_delta {
        let (lo, hi) = compare_bounds(a.k, delta)?;
        let mut report = Report::new(
            ctx.config(&[("command", "test-elements".into()), ("mode", "bounds".into())]),
            ["k", "delta", "lower", "upper"],
        );
        report.push(vec![Cell::int(a.k), Cell::Float(delta), Cell::Float(lo), Cell::Float(hi)]);
        return Ok(report);
    }
    if !a.word.is_empty() {
        let mut report = Report::new(
            ctx.config(&[("command", "test-elements".into()), ("mode", "words".into())]),
            ["word", "reduced", "length", "image", "is_test", "reason", "root", "exponent", "root_class"],
        );
        for text in &a.word {
            let w = Word::parse(2, text)?;
            let image = format!("{:?}", abelianize(&w).coords());
            let verdict = if w.is_identity() { None } else { Some(is_test_element_rank2(&w)?) };
            report.push(match verdict {
                Some(v) => vec![
                    Cell::text(text.as_str()),
                    Cell::text(w.to_string()),
                    Cell::int(w.len()),
                    Cell::text(image),
                    Cell::Bool(v.is_test),
                    Cell::text(format!("{:?}", v.reason)),
                    Cell::text(v.root.to_string()),
                    Cell::int(v.exponent),
                    Cell::text(v.root_class.to_string()),
                ],
                // the identity is fixed by the trivial endomorphism
                None => vec![
                    Cell::text(text.as_str()),
                    Cell::text(w.to_string()),
                    Cell::int(0),
                    Cell::text(image),
                    Cell::Bool(false),
                    Cell::text("Identity"),
                    Cell::Missing,
                    Cell::Missing,
                    Cell::text("inf"),
                ],
            });
        }
        return Ok(report);
    }
    let n_max = a.n_max.expect("clap requires one mode");
    let limit = 1.0 - 6.0 / (PI * PI);
    let series = match a.method {
        TestMethod::Hybrid => series_for(ctx, 2, &Target::TestElements, n_max)?,
        TestMethod::Exact => timed("enumerating spheres", || test_element_series_exact(n_max))?,
    };
    let mut columns = SERIES_COLUMNS.to_vec();
    columns.push("proper_powers");
    let mut report = Report::new(
        ctx.config(&[
            ("command", "test-elements".into()),
            ("mode", "series".into()),
            ("method", value_name(a.method)),
            ("n_max", n_max.to_string()),
        ]),
        columns,
    );
    for p in &series.points {
        let mut row = series_row(p, limit);
        row.push(Cell::int(proper_power_count(2, p.n)));
        report.push(row);
    }
    report.plot = plot(
        "n",
        &["spherical", "annular"],
        "test elements in F_2".into(),
        Some(("1 - 6/pi^2".into(), limit)),
    );
    Ok(report)
}

pub fn llt_check(ctx: &Context, a: &LltArgs) -> Outcome {
    if let Some(n) = a.dump_counts {
        let t = table(ctx, a.k, n)?;
        let mut columns: Vec<String> = (1..=a.k).map(|i| format!("z_{i}")).collect();
        columns.extend(["count".to_string(), "fraction".to_string()]);
        let mut report = Report::new(
            ctx.config(&[("command", "llt-check".into()), ("k", a.k.to_string()), ("dump_counts", n.to_string())]),
            columns,
        );
        let sphere = t.sphere(n);
        for (z, c) in t.entries(n) {
            let mut row: Vec<Cell> = z.coords().iter().map(Cell::int).collect();
            row.push(Cell::int(&c));
            row.push(Cell::ratio(&c, sphere));
            report.push(row);
        }
        return Ok(report);
    }
    let n_max = a.n.iter().copied().max().ok_or_else(|| Failure::Usage("--n is empty".into()))?;
    let sigma2 = a.sigma2.unwrap_or_else(|| default_sigma2(a.k));
    let t = table(ctx, a.k, n_max)?;
    let mut report = Report::new(
        ctx.config(&[
            ("command", "llt-check".into()),
            ("k", a.k.to_string()),
            ("n", format!("{:?}", a.n)),
            ("sigma2", sigma2.to_string()),
            ("tail_c", a.tail_c.map_or("none".into(), |c| c.to_string())),
        ]),
        ["n", "sup_error", "second_moment", "second_moment_per_n", "limit_per_n", "tail_mass"],
    );
    let limit = a.k as f64 / (a.k as f64 - 1.0);
    for &n in &a.n {
        let err = llt_sup_error(&t, n, sigma2)?;
        let m = second_moment(&t, n)?;
        let tail = match a.tail_c {
            Some(c) => Cell::rational(&tail_mass(&t, n, c)?),
            None => Cell::Missing,
        };
        report.push(vec![
            Cell::int(n),
            Cell::Float(err),
            Cell::rational(&m),
            Cell::Float(f64_of(&m) / n as f64),
            Cell::Float(limit),
            tail,
        ]);
    }
    report.plot = Some(PlotSpec {
        log_y: true,
        ..plot("n", &["sup_error"], format!("local limit error, k={}", a.k), None).expect("some")
    });
    Ok(report)
}

pub fn expected_gcd(ctx: &Context, a: &GcdArgs) -> Outcome {
    if a.n_max < 1 {
        return Err(Failure::Usage("--n-max must be at least 1".into()));
    }
    let t = table(ctx, a.k, a.n_max)?;
    let mut report = Report::new(
        ctx.config(&[("command", "expected-gcd".into()), ("k", a.k.to_string()), ("n_max", a.n_max.to_string())]),
        ["n", "sphere_mean", "annular"],
    );
    for e in expected_gcd_series(&t, a.n_max)? {
        report.push(vec![
            Cell::int(e.n),
            Cell::rational(&e.sphere_mean),
            e.annular.as_ref().map_or(Cell::Missing, Cell::rational),
        ]);
    }
    report.plot = plot("n", &["annular"], format!("mean gcd, k={}", a.k), None);
    Ok(report)
}

fn in_target(target: &Target, w: &Word) -> bool {
    match target {
        Target::Classes(set) => set.contains(gcd_class(abelianize(w).coords())),
        Target::TestElements => !w.is_identity() && is_test_element_rank2(w).expect("rank 2").is_test,
    }
}

/// Exact value of the quantity a sampling mode estimates.
fn exact_value(ctx: &Context, a: &SampleArgs) -> Result<BigRational, Failure> {
    let series = series_for(ctx, a.k, &a.set, a.n.max(1))?;
    match a.mode {
        SampleMode::Annular => Ok(series.point(a.n).and_then(|p| p.annular.clone()).expect("n >= 2")),
        SampleMode::BallExperiment => {
            let identity = in_target(&a.set, &Word::identity(a.k));
            let mut sum = BigRational::from_integer(u8::from(identity).into());
            for p in series.points.iter().take(a.n) {
                sum += &p.spherical;
            }
            Ok(sum / BigRational::from_integer((a.n + 1).into()))
        }
    }
}

fn ball_experiment(a: &SampleArgs, seed: u64) -> SampleEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..a.samples)
        .filter(|_| in_target(&a.set, &sample_ball_experiment(a.k, a.n, &mut rng)))
        .count();
    let p = hits as f64 / a.samples as f64;
    SampleEstimate {
        n: a.n,
        samples: a.samples,
        estimate: p,
        se: (p * (1.0 - p) / a.samples as f64).sqrt(),
        seed,
        predicate: a.set.to_string(),
    }
}

pub fn sample(ctx: &Context, a: &SampleArgs) -> Outcome {
    if a.mode == SampleMode::BallExperiment && a.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    if matches!(a.set, Target::TestElements) && a.k != 2 {
        return Err(Failure::Usage("test elements are classified only for k = 2".into()));
    }
    if a.mode == SampleMode::Annular && a.n < 2 {
        return Err(Failure::Usage("annular estimates need n >= 2".into()));
    }
    let exact = if a.exact { Some(exact_value(ctx, a)?) } else { None };
    let mut report = Report::new(
        ctx.config(&[
            ("command", "sample".into()),
            ("k", a.k.to_string()),
            ("n", a.n.to_string()),
            ("set", a.set.to_string()),
            ("mode", value_name(a.mode)),
            ("samples", a.samples.to_string()),
            ("seed", a.seed.to_string()),
            ("repeat", a.repeat.to_string()),
        ]),
        ["seed", "n", "samples", "estimate", "se", "exact", "z_score"],
    );
    let target = match &a.set {
        Target::Classes(set) => AnnularTarget::Lattice(set.clone()),
        Target::TestElements => AnnularTarget::TestElements,
    };
    for seed in a.seed..a.seed + a.repeat {
        let est = timed(&format!("sampling seed {seed}"), || match a.mode {
            SampleMode::Annular => mc_annular_estimate(a.k, a.n, &target, a.samples, seed),
            SampleMode::BallExperiment => Ok(ball_experiment(a, seed)),
        })?;
        let (exact_cell, z) = match &exact {
            Some(q) => {
                let v = f64_of(q);
                let z = if est.se > 0.0 { Cell::Float((est.estimate - v) / est.se) } else { Cell::Missing };
                (Cell::rational(q), z)
            }
            None => (Cell::Missing, Cell::Missing),
        };
        report.push(vec![
            Cell::int(seed),
            Cell::int(est.n),
            Cell::int(est.samples),
            Cell::Float(est.estimate),
            Cell::Float(est.se),
            exact_cell,
            z,
        ]);
    }
    report.plot = plot("seed", &["estimate"], format!("estimates of {} at n={}", a.set, a.n), None);
    Ok(report)
}

pub fn oracle_check(ctx: &Context, a: &OracleArgs) -> Outcome {
    let words = ball_size(a.k, a.n_max);
    let limit = BigUint::from(ENUMERATION_LIMIT);
    if words > limit {
        return Err(Failure::Lib(Error::Budget {
            what: format!("enumerating the ball of radius {} in F_{}", a.n_max, a.k),
            needed: words.to_u128().unwrap_or(u128::MAX),
            budget: ENUMERATION_LIMIT.into(),
            unit: "words",
        }));
    }
    let t = table(ctx, a.k, a.n_max)?;
    let mut report = Report::new(
        ctx.config(&[("command", "oracle-check".into()), ("k", a.k.to_string()), ("n_max", a.n_max.to_string())]),
        ["n", "words", "points", "status", "detail"],
    );
    let mut ok = true;
    for n in 0..=a.n_max {
        let mismatch = first_oracle_mismatch(&t, n);
        ok &= mismatch.is_none();
        let points = t.entries(n).len();
        report.push(vec![
            Cell::int(n),
            Cell::int(t.sphere(n)),
            Cell::int(points),
            Cell::text(if mismatch.is_none() { "match" } else { "mismatch" }),
            match mismatch {
                Some((z, got, want)) => Cell::text(format!("z={:?} table={got} enumeration={want}", z.coords())),
                None => Cell::text(""),
            },
        ]);
    }
    if ok {
        Ok(report)
    } else {
        Err(Failure::Check(Box::new(report)))
    }
}
