use std::path::Path;

use anyhow::{bail, Context, Result};
use survcash::cashflow::{price_trust, DepreciationCurve, Portfolio};
use survcash::ingest::{
    derive_observations, estimate_depreciation, parse_portfolio, smooth_depreciation, Derivation,
    LeaseRecord, SmoothingMethod,
};
use survcash::montecarlo::{simulate_apv_distribution, simulate_trust, SimulationConfig};
use survcash::studies::{asymptotics_study, cte_study, theorem1_study};
use survcash::survival::{estimate_hazard, HazardModel, SupportWindow};

use crate::manifest::{read_input, write_output, RunManifest};
use crate::{
    FitArgs, Outcome, PriceArgs, PricingInputs, SimulateArgs, Study, TailOption, ValidateArgs,
};

fn load_records(manifest: &mut RunManifest, path: &Path) -> Result<Vec<LeaseRecord>> {
    let bytes = read_input(manifest, path)?;
    match parse_portfolio(&bytes[..]) {
        Ok(records) => Ok(records),
        Err(survcash::Error::Data(problems)) => {
            for p in &problems {
                eprintln!("{}: {p}", path.display());
            }
            bail!(
                "{} rejected with {} data error(s)",
                path.display(),
                problems.len()
            )
        }
        Err(e) => Err(e).with_context(|| format!("parsing {}", path.display())),
    }
}

fn report_derivation(d: &Derivation) {
    eprintln!(
        "observations: {} events, {} censored, {} excluded; {} active leases priceable",
        d.event_count(),
        d.censored_count(),
        d.excluded().count(),
        d.active.len()
    );
    for (id, reason) in d.excluded() {
        eprintln!("excluded {id}: {reason}");
    }
}

fn json_bytes(text: String) -> Vec<u8> {
    let mut bytes = text.into_bytes();
    bytes.push(b'\n');
    bytes
}

pub fn fit(args: FitArgs) -> Result<()> {
    let w = &args.window;
    let window = SupportWindow::new(w.delta, w.m, w.omega, w.epsilon)?;
    let mut manifest = RunManifest::new("fit");
    manifest.window = Some(window);
    manifest.option("tail", format!("{:?}", args.tail).to_lowercase());
    manifest.option("interpolate_zeros", args.interpolate_zeros);
    if let Some(term) = args.scheduled_term {
        manifest.option("scheduled_term", term);
    }

    let records = load_records(&mut manifest, &args.portfolio)?;
    let derivation = derive_observations(&records, &window, args.scheduled_term);
    report_derivation(&derivation);
    if !window.censoring_enabled() {
        eprintln!(
            "note: epsilon {} lies beyond m + omega; no censored observations are possible",
            window.epsilon()
        );
    }

    let mut model = estimate_hazard(&derivation.observations, &window)?;
    if !model.unobserved().is_empty() {
        eprintln!("warning: empty risk set at ages {:?}", model.unobserved());
    }
    if args.interpolate_zeros {
        model = model.interpolate_zero_hazards()?;
        if !model.interpolated().is_empty() {
            eprintln!(
                "interpolated zero hazards at ages {:?}",
                model.interpolated()
            );
        }
    }
    if args.tail == TailOption::Geometric {
        model = model.extend_tail_geometric()?;
    }
    write_output(&mut manifest, &args.output, &json_bytes(model.to_json()?))?;

    if let Some(curve_path) = &args.curve_out {
        manifest.option("span", args.span);
        let kept: Vec<LeaseRecord> = records
            .iter()
            .filter(|r| args.scheduled_term.is_none_or(|t| r.scheduled_term == t))
            .cloned()
            .collect();
        let points = estimate_depreciation(&kept)?;
        for p in points.iter().filter(|p| p.flagged) {
            eprintln!(
                "warning: residual ratio {:.3} at age {} exceeds 1.5",
                p.ratio, p.age
            );
        }
        let smoothed = smooth_depreciation(&points, args.span, 0..=window.omega())?;
        if smoothed.method == SmoothingMethod::LinearFallback {
            eprintln!(
                "warning: only {} depreciation ages observed; curve is linearly interpolated",
                points.len()
            );
        }
        let mut buf = Vec::new();
        smoothed.curve.write_csv(&mut buf)?;
        write_output(&mut manifest, curve_path, &buf)?;
    }
    manifest.write()?;
    println!(
        "fitted {} hazards on ages {}..={} from {} observations",
        model.hazards().len(),
        model.first_age(),
        model.last_age(),
        model.n()
    );
    Ok(())
}

struct Loaded {
    model: HazardModel,
    portfolio: Portfolio,
    curve: DepreciationCurve,
}

fn load_pricing_inputs(manifest: &mut RunManifest, inputs: &PricingInputs) -> Result<Loaded> {
    let hazard = read_input(manifest, &inputs.hazard)?;
    let model =
        HazardModel::from_json(std::str::from_utf8(&hazard).context("hazard file is not UTF-8")?)
            .with_context(|| format!("loading {}", inputs.hazard.display()))?;
    manifest.window = Some(*model.window());
    let records = load_records(manifest, &inputs.portfolio)?;
    let curve_bytes = read_input(manifest, &inputs.curve)?;
    let curve = DepreciationCurve::read_csv(&curve_bytes[..])
        .with_context(|| format!("loading {}", inputs.curve.display()))?;

    let derivation = derive_observations(&records, model.window(), inputs.scheduled_term);
    report_derivation(&derivation);
    if derivation.active.is_empty() {
        bail!(
            "no active leases to price at month {}",
            model.window().epsilon()
        );
    }
    let portfolio = derivation.portfolio()?;

    manifest.rate = Some(inputs.rate);
    manifest.alpha = Some(inputs.alpha);
    manifest.option("tail_direction", inputs.tail_direction);
    if let Some(term) = inputs.scheduled_term {
        manifest.option("scheduled_term", term);
    }
    Ok(Loaded {
        model,
        portfolio,
        curve,
    })
}

pub fn price(args: PriceArgs) -> Result<()> {
    let mut manifest = RunManifest::new("price");
    let inp = &args.inputs;
    let Loaded {
        model,
        portfolio,
        curve,
    } = load_pricing_inputs(&mut manifest, inp)?;
    let report = price_trust(&portfolio, &model, &curve, inp.rate)?
        .with_cte(inp.alpha, inp.tail_direction)?;
    write_output(&mut manifest, &args.output, &json_bytes(report.to_json()?))?;
    manifest.write()?;
    let doc = report.to_document();
    println!(
        "apv {:.2}  sd {:.2}  cte({}, {}) {:.2}  over {} leases",
        doc.apv_trust,
        doc.sd_trust,
        inp.alpha,
        inp.tail_direction,
        doc.cte.unwrap_or(f64::NAN),
        doc.contracts.len()
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    let inp = &args.inputs;
    let Loaded {
        model,
        portfolio,
        curve,
    } = load_pricing_inputs(&mut manifest, inp)?;
    manifest.seed = Some(args.seed);
    manifest.replicates = Some(args.replicates);
    manifest.option("horizon", args.horizon);
    manifest.option("random_hazard", args.random_hazard);

    let config = SimulationConfig {
        replicates: args.replicates,
        seed: args.seed,
        horizon: args.horizon,
        random_hazard: args.random_hazard,
        alpha: inp.alpha,
        tail: inp.tail_direction,
        ..Default::default()
    };
    let bands = simulate_trust(&portfolio, &model, &curve, &config).map_err(|e| match e {
        survcash::Error::UndefinedVariance(ages) => anyhow::anyhow!(
            "--random-hazard needs a defined variance at every observed age; empty risk set at ages {ages:?}"
        ),
        other => other.into(),
    })?;
    let empirics = simulate_apv_distribution(&portfolio, &model, &curve, inp.rate, &config)?;

    let mut buf = Vec::new();
    bands.write_csv(&mut buf)?;
    write_output(&mut manifest, &args.bands, &buf)?;
    write_output(
        &mut manifest,
        &args.empirics,
        &json_bytes(empirics.to_json()?),
    )?;
    manifest.write()?;
    println!(
        "{} replicates: mean {:.2}  sd {:.2}  cte {:.2}",
        args.replicates, empirics.mean, empirics.sd, empirics.cte
    );
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("validate");
    manifest.seed = Some(args.seed);
    let (name, report) = match args.study {
        Study::Theorem1 => {
            let reps = args.replicates.unwrap_or(1_000_000);
            manifest.replicates = Some(reps);
            ("theorem1", theorem1_study(reps, args.seed)?)
        }
        Study::Asymptotics => {
            let reps = args.replicates.unwrap_or(2_000);
            manifest.replicates = Some(reps);
            manifest.option("n", args.n);
            ("asymptotics", asymptotics_study(args.n, reps, args.seed)?)
        }
        Study::Cte => {
            let reps = args.replicates.unwrap_or(100_000);
            manifest.replicates = Some(reps);
            ("cte", cte_study(reps, args.seed)?)
        }
    };
    manifest.option("study", name);
    write_output(&mut manifest, &args.output, &json_bytes(report.to_json()?))?;
    if let Some(replication) = &report.replication {
        let csv_path = args
            .csv
            .clone()
            .unwrap_or_else(|| args.output.with_extension("csv"));
        let mut buf = Vec::new();
        replication.write_csv(&mut buf)?;
        write_output(&mut manifest, &csv_path, &buf)?;
    }
    manifest.write()?;

    for c in &report.checks {
        println!(
            "{} {:<34} value {:<14.6} target {:<14.6} tolerance {:.6}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.tolerance
        );
    }
    Ok(if report.passed() {
        Outcome::Ok
    } else {
        Outcome::ToleranceFailure
    })
}
