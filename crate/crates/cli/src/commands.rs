use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use resilex_core::catalog::TechniqueCatalog;
use resilex_core::dependence::{train_validate, SplitSpec};
use resilex_core::doc::{
    CAMPAIGN_SCHEMA, CATALOG_SCHEMA, DEPENDENCE_SCHEMA, DESIGN_SCHEMA, ENUMERATION_SCHEMA, PLAN_SCHEMA, PROFILE_SCHEMA,
    REPORT_SCHEMA,
};
use resilex_core::eval::{evaluate as eval_plan, EvaluationReport};
use resilex_core::explore::{
    bound_region, compose_top_down, enumerate_combinations, joint_protect, optimal_protect, pareto_front,
    selective_protect, ParetoPoint, RuleSet, Selection, SelectiveOptions, Strategy, Target, TargetMetric,
};
use resilex_core::sim::{
    assemble, builtin, builtin_names, exhaustive_campaign, pipeline_design, required_sample_size, run_golden,
    sampled_campaign, CampaignEstimate, Confidence, SampleMode, SampleOptions, SimConfig, ToyProgram,
};
use resilex_core::synth::{controlled_overlap_profile, generate_design, DesignParams, OverlapParams, Preset};
use resilex_core::{Benchmark, Error, Metric, VulnerabilityProfile};
use serde::Deserialize;

use crate::io::{write, write_csv, write_doc, Inputs};
use crate::{Depend, Enumerate, Evaluate, Explore, GenDesign, Inject, Plan, Report};

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

pub fn gen_design(a: &GenDesign) -> Result<()> {
    let mut inputs = Inputs::default();
    if a.preset == "toy-pipeline" {
        if a.profile_out.is_some() {
            bail!(Error::InvalidArgument("toy-pipeline profiles come from `inject`".into()));
        }
        let design = resilex_core::sim::builtin_design(&SimConfig::default())?;
        inputs.note("params", "toy-pipeline");
        write_doc(&a.out, &inputs.wrap(DESIGN_SCHEMA, design))?;
        println!("wrote toy-pipeline design to {}", a.out.display());
        return Ok(());
    }
    let seed = a.seed.ok_or_else(|| Error::InvalidArgument("--seed is required for synthetic presets".into()))?;
    let preset: Preset = a.preset.parse()?;
    let mut p = DesignParams::preset(preset, a.ff_count, seed);
    if let Some(v) = &a.adjacency {
        p.adjacency =
            v.as_slice().try_into().map_err(|_| Error::InvalidArgument("--adjacency takes 5 values".into()))?;
    }
    if let Some(v) = &a.stage_weights {
        p.stage_weights =
            v.as_slice().try_into().map_err(|_| Error::InvalidArgument("--stage-weights takes 6 values".into()))?;
    }
    if let Some(f) = a.fast_fraction {
        p.fast_fraction = f;
    }
    if let Some(b) = a.benchmarks {
        p.benchmarks = b;
        p.abft_benchmarks = p.abft_benchmarks.min(b);
    }
    let design = generate_design(&p)?;
    inputs.note("params", &serde_json::to_string(&p)?);
    write_doc(&a.out, &inputs.wrap(DESIGN_SCHEMA, design.clone()))?;
    println!(
        "wrote {} flip-flops, {} benchmarks to {}",
        design.flip_flops.len(),
        design.benchmarks.len(),
        a.out.display()
    );
    if let Some(path) = &a.profile_out {
        let mut o = OverlapParams::new(seed);
        o.dead = a.dead;
        if let Some(n) = a.injections {
            o.injections = n as u64;
        }
        let s = controlled_overlap_profile(&design, &o)?;
        inputs.note("overlap", &serde_json::to_string(&o)?);
        write_doc(path, &inputs.wrap(PROFILE_SCHEMA, s.profile))?;
        println!("wrote profile ({} always-vanish) to {}", s.dead.len(), path.display());
    }
    Ok(())
}

fn load_program(spec: &str, inputs: &mut Inputs) -> Result<ToyProgram> {
    if let Some(p) = builtin(spec) {
        return Ok(p);
    }
    let text = inputs.read(&format!("program:{spec}"), Path::new(spec))?;
    Ok(assemble(&text)?)
}

pub fn inject(a: &Inject) -> Result<()> {
    let mut inputs = Inputs::default();
    let cfg = SimConfig::default();
    let names: Vec<String> = if a.programs.is_empty() {
        builtin_names().into_iter().map(str::to_string).collect()
    } else {
        a.programs.clone()
    };
    let programs = names.iter().map(|n| load_program(n, &mut inputs)).collect::<Result<Vec<_>>>()?;
    let confidence: Confidence = a.confidence.parse()?;
    let mode = match a.mode.as_str() {
        "stratified" => SampleMode::Stratified,
        "random" => SampleMode::Random,
        m => bail!(Error::InvalidArgument(format!("unknown sampling mode `{m}`"))),
    };
    let opts = SampleOptions { mode, confidence };
    let n = match a.samples {
        Some(n) => n,
        None => required_sample_size(a.margin, confidence, 0.5)?,
    };
    inputs.note(
        "campaign",
        &format!("seed={} n={n} exhaustive={} mode={} confidence={}", a.seed, a.exhaustive, a.mode, a.confidence),
    );
    let mut merged: Option<VulnerabilityProfile> = None;
    let mut estimates: Vec<CampaignEstimate> = vec![];
    let mut benches = vec![];
    for (i, p) in programs.iter().enumerate() {
        let profile = if a.exhaustive {
            exhaustive_campaign(p, &cfg)?
        } else {
            let est = sampled_campaign(p, n, a.seed.wrapping_add(i as u64), &opts, &cfg)?;
            let prof = est.profile.clone();
            estimates.push(est);
            prof
        };
        let golden = run_golden(p, &cfg)?;
        benches.push(Benchmark {
            name: p.name.clone(),
            nominal_cycles: golden.nominal_cycles,
            abft_compatible: p.abft_compatible,
        });
        let m = merged.get_or_insert_with(|| VulnerabilityProfile::new(profile.ff_ids.clone()));
        for b in profile.benchmarks {
            m.push_benchmark(b.benchmark, b.counts)?;
        }
        let t = m.benchmarks.last().map(|b| b.counts.iter().fold(0.0, |s, c| s + c.harmful())).unwrap_or(0.0);
        println!("{}: {} harmful outcomes", p.name, t);
    }
    let profile = merged.ok_or_else(|| Error::InvalidArgument("no programs".into()))?;
    if let Some(path) = &a.csv {
        write_csv(path, &inputs, |w| profile.write_csv(w))?;
    }
    write_doc(&a.out, &inputs.wrap(PROFILE_SCHEMA, profile))?;
    if let Some(path) = &a.design_out {
        write_doc(path, &inputs.wrap(DESIGN_SCHEMA, pipeline_design(benches)))?;
    }
    if let Some(path) = &a.campaign_out {
        write_doc(path, &inputs.wrap(CAMPAIGN_SCHEMA, estimates))?;
    }
    Ok(())
}

fn parse_targets(raw: &[String]) -> Result<Vec<Target>> {
    raw.iter().map(|t| t.parse::<Target>().map_err(anyhow::Error::from)).collect()
}

pub fn plan(a: &Plan, catalog: Option<&PathBuf>) -> Result<()> {
    let mut inputs = Inputs::default();
    let cat = inputs.catalog(catalog)?;
    let design = inputs.design(&a.design)?;
    let profile = inputs.profile(&a.profile)?;
    let targets = parse_targets(&a.target)?;
    let strategy: Strategy = a.strategy.parse()?;
    let first = match a.first.as_str() {
        "sdc" => TargetMetric::Sdc,
        "due" => TargetMetric::Due,
        f => bail!(Error::InvalidArgument(format!("--first must be sdc or due, got `{f}`"))),
    };
    let sel = match (a.mode.as_str(), targets.as_slice()) {
        ("greedy", [t]) => selective_protect(
            &profile,
            &design,
            &cat,
            *t,
            &strategy,
            SelectiveOptions { max_improvement: a.max_improvement },
        )?,
        ("greedy", [x, y]) => {
            let finite = |t: &Target| match t.factor {
                resilex_core::explore::Factor::Finite(f) => Ok(f),
                _ => Err(Error::InvalidArgument("joint targets must be finite".into())),
            };
            let (s, d) = match (x.metric, y.metric) {
                (TargetMetric::Sdc, TargetMetric::Due) => (finite(x)?, finite(y)?),
                (TargetMetric::Due, TargetMetric::Sdc) => (finite(y)?, finite(x)?),
                _ => bail!(Error::InvalidArgument("two targets must be one sdc and one due".into())),
            };
            joint_protect(&profile, &design, &cat, s, d, &strategy, first)?
        }
        ("optimal", [t]) => optimal_protect(&profile, &design, &cat, *t, &strategy)?,
        ("top-down", [t]) => {
            compose_top_down(&profile, &design, &cat, &a.high_level, a.recovery.clone(), &strategy, *t)?
        }
        (m, _) if !["greedy", "optimal", "top-down"].contains(&m) => {
            bail!(Error::InvalidArgument(format!("unknown mode `{m}`")))
        }
        _ => bail!(Error::InvalidArgument(format!("mode {} takes one target", a.mode))),
    };
    print_selection(&sel);
    write_doc(&a.out, &inputs.wrap(PLAN_SCHEMA, sel.plan))
}

fn print_selection(s: &Selection) {
    println!(
        "plan {}: {} flip-flops, SDC {}x, DUE {}x, energy +{:.3}%",
        s.plan.name,
        s.plan.per_ff.len(),
        fmt_opt(s.sdc_improvement),
        fmt_opt(s.due_improvement),
        s.energy_pct
    );
}

pub fn evaluate(a: &Evaluate, catalog: Option<&PathBuf>) -> Result<()> {
    let mut inputs = Inputs::default();
    let cat = inputs.catalog(catalog)?;
    let design = inputs.design(&a.design)?;
    let profile = inputs.profile(&a.profile)?;
    let plan = inputs.plan(&a.plan)?;
    let r = eval_plan(&profile, &plan, &cat, &design)?;
    println!(
        "{}: SDC {}x DUE {}x gamma {:.4} area +{:.3}% power +{:.3}% energy +{:.3}% exec +{:.3}%",
        if r.plan.is_empty() { "plan" } else { &r.plan },
        fmt_opt(r.sdc_improvement),
        fmt_opt(r.due_improvement),
        r.gamma,
        r.cost.area_pct,
        r.cost.power_pct,
        r.cost.energy_pct,
        r.cost.exec_time_impact_pct
    );
    if let Some(path) = &a.csv {
        write_csv(path, &inputs, |w| EvaluationReport::write_csv(std::slice::from_ref(&r), w))?;
    }
    if let Some(path) = &a.out {
        write_doc(path, &inputs.wrap(REPORT_SCHEMA, r))?;
    }
    Ok(())
}

/// `DFC;ABFT-correction@EIR`: a `;`-separated technique stack with an optional recovery.
fn parse_stack(s: &str) -> (Vec<String>, Option<String>) {
    let (techs, rec) = match s.split_once('@') {
        Some((t, r)) => (t, Some(r.to_string())),
        None => (s, None),
    };
    (techs.split(';').filter(|t| !t.is_empty()).map(str::to_string).collect(), rec)
}

pub fn explore(a: &Explore, catalog: Option<&PathBuf>) -> Result<()> {
    let mut inputs = Inputs::default();
    let cat = inputs.catalog(catalog)?;
    let design = inputs.design(&a.design)?;
    let profile = inputs.profile(&a.profile)?;
    let targets = parse_targets(&a.targets)?;
    let strategies = a.strategies.iter().map(|s| s.parse::<Strategy>()).collect::<resilex_core::Result<Vec<_>>>()?;
    inputs.note("sweep", &format!("{:?} {:?} {:?}", a.targets, a.strategies, a.high_level));
    let mut reports = vec![];
    let mut skipped = 0;
    let mut run = |label: String, sel: resilex_core::Result<Selection>| -> Result<()> {
        match sel {
            Ok(s) => {
                let mut r = eval_plan(&profile, &s.plan, &cat, &design)?;
                r.plan = label;
                reports.push(r);
            }
            Err(e @ (Error::TargetUnreachable(_) | Error::NotApplicable(_))) => {
                eprintln!("skipped {label}: {e}");
                skipped += 1;
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    };
    for t in &targets {
        let tag = format!("{:?}:{}", t.metric, t.factor).to_lowercase();
        for s in &strategies {
            run(format!("{s}@{tag}"), selective_protect(&profile, &design, &cat, *t, s, SelectiveOptions::default()))?;
        }
        for stack in &a.high_level {
            let (hl, rec) = parse_stack(stack);
            let sel = compose_top_down(&profile, &design, &cat, &hl, rec, &Strategy::leap_dice(), *t);
            run(format!("{stack}+LEAP-DICE@{tag}"), sel)?;
        }
    }
    write_csv(&a.out, &inputs, |w| EvaluationReport::write_csv(&reports, w))?;
    if let Some(path) = &a.front {
        let pts: Vec<ParetoPoint> = reports.iter().filter_map(|r| ParetoPoint::from_report(r, Metric::Sdc)).collect();
        let front = pareto_front(&pts);
        write_csv(path, &inputs, |w| ParetoPoint::write_csv(&front, w))?;
    }
    println!("{} plans evaluated, {skipped} skipped", reports.len());
    Ok(())
}

pub fn enumerate(a: &Enumerate, catalog: Option<&PathBuf>) -> Result<()> {
    let mut inputs = Inputs::default();
    let cat = inputs.catalog(catalog)?;
    let rules = if a.rules == "default" {
        let r = RuleSet::default_rules();
        inputs.note("rules", &r.to_document().to_json()?);
        r
    } else {
        RuleSet::from_json(&inputs.read("rules", Path::new(&a.rules))?)?
    };
    let e = enumerate_combinations(&cat, &rules)?;
    for (core, n) in &e.totals {
        println!("{core} {n}");
    }
    println!("total {}", e.total);
    if let Some(m) = e.matches_published {
        println!("matches published totals: {m}");
    }
    if let Some(path) = &a.out {
        write_doc(path, &inputs.wrap(ENUMERATION_SCHEMA, e))?;
    }
    Ok(())
}

pub fn depend(a: &Depend, catalog: Option<&PathBuf>) -> Result<()> {
    let mut inputs = Inputs::default();
    let cat = inputs.catalog(catalog)?;
    let design = inputs.design(&a.design)?;
    let profile = inputs.profile(&a.profile)?;
    let target: Target = a.target.parse()?;
    let strategy: Strategy = a.strategy.parse()?;
    let split = SplitSpec { pair_count: a.pairs, ..SplitSpec::new(a.train, a.validate, a.seed) };
    let r = train_validate(&profile, &design, &cat, split, target, &strategy)?;
    let missed =
        r.pairs.iter().filter(|p| target.factor.met_by(p.trained) && !target.factor.met_by(p.validated)).count();
    println!(
        "{} pairs: mean trained {:.3}x, validated {:.3}x, underestimate {:.2}%, sign-test p {:.4}, {missed} missed validation",
        r.pairs.len(),
        r.mean_trained,
        r.mean_validated,
        r.mean_underestimate_pct,
        r.p_value
    );
    if let Some(path) = &a.csv {
        write_csv(path, &inputs, |w| r.write_csv(w))?;
    }
    write_doc(&a.out, &inputs.wrap(DEPENDENCE_SCHEMA, r))
}

#[derive(Deserialize)]
struct ReportRow {
    plan_id: String,
    energy_pct: f64,
    sdc_improvement: String,
    due_improvement: String,
}

pub fn report(a: &Report) -> Result<()> {
    let mut inputs = Inputs::default();
    let metric: Metric = a.metric.parse()?;
    let mut points = vec![];
    for (i, path) in a.inputs.iter().enumerate() {
        let text = inputs.read(&format!("report{i}"), path)?;
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        for row in rd.deserialize::<ReportRow>() {
            let row = row.map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
            let raw = match metric {
                Metric::Sdc => &row.sdc_improvement,
                Metric::Due => &row.due_improvement,
                Metric::Combined => bail!(Error::InvalidArgument("report takes --metric sdc or due".into())),
            };
            // Empty cells mean the baseline had no such errors.
            if let Ok(v) = raw.parse::<f64>() {
                points.push(ParetoPoint::new(row.plan_id, row.energy_pct, v));
            }
        }
    }
    if points.is_empty() {
        bail!(Error::InvalidArgument("no report rows with that metric".into()));
    }
    let front = pareto_front(&points);
    write_csv(&a.out, &inputs, |w| ParetoPoint::write_csv(&front, w))?;
    if let Some(path) = &a.bound {
        let mut buf = inputs.csv_banner();
        buf.push_str("energy_pct,improvement\n");
        for (e, v) in bound_region(&points) {
            buf.push_str(&format!("{e},{v}\n"));
        }
        write(path, buf.as_bytes())?;
    }
    println!("{} points, {} on the front", points.len(), front.len());
    Ok(())
}

pub fn catalog_dump(out: Option<&PathBuf>, catalog: Option<&PathBuf>) -> Result<()> {
    let mut inputs = Inputs::default();
    let cat: TechniqueCatalog = inputs.catalog(catalog)?;
    let mut doc = inputs.wrap(CATALOG_SCHEMA, cat);
    // The built-in catalog is not an input of its own dump.
    if catalog.is_none() && std::env::var_os(crate::io::CATALOG_ENV).is_none() {
        doc.inputs.clear();
    }
    let text = doc.to_json()?;
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
