use std::fs;
use std::path::Path;

use emotype_core::assignment::{assign_profile_m1, assign_subject_m2, build_internal_clusters, fit_typologies};
use emotype_core::data::{load_dataset, validate_dataset, ClassLabel, FeatureSchema, LoadOptions};
use emotype_core::evaluation::{prepare_cohort, run_config1, run_config2, PipelineConfig};
use emotype_core::knn::{KnnGrid, Weighting};
use emotype_core::preprocess::zscore_per_subject;
use emotype_core::profile::subject_profile;
use emotype_core::report::{render_report, ExperimentReport, ReportStyle};
use emotype_core::synth::{generate_cohort, CohortSpec};
use emotype_core::{Error, IcParams, ModelDocument, Result, SearchParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    AssignArgs, ClusterArgs, ClusteringArgs, Command, EvalArgs, MethodChoice, ReportArgs, StyleChoice, SynthArgs,
    ValidateArgs,
};

pub fn run(command: &Command) -> Result<()> {
    let run_config = serde_json::to_value(command)?;
    match command {
        Command::Synth(a) => synth(a, run_config),
        Command::Validate(a) => validate(a),
        Command::Cluster(a) => cluster(a, run_config),
        Command::Assign(a) => assign(a, run_config),
        Command::EvalConfig1(a) => eval(a, run_config, true),
        Command::EvalConfig2(a) => eval(a, run_config, false),
        Command::Report(a) => report(a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn synth(a: &SynthArgs, run_config: Value) -> Result<()> {
    let spec = CohortSpec {
        typology_count: a.typologies,
        subjects_per_typology: a.subjects_per_typology,
        windows_per_class: a.windows_per_class,
        feature_count: a.features,
        class_separation: a.class_separation.clone(),
        typology_separation: a.typology_separation,
        noise_std: a.noise_std,
        label_noise: a.label_noise,
        seed: a.seed,
    };
    let (data, truth) = generate_cohort(&spec)?;
    data.save_csv(&a.out)?;
    write_json(
        &a.truth,
        &json!({ "run_config": run_config, "spec": spec, "typology_of": truth.typology_of }),
    )?;
    println!(
        "wrote {} windows for {} subjects to {}",
        data.len(),
        data.subject_count(),
        a.out.display()
    );
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<()> {
    let data = load_dataset(&a.input, &LoadOptions::training())?;
    let report = validate_dataset(&data, a.min_per_class);
    println!(
        "{:<16}{:>8}{:>10}{:>10}  status",
        "subject", "fear", "non-fear", "unknown"
    );
    for s in &report.subjects {
        let status = if s.flagged { "excluded" } else { "ok" };
        println!(
            "{:<16}{:>8}{:>10}{:>10}  {status}",
            s.subject_id, s.fear, s.non_fear, s.unknown
        );
    }
    println!(
        "{} subjects, {} windows, {} features; {} excluded",
        data.subject_count(),
        data.len(),
        data.feature_count(),
        report.flagged.len()
    );
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn search_params(c: &ClusteringArgs) -> SearchParams {
    SearchParams {
        k_min: c.k_min,
        k_max: c.k_max,
        min_frac: c.min_frac,
    }
}

fn ic_params(c: &ClusteringArgs) -> IcParams {
    IcParams {
        ic_min: c.ic_min,
        ic_max: c.ic_max,
        min_frac: c.ic_min_frac,
    }
}

fn cluster(a: &ClusterArgs, run_config: Value) -> Result<()> {
    let raw = load_dataset(&a.input, &LoadOptions::training())?;
    let cohort = prepare_cohort(&raw, a.clustering.min_per_class)?;
    let typology = fit_typologies(&cohort.profiles, &search_params(&a.clustering))?;
    let internal = build_internal_clusters(&cohort.data, &typology, &ic_params(&a.clustering))?;
    println!(
        "{} typologies from {} subjects (Dunn {}){}",
        typology.k,
        cohort.subject_count(),
        typology
            .search
            .dunn
            .map_or_else(|| "undefined".to_string(), |d| format!("{d:.4}")),
        if typology.is_fallback() {
            ", single-cluster fallback"
        } else {
            ""
        }
    );
    for (tc, members) in typology.member_subjects.iter().enumerate() {
        println!(
            "  TC{tc}: {} subjects, {} internal clusters",
            members.len(),
            internal.tcs[tc].centroids.len()
        );
    }
    let doc = ModelDocument::new(typology, internal, run_config);
    let mut text = doc.to_json()?;
    text.push('\n');
    fs::write(&a.out, text)?;
    Ok(())
}

#[derive(Serialize)]
struct SubjectAssignment {
    subject_id: String,
    method: &'static str,
    tc: usize,
    distances: Vec<f64>,
}

fn assign(a: &AssignArgs, run_config: Value) -> Result<()> {
    let doc = ModelDocument::from_json(&fs::read_to_string(&a.model)?)?;
    let f = doc.typology.feature_count;
    let options = LoadOptions {
        schema: FeatureSchema::Expect(f),
        ..LoadOptions::enrollment()
    };
    let data = load_dataset(&a.input, &options)?;
    let (normalized, _) = zscore_per_subject(&data)?;

    let mut results = Vec::with_capacity(normalized.subject_count());
    for id in normalized.subject_ids() {
        let windows = normalized.subject_observations(id);
        let labeled = windows.iter().all(|o| o.label != ClassLabel::Unknown);
        let use_m1 = match a.method {
            MethodChoice::Auto => labeled,
            MethodChoice::M1 => true,
            MethodChoice::M2 => false,
        };
        let (method, assignment) = if use_m1 {
            let profile = subject_profile(id, windows.iter().copied(), f)?;
            ("M1", assign_profile_m1(&profile, &doc.typology)?)
        } else {
            let features: Vec<&[f64]> = windows.iter().map(|o| o.features.as_slice()).collect();
            ("M2", assign_subject_m2(&features, &doc.internal)?)
        };
        println!("{id}: TC{} via {method}", assignment.tc);
        let label = if use_m1 {
            "centroid distance"
        } else {
            "summed IC distance"
        };
        println!("  {:<6}{label}", "TC");
        for (tc, d) in assignment.distances.iter().enumerate() {
            let mark = if tc == assignment.tc { " *" } else { "" };
            println!("  {:<6}{d:.6}{mark}", format!("TC{tc}"));
        }
        results.push(SubjectAssignment {
            subject_id: id.clone(),
            method,
            tc: assignment.tc,
            distances: assignment.distances,
        });
    }
    if let Some(out) = &a.out {
        write_json(out, &json!({ "run_config": run_config, "assignments": results }))?;
    }
    Ok(())
}

fn pipeline_config(a: &EvalArgs) -> Result<PipelineConfig> {
    if a.knn_k_max == 0 {
        return Err(Error::InvalidConfig("knn-k-max must be at least 1".into()));
    }
    let knn_grid = KnnGrid {
        k_values: (1..=a.knn_k_max).step_by(2).collect(),
        costs: if a.cost_sweep {
            KnnGrid::with_cost_sweep().costs
        } else {
            vec![a.cost]
        },
        weightings: vec![Weighting::Uniform, Weighting::InverseDistance],
    };
    Ok(PipelineConfig {
        seed: a.seed,
        typology: search_params(&a.clustering),
        internal: ic_params(&a.clustering),
        knn_grid,
        tuning_folds: a.tuning_folds,
        folds: a.folds,
        train_frac: a.train_frac,
        min_per_class: a.clustering.min_per_class,
    })
}

fn eval(a: &EvalArgs, run_config: Value, config1: bool) -> Result<()> {
    let config = pipeline_config(a)?;
    let data = load_dataset(&a.input, &LoadOptions::training())?;
    let mut report = if config1 {
        run_config1(&data, &config)?
    } else {
        run_config2(&data, &config)?
    };
    report.run_config = run_config;
    let mut json = report.to_json()?;
    json.push('\n');
    fs::write(&a.out, json)?;
    let table = render_report(&report, ReportStyle::Table)?;
    if let Some(path) = &a.table {
        fs::write(path, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let report = ExperimentReport::from_json(&fs::read_to_string(&a.input)?)?;
    let style = match a.style {
        StyleChoice::Json => ReportStyle::Json,
        StyleChoice::Table => ReportStyle::Table,
    };
    let mut text = render_report(&report, style)?;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    print!("{text}");
    Ok(())
}
