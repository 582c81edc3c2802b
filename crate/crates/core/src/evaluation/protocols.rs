use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pipeline::{derive_seed, prepare_cohort, train_system, PipelineConfig, PreparedCohort, TrainedSystem};
use super::{compute_metrics, Metrics, MetricsSummary};
use crate::assignment::{assign_profile_m1, assign_subject_m2};
use crate::data::{ClassLabel, Dataset};
use crate::error::{Error, Result};
use crate::knn::TrainedKnn;
use crate::report::{
    AggregateRow, ExperimentReport, FoldRecord, FoldTcMetrics, MethodMetrics, Methodology, Protocol, TcRow,
    REPORT_SCHEMA_VERSION,
};

const SPLIT_STREAM: u64 = 10 << 32;
const TRAIN_STREAM: u64 = 11 << 32;
const TEST_NORMALIZATION: &str = "test subjects are Z-scored with statistics of their own full recording";

/// Predictions and truths for the pooled windows of `subjects`.
fn predict_subjects(model: &TrainedKnn, cohort: &PreparedCohort, subjects: &[usize]) -> Result<Option<Metrics>> {
    if subjects.is_empty() {
        return Ok(None);
    }
    let mut preds = Vec::new();
    let mut truths: Vec<ClassLabel> = Vec::new();
    for &s in subjects {
        for w in cohort.windows_of(s) {
            preds.push(model.predict(w)?);
        }
        truths.extend(cohort.labels_of(s));
    }
    compute_metrics(&preds, &truths).map(Some)
}

fn leakage(train: &[usize], test: &[usize]) -> usize {
    let train: BTreeSet<_> = train.iter().collect();
    test.iter().filter(|s| train.contains(s)).count()
}

fn names(cohort: &PreparedCohort, subjects: &[usize]) -> Vec<String> {
    subjects.iter().map(|&s| cohort.data.subject_ids()[s].clone()).collect()
}

/// M1 and M2 TC for each test subject.
fn enroll(system: &TrainedSystem, cohort: &PreparedCohort, test: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut m1 = Vec::with_capacity(test.len());
    let mut m2 = Vec::with_capacity(test.len());
    for &s in test {
        m1.push(assign_profile_m1(&cohort.profiles.rows[s], &system.typology)?.tc);
        m2.push(assign_subject_m2(&cohort.windows_of(s), &system.internal)?.tc);
    }
    Ok((m1, m2))
}

fn method_metrics(methodology: Methodology, metrics: Metrics) -> MethodMetrics {
    MethodMetrics { methodology, metrics }
}

fn agreement_of(record: &FoldRecord) -> f64 {
    let same = record
        .m1_assignments
        .iter()
        .zip(&record.m2_assignments)
        .filter(|(a, b)| a == b)
        .count();
    same as f64 / record.test_subjects.len() as f64
}

fn fold_metric(record: &FoldRecord, m: Methodology) -> Metrics {
    record
        .metrics
        .iter()
        .find(|r| r.methodology == m)
        .expect("every fold scores every methodology")
        .metrics
}

fn config1_fold(cohort: &PreparedCohort, config: &PipelineConfig, fold: usize) -> Result<FoldRecord> {
    let n = cohort.subject_count();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SPLIT_STREAM + fold as u64));
    order.shuffle(&mut rng);
    let n_train = ((config.train_frac * n as f64).round() as usize).clamp(2, n - 1);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let leakage_violations = leakage(&train, &test);
    assert_eq!(leakage_violations, 0, "train/test subject overlap");

    let system = train_system(
        cohort,
        &train,
        config,
        derive_seed(config.seed, TRAIN_STREAM + fold as u64),
    )?;
    let (m1, m2) = enroll(&system, cohort, &test)?;
    let k = system.typology.k;
    let sizes: Vec<usize> = system.typology.member_subjects.iter().map(Vec::len).collect();
    let mut ranked: Vec<usize> = (0..k).collect();
    ranked.sort_by_key(|&tc| (std::cmp::Reverse(sizes[tc]), tc));

    let mut metrics = vec![method_metrics(
        Methodology::Baseline,
        predict_subjects(&system.baseline, cohort, &test)?.expect("test set is non-empty"),
    )];
    let mut tc_metrics = Vec::new();
    for (method, assigned) in [(Methodology::M1, &m1), (Methodology::M2, &m2)] {
        for (rank, &tc) in ranked.iter().enumerate() {
            let routed = |to_tc: bool| -> Vec<usize> {
                test.iter()
                    .zip(assigned.iter())
                    .filter(|&(_, &a)| (a == tc) == to_tc)
                    .map(|(&s, _)| s)
                    .collect()
            };
            let (inside, outside) = (routed(true), routed(false));
            let model = &system.tc_models[tc];
            tc_metrics.push(FoldTcMetrics {
                method,
                cluster: rank + 1,
                tc,
                train_subjects: sizes[tc],
                robustness: if k > 1 {
                    predict_subjects(model, cohort, &outside)?
                } else {
                    None
                },
                clustering_model: predict_subjects(model, cohort, &inside)?,
            });
        }
        let mut preds = Vec::new();
        let mut truths = Vec::new();
        for (&s, &tc) in test.iter().zip(assigned) {
            for w in cohort.windows_of(s) {
                preds.push(system.tc_models[tc].predict(w)?);
            }
            truths.extend(cohort.labels_of(s));
        }
        metrics.push(method_metrics(method, compute_metrics(&preds, &truths)?));
    }

    Ok(FoldRecord {
        index: fold,
        train_subjects: names(cohort, &train),
        test_subjects: names(cohort, &test),
        typology_count: k,
        fallback: system.typology.is_fallback(),
        m1_assignments: m1,
        m2_assignments: m2,
        leakage_violations,
        metrics,
        tc_metrics,
    })
}

fn base_report(protocol: Protocol, cohort: &PreparedCohort, config: &PipelineConfig, unit: &str) -> ExperimentReport {
    ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        protocol,
        seed: config.seed,
        pipeline: config.clone(),
        run_config: serde_json::Value::Null,
        subject_count: cohort.subject_count(),
        excluded_subjects: cohort.excluded.clone(),
        aggregation_unit: unit.into(),
        test_normalization: TEST_NORMALIZATION.into(),
        fold_count: 0,
        fallback_folds: 0,
        per_tc: Vec::new(),
        aggregate: Vec::new(),
        agreement: None,
        folds: Vec::new(),
    }
}

fn aggregate_rows(baseline: &[Metrics], m1: &[Metrics], m2: &[Metrics]) -> Vec<AggregateRow> {
    [
        (Methodology::Baseline, baseline),
        (Methodology::M1, m1),
        (Methodology::M2, m2),
    ]
    .into_iter()
    .filter_map(|(methodology, values)| MetricsSummary::of(values).map(|metrics| AggregateRow { methodology, metrics }))
    .collect()
}

/// Repeated subject-level train/test splits (default 20 folds of 70/30).
///
/// Per fold: typologies and one tuned KNN per typology are fitted on the
/// training subjects; test subjects are enrolled by M1 and by M2 (labels
/// hidden). The performance test scores each typology model on the test
/// subjects assigned to it; the robustness test scores it on all the other
/// test subjects, pooled. Results are averaged over folds. Folds run in
/// parallel on the current rayon pool; the report does not depend on the
/// pool size.
pub fn run_config1(d: &Dataset, config: &PipelineConfig) -> Result<ExperimentReport> {
    let cohort = prepare_cohort(d, config.min_per_class)?;
    let n = cohort.subject_count();
    if n < 3 {
        return Err(Error::InsufficientSubjects { found: n, needed: 3 });
    }
    if config.folds == 0 || !(config.train_frac > 0.0 && config.train_frac < 1.0) {
        return Err(Error::InvalidConfig("need folds >= 1 and 0 < train_frac < 1".into()));
    }
    let folds = (0..config.folds)
        .into_par_iter()
        .map(|f| config1_fold(&cohort, config, f))
        .collect::<Result<Vec<_>>>()?;

    let mut report = base_report(Protocol::Config1, &cohort, config, "fold");
    report.fold_count = folds.len();
    report.fallback_folds = folds.iter().filter(|f| f.fallback).count();

    for method in [Methodology::M1, Methodology::M2] {
        let mut perf: Vec<Vec<Metrics>> = Vec::new();
        let mut robust: Vec<Vec<Metrics>> = Vec::new();
        for row in folds
            .iter()
            .filter(|f| !f.fallback)
            .flat_map(|f| &f.tc_metrics)
            .filter(|r| r.method == method)
        {
            if perf.len() < row.cluster {
                perf.resize(row.cluster, Vec::new());
                robust.resize(row.cluster, Vec::new());
            }
            perf[row.cluster - 1].extend(row.clustering_model);
            robust[row.cluster - 1].extend(row.robustness);
        }
        for (rank, (p, r)) in perf.iter().zip(&robust).enumerate() {
            report.per_tc.push(TcRow {
                method,
                cluster: rank + 1,
                robustness: MetricsSummary::of(r),
                clustering_model: MetricsSummary::of(p),
            });
        }
    }

    let per_method = |m| folds.iter().map(|f| fold_metric(f, m)).collect::<Vec<_>>();
    report.aggregate = aggregate_rows(
        &per_method(Methodology::Baseline),
        &per_method(Methodology::M1),
        &per_method(Methodology::M2),
    );
    report.agreement = Some(folds.iter().map(agreement_of).sum::<f64>() / folds.len() as f64);
    report.folds = folds;
    Ok(report)
}

fn config2_fold(cohort: &PreparedCohort, config: &PipelineConfig, held_out: usize) -> Result<FoldRecord> {
    let train: Vec<usize> = (0..cohort.subject_count()).filter(|&s| s != held_out).collect();
    let test = [held_out];
    let leakage_violations = leakage(&train, &test);
    assert_eq!(leakage_violations, 0, "held-out subject in training set");

    let system = train_system(
        cohort,
        &train,
        config,
        derive_seed(config.seed, TRAIN_STREAM + held_out as u64),
    )?;
    let (m1, m2) = enroll(&system, cohort, &test)?;
    let score = |model: &TrainedKnn| -> Result<Metrics> {
        Ok(predict_subjects(model, cohort, &test)?.expect("held-out subject has windows"))
    };
    Ok(FoldRecord {
        index: held_out,
        train_subjects: names(cohort, &train),
        test_subjects: names(cohort, &test),
        typology_count: system.typology.k,
        fallback: system.typology.is_fallback(),
        metrics: vec![
            method_metrics(Methodology::Baseline, score(&system.baseline)?),
            method_metrics(Methodology::M1, score(&system.tc_models[m1[0]])?),
            method_metrics(Methodology::M2, score(&system.tc_models[m2[0]])?),
        ],
        tc_metrics: Vec::new(),
        m1_assignments: m1,
        m2_assignments: m2,
        leakage_violations,
    })
}

/// Leave-one-subject-out comparison of the general baseline, M1 and M2.
/// Metrics are computed per held-out subject and summarized across
/// subjects.
pub fn run_config2(d: &Dataset, config: &PipelineConfig) -> Result<ExperimentReport> {
    let cohort = prepare_cohort(d, config.min_per_class)?;
    let n = cohort.subject_count();
    if n < 3 {
        return Err(Error::InsufficientSubjects { found: n, needed: 3 });
    }
    let folds = (0..n)
        .into_par_iter()
        .map(|s| config2_fold(&cohort, config, s))
        .collect::<Result<Vec<_>>>()?;

    let mut report = base_report(Protocol::Config2, &cohort, config, "subject");
    report.fold_count = folds.len();
    report.fallback_folds = folds.iter().filter(|f| f.fallback).count();
    let per_method = |m| folds.iter().map(|f| fold_metric(f, m)).collect::<Vec<_>>();
    report.aggregate = aggregate_rows(
        &per_method(Methodology::Baseline),
        &per_method(Methodology::M1),
        &per_method(Methodology::M2),
    );
    report.agreement = Some(folds.iter().map(agreement_of).sum::<f64>() / n as f64);
    report.folds = folds;
    Ok(report)
}
