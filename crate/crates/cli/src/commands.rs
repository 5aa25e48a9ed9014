use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use tiereval_core::adaptive::{self, AdaptiveRunResult, ProtocolPreset};
use tiereval_core::btm::{self, BtScores, FitOptions, Slot};
use tiereval_core::corpus::{
    self, encode_component, Difficulty, Manifest, MockGenerator, PerDifficulty, TemplateTable,
};
use tiereval_core::evalkit::{self, ComparisonReport, EvaluationReport, Metric, RankedTable};
use tiereval_core::hls::{self, HlsReport, Pairing};
use tiereval_core::responses::{self, ConfidenceHistogram, ResponseMatrix};
use tiereval_core::simlab::{self, PoolSpec};

use crate::io::{self, required, required_list, CliError, CliResult, Header};
use crate::*;

fn done(what: &str, path: &Path) {
    eprintln!("{what} -> {}", path.display());
}

fn read_matrix(path: &Path, manifest: &Manifest) -> CliResult<ResponseMatrix> {
    let m: ResponseMatrix = io::read_body(path)?;
    m.check_manifest(manifest)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(m)
}

pub fn manifest_gen(a: ManifestGenArgs) -> CliResult<()> {
    let classes_path = required(&a.classes, "classes")?;
    let descriptors_path = required(&a.descriptors, "descriptors")?;
    let templates_path = required(&a.templates, "templates")?;
    let per_cell = required(&a.items_per_cell, "items-per-cell")?;
    let out = required(&a.out, "out")?;

    let classes = corpus::parse_class_list(&io::read_text(&classes_path)?)
        .map_err(|e| CliError::from(e).context(classes_path.display()))?;
    let attrs = corpus::parse_descriptor_table(&io::read_text(&descriptors_path)?)
        .map_err(|e| CliError::from(e).context(descriptors_path.display()))?;
    let templates = TemplateTable::from_json(&io::read_text(&templates_path)?)
        .map_err(|e| CliError::from(e).context(templates_path.display()))?;
    let manifest = corpus::build_manifest(&classes, &attrs, per_cell, &templates)?;
    io::write_text(&out, &manifest.to_jsonl())?;
    eprintln!(
        "{} classes x {} attributes x 3 levels x {} = {} items",
        manifest.classes().len(),
        manifest.attributes().len(),
        per_cell,
        manifest.len()
    );
    done("manifest", &out);
    Ok(())
}

pub fn mock_generate(a: MockGenerateArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let out = required(&a.out, "out")?;
    let mut backend = MockGenerator::create(&out)?;
    let report = corpus::run_generator(&manifest, &mut backend);
    let log = backend.finish()?;
    let path = out.join("generation.json");
    io::write_json(
        &path,
        &Header::new("manifest mock-generate", &a, None),
        &report,
    )?;
    eprintln!(
        "{} references, {} errors",
        report.references(),
        report.errors()
    );
    done("prompt log", &log);
    done("generation report", &path);
    Ok(())
}

pub fn ingest(a: IngestArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let out = required(&a.out, "out")?;
    let mut records = Vec::new();
    for path in required_list(&a.responses, "responses")? {
        records.extend(
            responses::read_response_log(&path)
                .map_err(|e| CliError::from(e).context(path.display()))?,
        );
    }
    let matrices = responses::ingest(&manifest, records)?;
    let header = Header::new("ingest", &a, None);
    for (model, matrix) in &matrices {
        let path = out.join(format!("{}.matrix.json", encode_component(model)));
        io::write_json(&path, &header, matrix)?;
        let state = if matrix.complete {
            "complete"
        } else {
            "partial"
        };
        eprintln!("{model}: {} responses ({state})", matrix.len());
        done("matrix", &path);
    }
    Ok(())
}

fn parse_pairing(name: Option<&str>, seed: Option<u64>) -> CliResult<Pairing> {
    match name.unwrap_or("by-index") {
        "by-index" => Ok(Pairing::ByIndex),
        "random" => Ok(Pairing::SeededRandom(required(&seed, "seed")?)),
        other => Err(CliError::validation(format!(
            "unknown pairing {other:?} (expected by-index or random)"
        ))),
    }
}

pub fn hls(a: HlsArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let matrix = read_matrix(&required(&a.matrix, "matrix")?, &manifest)?;
    let out = required(&a.out, "out")?;
    let pairing = parse_pairing(a.pairing.as_deref(), a.seed)?;
    let triplets = hls::build_triplets(&manifest, pairing);
    let report = hls::hls_report(&triplets, &matrix)?;
    let seed = matches!(pairing, Pairing::SeededRandom(_))
        .then_some(a.seed)
        .flatten();
    io::write_json(&out, &Header::new("hls", &a, seed), &report)?;
    io::write_text(&io::sibling_csv(&out, None), &report.to_csv())?;
    eprintln!(
        "{}: hls {:.2}, accuracy {:.2}",
        report.model_id, report.hls, report.top1_accuracy
    );
    done("hls report", &out);
    Ok(())
}

#[derive(Serialize)]
struct HlsCorrelation {
    pearson: f64,
    n: usize,
    points: Vec<HlsPoint>,
}

#[derive(Serialize)]
struct HlsPoint {
    model: String,
    hls: f64,
    top1_accuracy: f64,
}

pub fn hls_correlate(a: HlsCorrelateArgs) -> CliResult<()> {
    let out = required(&a.out, "out")?;
    let reports = required_list(&a.reports, "reports")?
        .iter()
        .map(|p| io::read_body::<HlsReport>(p))
        .collect::<CliResult<Vec<_>>>()?;
    let pearson = hls::hls_accuracy_correlation(&reports)?;
    let points: Vec<HlsPoint> = reports
        .iter()
        .map(|r| HlsPoint {
            model: r.model_id.clone(),
            hls: r.hls,
            top1_accuracy: r.top1_accuracy,
        })
        .collect();
    let mut csv = String::from("model,top1_accuracy,hls\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{:.4},{:.4}\n",
            p.model, p.top1_accuracy, p.hls
        ));
    }
    let body = HlsCorrelation {
        pearson,
        n: points.len(),
        points,
    };
    io::write_json(&out, &Header::new("hls correlate", &a, None), &body)?;
    io::write_text(&io::sibling_csv(&out, None), &csv)?;
    eprintln!(
        "pearson(hls, accuracy) = {pearson:.4} over {} models",
        body.n
    );
    done("correlation", &out);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EvalOutput {
    reports: Vec<EvaluationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adaptive: Option<AdaptiveSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdaptiveSummary {
    preset: ProtocolPreset,
    /// Mean questions per difficulty per session, one entry per repeat.
    average_asked: Vec<PerDifficulty<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    runs: Option<Vec<AdaptiveRunResult>>,
}

fn eval_csv(reports: &[EvaluationReport]) -> String {
    let mut out = String::from("model,strategy,repeat,attribute,score,accuracy,easy_accuracy,medium_accuracy,hard_accuracy\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for r in reports {
        let label = r.strategy.label();
        let repeat = r.strategy.repeat();
        for (attr, score) in &r.attribute_scores {
            let d = &r.per_difficulty_accuracies[attr];
            out.push_str(&format!(
                "{},{},{},{},{:.4},{:.4},{},{},{}\n",
                r.model_id,
                label,
                repeat,
                attr,
                score,
                r.attribute_accuracies[attr],
                opt(d.easy),
                opt(d.medium),
                opt(d.hard)
            ));
        }
        out.push_str(&format!(
            "{},{},{},global,{:.4},{:.4},,,\n",
            r.model_id, label, repeat, r.global_score, r.global_accuracy
        ));
    }
    out
}

fn write_eval(out: &Path, header: &Header, body: &EvalOutput) -> CliResult<()> {
    io::write_json(out, header, body)?;
    io::write_text(&io::sibling_csv(out, None), &eval_csv(&body.reports))?;
    for r in &body.reports {
        eprintln!(
            "{} {}: score {:.2}, accuracy {:.2}, {} images",
            r.model_id, r.strategy, r.global_score, r.global_accuracy, r.images_used
        );
    }
    done("evaluation", out);
    Ok(())
}

pub fn eval_full(a: EvalFullArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let matrix = read_matrix(&required(&a.matrix, "matrix")?, &manifest)?;
    let out = required(&a.out, "out")?;
    let report = evalkit::full_eval(&matrix, &manifest)?;
    let body = EvalOutput {
        reports: vec![report],
        adaptive: None,
    };
    write_eval(&out, &Header::new("eval full", &a, None), &body)
}

pub fn eval_static(a: EvalStaticArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let matrix = read_matrix(&required(&a.matrix, "matrix")?, &manifest)?;
    let out = required(&a.out, "out")?;
    let seed = required(&a.seed, "seed")?;
    let reports = evalkit::static_eval_repeats(
        &matrix,
        &manifest,
        a.k.unwrap_or(3),
        seed,
        a.repeats.unwrap_or(3),
    )?;
    let body = EvalOutput {
        reports,
        adaptive: None,
    };
    write_eval(&out, &Header::new("eval static", &a, Some(seed)), &body)
}

pub fn eval_adaptive(a: EvalAdaptiveArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let matrix = read_matrix(&required(&a.matrix, "matrix")?, &manifest)?;
    let out = required(&a.out, "out")?;
    let seed = required(&a.seed, "seed")?;
    let preset = ProtocolPreset::resolve(a.preset.as_deref().unwrap_or("ours_old"))?;
    let runs = adaptive::run_adaptive(&matrix, &manifest, &preset, seed, a.repeats.unwrap_or(3))?;
    let reports = runs
        .iter()
        .map(|r| evalkit::adaptive_eval(r, &manifest))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(note) = &preset.note {
        eprintln!("preset {}: {note}", preset.name);
    }
    let body = EvalOutput {
        reports,
        adaptive: Some(AdaptiveSummary {
            average_asked: runs.iter().map(|r| r.average_asked).collect(),
            preset,
            runs: a.with_sessions.then_some(runs),
        }),
    };
    write_eval(&out, &Header::new("eval adaptive", &a, Some(seed)), &body)
}

#[derive(Serialize, Deserialize)]
struct CompareOutput {
    comparisons: Vec<ComparisonReport>,
}

pub fn compare(a: CompareArgs) -> CliResult<()> {
    let ground_path = required(&a.ground, "ground")?;
    let out = required(&a.out, "out")?;
    let metric: Metric = a
        .metric
        .as_deref()
        .unwrap_or("mae")
        .parse()
        .map_err(CliError::validation)?;
    let ground_out: EvalOutput = io::read_body(&ground_path)?;
    let ground = ground_out
        .reports
        .first()
        .ok_or_else(|| CliError::validation("no reports").context(ground_path.display()))?;
    let mut groups: IndexMap<String, Vec<EvaluationReport>> = IndexMap::new();
    for path in required_list(&a.candidates, "candidates")? {
        let o: EvalOutput = io::read_body(&path)?;
        for r in o.reports {
            groups.entry(r.strategy.label()).or_default().push(r);
        }
    }
    let comparisons = groups
        .values()
        .map(|reports| evalkit::compare(ground, reports, metric))
        .collect::<Result<Vec<_>, _>>()?;
    for c in &comparisons {
        eprintln!(
            "{} {}: score error {:.3} ± {:.3}, accuracy error {:.3} ({}, {} repeats)",
            c.model_id,
            c.candidate,
            c.headline_score_error(),
            c.std.score.get(metric),
            c.headline_accuracy_error(),
            metric,
            c.repeats
        );
    }
    io::write_text(
        &io::sibling_csv(&out, None),
        &evalkit::comparison_table_csv(&comparisons),
    )?;
    io::write_json(
        &out,
        &Header::new("compare", &a, None),
        &CompareOutput { comparisons },
    )?;
    done("comparison", &out);
    Ok(())
}

#[derive(Serialize)]
struct DifficultyTable<'a> {
    difficulty: Difficulty,
    table: &'a RankedTable,
}

pub fn tables_difficulty(a: TablesDifficultyArgs) -> CliResult<()> {
    let out = required(&a.out, "out")?;
    let mut inputs = Vec::new();
    match (a.matrix.is_empty(), a.reports.is_empty()) {
        (false, true) => {
            let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
            for path in &a.matrix {
                let m = read_matrix(path, &manifest)?;
                let b = evalkit::difficulty_breakdown(&m, &manifest)
                    .map_err(|e| CliError::from(e).context(path.display()))?;
                inputs.push((m.model_id, b));
            }
        }
        (true, false) => {
            for path in &a.reports {
                let o: EvalOutput = io::read_body(path)?;
                let r =
                    o.reports.into_iter().next().ok_or_else(|| {
                        CliError::validation("no reports").context(path.display())
                    })?;
                inputs.push((r.model_id, r.per_difficulty_accuracies));
            }
        }
        _ => {
            return Err(CliError::validation(
                "give exactly one of --matrix or --reports",
            ))
        }
    }
    let tables = evalkit::difficulty_tables(&inputs)?;
    for (d, t) in &tables {
        io::write_text(&io::sibling_csv(&out, Some(d.as_str())), &t.to_csv())?;
    }
    let body: Vec<_> = tables
        .iter()
        .map(|(d, t)| DifficultyTable {
            difficulty: *d,
            table: t,
        })
        .collect();
    io::write_json(&out, &Header::new("tables difficulty", &a, None), &body)?;
    done("difficulty tables", &out);
    Ok(())
}

pub fn tables_scores(a: TablesScoresArgs) -> CliResult<()> {
    let out = required(&a.out, "out")?;
    let mut reports = Vec::new();
    for path in required_list(&a.reports, "reports")? {
        let o: EvalOutput = io::read_body(&path)?;
        reports.extend(o.reports.into_iter().next());
    }
    let table = evalkit::attribute_score_table(&reports)?;
    io::write_text(&io::sibling_csv(&out, None), &table.to_csv())?;
    io::write_json(&out, &Header::new("tables scores", &a, None), &table)?;
    done("score table", &out);
    Ok(())
}

pub fn tables_compare(a: TablesCompareArgs) -> CliResult<()> {
    let out = required(&a.out, "out")?;
    let mut comparisons = Vec::new();
    for path in required_list(&a.comparisons, "comparisons")? {
        let o: CompareOutput = io::read_body(&path)?;
        comparisons.extend(o.comparisons);
    }
    let csv = evalkit::comparison_table_csv(&comparisons);
    io::write_text(&io::sibling_csv(&out, None), &csv)?;
    io::write_json(
        &out,
        &Header::new("tables compare", &a, None),
        &CompareOutput { comparisons },
    )?;
    done("comparison table", &out);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ConfidenceOutput {
    models: Vec<String>,
    histograms: Vec<ConfidenceHistogram>,
}

fn histogram_csv(models: &[String], histograms: &[ConfidenceHistogram]) -> String {
    let mut out = String::from("models,difficulty,bin_low,bin_high,count,fraction\n");
    let who = models.join("|");
    for h in histograms {
        for (b, (&c, &f)) in h.counts.iter().zip(&h.fraction).enumerate() {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{},{:.6}\n",
                who,
                h.difficulty,
                h.bin_edges[b],
                h.bin_edges[b + 1],
                c,
                f
            ));
        }
    }
    out
}

fn parse_difficulties(name: Option<&str>) -> CliResult<Vec<Difficulty>> {
    match name.unwrap_or("all") {
        "all" => Ok(Difficulty::ALL.to_vec()),
        other => other
            .parse::<Difficulty>()
            .map(|d| vec![d])
            .map_err(|e| CliError::validation(e).context("--difficulty")),
    }
}

pub fn confidence(a: ConfidenceArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let matrix = read_matrix(&required(&a.matrix, "matrix")?, &manifest)?;
    let out = required(&a.out, "out")?;
    let bins = a.bins.unwrap_or(10);
    let histograms = parse_difficulties(a.difficulty.as_deref())?
        .into_iter()
        .map(|d| responses::confidence_histogram(&matrix, &manifest, d, bins))
        .collect::<Result<Vec<_>, _>>()?;
    let body = ConfidenceOutput {
        models: vec![matrix.model_id.clone()],
        histograms,
    };
    io::write_text(
        &io::sibling_csv(&out, None),
        &histogram_csv(&body.models, &body.histograms),
    )?;
    io::write_json(&out, &Header::new("confidence", &a, None), &body)?;
    done("confidence histograms", &out);
    Ok(())
}

pub fn confidence_average(a: ConfidenceAverageArgs) -> CliResult<()> {
    let out = required(&a.out, "out")?;
    let mut models = Vec::new();
    let mut by_level: BTreeMap<Difficulty, Vec<ConfidenceHistogram>> = BTreeMap::new();
    for path in required_list(&a.inputs, "inputs")? {
        let o: ConfidenceOutput = io::read_body(&path)?;
        models.extend(o.models);
        for h in o.histograms {
            by_level.entry(h.difficulty).or_default().push(h);
        }
    }
    let histograms = by_level
        .values()
        .map(|hs| responses::average_histograms(hs))
        .collect::<Result<Vec<_>, _>>()?;
    let body = ConfidenceOutput { models, histograms };
    io::write_text(
        &io::sibling_csv(&out, None),
        &histogram_csv(&body.models, &body.histograms),
    )?;
    io::write_json(&out, &Header::new("confidence average", &a, None), &body)?;
    done("averaged histograms", &out);
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let pool_path = required(&a.pool, "pool")?;
    let out = required(&a.out, "out")?;
    let mut pool =
        PoolSpec::load(&pool_path).map_err(|e| CliError::from(e).context(pool_path.display()))?;
    if let Some(seed) = a.seed {
        pool.seed = seed;
    }
    let manifest_path: PathBuf = match (&a.manifest, &pool.manifest) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => pool_path.parent().unwrap_or(Path::new("")).join(p),
        (None, None) => {
            return Err(CliError::validation(
                "missing required flag --manifest (the pool names none)",
            ))
        }
    };
    let manifest = io::load_manifest(&manifest_path)?;
    let records = simlab::simulate(&pool, &manifest)
        .map_err(|e| CliError::from(e).context(pool_path.display()))?;
    io::write_text(&out, &responses::write_response_log(&records))?;
    eprintln!(
        "{} responders x {} items, pool seed {}",
        pool.responders.len(),
        manifest.len(),
        pool.seed
    );
    done("response log", &out);
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ScheduleOutput {
    images_per_level: u32,
    classes: usize,
    attributes: usize,
    per_attribute: usize,
    per_class: usize,
    total: usize,
    slots: Vec<Slot>,
}

pub fn btm_schedule(a: BtmScheduleArgs) -> CliResult<()> {
    let manifest = io::load_manifest(&required(&a.manifest, "manifest")?)?;
    let out = required(&a.out, "out")?;
    let seed = required(&a.seed, "seed")?;
    let ipl = a.images_per_level.unwrap_or(3);
    let slots = btm::schedule(&manifest, &a.classes, &a.attributes, ipl, seed)?;
    let classes = if a.classes.is_empty() {
        manifest.classes().len()
    } else {
        a.classes.len()
    };
    let attributes = if a.attributes.is_empty() {
        manifest.attributes().len()
    } else {
        a.attributes.len()
    };
    let per_attribute = slots.len() / (classes * attributes).max(1);
    let body = ScheduleOutput {
        images_per_level: ipl,
        classes,
        attributes,
        per_attribute,
        per_class: per_attribute * attributes,
        total: slots.len(),
        slots,
    };
    let mut csv = String::from("class,attribute,left,right,left_difficulty,right_difficulty\n");
    for s in &body.slots {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.class, s.attribute, s.left, s.right, s.left_difficulty, s.right_difficulty
        ));
    }
    io::write_text(&io::sibling_csv(&out, None), &csv)?;
    io::write_json(&out, &Header::new("btm schedule", &a, Some(seed)), &body)?;
    eprintln!(
        "{} per attribute, {} per class, {} total",
        body.per_attribute, body.per_class, body.total
    );
    done("schedule", &out);
    Ok(())
}

pub fn btm_fit(a: BtmFitArgs) -> CliResult<()> {
    let path = required(&a.comparisons, "comparisons")?;
    let out = required(&a.out, "out")?;
    let text = io::read_text(&path)?;
    let comparisons = btm::parse_comparisons(text.as_bytes())
        .map_err(|e| CliError::from(e).context(path.display()))?;
    let defaults = FitOptions::default();
    let opts = FitOptions {
        epsilon: a.epsilon.unwrap_or(defaults.epsilon),
        tol: a.tol.unwrap_or(defaults.tol),
        max_iter: a.max_iter.unwrap_or(defaults.max_iter),
    };
    let scores = btm::fit(&comparisons, opts)?;
    if !scores.converged {
        eprintln!(
            "warning: no convergence within {} iterations; writing the last iterate",
            scores.iterations
        );
    }
    let mut csv = String::from("item_id,lambda\n");
    for (id, l) in &scores.lambda {
        csv.push_str(&format!("{id},{l:.10}\n"));
    }
    io::write_text(&io::sibling_csv(&out, None), &csv)?;
    io::write_json(&out, &Header::new("btm fit", &a, None), &scores)?;
    eprintln!(
        "{} items, {} iterations",
        scores.lambda.len(),
        scores.iterations
    );
    done("strengths", &out);
    Ok(())
}

pub fn btm_correlate(a: BtmCorrelateArgs) -> CliResult<()> {
    let scores: BtScores = io::read_body(&required(&a.scores, "scores")?)?;
    let out = required(&a.out, "out")?;
    let labels: BTreeMap<String, u8> = match (&a.manifest, &a.labels) {
        (Some(m), None) => btm::labels_from_manifest(&io::load_manifest(m)?),
        (None, Some(l)) => io::read_body(l)?,
        _ => {
            return Err(CliError::validation(
                "give exactly one of --manifest or --labels",
            ))
        }
    };
    let c = btm::correlate(&scores, &labels)?;
    io::write_json(&out, &Header::new("btm correlate", &a, None), &c)?;
    eprintln!(
        "pearson {:.4}, spearman {:.4}, kendall tau-b {:.4} (n = {})",
        c.pearson, c.spearman, c.kendall_tau_b, c.n
    );
    done("correlation", &out);
    Ok(())
}

pub fn btm_simulate_raters(a: BtmSimulateArgs) -> CliResult<()> {
    let schedule: ScheduleOutput = io::read_body(&required(&a.schedule, "schedule")?)?;
    let out = required(&a.out, "out")?;
    let seed = required(&a.seed, "seed")?;
    let truth = match &a.lambda {
        Some(p) => io::read_body(p)?,
        None => btm::level_strengths(&schedule.slots, a.spacing.unwrap_or(1.0)),
    };
    let comparisons = btm::simulate_raters(&schedule.slots, &truth, a.per_slot.unwrap_or(1), seed)?;
    io::write_text(&out, &btm::comparisons_to_jsonl(&comparisons))?;
    eprintln!("{} judgements", comparisons.len());
    done("comparisons", &out);
    Ok(())
}
