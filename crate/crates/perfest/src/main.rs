//! Command-line interface: run experiments from JSON configs, then
//! summarize, rank, subset, merge, compare and plot the results.
//!
//! Exit codes: 0 on success (invalid iterations are data, not failures),
//! 2 for configuration, validation and IO errors.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};

use perfest::analysis::{
    estimation_summary, get_scores, glob_to_regex, merge_results, metrics_summary, rank_workflows,
    subset_results, summarize, top_performers, MaxsFlags, MergeBy, Reducer, SubsetSpec,
    SummaryStats,
};
use perfest::config::ExperimentConfig;
use perfest::engine::{
    load_results, performance_estimation, save_results, ComparisonResults, ExperimentOptions,
    ProgressEvent, ProgressSink,
};
use perfest::plot::render_boxplot;
use perfest::stats::{paired_comparisons, render_cd_diagram, CdDiagram, MetricComparison};

#[derive(Parser)]
#[command(
    name = "perfest",
    version,
    about = "Resampling-based performance estimation and comparison of predictive workflows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Results file path; overrides the config's outputPath.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print summary statistics of a results file.
    Summary {
        results: PathBuf,
        #[arg(long)]
        tasks: Option<String>,
        #[arg(long)]
        workflows: Option<String>,
        #[arg(long)]
        metrics: Option<String>,
        /// Treat the filter patterns as shell globs instead of regexes.
        #[arg(long)]
        glob: bool,
        /// Also write the summary table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Rank workflows per task and metric by average score.
    Rank {
        results: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Comma-separated metrics where higher is better.
        #[arg(long)]
        maxs: Option<String>,
        /// Also write the ranking table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the single best workflow per task and metric.
    Top {
        results: PathBuf,
        #[arg(long)]
        maxs: Option<String>,
    },
    /// Print one workflow's per-iteration scores on one task as CSV.
    Scores {
        results: PathBuf,
        workflow: String,
        task: String,
    },
    /// Write a filtered copy of a results file.
    Subset {
        results: PathBuf,
        #[arg(long)]
        tasks: Option<String>,
        #[arg(long)]
        workflows: Option<String>,
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long)]
        glob: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Merge result files along one dimension.
    Merge {
        files: Vec<PathBuf>,
        #[arg(long, value_enum)]
        by: MergeDim,
        #[arg(long)]
        output: PathBuf,
        /// Also require identical split contents, not just descriptors.
        #[arg(long)]
        strict: bool,
    },
    /// Statistical comparison of workflows (Friedman, Nemenyi,
    /// Bonferroni-Dunn, Wilcoxon, paired t).
    Compare {
        results: PathBuf,
        /// Restrict the report to one metric.
        #[arg(long)]
        metric: Option<String>,
        /// Baseline workflow; defaults to the best average rank.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        maxs: Option<String>,
        /// Write the full report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a critical-difference diagram as SVG.
    CdDiagram {
        results: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long, value_enum, default_value_t = DiagramKind::Nemenyi)]
        kind: DiagramKind,
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        maxs: Option<String>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Render per-iteration score distributions as an SVG box plot.
    Boxplot {
        results: PathBuf,
        #[arg(long)]
        tasks: Option<String>,
        #[arg(long)]
        workflows: Option<String>,
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long)]
        glob: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// List the built-in metric vocabulary and registered evaluators.
    ListMetrics,
}

#[derive(Clone, Copy, ValueEnum)]
enum MergeDim {
    Workflows,
    Tasks,
    Metrics,
}

impl From<MergeDim> for MergeBy {
    fn from(value: MergeDim) -> Self {
        match value {
            MergeDim::Workflows => MergeBy::Workflows,
            MergeDim::Tasks => MergeBy::Tasks,
            MergeDim::Metrics => MergeBy::Metrics,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagramKind {
    Nemenyi,
    Bd,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), String> {
    match command {
        Command::Run { config, output } => cmd_run(&config, output.as_deref()),
        Command::Summary {
            results,
            tasks,
            workflows,
            metrics,
            glob,
            csv,
        } => cmd_summary(&results, spec(tasks, workflows, metrics, glob)?, csv.as_deref()),
        Command::Rank {
            results,
            top,
            maxs,
            csv,
        } => cmd_rank(&results, top, maxs.as_deref(), csv.as_deref()),
        Command::Top { results, maxs } => cmd_top(&results, maxs.as_deref()),
        Command::Scores {
            results,
            workflow,
            task,
        } => cmd_scores(&results, &workflow, &task),
        Command::Subset {
            results,
            tasks,
            workflows,
            metrics,
            glob,
            output,
        } => cmd_subset(&results, spec(tasks, workflows, metrics, glob)?, &output),
        Command::Merge {
            files,
            by,
            output,
            strict,
        } => cmd_merge(&files, by.into(), &output, strict),
        Command::Compare {
            results,
            metric,
            baseline,
            alpha,
            maxs,
            output,
        } => cmd_compare(
            &results,
            metric.as_deref(),
            baseline.as_deref(),
            alpha,
            maxs.as_deref(),
            output.as_deref(),
        ),
        Command::CdDiagram {
            results,
            metric,
            kind,
            baseline,
            alpha,
            maxs,
            output,
        } => cmd_cd_diagram(
            &results,
            &metric,
            kind,
            baseline.as_deref(),
            alpha,
            maxs.as_deref(),
            &output,
        ),
        Command::Boxplot {
            results,
            tasks,
            workflows,
            metrics,
            glob,
            output,
        } => cmd_boxplot(&results, spec(tasks, workflows, metrics, glob)?, &output),
        Command::ListMetrics => {
            cmd_list_metrics();
            Ok(())
        }
    }
}

fn spec(
    tasks: Option<String>,
    workflows: Option<String>,
    metrics: Option<String>,
    glob: bool,
) -> Result<SubsetSpec, String> {
    let convert = |p: Option<String>| p.map(|p| if glob { glob_to_regex(&p) } else { p });
    Ok(SubsetSpec {
        tasks: convert(tasks),
        workflows: convert(workflows),
        metrics: convert(metrics),
    })
}

fn parse_maxs(maxs: Option<&str>) -> MaxsFlags {
    match maxs {
        None => MaxsFlags::none(),
        Some(list) => MaxsFlags::maximizing(&list.split(',').map(str::trim).collect::<Vec<_>>()),
    }
}

fn load(path: &Path) -> Result<ComparisonResults, String> {
    load_results(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Formats a value with six significant digits, the table convention.
fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 15) as usize;
    format!("{x:.decimals$}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| "NA".to_string())
}

/// Paper-style progress trace: banner per task/workflow, one iteration
/// counter when running serially.
struct ConsoleProgress {
    state: Mutex<ConsoleState>,
}

struct ConsoleState {
    current_task: Option<String>,
}

impl ConsoleProgress {
    fn new() -> Self {
        ConsoleProgress {
            state: Mutex::new(ConsoleState { current_task: None }),
        }
    }
}

impl ProgressSink for ConsoleProgress {
    fn on_event(&self, event: &ProgressEvent) {
        let mut state = self.state.lock().expect("progress state");
        match event {
            ProgressEvent::ExperimentStart { method } => {
                println!("\n##### PERFORMANCE ESTIMATION USING  {} #####", method);
            }
            ProgressEvent::Parallel { workers } => {
                println!("Running in parallel with {workers} worker(s)");
            }
            ProgressEvent::TaskStart { task } => {
                println!("\n** PREDICTIVE TASK :: {task}");
                state.current_task = Some(task.clone());
            }
            ProgressEvent::WorkflowStart {
                workflow,
                descriptor,
                metrics,
                seed,
            } => {
                println!("\n++ MODEL/WORKFLOW :: {workflow}");
                println!("Task for estimating  {}  using", metrics.join(","));
                println!(" {descriptor}");
                println!("\t Run with seed =  {seed}");
                print!("Iteration :");
            }
            ProgressEvent::Iteration { index, .. } => {
                print!("  {index}");
                std::io::stdout().flush().ok();
            }
            ProgressEvent::WorkflowDone => {
                println!();
            }
        }
    }
}

fn cmd_run(config_path: &Path, output: Option<&Path>) -> Result<(), String> {
    let config = ExperimentConfig::from_file(config_path).map_err(|e| e.to_string())?;
    let mut opts = ExperimentOptions::default();

    let problems = config.validate(&opts);
    if !problems.is_empty() {
        return Err(format!(
            "invalid configuration ({} problem(s)):\n  - {}",
            problems.len(),
            problems.join("\n  - ")
        ));
    }

    opts.cluster = config.cluster()?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let tasks = config.load_tasks(base_dir)?;
    let workflows = config.build_workflows()?;
    let est = config.estimation_task()?;

    let progress = ConsoleProgress::new();
    let results = performance_estimation(&tasks, &workflows, &est, &opts, &progress)
        .map_err(|e| e.to_string())?;

    let out_path: PathBuf = match (output, &config.output_path) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => base_dir.join(p),
        (None, None) => config_path.with_extension("results.json"),
    };
    save_results(&results, &out_path).map_err(|e| e.to_string())?;
    println!("\nresults written to {}", out_path.display());
    Ok(())
}

fn print_summary_block(stats: &[(String, SummaryStats)]) {
    let name_width = 7usize;
    let col_width = stats
        .iter()
        .map(|(m, _)| m.len().max(10))
        .max()
        .unwrap_or(10)
        + 2;
    print!("{:name_width$}", "");
    for (metric, _) in stats {
        print!("{metric:>col_width$}");
    }
    println!();
    type Extract = fn(&SummaryStats) -> String;
    let rows: [(&str, Extract); 7] = [
        ("avg", |s| fmt_opt(s.avg)),
        ("std", |s| fmt_opt(s.std)),
        ("med", |s| fmt_opt(s.med)),
        ("iqr", |s| fmt_opt(s.iqr)),
        ("min", |s| fmt_opt(s.min)),
        ("max", |s| fmt_opt(s.max)),
        ("invalid", |s| s.invalid.to_string()),
    ];
    for (label, extract) in rows {
        print!("{label:<name_width$}");
        for (_, s) in stats {
            print!("{:>col_width$}", extract(s));
        }
        println!();
    }
}

fn cmd_summary(path: &Path, spec: SubsetSpec, csv: Option<&Path>) -> Result<(), String> {
    let results = load(path)?;
    let results = if spec.tasks.is_some() || spec.workflows.is_some() || spec.metrics.is_some() {
        subset_results(&results, &spec).map_err(|e| e.to_string())?
    } else {
        results
    };

    println!("\n== Summary of a  Performance Estimation Experiment ==\n");
    println!(
        "Task for estimating  {}  using",
        results.metric_names.join(",")
    );
    println!(" {}", results.provenance.method_descriptor);
    println!("\t Run with seed =  {}\n", results.provenance.seed);
    println!("* Predictive Tasks ::  {}", results.task_names().join(", "));
    println!("* Workflows  ::  {}", results.workflow_names().join(", "));

    for task in results.task_names() {
        println!("\n-> Task:  {task}");
        for workflow in results.workflow_names() {
            println!("  *Workflow: {workflow}");
            let stats = estimation_summary(&results, workflow, task).map_err(|e| e.to_string())?;
            print_summary_block(&stats);
        }
    }

    if let Some(csv_path) = csv {
        let table = summarize(&results);
        let mut text = String::from("task,workflow,metric,avg,std,med,iqr,min,max,invalid\n");
        for e in &table.entries {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.task,
                e.workflow,
                e.metric,
                fmt_opt(e.stats.avg),
                fmt_opt(e.stats.std),
                fmt_opt(e.stats.med),
                fmt_opt(e.stats.iqr),
                fmt_opt(e.stats.min),
                fmt_opt(e.stats.max),
                e.stats.invalid
            ));
        }
        std::fs::write(csv_path, text).map_err(|e| e.to_string())?;
        println!("\nsummary table written to {}", csv_path.display());
    }
    let _ = metrics_summary(&results, Reducer::Mean);
    Ok(())
}

fn cmd_rank(
    path: &Path,
    top: usize,
    maxs: Option<&str>,
    csv: Option<&Path>,
) -> Result<(), String> {
    let results = load(path)?;
    let maxs = parse_maxs(maxs);
    let ranking = rank_workflows(&results, top, &maxs);
    for entry in &ranking {
        println!("\n-> Task: {}  [{}]", entry.task, entry.metric);
        println!("  {:<6}{:<24}estimate", "rank", "workflow");
        for (i, row) in entry.ranked.iter().enumerate() {
            println!("  {:<6}{:<24}{}", i + 1, row.workflow, sig6(row.estimate));
        }
    }
    if let Some(csv_path) = csv {
        let mut text = String::from("task,metric,rank,workflow,estimate\n");
        for entry in &ranking {
            for (i, row) in entry.ranked.iter().enumerate() {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    entry.task,
                    entry.metric,
                    i + 1,
                    row.workflow,
                    sig6(row.estimate)
                ));
            }
        }
        std::fs::write(csv_path, text).map_err(|e| e.to_string())?;
        println!("\nranking table written to {}", csv_path.display());
    }
    Ok(())
}

fn cmd_top(path: &Path, maxs: Option<&str>) -> Result<(), String> {
    let results = load(path)?;
    let maxs = parse_maxs(maxs);
    for entry in top_performers(&results, &maxs) {
        let best = entry
            .ranked
            .first()
            .map(|r| format!("{}  ({})", r.workflow, sig6(r.estimate)))
            .unwrap_or_else(|| "<no valid scores>".to_string());
        println!("{}  [{}]:  {}", entry.task, entry.metric, best);
    }
    Ok(())
}

fn cmd_scores(path: &Path, workflow: &str, task: &str) -> Result<(), String> {
    let results = load(path)?;
    let matrix = get_scores(&results, workflow, task).map_err(|e| e.to_string())?;
    println!("iteration,{}", results.metric_names.join(","));
    for (i, row) in matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| fmt_opt(*v)).collect();
        println!("{},{}", i + 1, cells.join(","));
    }
    Ok(())
}

fn cmd_subset(path: &Path, spec: SubsetSpec, output: &Path) -> Result<(), String> {
    let results = load(path)?;
    let subset = subset_results(&results, &spec).map_err(|e| e.to_string())?;
    save_results(&subset, output).map_err(|e| e.to_string())?;
    println!(
        "subset with {} task(s), {} workflow(s), {} metric(s) written to {}",
        subset.tasks.len(),
        subset.workflows.len(),
        subset.metric_names.len(),
        output.display()
    );
    Ok(())
}

fn cmd_merge(files: &[PathBuf], by: MergeBy, output: &Path, strict: bool) -> Result<(), String> {
    if files.len() < 2 {
        return Err("merge needs at least two results files".to_string());
    }
    let parts: Vec<ComparisonResults> = files
        .iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge_results(&parts, by, strict).map_err(|e| e.to_string())?;
    save_results(&merged, output).map_err(|e| e.to_string())?;
    println!(
        "{} workflows applied to {} predictive tasks; written to {}",
        merged.workflows.len(),
        merged.tasks.len(),
        output.display()
    );
    Ok(())
}

fn print_comparison(m: &MetricComparison) {
    println!("\n=== Metric: {} (alpha = {}) ===", m.setup.metric, m.setup.alpha);
    println!("baseline: {}", m.setup.baseline);
    if !m.setup.excluded.is_empty() {
        println!(
            "excluded from rank tests (incomplete scores): {}",
            m.setup.excluded.join(", ")
        );
    }
    for note in &m.setup.notes {
        println!("note: {note}");
    }
    if let Some(ranks) = &m.ranks {
        println!("\naverage ranks:");
        let mut order: Vec<usize> = (0..ranks.workflows.len()).collect();
        order.sort_by(|&a, &b| ranks.avg_ranks[a].partial_cmp(&ranks.avg_ranks[b]).unwrap());
        for i in order {
            println!("  {:<24}{}", ranks.workflows[i], sig6(ranks.avg_ranks[i]));
        }
    }
    if let Some(f) = &m.friedman {
        println!("\nF.test:");
        println!("  chi     = {}", sig6(f.chi));
        println!("  FF      = {}", sig6(f.ff));
        println!("  critVal = {}", sig6(f.crit_val));
        println!("  rejNull = {}", f.reject_null);
    }
    if let Some(n) = &m.nemenyi {
        let significant: usize = n
            .signif_difs
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().skip(i + 1).filter(|&&x| x).count())
            .sum();
        println!("\nNemenyi.test:");
        println!("  critDif = {}", sig6(n.crit_dif));
        println!("  significant pairs = {significant}");
    }
    if let Some(bd) = &m.bonferroni_dunn {
        println!("\nBonferroniDunn.test (baseline {}):", bd.baseline);
        println!("  critDif = {}", sig6(bd.crit_dif));
        for (i, wf) in bd.workflows.iter().enumerate() {
            if wf != &bd.baseline {
                println!(
                    "  {:<24}diff = {:<12} significant = {}",
                    wf,
                    sig6(bd.diffs[i]),
                    bd.signif_difs[i]
                );
            }
        }
    }
    println!("\nWilcoxonSignedRank.test / t.test p-values vs baseline:");
    for (ti, task) in m.wilcoxon.tasks.iter().enumerate() {
        println!("  task {task}:");
        for (wi, wf) in m.wilcoxon.workflows.iter().enumerate() {
            if wf == &m.setup.baseline {
                continue;
            }
            let w = &m.wilcoxon.cells[ti][wi];
            let t = &m.t_test.cells[ti][wi];
            println!(
                "    {:<24}diff = {:<12} wilcoxon p = {:<12} t p = {}",
                wf,
                fmt_opt(w.diff),
                fmt_opt(w.p_value),
                fmt_opt(t.p_value)
            );
        }
    }
}

fn cmd_compare(
    path: &Path,
    metric: Option<&str>,
    baseline: Option<&str>,
    alpha: f64,
    maxs: Option<&str>,
    output: Option<&Path>,
) -> Result<(), String> {
    let results = load(path)?;
    let maxs = parse_maxs(maxs);
    let report = paired_comparisons(&results, baseline, &maxs, alpha).map_err(|e| e.to_string())?;
    let selected: Vec<&MetricComparison> = report
        .metrics
        .iter()
        .filter(|m| metric.is_none_or(|want| m.setup.metric == want))
        .collect();
    if selected.is_empty() {
        return Err(format!(
            "metric `{}` not found in the results",
            metric.unwrap_or("")
        ));
    }
    for m in &selected {
        print_comparison(m);
    }
    if let Some(out) = output {
        let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
        std::fs::write(out, json).map_err(|e| e.to_string())?;
        println!("\nfull report written to {}", out.display());
    }
    Ok(())
}

fn cmd_cd_diagram(
    path: &Path,
    metric: &str,
    kind: DiagramKind,
    baseline: Option<&str>,
    alpha: f64,
    maxs: Option<&str>,
    output: &Path,
) -> Result<(), String> {
    let results = load(path)?;
    let maxs = parse_maxs(maxs);
    let report = paired_comparisons(&results, baseline, &maxs, alpha).map_err(|e| e.to_string())?;
    let comparison = report
        .metrics
        .iter()
        .find(|m| m.setup.metric == metric)
        .ok_or_else(|| format!("metric `{metric}` not found in the results"))?;
    let ranks = comparison
        .ranks
        .as_ref()
        .ok_or("rank tests were skipped; no diagram to draw")?;
    let diagram = match kind {
        DiagramKind::Nemenyi => {
            let test = comparison
                .nemenyi
                .as_ref()
                .ok_or("Nemenyi test unavailable (needs at least 2 tasks)")?;
            CdDiagram::from_nemenyi(ranks, test, format!("Nemenyi CD diagram \u{2014} {metric}"))
        }
        DiagramKind::Bd => {
            let test = comparison
                .bonferroni_dunn
                .as_ref()
                .ok_or("Bonferroni-Dunn test unavailable")?;
            CdDiagram::from_bonferroni_dunn(
                ranks,
                test,
                format!("Bonferroni-Dunn CD diagram \u{2014} {metric}"),
            )
        }
    };
    std::fs::write(output, render_cd_diagram(&diagram)).map_err(|e| e.to_string())?;
    println!("diagram written to {}", output.display());
    Ok(())
}

fn cmd_boxplot(path: &Path, spec: SubsetSpec, output: &Path) -> Result<(), String> {
    let results = load(path)?;
    let results = if spec.tasks.is_some() || spec.workflows.is_some() || spec.metrics.is_some() {
        subset_results(&results, &spec).map_err(|e| e.to_string())?
    } else {
        results
    };
    let svg = render_boxplot(&results).map_err(|e| e.to_string())?;
    std::fs::write(output, svg).map_err(|e| e.to_string())?;
    println!("box plot written to {}", output.display());
    Ok(())
}

fn cmd_list_metrics() {
    println!("classification: {}", perfest::metrics::CLASSIFICATION_METRICS.join(", "));
    println!("regression:     {}", perfest::metrics::REGRESSION_METRICS.join(", "));
    println!("timing:         {}", perfest::metrics::TIME_METRICS.join(", "));
    let registry = perfest::metrics::EvaluatorRegistry::with_builtins();
    let ids = registry.ids();
    if !ids.is_empty() {
        println!("evaluators:     {}", ids.join(", "));
    }
}
