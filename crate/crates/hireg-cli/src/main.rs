//! `hireg` — run localization scenarios, locate from measurement files,
//! analyze anchor geometry, and sweep regularization parameters.

mod config;
mod files;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use hireg::bias_correction::SlidingWindow;
use hireg::regularization::{loss_relaxed, MethodTag, PlanRequest, ResolvedMethod};
use hireg::report::{reports_to_csv, reports_to_json};
use hireg::scenarios::{run_scenario, run_scenarios_parallel, MethodConfig};
use hireg::solvers::{solve_ls, solve_with};
use hireg::spectral::{eig_sym, normal_matrix};
use hireg::{localization, Mu2Setting};

use config::{build_request, CutField, Mu2Field, OmegaField, SimulateConfig, SweepConfig};

#[derive(Parser)]
#[command(
    name = "hireg",
    about = "High-order regularization for ill-conditioned range-based localization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario(s) described by a JSON config and write CSV + JSON reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed(s) with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the range-noise sigma (meters).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Estimate positions for a measurement stream.
    Locate {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        /// ls|tr|tsvd|ftr|oftr|hr
        #[arg(long, default_value = "hr")]
        method: String,
        /// Series order.
        #[arg(long)]
        k: Option<usize>,
        /// Regularization level: a number, `auto`, or `second_smallest`.
        #[arg(long)]
        mu2: Option<String>,
        /// Adjustment parameter: a number, `zero`, or `lambda_min`.
        #[arg(long)]
        omega: Option<String>,
        /// Sliding-window length for online bias correction (0 disables).
        #[arg(long, default_value_t = hireg::bias_correction::DEFAULT_WINDOW_LEN)]
        window: usize,
        /// TSVD truncation count.
        #[arg(long)]
        truncate: Option<usize>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print conditioning diagnostics for an anchor geometry.
    Analyze {
        #[arg(long)]
        anchors: PathBuf,
        /// Also write the JSON to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the a-priori loss (and optionally scenario RMSE) over a μ² grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (defaults next to the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("HIREG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            sigma,
        } => cmd_simulate(&config, out.as_deref(), seed, sigma),
        Command::Locate {
            anchors,
            measurements,
            method,
            k,
            mu2,
            omega,
            window,
            truncate,
            out,
        } => cmd_locate(
            &anchors,
            &measurements,
            &method,
            k,
            mu2.as_deref(),
            omega.as_deref(),
            window,
            truncate,
            out.as_deref(),
        ),
        Command::Analyze { anchors, out } => cmd_analyze(&anchors, out.as_deref()),
        Command::Sweep { config, out } => cmd_sweep(&config, out.as_deref()),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

fn output_paths(
    config_path: &Path,
    out_dir: Option<&Path>,
    suffixes: (&str, &str),
) -> anyhow::Result<(PathBuf, PathBuf)> {
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".to_string());
    let dir = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            dir.to_path_buf()
        }
        None => config_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    Ok((
        dir.join(format!("{stem}{}", suffixes.0)),
        dir.join(format!("{stem}{}", suffixes.1)),
    ))
}

fn cmd_simulate(
    config_path: &Path,
    out_dir: Option<&Path>,
    seed_override: Option<u64>,
    sigma_override: Option<f64>,
) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let mut config: SimulateConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", config_path.display()))?;
    if let Some(seed) = seed_override {
        config.seed = Some(seed);
        config.seeds = None;
    }
    if let Some(sigma) = sigma_override {
        config.sigma = sigma;
    }

    let seeds = config.seeds()?;
    let methods = config.method_configs()?;
    let scenarios = seeds
        .iter()
        .map(|&seed| config.scenario_for_seed(seed))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let reports = run_scenarios_parallel(&scenarios, &methods, config.window)?;

    let effective_config = serde_json::to_value(&config)?;
    let (csv_path, json_path) =
        output_paths(config_path, out_dir, (".report.csv", ".report.json"))?;
    std::fs::write(&csv_path, reports_to_csv(&reports))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    std::fs::write(&json_path, reports_to_json(&effective_config, &reports)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_locate(
    anchors_path: &Path,
    measurements_path: &Path,
    method: &str,
    k: Option<usize>,
    mu2: Option<&str>,
    omega: Option<&str>,
    window: usize,
    truncate: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let anchors = files::read_anchors(anchors_path)?;
    let measurements = files::read_measurements(measurements_path, anchors.len())?;
    let method: MethodTag = method.parse()?;
    let mu2_field = mu2.map(parse_mu2_flag);
    let omega_field = omega.map(parse_omega_flag);
    let request = build_request(
        method,
        k,
        mu2_field.as_ref(),
        omega_field.as_ref(),
        truncate,
        None::<&CutField>,
    )?;

    // The design matrix is fixed by the anchors, so resolve once.
    let probe = localization::build_system(&anchors, &measurements[0])?;
    let spec = eig_sym(&normal_matrix(&probe))?;
    let resolved = request.resolve(&spec)?;

    let mut body = String::new();
    let mu2_note = match (&resolved, &request.mu2) {
        (ResolvedMethod::Series(plan), Mu2Setting::Auto) => {
            format!(" mu2={} (auto)", plan.mu2())
        }
        (ResolvedMethod::Series(plan), Mu2Setting::SecondSmallest) => {
            format!(" mu2={} (second_smallest)", plan.mu2())
        }
        (ResolvedMethod::Series(plan), Mu2Setting::Value(_)) => {
            format!(" mu2={}", plan.mu2())
        }
        _ => String::new(),
    };
    let k_note = match &resolved {
        ResolvedMethod::Series(plan) => format!(" k={}", plan.order()),
        ResolvedMethod::Tsvd { truncate } => format!(" truncate={truncate}"),
        ResolvedMethod::LeastSquares => String::new(),
    };
    body.push_str(&format!(
        "# method={method}{k_note}{mu2_note} window={window}\n"
    ));
    body.push_str("tick,x,y,z,method,corrected\n");

    let is_series = matches!(resolved, ResolvedMethod::Series(_));
    let mut sliding = if is_series && window > 0 {
        Some(SlidingWindow::new(window, 3)?)
    } else {
        None
    };

    for measurement in &measurements {
        let tick = measurement.tick();
        let system = localization::build_system(&anchors, measurement)?;
        let outcome = match solve_with(&system, &resolved) {
            Ok(outcome) => outcome,
            Err(_) => {
                body.push_str(&format!("{tick},,,,{method},failed\n"));
                continue;
            }
        };
        let mut estimate = outcome.estimate;
        let mut corrected = "no";
        if let Some(w) = sliding.as_mut() {
            if let Ok(ls) = solve_ls(&system) {
                w.push(&estimate - &ls.estimate)?;
            }
            if w.is_warmed_up() {
                estimate = w.correct(&estimate)?;
                corrected = "yes";
            }
        }
        body.push_str(&format!(
            "{tick},{},{},{},{method},{corrected}\n",
            estimate[0], estimate[1], estimate[2]
        ));
    }

    match out {
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn parse_mu2_flag(raw: &str) -> Mu2Field {
    match raw.parse::<f64>() {
        Ok(v) => Mu2Field::Number(v),
        Err(_) => Mu2Field::Keyword(raw.to_string()),
    }
}

fn parse_omega_flag(raw: &str) -> OmegaField {
    match raw.parse::<f64>() {
        Ok(v) => OmegaField::Number(v),
        Err(_) => OmegaField::Keyword(raw.to_string()),
    }
}

fn cmd_analyze(anchors_path: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let anchors = files::read_anchors(anchors_path)?;
    let report = localization::ill_condition_report(&anchors)?;

    let mut warnings = Vec::new();
    if report.rank < 3 {
        warnings.push(format!(
            "design matrix rank {} < 3: anchors are coplanar or collinear",
            report.rank
        ));
    }
    let summary = if report.rank < 3 {
        "degenerate geometry: least squares has no unique solution".to_string()
    } else if report.regularization_needed {
        format!(
            "ill-conditioned (kappa = {:.3e}); relaxed regularization suggested at s = {}",
            report.condition_number, report.suggested_s
        )
    } else {
        "no regularization needed".to_string()
    };

    let document = serde_json::json!({
        "report": report,
        "warnings": warnings,
        "summary": summary,
    });
    let mut body = serde_json::to_string_pretty(&document)?;
    body.push('\n');
    print!("{body}");
    if let Some(path) = out {
        std::fs::write(path, &body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_sweep(config_path: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config: SweepConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", config_path.display()))?;
    if config.k.is_empty() {
        bail!("sweep config lists no k values");
    }

    let anchors = config::build_anchors(&config.anchors, config.reference_anchor)?;
    let a = anchors.design_matrix();
    let spec = eig_sym(&(a.transpose() * &a))?;
    let (lambda1, lambda_n1, lambda_n) = (spec.largest(), spec.second_smallest(), spec.smallest());
    if lambda_n <= 0.0 {
        bail!("anchor geometry is rank deficient; the sweep interval is undefined");
    }

    let grid: Vec<f64> = match config.grid.as_ref().and_then(|g| g.values.clone()) {
        Some(values) => {
            if values.is_empty() {
                bail!("grid.values is empty");
            }
            for &v in &values {
                if v < lambda_n * (1.0 - 1e-12) || v > lambda_n1 * (1.0 + 1e-12) {
                    bail!(
                        "grid value {v} outside the admissible interval [{lambda_n}, {lambda_n1}]"
                    );
                }
            }
            values
        }
        None => {
            let count = config
                .grid
                .as_ref()
                .and_then(|g| g.count)
                .unwrap_or(101)
                .max(1);
            if count == 1 {
                vec![lambda_n]
            } else {
                (0..count)
                    .map(|i| lambda_n + (lambda_n1 - lambda_n) * i as f64 / (count - 1) as f64)
                    .collect()
            }
        }
    };

    // Optional RMSE column from an attached scenario.
    let scenario_seed = config.seed.unwrap_or(0);
    let base_scenario = match &config.scenario {
        Some(sc) => {
            let Some(sigma) = config.sigma else {
                bail!("sweep with a scenario requires sigma")
            };
            let sim = SimulateConfig {
                anchors: config.anchors.clone(),
                reference_anchor: config.reference_anchor,
                scenario: serde_json::from_value(serde_json::to_value(sc)?)?,
                sigma,
                seed: Some(scenario_seed),
                seeds: None,
                window: config.window,
                methods: Vec::new(),
            };
            Some(sim.scenario_for_seed(scenario_seed)?)
        }
        None => None,
    };

    let mut body = String::from("k,mu2,loss,rmse\n");
    for &k in &config.k {
        let mut losses = Vec::with_capacity(grid.len());
        for &mu2 in &grid {
            let mu2 = mu2.max(lambda_n);
            let loss = loss_relaxed(mu2, k, lambda1, lambda_n)?;
            losses.push(loss);
            let rmse_field = match &base_scenario {
                Some(scenario) => {
                    let request = PlanRequest::hr(k).with_mu2(Mu2Setting::Value(mu2));
                    let mut method = MethodConfig::new(request);
                    if let Some(correction) = config.correction {
                        method = method.with_correction(correction);
                    }
                    let report = run_scenario(scenario, &[method], config.window)?;
                    format!("{}", report.methods[0].total_rmse)
                }
                None => String::new(),
            };
            body.push_str(&format!("{k},{mu2},{loss},{rmse_field}\n"));
        }
        verify_convexity(k, &grid, &losses)?;
    }

    let (default_path, _) = output_paths(config_path, None, (".sweep.csv", ""))?;
    let path = out.map(Path::to_path_buf).unwrap_or(default_path);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// The a-priori loss is convex in μ²; a violation on the sampled grid means
/// the numbers are unusable and the run exits nonzero.
fn verify_convexity(k: usize, grid: &[f64], losses: &[f64]) -> anyhow::Result<()> {
    for i in 1..grid.len().saturating_sub(1) {
        let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
        if x2 <= x0 {
            continue;
        }
        let t = (x1 - x0) / (x2 - x0);
        let chord = losses[i - 1] * (1.0 - t) + losses[i + 1] * t;
        let scale = 1.0 + losses[i - 1].abs() + losses[i + 1].abs();
        if losses[i] > chord + 1e-9 * scale {
            bail!(
                "loss is not convex along mu2 at k = {k}, mu2 = {x1} \
                 (loss {} above chord {chord})",
                losses[i]
            );
        }
    }
    Ok(())
}
