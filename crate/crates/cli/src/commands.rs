use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{de::DeserializeOwned, Serialize};
use uwbcal::apc::{calibrate as run_apc, gate, ApcConfig};
use uwbcal::dataio::{
    ate, parse_calibration, parse_trajectory, write_atomic, write_calibration, write_config_echo, write_sequence,
    write_trajectory, Alignment, RunBundle,
};
use uwbcal::geometry::Frame;
use uwbcal::lcrsf::{run_fusion, FusionConfig, WindowTiming};
use uwbcal::par::Execution;
use uwbcal::simgen::{generate, ScenarioConfig};
use uwbcal::Link;

use crate::{CalibrateArgs, FilterReportArgs, FuseArgs};

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_toml)
}

#[derive(Serialize)]
struct Echo<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
}

fn echo<C: Serialize>(output: &Path, command: &str, config: &C) -> Result<()> {
    Ok(write_config_echo(output, &Echo { command, config })?)
}

fn load_bundle(path: &Path) -> Result<uwbcal::dataio::RunData> {
    let bundle = RunBundle::load(path)?;
    let data = bundle.read()?;
    if data.ranges.ranges.is_empty() {
        bail!("{}: no usable ranges", bundle.ranges.display());
    }
    Ok(data)
}

pub fn simulate(scenario: &Path, outdir: &Path) -> Result<()> {
    let cfg: ScenarioConfig = read_toml(scenario)?;
    let truth = generate(&cfg)?;
    for k in 0..truth.sequences.len() {
        let dir = write_sequence(outdir, &truth, k)?;
        println!("{}", dir.display());
    }
    echo(&outdir.join("scenario"), "simulate", &cfg)
}

pub fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let mut cfg: ApcConfig = config_or_default(args.config.as_deref())?;
    cfg.tau = args.tau.unwrap_or(cfg.tau);
    cfg.cauchy_scale = args.cauchy_scale.unwrap_or(cfg.cauchy_scale);
    if args.sequential {
        cfg.solver.execution = Execution::Sequential;
    }
    let mut data = load_bundle(&args.bundle)?;
    if args.no_pair_priors {
        data.priors.pairs.clear();
    }
    if args.no_height_priors {
        data.priors.heights.clear();
    }
    cfg.use_height_priors = !data.priors.heights.is_empty();
    let result = run_apc(&data.trajectory, &data.ranges.ranges, &data.extrinsics, &data.priors, &cfg)?;
    write_calibration(&args.out, &result)?;
    echo(&args.out, "calibrate", &cfg)?;

    let (inliers, rejected) = result.stats.values().fold((0, 0), |(i, r), s| (i + s.inliers, r + s.rejected));
    println!("anchors {}", result.anchors.len());
    println!("inliers {inliers}");
    println!("rejected {rejected}");
    println!("cost {:.6e} -> {:.6e}", result.stage2.initial_cost, result.stage2.final_cost);
    Ok(())
}

fn timing_csv(windows: &[WindowTiming]) -> String {
    let mut out = String::from("index,t_end,poses,ranges,iterations,termination,final_cost,wall_ms\n");
    for w in windows {
        let termination = serde_json::to_value(w.termination).ok().and_then(|v| v.as_str().map(str::to_owned));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3}",
            w.index,
            w.t_end,
            w.poses,
            w.ranges,
            w.iterations,
            termination.unwrap_or_default(),
            w.final_cost,
            w.wall_ms
        )
        .expect("string write");
    }
    out
}

/// Mean, 95th percentile and fraction below 100 ms of the window times.
pub fn timing_summary(windows: &[WindowTiming]) -> (f64, f64, f64) {
    if windows.is_empty() {
        return (0.0, 0.0, 1.0);
    }
    let mut ms: Vec<f64> = windows.iter().map(|w| w.wall_ms).collect();
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    let p95 = ms[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
    let under = ms.iter().filter(|&&m| m < 100.0).count() as f64 / n as f64;
    (ms.iter().sum::<f64>() / n as f64, p95, under)
}

pub fn fuse(args: &FuseArgs) -> Result<()> {
    let mut cfg: FusionConfig = config_or_default(args.config.as_deref())?;
    cfg.window = args.window.unwrap_or(cfg.window);
    cfg.stride = args.stride.unwrap_or(cfg.stride);
    cfg.tau = args.tau.unwrap_or(cfg.tau);
    cfg.cauchy_scale = args.cauchy_scale.unwrap_or(cfg.cauchy_scale);
    if args.sequential {
        cfg.solver.execution = Execution::Sequential;
    }
    let calib = parse_calibration(&args.calib)?;
    let data = load_bundle(&args.bundle)?;
    let run = run_fusion(
        &data.trajectory,
        &data.ranges.ranges,
        &calib.result.anchors,
        &calib.result.biases,
        &data.extrinsics,
        &cfg,
    )?;
    write_trajectory(&args.out, run.trajectory())?;
    echo(&args.out, "fuse", &cfg)?;

    let windows = &run.output.windows;
    if let Some(path) = &args.timing {
        write_atomic(path, timing_csv(windows).as_bytes())?;
        echo(path, "fuse", &cfg)?;
    }
    let (mean, p95, under) = timing_summary(windows);
    let ranges = windows.iter().map(|w| w.ranges).sum::<usize>() as f64 / windows.len().max(1) as f64;
    println!("poses {}", run.trajectory().len());
    println!("windows {}", windows.len());
    println!("ranges_per_window {ranges:.1}");
    println!("mean_ms {mean:.2}");
    println!("p95_ms {p95:.2}");
    println!("under_100ms {:.1}%", 100.0 * under);
    if let Some(a) = &run.init.ambiguity {
        eprintln!(
            "warning: initial yaw ambiguous ({:.1} vs {:.1} deg)",
            a.best.yaw.to_degrees(),
            a.rival.yaw.to_degrees()
        );
    }
    Ok(())
}

pub fn eval_ate(estimate: &Path, groundtruth: &Path, align: Alignment, out: Option<&Path>) -> Result<()> {
    let est = parse_trajectory(estimate, Frame::Anchor)?;
    let gt = parse_trajectory(groundtruth, Frame::Anchor)?;
    let report = ate(&est, &gt, align).with_context(|| format!("{} against {}", estimate.display(), groundtruth.display()))?;
    println!("RMSE {:.3}", report.rmse);
    println!("mean {:.3}", report.mean);
    println!("median {:.3}", report.median);
    println!("max {:.3}", report.max);
    println!("pairs {}", report.errors.len());
    if let Some(path) = out {
        let mut text = String::from("t,error_m\n");
        for (t, e) in &report.errors {
            writeln!(text, "{t},{e}").expect("string write");
        }
        write_atomic(path, text.as_bytes())?;
        echo(path, "eval-ate", &align)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportConfig {
    tau: f64,
}

pub fn filter_report(args: &FilterReportArgs) -> Result<()> {
    let calib = parse_calibration(&args.calib)?;
    let data = load_bundle(&args.bundle)?;
    let cfg = ReportConfig { tau: args.tau.unwrap_or(calib.result.config.tau) };
    let ranges = &data.ranges.ranges;
    let decisions = gate(
        ranges,
        &calib.result.anchors,
        &calib.result.biases,
        &data.trajectory,
        &data.extrinsics,
        cfg.tau,
        Execution::default(),
    );

    let mut series: BTreeMap<Link, String> = BTreeMap::new();
    let mut counts: BTreeMap<Link, (usize, usize)> = BTreeMap::new();
    for (m, d) in ranges.iter().zip(&decisions) {
        let link = Link { tag: m.tag.clone(), anchor: m.anchor.clone() };
        let text = series.entry(link.clone()).or_insert_with(|| String::from("t,range_m,filtered,predicted_m\n"));
        let predicted = d.predicted.map(|p| p.to_string()).unwrap_or_default();
        writeln!(text, "{},{},{},{predicted}", m.t, m.d, u8::from(!d.kept)).expect("string write");
        let c = counts.entry(link).or_default();
        c.0 += 1;
        c.1 += usize::from(!d.kept);
    }
    for (link, text) in &series {
        write_atomic(&args.out.join(format!("{}_{}.csv", link.tag, link.anchor)), text.as_bytes())?;
    }
    let mut summary = String::from("tag_id,anchor_id,ranges,filtered\n");
    for (link, (n, f)) in &counts {
        writeln!(summary, "{},{},{n},{f}", link.tag, link.anchor).expect("string write");
    }
    let path = args.out.join("summary.csv");
    write_atomic(&path, summary.as_bytes())?;
    echo(&path, "filter-report", &cfg)?;
    print!("{summary}");
    Ok(())
}
