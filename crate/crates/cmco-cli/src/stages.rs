//! The five pipeline stages. Each is callable as a library function (the
//! binary is a thin argument-parsing wrapper) and is idempotent given
//! identical inputs and seed.

use std::path::Path;

use serde::Serialize;

use cmco::data::{Dataset, Role};
use cmco::deeponet::{build_model, load_checkpoint, save_checkpoint, DeepONetModel};
use cmco::error::{CmcoError, Result};
use cmco::io_util::{ensure_dir, write_json};
use cmco::nn::rng::RngStream;
use cmco::tasks::{generate, load_dataset, save_dataset, split_dataset};
use cmco::train::{attach_normalization, fit, write_history_csv};
use cmco::uq::{
    calibrate, conformal_rank, evaluate_sample, load_calibration, mc_predict, read_report_csv,
    save_calibration, write_report_csv, ConformalCalibration, EnsembleStats, SampleReport,
};

use crate::config::PipelineConfig;
use crate::threads::map_samples;

/// All MC-dropout ensembling (calibration and evaluation) draws pass streams
/// under this derived seed, so both stages apply the identical stochastic
/// ensembling map and the scores stay exchangeable.
fn uq_seed(cfg: &PipelineConfig) -> u64 {
    cfg.seed ^ 0x9E37_79B9_7F4A_7C15
}

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

fn load_split(cfg: &PipelineConfig, role: Role) -> Result<Dataset> {
    let dir = cfg.paths.data_dir.join(role.as_str());
    let (ds, _) = load_dataset(&dir)?;
    if ds.role != role {
        return Err(CmcoError::Manifest {
            path: dir.display().to_string(),
            detail: format!("expected role {}, found {}", role.as_str(), ds.role.as_str()),
        });
    }
    Ok(ds)
}

/// Generate the task dataset and write the three role containers.
pub fn cmd_gen(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let mut task = cfg.task.clone();
    task.seed = cfg.seed;
    let full = generate(&task)?;
    let (train, cal, test) = split_dataset(&full, &cfg.split, cfg.seed)?;
    for ds in [&train, &cal, &test] {
        save_dataset(ds, &task, &cfg.paths.data_dir.join(ds.role.as_str()))?;
    }
    eprintln!(
        "gen: wrote {}/{}/{} samples to {}",
        train.len(),
        cal.len(),
        test.len(),
        cfg.paths.data_dir.display()
    );
    Ok(())
}

/// Train from the train split; write the checkpoint and loss history.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let train_split = load_split(cfg, Role::Train)?;
    let mut model = build_model(
        cfg.branch.clone(),
        cfg.trunk.clone(),
        RngStream::new(cfg.seed, 0),
    )?;
    let norm_fit = attach_normalization(&mut model, &train_split)?;
    if !norm_fit.floored.is_empty() {
        eprintln!(
            "train: warning: constant channel(s) {:?} had their std floored",
            norm_fit.floored
        );
    }
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    let history = fit(&mut model, &train_split, &train_cfg)?;
    save_checkpoint(&model, &cfg.paths.checkpoint)?;
    write_history_csv(&cfg.paths.checkpoint.join("loss_history.csv"), &history)?;
    if let Some(last) = history.last() {
        eprintln!(
            "train: {} epochs, final loss {:.6e}, checkpoint at {}",
            last.epoch,
            last.train_loss,
            cfg.paths.checkpoint.display()
        );
    } else {
        eprintln!(
            "train: 0 epochs, checkpoint equals initialization at {}",
            cfg.paths.checkpoint.display()
        );
    }
    Ok(())
}

fn ensemble_split(
    cfg: &PipelineConfig,
    model: &DeepONetModel,
    split: &Dataset,
) -> Result<Vec<EnsembleStats>> {
    let seed = uq_seed(cfg);
    map_samples(split.len(), |i| {
        mc_predict(
            model,
            &split.branch_inputs[i],
            &split.grid,
            cfg.uq.passes,
            seed,
            false,
        )
    })
}

/// Calibrate conformal quantiles on the calibration split.
pub fn cmd_calibrate(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let cal_split = load_split(cfg, Role::Calibration)?;
    conformal_rank(cal_split.len(), cfg.uq.alpha)?;
    let model = load_checkpoint(&cfg.paths.checkpoint)?;
    let stats = ensemble_split(cfg, &model, &cal_split)?;
    let (calibration, diagnostics) = calibrate(
        &stats,
        &cal_split.fields,
        cfg.uq.alpha,
        cfg.uq.z,
        cfg.uq.sigma_floor,
    )?;
    if diagnostics.floored_fraction > 0.1 {
        eprintln!(
            "calibrate: warning: {:.1}% of ensemble spreads at or below the sigma floor; \
             scores degrade to absolute residuals there",
            diagnostics.floored_fraction * 100.0
        );
    }
    save_calibration(&calibration, &cfg.paths.calibration)?;
    eprintln!(
        "calibrate: n_cal = {}, alpha = {}, z = {}, passes = {}, artifact at {}",
        calibration.n_cal,
        calibration.alpha,
        calibration.z,
        calibration.n_c,
        cfg.paths.calibration.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CoverageSummary {
    average_pct: f64,
    min_pct: f64,
    max_pct: f64,
}

#[derive(Debug, Serialize)]
struct EvaluationSummary {
    format_version: u32,
    n_test: usize,
    alpha: f64,
    z: f64,
    passes: usize,
    nominal_coverage_pct: f64,
    coverage: CoverageSummary,
    samples_ge_nominal: usize,
    samples_lt_nominal: usize,
    mean_rel_l2_pct: f64,
    mean_rel_err_pct: f64,
    outlier_count: usize,
    raw_coverage_average_pct: f64,
}

fn summarize(rows: &[SampleReport], raw_rows: &[SampleReport], cfg: &PipelineConfig) -> EvaluationSummary {
    let n = rows.len();
    let nominal = (1.0 - cfg.uq.alpha) * 100.0;
    // Plain iterator sums in row order; the summary-recomputation contract
    // relies on this being reproducible from the CSV with the same
    // expressions.
    let avg = rows.iter().map(|r| r.coverage * 100.0).sum::<f64>() / n as f64;
    let min = rows.iter().map(|r| r.coverage * 100.0).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.coverage * 100.0).fold(f64::NEG_INFINITY, f64::max);
    let ge = rows.iter().filter(|r| r.coverage * 100.0 >= nominal).count();
    let rel_l2 = rows.iter().map(|r| r.rel_l2_pct).sum::<f64>();
    let rel_err = rows.iter().map(|r| r.mean_rel_err_pct).sum::<f64>();
    let outliers = rows.iter().filter(|r| r.outlier).count();
    let raw_avg = raw_rows.iter().map(|r| r.coverage * 100.0).sum::<f64>() / n as f64;
    EvaluationSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        n_test: n,
        alpha: cfg.uq.alpha,
        z: cfg.uq.z,
        passes: cfg.uq.passes,
        nominal_coverage_pct: nominal,
        coverage: CoverageSummary {
            average_pct: avg,
            min_pct: min,
            max_pct: max,
        },
        samples_ge_nominal: ge,
        samples_lt_nominal: n - ge,
        mean_rel_l2_pct: rel_l2 / n as f64,
        mean_rel_err_pct: rel_err / n as f64,
        outlier_count: outliers,
        raw_coverage_average_pct: raw_avg,
    }
}

/// Evaluate the test split under the stored calibration; write per-sample
/// reports (calibrated and raw-MC), interval dumps, and the summary.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let test_split = load_split(cfg, Role::Test)?;
    let model = load_checkpoint(&cfg.paths.checkpoint)?;
    let calibration = load_calibration(&cfg.paths.calibration)?;
    calibration.check_provenance(cfg.uq.alpha, cfg.uq.z, cfg.uq.passes)?;
    if calibration.q.len() != test_split.grid.len() {
        return Err(CmcoError::ProvenanceMismatch(format!(
            "calibration covers {} query points but the test grid has {}",
            calibration.q.len(),
            test_split.grid.len()
        )));
    }

    // Raw MC-dropout baseline: the same intervals with the conformal
    // correction removed (q = 1 everywhere).
    let raw_calibration = ConformalCalibration {
        q: vec![1.0; calibration.q.len()],
        ..calibration.clone()
    };

    let stats = ensemble_split(cfg, &model, &test_split)?;
    let mut rows = Vec::with_capacity(test_split.len());
    let mut raw_rows = Vec::with_capacity(test_split.len());
    let mut interval_lines = String::from("sample_id,point_index,truth,mean,lower,upper\n");
    for (i, st) in stats.iter().enumerate() {
        let truth = test_split.fields.row(i);
        let (report, intervals) =
            evaluate_sample(i, st, truth, &calibration, &cfg.uq.outlier, cfg.uq.rel_err_eps)?;
        let (raw_report, _) =
            evaluate_sample(i, st, truth, &raw_calibration, &cfg.uq.outlier, cfg.uq.rel_err_eps)?;
        for j in 0..truth.len() {
            interval_lines.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i, j, truth[j], st.mean[j], intervals.lower[j], intervals.upper[j]
            ));
        }
        rows.push(report);
        raw_rows.push(raw_report);
    }

    ensure_dir(&cfg.paths.report_dir)?;
    write_report_csv(&cfg.paths.report_dir.join("report.csv"), &rows)?;
    write_report_csv(&cfg.paths.report_dir.join("raw_report.csv"), &raw_rows)?;
    std::fs::write(cfg.paths.report_dir.join("intervals.csv"), interval_lines)
        .map_err(|e| CmcoError::io(cfg.paths.report_dir.display().to_string(), e))?;
    let summary = summarize(&rows, &raw_rows, cfg);
    write_json(&cfg.paths.report_dir.join("summary.json"), &summary)?;
    eprintln!(
        "evaluate: {} samples, average coverage {:.2}% (raw MC {:.2}%), mean rel L2 {:.2}%",
        summary.n_test,
        summary.coverage.average_pct,
        summary.raw_coverage_average_pct,
        summary.mean_rel_l2_pct
    );
    Ok(())
}

const HIST_BINS: usize = 20;

fn coverage_histogram(rows: &[SampleReport]) -> [usize; HIST_BINS] {
    let mut counts = [0usize; HIST_BINS];
    for r in rows {
        // Last bin is closed on both ends so coverage 1.0 lands in it.
        let idx = ((r.coverage * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        counts[idx] += 1;
    }
    counts
}

/// Best sample: argmax coverage; worst: argmin coverage. Ties on coverage
/// break toward the lower mean relative error in both directions.
fn pick_best_worst(rows: &[SampleReport]) -> (usize, usize) {
    let mut best = 0;
    let mut worst = 0;
    for (i, r) in rows.iter().enumerate() {
        let b = &rows[best];
        if r.coverage > b.coverage
            || (r.coverage == b.coverage && r.mean_rel_err_pct < b.mean_rel_err_pct)
        {
            best = i;
        }
        let w = &rows[worst];
        if r.coverage < w.coverage
            || (r.coverage == w.coverage && r.mean_rel_err_pct < w.mean_rel_err_pct)
        {
            worst = i;
        }
    }
    (rows[best].sample_id, rows[worst].sample_id)
}

/// Emit plot-ready files from the evaluate outputs.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let report_dir = &cfg.paths.report_dir;
    let rows = read_report_csv(&report_dir.join("report.csv"))?;
    let raw_rows = read_report_csv(&report_dir.join("raw_report.csv"))?;
    if rows.is_empty() {
        return Err(CmcoError::InvalidConfig("empty evaluation report".into()));
    }

    // 1. Coverage histogram, calibrated vs raw MC.
    let cal_hist = coverage_histogram(&rows);
    let raw_hist = coverage_histogram(&raw_rows);
    let mut hist = String::from("bin_lo,bin_hi,count_calibrated,count_raw\n");
    for b in 0..HIST_BINS {
        hist.push_str(&format!(
            "{},{},{},{}\n",
            b as f64 / HIST_BINS as f64,
            (b + 1) as f64 / HIST_BINS as f64,
            cal_hist[b],
            raw_hist[b]
        ));
    }
    std::fs::write(report_dir.join("coverage_hist.csv"), hist)
        .map_err(|e| CmcoError::io(report_dir.display().to_string(), e))?;

    // 2. Failure rate vs mean relative error scatter with the nominal-level
    // color coding.
    let nominal = 1.0 - cfg.uq.alpha;
    let mut scatter = String::from("sample_id,failure_rate_pct,mean_rel_err_pct,undercovered\n");
    for r in &rows {
        scatter.push_str(&format!(
            "{},{},{},{}\n",
            r.sample_id,
            r.failure_rate_pct,
            r.mean_rel_err_pct,
            u8::from(r.coverage < nominal)
        ));
    }
    std::fs::write(report_dir.join("failure_vs_error.csv"), scatter)
        .map_err(|e| CmcoError::io(report_dir.display().to_string(), e))?;

    // 3. Field dumps for the best- and worst-covered samples.
    let (best_id, worst_id) = pick_best_worst(&rows);
    let intervals = std::fs::read_to_string(report_dir.join("intervals.csv"))
        .map_err(|e| CmcoError::io(report_dir.display().to_string(), e))?;
    for (name, id) in [("best_sample.csv", best_id), ("worst_sample.csv", worst_id)] {
        let mut out = String::from("point_index,truth,mean,lower,upper\n");
        for line in intervals.lines().skip(1) {
            let mut parts = line.splitn(2, ',');
            let sid: usize = parts.next().unwrap_or("").parse().unwrap_or(usize::MAX);
            if sid == id {
                out.push_str(parts.next().unwrap_or(""));
                out.push('\n');
            }
        }
        std::fs::write(report_dir.join(name), out)
            .map_err(|e| CmcoError::io(report_dir.display().to_string(), e))?;
    }
    eprintln!(
        "report: histogram, scatter, and field dumps (best sample {best_id}, worst sample {worst_id}) in {}",
        report_dir.display()
    );
    Ok(())
}

/// Convenience for tests: run gen -> train -> calibrate -> evaluate.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<()> {
    cmd_gen(cfg)?;
    cmd_train(cfg)?;
    cmd_calibrate(cfg)?;
    cmd_evaluate(cfg)
}

/// Re-derive summary statistics from a report CSV (used by tests to check
/// the summary JSON against an independent pass over the rows).
pub fn recompute_summary_from_csv(
    path: &Path,
    nominal_pct: f64,
) -> Result<(f64, f64, f64, usize, usize)> {
    let rows = read_report_csv(path)?;
    let n = rows.len();
    let avg = rows.iter().map(|r| r.coverage * 100.0).sum::<f64>() / n as f64;
    let min = rows.iter().map(|r| r.coverage * 100.0).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.coverage * 100.0).fold(f64::NEG_INFINITY, f64::max);
    let ge = rows.iter().filter(|r| r.coverage * 100.0 >= nominal_pct).count();
    Ok((avg, min, max, ge, n - ge))
}
