//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. The default pipeline is executed twice through the
//! `autotwin` binary; most criteria read the first run's artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use autotwin::automl::{load_twin, save_twin, search, Family, Leaderboard, Preset, SearchOptions};
use autotwin::bench::{published_projection, BenchReport, Variant};
use autotwin::data::{read_csv, write_csv_to, Target};
use autotwin::pipeline::comparable_contents;
use autotwin::signal::{gaussian_deltas, savitzky_golay, sg_coefficients, FilterSpec, NoiseSpec};
use autotwin::sim::{simulate_path, FlowSpec, PathConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Ledger {
    failures: usize,
}

impl Ledger {
    fn record(&mut self, n: u32, title: &str, outcome: Outcome) {
        match outcome {
            Ok(detail) => println!("PASS  criterion {n:>2} {title}: {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  criterion {n:>2} {title}: {detail}");
            }
        }
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn savitzky_golay_oracle() -> Outcome {
    let frac = |num: &[f64], den: f64| num.iter().map(|v| v / den).collect::<Vec<_>>();
    let cases = [
        ((5, 2), frac(&[-3.0, 12.0, 17.0, 12.0, -3.0], 35.0)),
        ((7, 2), frac(&[-2.0, 3.0, 6.0, 7.0, 6.0, 3.0, -2.0], 21.0)),
    ];
    let mut worst_coef = 0.0f64;
    for ((w, o), exact) in &cases {
        let c = sg_coefficients(&FilterSpec::new(*w, *o).unwrap());
        if c.len() != exact.len() {
            return Err(format!("({w},{o}) has {} weights", c.len()));
        }
        worst_coef = c
            .iter()
            .zip(exact)
            .map(|(a, b)| (a - b).abs())
            .fold(worst_coef, f64::max);
    }
    let spec = FilterSpec::new(11, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_poly = 0.0f64;
    for _ in 0..200 {
        let k: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let n = rng.random_range(11..200);
        let series: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64 * 4.0 - 2.0;
                k[0] + k[1] * x + k[2] * x * x + k[3] * x * x * x
            })
            .collect();
        let out = savitzky_golay(&series, &spec).map_err(|e| e.to_string())?;
        worst_poly = out
            .iter()
            .zip(&series)
            .map(|(a, b)| (a - b).abs())
            .fold(worst_poly, f64::max);
    }
    check(
        worst_coef <= 1e-9 && worst_poly <= 1e-9,
        format!("max weight error {worst_coef:.1e}, max cubic reproduction error {worst_poly:.1e} (limit 1e-9)"),
    )
}

fn noise_statistics() -> Outcome {
    let spec = NoiseSpec {
        sigma: 1.0,
        mu: 0.0,
        seed: 2024,
        ..NoiseSpec::default()
    };
    let d = gaussian_deltas(&spec, 10_000).map_err(|e| e.to_string())?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let again = gaussian_deltas(&spec, 10_000).map_err(|e| e.to_string())?;
    let identical = d
        .iter()
        .zip(&again)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    check(
        (-0.05..=0.05).contains(&mean) && (0.95..=1.05).contains(&std) && identical,
        format!("mean {mean:.4}, std {std:.4}, reseeded draws bit-identical: {identical}"),
    )
}

fn simulator_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut runs = 0;
    for case in 0..500 {
        let file = rng.random_range(15_000u64..1_500_000);
        let flow = FlowSpec {
            file_bytes: file,
            ..FlowSpec::default()
        };
        for _ in 0..2 {
            let p = PathConfig::new(rng.random_range(5.0..400.0), rng.random_range(50..300));
            let r = simulate_path(&p, &flow).map_err(|e| format!("case {case}: {e}"))?;
            let again = simulate_path(&p, &flow).map_err(|e| e.to_string())?;
            if r != again || r.latency_s.to_bits() != again.latency_s.to_bits() {
                return Err(format!("case {case}: rerun differs for {p:?}"));
            }
            let fluid = 8.0 * file as f64 / (p.bandwidth_mbps * 1e6);
            if r.latency_s < fluid {
                return Err(format!(
                    "case {case}: latency {} below fluid bound {fluid}",
                    r.latency_s
                ));
            }
            if r.packets_sent != r.packets_delivered + r.packets_dropped {
                return Err(format!("case {case}: packets not conserved {r:?}"));
            }
            if r.fifo_violations != 0 {
                return Err(format!("case {case}: FIFO order violated"));
            }
            let quicker = PathConfig::new(
                (p.bandwidth_mbps * rng.random_range(1.05..3.0)).min(999.0),
                p.queue_pkts,
            );
            let q = simulate_path(&quicker, &flow).map_err(|e| e.to_string())?;
            if q.latency_s > r.latency_s {
                return Err(format!(
                    "case {case}: {} Mbps took {} s but {} Mbps took {} s",
                    p.bandwidth_mbps, r.latency_s, quicker.bandwidth_mbps, q.latency_s
                ));
            }
            runs += 3;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs <= 300.0,
        format!("500 configs ({runs} path runs): determinism, fluid bound, monotonicity, conservation, FIFO hold; {secs:.1} s"),
    )
}

fn run_pipeline(out: &Path) -> Result<f64, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_autotwin"))
        .args(["pipeline", "--out"])
        .arg(out)
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("pipeline exited with {status}"));
    }
    Ok(start.elapsed().as_secs_f64())
}

fn read_report(dir: &Path) -> Result<BenchReport, String> {
    let text = fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn end_to_end_accuracy(report: &BenchReport, secs: f64) -> Outcome {
    let raw = report
        .accuracy_of(Variant::Raw)
        .ok_or("no raw accuracy in report")?;
    let (a1, a2) = (raw.path1.accuracy_pct, raw.path2.accuracy_pct);
    check(
        a1 >= 95.0 && a2 >= 95.0 && report.heldout_rows == 2000,
        format!(
            "held-out accuracy path1 {a1:.3}%, path2 {a2:.3}% over {} configs (floor 95%); pipeline {secs:.0} s",
            report.heldout_rows
        ),
    )
}

fn speedup(report: &BenchReport) -> Outcome {
    let s = &report.timing.speedup;
    check(
        s.speedup >= 100.0 && s.n_timed >= 100 && s.repeats >= 5 && report.is_consistent(),
        format!(
            "{:.1}x (sim {:.5} s, twin {:.2e} s per config; {} configs x {} repeats; floor 100x)",
            s.speedup, s.sim_mean_s, s.twin_mean_s, s.n_timed, s.repeats
        ),
    )
}

fn projection(report: &BenchReport) -> Outcome {
    let p = &report.timing.projection;
    let published = published_projection();
    check(
        p.projection_factor >= 50.0
            && p.grid_size == 194_481
            && (published.projection_factor - 264.7).abs() <= 0.1
            && report.published_projection == published,
        format!(
            "measured {:.1}x ({:.3} h vs {:.4} h, floor 50x); published constants give {:.2}x",
            p.projection_factor,
            p.full_grid_sim_hours,
            p.pipeline_hours,
            published.projection_factor
        ),
    )
}

fn leaderboard_structure(dir: &Path) -> Outcome {
    let train = read_csv(dir.join("train_raw.csv")).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    let mut ok = train.len() == 400;
    for target in Target::BOTH {
        let opts = SearchOptions {
            budget_s: 300.0,
            preset: Preset::Good,
            seed: 2024,
        };
        let lb = search(&train, target, &opts)
            .map_err(|e| e.to_string())?
            .leaderboard;
        let families: Vec<Family> = lb
            .families()
            .into_iter()
            .filter(|f| *f != Family::WeightedEnsemble)
            .collect();
        let ens = lb
            .entries
            .iter()
            .find(|e| e.spec.family() == Family::WeightedEnsemble);
        let ens_ok = ens.is_some_and(|e| lb.entries.iter().all(|o| e.rmse <= o.rmse));
        let overrun = lb.elapsed_s - lb.budget_s;
        ok &= families.len() >= 5 && ens_ok && overrun <= lb.max_fit_time_s;
        details.push(format!(
            "{}: {} families + ensemble (ensemble rmse lowest: {ens_ok}), {:.1} s of {} s",
            target.name(),
            families.len(),
            lb.elapsed_s,
            lb.budget_s
        ));
    }
    check(ok, details.join("; "))
}

fn quality_ordering(report: &BenchReport) -> Outcome {
    let get = |v| report.accuracy_of(v).ok_or(format!("no {v:?} accuracy"));
    let (raw, noised, cleaned) = (
        get(Variant::Raw)?,
        get(Variant::Noised)?,
        get(Variant::Cleaned)?,
    );
    let mut ok = true;
    let mut parts = Vec::new();
    for t in Target::BOTH {
        let (r, n, c) = (
            raw.metrics(t).accuracy_pct,
            noised.metrics(t).accuracy_pct,
            cleaned.metrics(t).accuracy_pct,
        );
        ok &= n <= r + 0.5;
        parts.push(format!(
            "{}: raw {r:.2}%, noised {n:.2}%, cleaned {c:.2}% (cleaned {} noised, not asserted)",
            t.name(),
            if c >= n { "above" } else { "below" }
        ));
    }
    check(ok, parts.join("; "))
}

fn persistence(dir: &Path, report: &BenchReport) -> Outcome {
    let e = |x: &dyn std::fmt::Display| x.to_string();
    let twin_path = dir.join("twin_raw.json");
    let twin = load_twin(&twin_path).map_err(|x| e(&x))?;
    let heldout = read_csv(dir.join("heldout.csv")).map_err(|x| e(&x))?;
    let raw = report.accuracy_of(Variant::Raw).ok_or("no raw accuracy")?;
    let metrics_match = Target::BOTH
        .into_iter()
        .all(|t| twin.evaluate(&heldout, t).ok().as_ref() == Some(raw.metrics(t)));

    let tmp = tempfile::tempdir().map_err(|x| e(&x))?;
    let resaved = tmp.path().join("twin.json");
    save_twin(&twin, &resaved).map_err(|x| e(&x))?;
    let twin_bytes =
        fs::read(&twin_path).map_err(|x| e(&x))? == fs::read(&resaved).map_err(|x| e(&x))?;

    let mut csv = Vec::new();
    write_csv_to(&heldout, &mut csv).map_err(|x| e(&x))?;
    let data_bytes = csv == fs::read(dir.join("heldout.csv")).map_err(|x| e(&x))?;

    let lb_text = fs::read_to_string(dir.join("leaderboard_raw.json")).map_err(|x| e(&x))?;
    let lbs: Vec<Leaderboard> = serde_json::from_str(&lb_text).map_err(|x| e(&x))?;
    let lb_bytes = serde_json::to_string_pretty(&lbs).map_err(|x| e(&x))? + "\n" == lb_text;

    let report_text = fs::read_to_string(dir.join("report.json")).map_err(|x| e(&x))?;
    let report_bytes =
        serde_json::to_string_pretty(report).map_err(|x| e(&x))? + "\n" == report_text;

    check(
        metrics_match && twin_bytes && data_bytes && lb_bytes && report_bytes,
        format!(
            "reloaded twin reproduces report metrics: {metrics_match}; byte-identical re-save of twin {twin_bytes}, \
             dataset {data_bytes}, leaderboard {lb_bytes}, report {report_bytes}"
        ),
    )
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let mut names: Vec<PathBuf> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();
    let mut compared = 0;
    let mut differing = Vec::new();
    for p in &names {
        let other = b.join(p.file_name().unwrap());
        let (x, y) = (
            comparable_contents(p).map_err(|e| e.to_string())?,
            comparable_contents(&other).map_err(|e| format!("{}: {e}", other.display()))?,
        );
        if x.is_some() {
            compared += 1;
        }
        if x != y {
            differing.push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let count_b = fs::read_dir(b).map_err(|e| e.to_string())?.count();
    check(
        differing.is_empty() && count_b == names.len(),
        format!(
            "{compared} files identical outside timing fields ({} quarantined whole){}",
            names.len() - compared,
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {}", differing.join(", "))
            }
        ),
    )
}

fn main() -> ExitCode {
    let mut ledger = Ledger { failures: 0 };
    ledger.record(5, "Savitzky-Golay oracle", savitzky_golay_oracle());
    ledger.record(6, "noise statistics", noise_statistics());
    ledger.record(7, "simulator property suite", simulator_properties());

    let tmp = tempfile::tempdir().expect("temp dir");
    let (run_a, run_b) = (tmp.path().join("run_a"), tmp.path().join("run_b"));
    match run_pipeline(&run_a).and_then(|secs| read_report(&run_a).map(|r| (secs, r))) {
        Ok((secs, report)) => {
            ledger.record(1, "end-to-end accuracy", end_to_end_accuracy(&report, secs));
            ledger.record(2, "speedup", speedup(&report));
            ledger.record(3, "pipeline projection", projection(&report));
            ledger.record(4, "leaderboard structure", leaderboard_structure(&run_a));
            ledger.record(8, "quality-study ordering", quality_ordering(&report));
            ledger.record(9, "persistence", persistence(&run_a, &report));
            let second = run_pipeline(&run_b).map_err(|e| format!("second run: {e}"));
            ledger.record(
                10,
                "pipeline determinism",
                second.and_then(|_| determinism(&run_a, &run_b)),
            );
        }
        Err(e) => {
            for (n, title) in [
                (1, "end-to-end accuracy"),
                (2, "speedup"),
                (3, "pipeline projection"),
                (4, "leaderboard structure"),
                (8, "quality-study ordering"),
                (9, "persistence"),
                (10, "pipeline determinism"),
            ] {
                ledger.record(n, title, Err(format!("pipeline run failed: {e}")));
            }
        }
    }
    println!("acceptance: {} of 10 criteria failed", ledger.failures);
    if ledger.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
