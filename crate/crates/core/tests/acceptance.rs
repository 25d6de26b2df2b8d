//! Acceptance suite: every criterion at its stated tolerance and runtime
//! budget, one pass/fail line each. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 1 2 9`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use fvlab::cone::{lipschitz_threshold, theta_pd};
use fvlab::experiments::{
    excursion_tail_experiment, extinction_experiment, harnack_experiment, polyhedral_experiment, qsd_experiment,
    qsd_n_comparison, ExtinctionConfig, PolyhedralConfig, QsdConfig, TailConfig,
};
use fvlab::geometry::{l_shape, Domain};
use fvlab::stochastic::PathConfig;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn cone_angles() -> Verdict {
    let mut worst_p2 = 0.0f64;
    for d in 2..=10 {
        let exact = (1.0 / (d as f64).sqrt()).acos();
        worst_p2 = worst_p2.max((theta_pd(2.0, d).unwrap() - exact).abs());
    }
    let mut worst_d2 = 0.0f64;
    for p in [0.5, 1.0, 1.5, 2.0, 3.0] {
        worst_d2 = worst_d2.max((theta_pd(p, 2).unwrap() - PI / (2.0 * p)).abs());
    }
    verdict(
        worst_p2 <= 1e-10 && worst_d2 <= 1e-8,
        format!("max |theta(2,d) - acos(1/sqrt d)| = {worst_p2:.2e} (<= 1e-10), max |theta(p,2) - pi/(2p)| = {worst_d2:.2e} (<= 1e-8)"),
    )
}

fn lipschitz() -> Verdict {
    let mut worst = 0.0f64;
    let mut monotone = true;
    for d in 2..=5 {
        let limit = 1.0 / ((d - 1) as f64).sqrt();
        worst = worst.max((lipschitz_threshold(10_000, d).unwrap() - limit).abs());
        let values: Vec<f64> = (2..=50).map(|n| lipschitz_threshold(n, d).unwrap()).collect();
        monotone &= values.windows(2).all(|w| w[1] >= w[0]);
    }
    verdict(worst <= 1e-3 && monotone, format!("max |c(1e4,d) - 1/sqrt(d-1)| = {worst:.2e} (<= 1e-3), monotone in N: {monotone}"))
}

fn exit_oracles() -> Verdict {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let a = Domain::interval(0.4, 0.6).unwrap();
    let cfg = PathConfig::new(1e-4, 10.0).unwrap();
    let r = harnack_experiment(&d, &a, &[vec![0.25]], 100_000, &cfg, 20_240_301).unwrap();
    let p = &r.points[0];
    let g_ok = (p.g.mean - 0.1875).abs() <= 3.0 * p.g.se && (p.g.mean - 0.1875).abs() <= 0.01 * 0.1875;
    let f_ok = (p.f.mean - 0.625).abs() <= 3.0 * p.f.se;
    verdict(
        g_ok && f_ok,
        format!(
            "E T = {:.5} +- {:.5} (0.1875, 3 SE and 1%), f = {:.4} +- {:.4} (0.625, 3 SE)",
            p.g.mean, p.g.se, p.f.mean, p.f.se
        ),
    )
}

fn excursion_tails() -> Verdict {
    let cfg = PathConfig::new(0.01, 1000.0).unwrap();
    let tail = TailConfig::new(1.0, 100_000);
    let half = excursion_tail_experiment(&Domain::half_plane(), &tail, &cfg, 20_240_302).unwrap();
    let quarter = Domain::wedge([0.0, 0.0], [0.0, 1.0], PI / 4.0).unwrap();
    let quarter = excursion_tail_experiment(&quarter, &tail, &cfg, 20_240_303).unwrap();
    let half_ok = (half.exponent + 0.5).abs() <= 0.05;
    let quarter_ok = (quarter.exponent + 1.0).abs() <= 0.1;
    verdict(
        half_ok && quarter_ok,
        format!(
            "half-plane slope {:.4} +- {:.4} (-0.5 +- 0.05), quarter-plane slope {:.4} +- {:.4} (-1.0 +- 0.1, p = {:.6} from inversion)",
            half.exponent, half.se, quarter.exponent, quarter.se, quarter.p
        ),
    )
}

fn harnack() -> Verdict {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let a = Domain::interval(0.4, 0.6).unwrap();
    let grid: Vec<Vec<f64>> = (1..20).map(|k| vec![0.05 * k as f64]).collect();
    let line = harnack_experiment(&d, &a, &grid, 10_000, &PathConfig::new(1e-4, 10.0).unwrap(), 20_240_304).unwrap();
    let wedge = Domain::wedge([0.0, 0.0], [0.0, 1.0], PI / 8.0).unwrap();
    let target = Domain::ball(vec![0.0, 1.0], 0.3).unwrap();
    let radii = [vec![0.0, 0.4], vec![0.0, 0.2], vec![0.0, 0.1]];
    let w = harnack_experiment(&wedge, &target, &radii, 100_000, &PathConfig::new(1e-5, 20.0).unwrap(), 20_240_305).unwrap();
    let slope = w.radial_fit.map_or(f64::NAN, |f| f.slope);
    verdict(
        line.ratio_span < 10.0 && (slope - 2.0).abs() <= 1.0,
        format!("interval ratio span {:.3} (< 10), wedge log-ratio slope {slope:.3} (2 +- 1)", line.ratio_span),
    )
}

fn counterexample() -> Verdict {
    let r = extinction_experiment(&ExtinctionConfig::new(10_000, 1e-4), 20_240_306).unwrap();
    let ok = r.sigma.mean <= 0.25 + 3.0 * r.sigma.se
        && r.alpha4.mean <= 1.0 + 3.0 * r.alpha4.se
        && r.alpha2.mean <= 1.0 - 3.0 * r.alpha2.se
        && r.collapsing_fraction >= 0.95;
    verdict(
        ok,
        format!(
            "E sigma = {:.4} +- {:.4} (<= 0.25 + 3 SE), E a^4 = {:.4} +- {:.4} (<= 1 + 3 SE), E a^2 = {:.4} +- {:.4} (<= 1 - 3 SE), collapsing {:.1}% (>= 95%), tau_inf bound {:.3}, increment ratio {:.3}",
            r.sigma.mean, r.sigma.se, r.alpha4.mean, r.alpha4.se, r.alpha2.mean, r.alpha2.se,
            100.0 * r.collapsing_fraction, r.tau_infinity_bound, r.increment_ratio
        ),
    )
}

fn polyhedral() -> Verdict {
    let cfg = PathConfig::new(1e-4, 10.0).unwrap();
    let r = polyhedral_experiment(&l_shape(), &cfg, &PolyhedralConfig::new(100), 20_240_307).unwrap();
    let growth_ok = (r.growth_ratio / 2.0 - 1.0).abs() <= 0.25;
    verdict(
        r.collapsing == 0 && growth_ok && r.extinctions == 0,
        format!(
            "collapsing replicas {} (0), J(10)/J(5) = {:.3} (2 +- 25%), mean jumps {:.1}, coincident steps per unit time {:.3}, unresolved extinctions {}",
            r.collapsing, r.growth_ratio, r.mean_jumps, r.coincidence_rate, r.extinctions
        ),
    )
}

fn qsd() -> Verdict {
    let line = Domain::interval(0.0, 1.0).unwrap();
    let cfg = PathConfig::new(1e-4, 50.0).unwrap();
    let qc = QsdConfig::new(&line, 100, 10.0);
    let one = qsd_experiment(&line, &qc, &cfg, 20_240_308).unwrap();
    let square = Domain::unit_cube(2).unwrap();
    let sq = qsd_experiment(&square, &QsdConfig::new(&square, 200, 10.0), &cfg, 20_240_309).unwrap();
    let cmp = qsd_n_comparison(&line, &qc, 10, 100, 10, &cfg, 20_240_310).unwrap();
    verdict(
        one.l1 < 0.08 && sq.l1 < 0.15 && cmp.wins >= 7,
        format!(
            "interval L1 {:.4} (< 0.08), square L1 {:.4} (< 0.15), N=100 closer than N=10 on {}/10 pairs (>= 7)",
            one.l1, sq.l1, cmp.wins
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 6] = [
        &["cone-math", "--p", "0.5,1,2,3", "--d", "2,3,5", "--n-values", "2,10"],
        &["qsd", "--n", "20", "--n-small", "4", "--pairs", "3", "--horizon", "2", "--dt", "0.001", "--bins", "10"],
        &["harnack", "--n-paths", "300", "--dt", "0.001"],
        &["excursion", "--n-paths", "2000", "--dt", "0.01", "--epsilon", "0.5", "--horizon", "100"],
        &["extinction", "--n-reps", "400", "--n-chains", "20", "--chain-length", "50", "--dt", "0.001"],
        &["polyhedral", "--n-reps", "6", "--horizon", "2", "--dt", "0.001"],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for args in runs {
        let name = args[0];
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "4", "4"].iter().enumerate() {
            let dir = root.path().join(format!("{name}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_fv-lab"))
                .args(args)
                .args(["--seed", "77", "--threads", threads, "--out", dir.to_str().unwrap()])
                .output()
                .unwrap();
            let code = status.status.code().unwrap_or(-1);
            if code == 2 {
                mismatched.push(format!("{name} (runtime error: {})", String::from_utf8_lossy(&status.stderr).trim()));
            }
            outputs.push(csv_files(&dir));
        }
        if outputs[0].is_empty() || outputs.iter().any(|o| o != &outputs[0]) {
            mismatched.push(name.to_string());
        }
    }
    verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "all six experiments byte-identical across reruns and --threads 1/4".into()
        } else {
            format!("differing or failing: {}", mismatched.join(", "))
        },
    )
}

type Check = (&'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("cone angles", Duration::from_secs(1), cone_angles),
        ("Lipschitz threshold", Duration::from_secs(10), lipschitz),
        ("classical exit oracles", Duration::from_secs(60), exit_oracles),
        ("excursion tail exponents", Duration::from_secs(300), excursion_tails),
        ("Harnack sharpness", Duration::from_secs(600), harnack),
        ("counterexample moments", Duration::from_secs(300), counterexample),
        ("polyhedral contrast", Duration::from_secs(600), polyhedral),
        ("QSD convergence", Duration::from_secs(900), qsd),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, budget, check)) in checks.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {number} [{name}]: {} | {} | {:.1} s (budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
