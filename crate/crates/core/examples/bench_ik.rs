//! Quick solve-rate run: `cargo run --release --example bench_ik -- [cases] [seed]`

use openarms::arm::{open_arms_chain, Profile};
use openarms::bench::{default_configs, format_summary, generate_cases, run_benchmark_detailed};
use openarms::ik::IkConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(42);
    let chain = open_arms_chain(&Profile::Default).unwrap();
    let cases = generate_cases(&chain, n, seed).unwrap();
    let start = std::time::Instant::now();
    let runs = run_benchmark_detailed(&chain, &cases, &default_configs()).unwrap();
    let loose = IkConfig::loose();
    for run in &runs {
        println!(
            "{}: at loose tolerance {:.3}%",
            run.report.config_name,
            run.solve_rate_at(loose.pos_tol, loose.ori_tol)
        );
    }
    let reports: Vec<_> = runs.into_iter().map(|r| r.report).collect();
    print!("{}", format_summary(&reports));
    println!("wall {:.2?}", start.elapsed());
}
