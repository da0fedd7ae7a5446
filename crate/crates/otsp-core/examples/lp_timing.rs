use otsp_core::instance::{generate, GenKind};
use otsp_core::lp::solve_relaxation;
use std::time::Instant;

fn main() {
    for (n, k, seed) in [(20usize, 5usize, 1u64), (26, 6, 1), (32, 7, 1), (36, 8, 2), (40, 8, 3), (40, 8, 4), (40, 2, 5)] {
        let inst = generate(GenKind::Euclidean, n, k, seed).unwrap();
        let t0 = Instant::now();
        match solve_relaxation(&inst) {
            Ok(sol) => println!(
                "n={n} k={k}: obj={} rounds={} cuts={} time={:?}",
                sol.objective, sol.stats.rounds, sol.stats.cuts_added, t0.elapsed()
            ),
            Err(e) => println!("n={n} k={k}: error {e} after {:?}", t0.elapsed()),
        }
    }
}
