use rankbound::grid::{GridDims, PathPair};
use rankbound::lp::{all_dominant_pairs, build_upper_lp, solve, BuildOptions, ConstraintSet, MicrolpBackend};
use rankbound::search::{local_search_upper, warm_start, SearchOptions, SearchObserver, IterationRecord};
use rankbound::price::PriceGrid;

struct Spy;
impl SearchObserver for Spy {
    fn on_iteration(&mut self, r: &IterationRecord, set: &ConstraintSet, _g: &PriceGrid) {
        println!("  obs: it {} gamma {:.6} |S| {} +{} -{}", r.iteration, r.gamma, r.set_size, r.added, r.removed);
        if r.iteration <= 1 {
            for s in set.member_strings().iter().take(4) {
                println!("    member {s}");
            }
        }
    }
}

fn main() {
    let small = GridDims::square(3).unwrap();
    let pairs = all_dominant_pairs(small);
    let model = build_upper_lp(small, &pairs, &BuildOptions::default()).unwrap();
    let sol = solve(&model.problem, &MicrolpBackend).unwrap();
    let binding: Vec<PathPair> = pairs
        .iter()
        .enumerate()
        .filter(|&(k, _)| sol.slacks[model.member_rows[k]] <= 1e-4)
        .map(|(_, p)| p.clone())
        .collect();
    let start = warm_start(&ConstraintSet::from_pairs(small, binding).unwrap());
    let report = local_search_upper(start.dims(), start.pairs().unwrap(), &SearchOptions::default(), &MicrolpBackend, &mut Spy).unwrap();
    println!("final {:.6} converged {}", report.gamma_star, report.converged);
}
