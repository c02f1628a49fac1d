//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p boxreach --test acceptance`.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use boxreach::fixtures;
use boxreach::mc_oracle::{simulate_trajectories, SampleConfig};
use boxreach::{
    affine_bounds, boxes_intersect, partition_box, reach_mlp, reach_nncs, sample_network_outputs, verify_nncs,
    ActivationKind, BoxUnion, HyperBox, Interval, PartitionSpec, ReachTube,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: [usize; 5] = [10, 20, 30, 40, 50];
const LOOP_GRID: [usize; 2] = [5, 20];

/// Outcome of one criterion. `fingerprint` captures every computed number
/// so reruns can be compared bit for bit.
struct Outcome {
    ok: bool,
    detail: String,
    fingerprint: String,
}

fn outcome(ok: bool, detail: String, fingerprint: String) -> Outcome {
    Outcome {
        ok,
        detail,
        fingerprint,
    }
}

fn mlp_unions() -> Vec<BoxUnion> {
    let net = fixtures::mlp_example();
    let h = fixtures::mlp_example_input();
    GRID.iter()
        .map(|&m| reach_mlp(&net, &h, &PartitionSpec::uniform(2, m).unwrap()).unwrap())
        .collect()
}

fn tubes() -> Vec<ReachTube> {
    LOOP_GRID
        .iter()
        .map(|&m| reach_nncs(&fixtures::closed_loop_example(m)).unwrap())
        .collect()
}

fn cell_counts() -> Outcome {
    let started = Instant::now();
    let unions = mlp_unions();
    let secs = started.elapsed().as_secs_f64();
    let counts: Vec<usize> = unions.iter().map(BoxUnion::len).collect();
    let expected: Vec<usize> = GRID.iter().map(|m| m * m).collect();
    let ok = counts == expected && secs < 5.0;
    outcome(
        ok,
        format!("counts {counts:?}, expected {expected:?}; sweep {secs:.3} s (limit 5 s)"),
        format!("{unions:?}"),
    )
}

fn output_soundness() -> Outcome {
    let net = fixtures::mlp_example();
    let h = fixtures::mlp_example_input();
    let samples = sample_network_outputs(&net, &h, &SampleConfig::new(5000, 2024).unwrap()).unwrap();
    let unions = mlp_unions();
    let mut violations = Vec::new();
    for (m, u) in GRID.iter().zip(&unions) {
        violations.push((m, samples.iter().filter(|y| !u.contains_point(y)).count()));
    }
    let ok = violations.iter().all(|(_, v)| *v == 0);
    outcome(
        ok,
        format!("5000 samples; violations per M {violations:?}"),
        format!("{samples:?}"),
    )
}

fn union_for(m: usize) -> BoxUnion {
    let net = fixtures::mlp_example();
    reach_mlp(&net, &fixtures::mlp_example_input(), &PartitionSpec::uniform(2, m).unwrap()).unwrap()
}

/// Fine output boxes not covered by the coarse output boxes whose source
/// cells meet the fine box's source cell.
fn per_cell_escapes(fine_m: usize, fine: &BoxUnion, coarse_m: usize, coarse: &BoxUnion) -> usize {
    let bounding = fixtures::mlp_example_input().boxes()[0].clone();
    let fine_cells = partition_box(&bounding, &PartitionSpec::uniform(2, fine_m).unwrap()).unwrap();
    let coarse_cells = partition_box(&bounding, &PartitionSpec::uniform(2, coarse_m).unwrap()).unwrap();
    fine.boxes()
        .iter()
        .zip(fine.sources().unwrap())
        .filter(|(out, &src)| {
            let cell = &fine_cells.boxes()[src];
            let parents: Vec<HyperBox> = coarse
                .boxes()
                .iter()
                .zip(coarse.sources().unwrap())
                .filter(|(_, &c)| boxes_intersect(cell, &coarse_cells.boxes()[c]).unwrap())
                .map(|(b, _)| b.clone())
                .collect();
            !BoxUnion::new(parents).unwrap().covers(out)
        })
        .count()
}

fn nesting() -> Outcome {
    let unions = mlp_unions();
    let mut chain = Vec::new();
    let mut whole = Vec::new();
    let mut total = 0;
    for k in (1..GRID.len()).rev() {
        let (fm, cm) = (GRID[k], GRID[k - 1]);
        let bad = per_cell_escapes(fm, &unions[k], cm, &unions[k - 1]);
        total += bad;
        chain.push(format!("M{fm} in M{cm}: {bad}"));
        let loose = unions[k].iter().filter(|b| !unions[k - 1].covers(b)).count();
        whole.push(format!("M{fm} in M{cm}: {loose}"));
    }
    // grids that nest exactly, for contrast
    let divisible: Vec<String> = [(40, 20), (50, 10), (50, 25)]
        .iter()
        .map(|&(fm, cm)| {
            let bad = per_cell_escapes(fm, &union_for(fm), cm, &union_for(cm));
            format!("M{fm} in M{cm}: {bad}")
        })
        .collect();
    outcome(
        total == 0,
        format!(
            "per-cell escapes {}; boxes outside the whole coarser union {}; divisible grids {}",
            chain.join(", "),
            whole.join(", "),
            divisible.join(", ")
        ),
        String::new(),
    )
}

fn closed_loop_soundness() -> Outcome {
    let tubes = tubes();
    let mut counts = Vec::new();
    let mut fp = String::new();
    for (&m, tube) in LOOP_GRID.iter().zip(&tubes) {
        let s = fixtures::closed_loop_example(m);
        let runs = simulate_trajectories(&s, &SampleConfig::new(1000, 7).unwrap()).unwrap();
        counts.push((m, runs.iter().filter(|r| !tube.contains_trajectory(r)).count()));
        let _ = write!(fp, "{runs:?}{:?}", tube.steps());
    }
    let nested = tubes[1].nested_in(&tubes[0]);
    let ok = counts.iter().all(|(_, v)| *v == 0) && nested;
    outcome(
        ok,
        format!("1000 trajectories; escapes per M {counts:?}; M20 tube inside M5 tube: {nested}"),
        fp,
    )
}

fn safety_verdict() -> Outcome {
    let spec = fixtures::unsafe_example();
    let labels: Vec<(usize, &str)> = LOOP_GRID
        .iter()
        .map(|&m| (m, verify_nncs(&fixtures::closed_loop_example(m), &spec).unwrap().label()))
        .collect();
    let ok = labels.iter().all(|(_, l)| *l == "SAFE");
    outcome(ok, format!("verdicts {labels:?}"), format!("{labels:?}"))
}

fn vertex_range(w: &[f64], theta: f64, b: &HyperBox) -> (f64, f64) {
    let n = w.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for mask in 0u32..(1 << n) {
        let mut z = theta;
        for (j, iv) in b.intervals().iter().enumerate() {
            let x = if mask >> j & 1 == 1 { iv.hi() } else { iv.lo() };
            z += w[j] * x;
        }
        lo = lo.min(z);
        hi = hi.max(z);
    }
    (lo, hi)
}

fn affine_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut fp = String::new();
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let theta = rng.gen_range(-2.0..2.0);
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|_| {
                let a: f64 = rng.gen_range(-5.0..5.0);
                (a, a + rng.gen_range(0.0..4.0))
            })
            .unzip();
        let b = HyperBox::from_bounds(&lo, &hi).unwrap();
        let got = affine_bounds(&w, theta, &b).unwrap();
        let (vlo, vhi) = vertex_range(&w, theta, &b);
        if got.lo().to_bits() != vlo.to_bits() || got.hi().to_bits() != vhi.to_bits() {
            mismatches += 1;
        }
        let _ = write!(fp, "{:?}{:?}", got.lo(), got.hi());
    }
    outcome(
        mismatches == 0,
        format!("1000 instances, dim 1..=10; bit mismatches {mismatches}"),
        fp,
    )
}

fn gaussian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0;
    let mut fp = String::new();
    for k in 0..1000 {
        let (lo, hi) = match k % 4 {
            0 => {
                let hi: f64 = rng.gen_range(-3.0..0.0);
                (hi - rng.gen_range(0.0..3.0), hi)
            }
            1 => {
                let lo: f64 = rng.gen_range(0.0..3.0);
                (lo, lo + rng.gen_range(0.0..3.0))
            }
            2 => {
                let lo: f64 = rng.gen_range(-3.0..0.0);
                (lo, rng.gen_range(-lo..3.5))
            }
            _ => {
                let hi: f64 = rng.gen_range(0.0..3.0);
                (rng.gen_range(-3.5..-hi), hi)
            }
        };
        let z = Interval::new(lo, hi).unwrap();
        let img = ActivationKind::Gaussian.image(z).unwrap();
        let mut grid: Vec<f64> = (0..10_000)
            .map(|i| lo + (hi - lo) * (i as f64 / 9_999.0))
            .collect();
        grid[9_999] = hi;
        if z.contains(0.0) {
            grid.push(0.0);
        }
        let vals: Vec<f64> = grid.iter().map(|&x| (-x * x).exp()).collect();
        let gmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let gmax = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let encloses = img.lo() <= gmin && img.hi() >= gmax;
        let tight = (img.hi() - gmax).abs() <= 1e-9;
        let peak = !z.contains(0.0) || img.hi() == 1.0;
        if !(encloses && tight && peak) {
            failures += 1;
        }
        let _ = write!(fp, "{:?}{:?}", img.lo(), img.hi());
    }
    outcome(
        failures == 0,
        format!("1000 intervals over all four branches; failures {failures}"),
        fp,
    )
}

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 7] = [
    ("cell counts for M = 10..50", cell_counts),
    ("network output soundness", output_soundness),
    ("refinement nesting", nesting),
    ("closed-loop soundness and nesting", closed_loop_soundness),
    ("safety verdict", safety_verdict),
    ("affine bounds vs vertex enumeration", affine_oracle),
    ("gaussian image vs grid search", gaussian_oracle),
];

fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().map(|(_, f)| f()).collect()
}

fn main() -> ExitCode {
    let first = run_all();
    let mut all_ok = true;
    for (k, ((name, _), o)) in CRITERIA.iter().zip(&first).enumerate() {
        all_ok &= o.ok;
        println!("criterion {}: {} {name}: {}", k + 1, if o.ok { "PASS" } else { "FAIL" }, o.detail);
    }

    let threads = std::thread::available_parallelism().map_or(4, |n| n.get().max(4));
    let rerun = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(run_all)
    };
    let second = run_all();
    let single = rerun(1);
    let multi = rerun(threads);
    let differs = |other: &[Outcome]| {
        first
            .iter()
            .zip(other)
            .enumerate()
            .filter(|(_, (a, b))| a.fingerprint != b.fingerprint || a.detail.split(';').next() != b.detail.split(';').next())
            .map(|(k, _)| k + 1)
            .collect::<Vec<_>>()
    };
    let (d_run, d_one, d_many) = (differs(&second), differs(&single), differs(&multi));
    let ok = d_run.is_empty() && d_one.is_empty() && d_many.is_empty();
    all_ok &= ok;
    println!(
        "criterion 8: {} determinism: differing criteria on rerun {d_run:?}, 1 thread {d_one:?}, {threads} threads {d_many:?}",
        if ok { "PASS" } else { "FAIL" }
    );

    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
