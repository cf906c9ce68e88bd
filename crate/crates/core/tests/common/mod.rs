//! Finite-difference certification of the analytic gradients, shared by the
//! gradient test and the acceptance suite.
#![allow(dead_code)]


use ils_core::manifold::{ProductPoint, SpdPoint, StiefelPoint};
use ils_core::objective::{IlsProblem, Pair, PairLabel, PairSet, SampleRef};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;

pub struct Instance {
    pub problem: IlsProblem,
    pub point: ProductPoint,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

pub fn random_instance(rng: &mut ChaCha8Rng, cross_domain: bool) -> Instance {
    let p = rng.random_range(1..=5);
    let s = rng.random_range(p..=10);
    let t = rng.random_range(p..=10);
    let n_s = rng.random_range(s + 2..=s + 12);
    let n_t = rng.random_range(t + 2..=t + 12);
    let source = gaussian_matrix(rng, n_s, s);
    let target = gaussian_matrix(rng, n_t, t) * 1.5;

    let n_pairs = rng.random_range(1..=20);
    let pairs: PairSet = (0..n_pairs)
        .map(|k| {
            let label = if k % 2 == 0 { PairLabel::Similar } else { PairLabel::Dissimilar };
            let pick = |rng: &mut ChaCha8Rng| {
                if cross_domain && rng.random_bool(0.5) {
                    SampleRef::target(rng.random_range(0..n_t))
                } else {
                    SampleRef::source(rng.random_range(0..n_s))
                }
            };
            let first = pick(rng);
            let second = pick(rng);
            Pair::new(first, second, label)
        })
        .collect();

    let beta = rng.random_range(0.2..2.0) / p as f64;
    let lambda = rng.random_range(0.0..2.0);
    let problem = IlsProblem::new(&source, &target, pairs, beta, lambda).unwrap();

    let ws = StiefelPoint::random(s, p, rng).unwrap();
    let wt = StiefelPoint::random(t, p, rng).unwrap();
    let m = SpdPoint::random(p, 0.5, rng).unwrap();
    let v = DVector::from_fn(n_pairs, |_, _| rng.random_range(-2.0..1.0));
    let point = ProductPoint::new(ws, wt, m, v).unwrap();
    Instance { problem, point }
}

// Euclidean perturbations leave the manifold, so the projection factors are
// rebuilt with a tolerance loose enough to accept them.
fn loose(w: DMatrix<f64>) -> StiefelPoint {
    StiefelPoint::with_tolerance(w, 1.0).unwrap()
}

fn loss_at(problem: &IlsProblem, point: &ProductPoint) -> f64 {
    problem.loss(point).unwrap().total
}

/// Block comparison: `(relative error, within the oracle's rounding floor)`.
///
/// Central differences of a loss of magnitude `L` cannot resolve a derivative
/// better than about `eps * |L| / h` per entry; a block whose discrepancy is
/// below ten times that is reported as unresolved rather than failed.
pub struct BlockCheck {
    relative: f64,
    at_noise_floor: bool,
}

fn compare(analytic: &[f64], numeric: &[f64], loss: f64) -> BlockCheck {
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = norm(analytic).max(norm(numeric));
    let relative = if scale > 0.0 { diff / scale } else { diff };
    let floor = 10.0 * f64::EPSILON * loss.abs().max(1.0) / H * (analytic.len() as f64).sqrt();
    BlockCheck {
        relative,
        at_noise_floor: diff <= floor,
    }
}

fn projection_block(instance: &Instance, source_side: bool, analytic: &DMatrix<f64>) -> BlockCheck {
    let Instance { problem, point } = instance;
    let base = if source_side { point.ws.matrix() } else { point.wt.matrix() };
    let mut numeric = Vec::with_capacity(base.len());
    let mut flat = Vec::with_capacity(base.len());
    for j in 0..base.ncols() {
        for i in 0..base.nrows() {
            let eval = |delta: f64| {
                let mut w = base.clone();
                w[(i, j)] += delta;
                let mut q = point.clone();
                if source_side {
                    q.ws = loose(w);
                } else {
                    q.wt = loose(w);
                }
                loss_at(problem, &q)
            };
            numeric.push((eval(H) - eval(-H)) / (2.0 * H));
            flat.push(analytic[(i, j)]);
        }
    }
    compare(&flat, &numeric, loss_at(problem, point))
}

fn metric_block(instance: &Instance, analytic: &DMatrix<f64>) -> BlockCheck {
    let Instance { problem, point } = instance;
    let base = point.m.matrix();
    let p = base.nrows();
    let mut numeric = Vec::new();
    let mut flat = Vec::new();
    for j in 0..p {
        for i in 0..=j {
            // symmetric perturbation E_ij + E_ji
            let eval = |delta: f64| {
                let mut m = base.clone();
                m[(i, j)] += delta;
                if i != j {
                    m[(j, i)] += delta;
                }
                let mut q = point.clone();
                q.m = SpdPoint::new(m).unwrap();
                loss_at(problem, &q)
            };
            numeric.push((eval(H) - eval(-H)) / (2.0 * H));
            flat.push(if i == j { analytic[(i, i)] } else { analytic[(i, j)] + analytic[(j, i)] });
        }
    }
    compare(&flat, &numeric, loss_at(problem, point))
}

fn slack_block(instance: &Instance, analytic: &DVector<f64>) -> BlockCheck {
    let Instance { problem, point } = instance;
    let numeric: Vec<f64> = (0..point.v.len())
        .map(|k| {
            let eval = |delta: f64| {
                let mut q = point.clone();
                q.v[k] += delta;
                loss_at(problem, &q)
            };
            (eval(H) - eval(-H)) / (2.0 * H)
        })
        .collect();
    compare(analytic.as_slice(), &numeric, loss_at(problem, point))
}

/// Outcome of certifying `count` random instances.
pub struct Certification {
    pub instances: usize,
    /// Largest relative error per block `(W_s, W_t, M, v)` among resolved blocks.
    pub worst: [f64; 4],
    pub at_noise_floor: usize,
    pub failures: Vec<String>,
}

/// Checks every gradient block of `count` random instances, alternating
/// source-only and cross-domain pair sets.
pub fn certify(seed: u64, count: usize) -> Certification {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Certification {
        instances: count,
        worst: [0.0; 4],
        at_noise_floor: 0,
        failures: Vec::new(),
    };
    for trial in 0..count {
        let instance = random_instance(&mut rng, trial % 2 == 1);
        let g = instance.problem.euclidean_gradients(&instance.point).unwrap();
        let checks = [
            projection_block(&instance, true, &g.xi_s),
            projection_block(&instance, false, &g.xi_t),
            metric_block(&instance, &g.xi_m),
            slack_block(&instance, &g.xi_v),
        ];
        for (block, (w, check)) in ["W_s", "W_t", "M", "v"].iter().zip(report.worst.iter_mut().zip(checks)) {
            if check.relative < TOLERANCE {
                *w = w.max(check.relative);
            } else if check.at_noise_floor {
                report.at_noise_floor += 1;
            } else {
                report.failures.push(format!("instance {trial}: {block} relative error {:e}", check.relative));
            }
        }
    }
    report
}
