//! Random RMP resolve instances and a micro-benchmark over them.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::motion::{resolve, TaskPolicy};

/// Largest condition number of `Σ JᵀMJ` accepted by [`random_instance`].
pub const MAX_NORMAL_CONDITION: f64 = 1e6;

/// A random well-posed instance: `n` joints, `policies` policies of random
/// task dimension whose rows together cover at least `n`. Metrics are
/// `B Bᵀ + 0.1 I` and draws are repeated until the normal matrix has a
/// condition number of at most [`MAX_NORMAL_CONDITION`], so the solution is
/// unique and far from the pseudo-inverse truncation.
pub fn random_instance(rng: &mut impl Rng, n: usize, policies: usize) -> Vec<TaskPolicy> {
    loop {
        let candidate = draw_instance(rng, n, policies);
        if normal_condition(&candidate, n) <= MAX_NORMAL_CONDITION {
            return candidate;
        }
    }
}

fn draw_instance(rng: &mut impl Rng, n: usize, policies: usize) -> Vec<TaskPolicy> {
    let mut out: Vec<TaskPolicy> = Vec::with_capacity(policies);
    for i in 0..policies {
        let rows_so_far: usize = out.iter().map(|p| p.task_dim()).sum();
        let min_dim = if i + 1 == policies { n.saturating_sub(rows_so_far).max(1) } else { 1 };
        let d = rng.random_range(min_dim..=min_dim.max(6));
        let mut uniform = || rng.random_range(-1.0..1.0);
        let jacobian = DMatrix::from_fn(d, n, |_, _| uniform());
        let b = DMatrix::from_fn(d, d, |_, _| uniform());
        let metric = &b * b.transpose() + DMatrix::identity(d, d) * 0.1;
        let desired_accel = DVector::from_fn(d, |_, _| uniform());
        out.push(TaskPolicy {
            jacobian,
            desired_accel,
            metric,
        });
    }
    out
}

fn normal_condition(policies: &[TaskPolicy], n: usize) -> f64 {
    let mut normal = DMatrix::<f64>::zeros(n, n);
    for p in policies {
        normal += p.jacobian.transpose() * &p.metric * &p.jacobian;
    }
    let eig = normal.symmetric_eigenvalues();
    eig.max() / eig.min()
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub instances: usize,
    pub total: Duration,
    pub slowest: Duration,
    /// Sum of all solution entries, so the work cannot be optimized away.
    pub checksum: f64,
}

impl BenchReport {
    pub fn mean(&self) -> Duration {
        self.total / self.instances.max(1) as u32
    }
}

/// Times `resolve` over `instances` random problems (n ≤ 7, ≤ 5 policies).
pub fn run_solver_bench(instances: usize, seed: u64) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<_> = (0..instances)
        .map(|_| {
            let n = rng.random_range(1..=7);
            let k = rng.random_range(1..=5);
            random_instance(&mut rng, n, k)
        })
        .collect();
    let mut total = Duration::ZERO;
    let mut slowest = Duration::ZERO;
    let mut checksum = 0.0;
    for p in &problems {
        let t = Instant::now();
        let a = resolve(p).expect("generated instances are consistent");
        let dt = t.elapsed();
        total += dt;
        slowest = slowest.max(dt);
        checksum += a.sum();
    }
    BenchReport {
        instances,
        total,
        slowest,
        checksum,
    }
}
