//! Running-integral task: `u(t)` is a random truncated Fourier series on
//! `[0,1]`, sampled at `T` points for the branch; the field is
//! `y(x) = integral of u from 0 to x` at each query point, computed by
//! cumulative trapezoid on a fine uniform grid.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, QueryGrid, Role};
use crate::error::Result;
use crate::nn::matrix::Matrix;
use crate::nn::rng::{domains, RngStream};

use super::spec::{TaskKind, TaskSpec};

/// Coefficients of `a0 + sum_m a_m cos(2 pi m t) + b_m sin(2 pi m t)`.
#[derive(Debug, Clone)]
pub struct FourierSeries {
    pub a0: f64,
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

impl FourierSeries {
    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.a0;
        for (m, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let w = std::f64::consts::TAU * (m + 1) as f64 * t;
            acc += a * w.cos() + b * w.sin();
        }
        acc
    }

    /// Exact antiderivative with `F(0) = 0`; the oracle for the trapezoid.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let mut acc = self.a0 * x;
        for (m, (&a, &b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let omega = std::f64::consts::TAU * (m + 1) as f64;
            acc += a * (omega * x).sin() / omega + b * (1.0 - (omega * x).cos()) / omega;
        }
        acc
    }

    fn sample(modes: usize, rng: &mut impl Rng) -> Self {
        let std_normal = Normal::new(0.0, 1.0).expect("valid");
        let a0 = std_normal.sample(rng);
        let mut cos_coeffs = Vec::with_capacity(modes);
        let mut sin_coeffs = Vec::with_capacity(modes);
        for m in 1..=modes {
            let harmonic = Normal::new(0.0, 1.0 / m as f64).expect("valid");
            cos_coeffs.push(harmonic.sample(rng));
            sin_coeffs.push(harmonic.sample(rng));
        }
        FourierSeries { a0, cos_coeffs, sin_coeffs }
    }
}

/// Integrate `u` from 0 to each query point by cumulative trapezoid on a
/// uniform grid of at least `fine_intervals` cells, then linearly
/// interpolate onto the queries (which need not be uniform).
pub fn antiderivative_field(
    u: impl Fn(f64) -> f64,
    queries: &[f64],
    fine_intervals: usize,
) -> Vec<f64> {
    let n = fine_intervals.max(2);
    let h = 1.0 / n as f64;
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    let mut prev = u(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        let cur = u(k as f64 * h);
        acc += 0.5 * h * (prev + cur);
        cumulative.push(acc);
        prev = cur;
    }
    queries
        .iter()
        .map(|&x| {
            let pos = (x.clamp(0.0, 1.0)) * n as f64;
            let i = (pos.floor() as usize).min(n - 1);
            let frac = pos - i as f64;
            cumulative[i] * (1.0 - frac) + cumulative[i + 1] * frac
        })
        .collect()
}

/// Uniform points on `[0, hi]`; a single point sits at 0.
pub fn uniform_points(count: usize, hi: f64) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    (0..count).map(|k| hi * k as f64 / (count - 1) as f64).collect()
}

/// Generate the full (unsplit) dataset; the returned role is `Train` until
/// `split_dataset` assigns real roles.
pub fn gen_antiderivative(spec: &TaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let TaskKind::Antiderivative { modes, fine_intervals } = &spec.kind else {
        return Err(crate::error::CmcoError::InvalidConfig(
            "gen_antiderivative requires an antiderivative task spec".into(),
        ));
    };
    let sample_times = uniform_points(spec.t_steps, 1.0);
    let queries = uniform_points(spec.query_points, 1.0);

    let mut inputs = Vec::with_capacity(spec.n_samples);
    let mut fields = Matrix::zeros(spec.n_samples, spec.query_points);
    for i in 0..spec.n_samples {
        let mut rng = RngStream::new(spec.seed, domains::TASK_GEN + i as u64).rng();
        let series = FourierSeries::sample(*modes, &mut rng);
        let u: Vec<f64> = sample_times.iter().map(|&t| series.eval(t)).collect();
        inputs.push(Matrix::from_vec(spec.t_steps, 1, u)?);
        let y = antiderivative_field(|t| series.eval(t), &queries, *fine_intervals);
        fields.row_mut(i).copy_from_slice(&y);
    }
    let coords = Matrix::from_vec(spec.query_points, 1, queries)?;
    Ok(Dataset {
        branch_inputs: inputs,
        grid: QueryGrid::new(coords),
        fields,
        role: Role::Train,
    })
}
