//! Proxy-sensing task: a short multi-channel reading sequence determines a
//! smooth 2-D field through one scalar latent.
//!
//! Generative model for sample latents `v` and daily values `v_t`:
//!
//! ```text
//! v ~ N(0,1),  v_t = v + 0.3 eps_t,            t = 0..T-1
//! w = sum_t beta_t v_t,  beta_t = (t+1) / sum  (recency weights)
//! reading s[t][c] = (1 + 0.1 c) + (0.5 + 0.05 c) v_t + noise * eta[t][c]
//! field y(r) = a(w) f1(r) + b(w) f2(r)
//!   a(w) = 0.8 + 0.6 w,  b(w) = 0.3 - 0.4 w
//!   f1(x, y) = sin(pi x) sin(pi y)
//!   f2(x, y) = exp(-((x - 0.7)^2 + (y - 0.3)^2) / 0.1)
//! ```
//!
//! The field depends on the readings only through `w`, and is evaluated in
//! closed form from `w`, which is what the generator's oracle checks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, QueryGrid, Role};
use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::rng::{domains, RngStream};

use super::spec::{TaskKind, TaskSpec};

const DAILY_JITTER: f64 = 0.3;

/// Recency weights `beta_t` proportional to `t + 1`, summing to 1.
pub fn latent_weights(t_steps: usize) -> Vec<f64> {
    let total: f64 = (1..=t_steps).map(|t| t as f64).sum();
    (1..=t_steps).map(|t| t as f64 / total).collect()
}

pub fn basis_f1(x: f64, y: f64) -> f64 {
    (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
}

pub fn basis_f2(x: f64, y: f64) -> f64 {
    (-((x - 0.7).powi(2) + (y - 0.3).powi(2)) / 0.1).exp()
}

/// Closed-form field for latent `w` on a `[P x 2]` grid.
pub fn proxy_field_values(w: f64, grid: &Matrix) -> Vec<f64> {
    let a = 0.8 + 0.6 * w;
    let b = 0.3 - 0.4 * w;
    (0..grid.rows())
        .map(|j| {
            let (x, y) = (grid.get(j, 0), grid.get(j, 1));
            a * basis_f1(x, y) + b * basis_f2(x, y)
        })
        .collect()
}

/// Noisy affine readings for daily latents `v_t`.
pub fn proxy_readings(
    daily: &[f64],
    channels: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> Matrix {
    let std_normal = Normal::new(0.0, 1.0).expect("valid");
    let mut m = Matrix::zeros(daily.len(), channels);
    for (t, &v) in daily.iter().enumerate() {
        for c in 0..channels {
            let offset = 1.0 + 0.1 * c as f64;
            let gain = 0.5 + 0.05 * c as f64;
            let eta = if noise > 0.0 { noise * std_normal.sample(rng) } else { 0.0 };
            m.set(t, c, offset + gain * v + eta);
        }
    }
    m
}

/// The first `count` nodes of a near-square lattice on the unit square.
pub fn lattice_grid(count: usize) -> Matrix {
    let side = (count as f64).sqrt().ceil() as usize;
    let side = side.max(1);
    let mut coords = Vec::with_capacity(count * 2);
    'outer: for iy in 0..side {
        for ix in 0..side {
            if coords.len() / 2 >= count {
                break 'outer;
            }
            let denom = (side - 1).max(1) as f64;
            coords.push(ix as f64 / denom);
            coords.push(iy as f64 / denom);
        }
    }
    Matrix::from_vec(count, 2, coords).expect("sized above")
}

/// Generate the dataset plus the true latent `w` per sample (the oracle
/// input).
pub fn gen_proxy_field_with_latents(spec: &TaskSpec) -> Result<(Dataset, Vec<f64>)> {
    spec.validate()?;
    let TaskKind::ProxyField { noise } = spec.kind else {
        return Err(CmcoError::InvalidConfig(
            "gen_proxy_field requires a proxy_field task spec".into(),
        ));
    };
    let weights = latent_weights(spec.t_steps);
    let grid = lattice_grid(spec.query_points);
    let std_normal = Normal::new(0.0, 1.0).expect("valid");

    let mut inputs = Vec::with_capacity(spec.n_samples);
    let mut latents = Vec::with_capacity(spec.n_samples);
    let mut fields = Matrix::zeros(spec.n_samples, spec.query_points);
    for i in 0..spec.n_samples {
        let mut rng = RngStream::new(spec.seed, domains::TASK_GEN + i as u64).rng();
        let base = std_normal.sample(&mut rng);
        let daily: Vec<f64> = (0..spec.t_steps)
            .map(|_| base + DAILY_JITTER * std_normal.sample(&mut rng))
            .collect();
        let w: f64 = weights.iter().zip(&daily).map(|(b, v)| b * v).sum();
        inputs.push(proxy_readings(&daily, spec.channels, noise, &mut rng));
        fields.row_mut(i).copy_from_slice(&proxy_field_values(w, &grid));
        latents.push(w);
    }
    Ok((
        Dataset {
            branch_inputs: inputs,
            grid: QueryGrid::new(grid),
            fields,
            role: Role::Train,
        },
        latents,
    ))
}

pub fn gen_proxy_field(spec: &TaskSpec) -> Result<Dataset> {
    Ok(gen_proxy_field_with_latents(spec)?.0)
}
