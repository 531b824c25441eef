//! 1-D heat equation task: a time-varying left-boundary temperature drives a
//! rod with zero right boundary and zero initial condition; the field is the
//! temperature profile at the final time, solved by explicit finite
//! differences (FTCS) under the `r = kappa dt / dx^2 <= 0.5` stability bound.

use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, QueryGrid, Role};
use crate::error::{CmcoError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::rng::{domains, RngStream};

use super::antiderivative::uniform_points;
use super::spec::{TaskKind, TaskSpec};

#[derive(Debug, Clone, Copy)]
pub struct HeatParams {
    pub length: f64,
    pub kappa: f64,
    pub t_final: f64,
    pub nx: usize,
    pub courant: f64,
}

/// Smooth boundary profile vanishing at t = 0 to match the initial
/// condition: `sum_m c_m sin(pi (m - 1/2) t / t_final)`.
#[derive(Debug, Clone)]
pub struct BoundaryProfile {
    pub coeffs: Vec<f64>,
    pub t_final: f64,
}

impl BoundaryProfile {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                c * (std::f64::consts::PI * (m as f64 + 0.5) * t / self.t_final).sin()
            })
            .sum()
    }

    fn sample(t_final: f64, rng: &mut impl rand::Rng) -> Self {
        let coeffs = (1..=4)
            .map(|m| Normal::new(0.0, 1.0 / m as f64).expect("valid").sample(rng))
            .collect();
        BoundaryProfile { coeffs, t_final }
    }
}

/// March FTCS to `t_final`; returns the solver node coordinates and the
/// final temperature profile. Errors name the stability ratio when the
/// requested `courant` exceeds 0.5.
pub fn heat1d_solve(u: impl Fn(f64) -> f64, params: &HeatParams) -> Result<(Vec<f64>, Vec<f64>)> {
    if params.courant <= 0.0 || params.courant > 0.5 {
        return Err(CmcoError::InvalidConfig(format!(
            "explicit scheme unstable: r = {} violates r <= 0.5",
            params.courant
        )));
    }
    if params.nx < 3 {
        return Err(CmcoError::InvalidConfig("heat1d needs nx >= 3".into()));
    }
    let nx = params.nx;
    let dx = params.length / (nx - 1) as f64;
    let dt_target = params.courant * dx * dx / params.kappa;
    let nt = (params.t_final / dt_target).ceil().max(1.0) as usize;
    let dt = params.t_final / nt as f64;
    let r = params.kappa * dt / (dx * dx);
    debug_assert!(r <= 0.5 + 1e-12);

    let mut temp = vec![0.0; nx];
    temp[0] = u(0.0);
    let mut next = vec![0.0; nx];
    for step in 1..=nt {
        for j in 1..nx - 1 {
            next[j] = temp[j] + r * (temp[j + 1] - 2.0 * temp[j] + temp[j - 1]);
        }
        next[0] = u(step as f64 * dt);
        next[nx - 1] = 0.0;
        std::mem::swap(&mut temp, &mut next);
    }
    let xs = uniform_points(nx, params.length);
    Ok((xs, temp))
}

/// Linear interpolation from solver nodes onto arbitrary query positions.
pub fn interp_linear(xs: &[f64], ys: &[f64], queries: &[f64]) -> Vec<f64> {
    let n = xs.len();
    queries
        .iter()
        .map(|&q| {
            let q = q.clamp(xs[0], xs[n - 1]);
            let pos = (q - xs[0]) / (xs[n - 1] - xs[0]) * (n - 1) as f64;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            ys[i] * (1.0 - frac) + ys[i + 1] * frac
        })
        .collect()
}

pub fn gen_heat1d(spec: &TaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let TaskKind::Heat1d { length, kappa, t_final, nx, courant } = spec.kind else {
        return Err(CmcoError::InvalidConfig(
            "gen_heat1d requires a heat1d task spec".into(),
        ));
    };
    let params = HeatParams { length, kappa, t_final, nx, courant };
    let sample_times = uniform_points(spec.t_steps, t_final);
    let queries = uniform_points(spec.query_points, length);

    let mut inputs = Vec::with_capacity(spec.n_samples);
    let mut fields = Matrix::zeros(spec.n_samples, spec.query_points);
    for i in 0..spec.n_samples {
        let mut rng = RngStream::new(spec.seed, domains::TASK_GEN + i as u64).rng();
        let profile = BoundaryProfile::sample(t_final, &mut rng);
        let u: Vec<f64> = sample_times.iter().map(|&t| profile.eval(t)).collect();
        inputs.push(Matrix::from_vec(spec.t_steps, 1, u)?);
        let (xs, final_profile) = heat1d_solve(|t| profile.eval(t), &params)?;
        fields.row_mut(i).copy_from_slice(&interp_linear(&xs, &final_profile, &queries));
    }
    let coords = Matrix::from_vec(spec.query_points, 1, queries)?;
    Ok(Dataset {
        branch_inputs: inputs,
        grid: QueryGrid::new(coords),
        fields,
        role: Role::Train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> HeatParams {
        HeatParams { length: 1.0, kappa: 0.1, t_final: 1.0, nx: 129, courant: 0.45 }
    }

    #[test]
    fn zero_boundary_gives_zero_field() {
        let (_, profile) = heat1d_solve(|_| 0.0, &params()).unwrap();
        assert!(profile.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_boundary_relaxes_to_linear_steady_state() {
        // t_final >> L^2 / kappa: the slowest mode decays like
        // exp(-pi^2 kappa t / L^2), so by t = 2 L^2/kappa it is ~1e-9.
        let p = HeatParams { t_final: 20.0, ..params() };
        let (xs, profile) = heat1d_solve(|_| 1.0, &p).unwrap();
        for (&x, &v) in xs.iter().zip(&profile) {
            let steady = 1.0 - x / p.length;
            assert!((v - steady).abs() < 0.01, "x={x}: {v} vs {steady}");
        }
    }

    #[test]
    fn grid_refinement_changes_the_field_below_1e3() {
        let profile = BoundaryProfile { coeffs: vec![0.9, -0.4, 0.2, 0.1], t_final: 1.0 };
        let coarse = params();
        let fine = HeatParams { nx: 2 * coarse.nx - 1, ..coarse };
        let queries = uniform_points(65, 1.0);
        let (xs_c, prof_c) = heat1d_solve(|t| profile.eval(t), &coarse).unwrap();
        let (xs_f, prof_f) = heat1d_solve(|t| profile.eval(t), &fine).unwrap();
        let yc = interp_linear(&xs_c, &prof_c, &queries);
        let yf = interp_linear(&xs_f, &prof_f, &queries);
        let max_diff = yc
            .iter()
            .zip(&yf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-3, "refinement moved the field by {max_diff}");
    }

    #[test]
    fn unstable_ratio_is_rejected_by_name() {
        let p = HeatParams { courant: 0.7, ..params() };
        let err = heat1d_solve(|_| 0.0, &p).unwrap_err();
        assert!(err.to_string().contains("0.7"), "{err}");
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = TaskSpec::heat1d(3, 8, 17, 13);
        let a = gen_heat1d(&spec).unwrap();
        let b = gen_heat1d(&spec).unwrap();
        assert_eq!(a.fields, b.fields);
    }
}
