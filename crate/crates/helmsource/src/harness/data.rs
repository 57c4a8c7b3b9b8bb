//! Data synthesis: forward integrals on a dense oracle rule, measurement
//! noise, the circular-harmonic extension of Dirichlet circle data to a
//! larger ring, and null-space-controlled synthetic systems for the error
//! bound checks.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{BoundaryData, MeasurementPoint, WavenumberSet};
use crate::point::{dist, dot, sub, Dim, Point};
use crate::quadmesh::AdaptiveMesh;
use crate::solver::SvdFactors;
use crate::specfun::{hankel1, hankel1_derivative, phi_dr_from_r, phi_from_r};
use crate::{Error, Result};

/// Forward data plus the oracle-resolution spot check.
#[derive(Debug, Clone)]
pub struct ForwardData {
    pub data: BoundaryData,
    /// Largest relative change of a sampled datum when the oracle rule
    /// density doubles; `Some` only when the check ran.
    pub resolution_gap: Option<f64>,
}

/// Radiated field of `source` at every measurement point and wavenumber:
///
/// ```text
/// u_k(x) = Σ_j w_j Φ(k|x - y_j|) S(y_j),
/// ∂u_k/∂ν(x) = Σ_j w_j ∂Φ(k|x - y_j|)/∂ν(x) S(y_j)
/// ```
///
/// over the oracle mesh's points. The oracle rule must differ from any
/// training rule (inverse-crime guard is the caller's responsibility; see
/// the experiment driver). When `check_mesh` is given, a handful of values
/// are recomputed on it and the worst relative gap is reported.
pub fn forward_data(
    source: &dyn Fn(Point) -> f64,
    points: &[MeasurementPoint],
    ks: &WavenumberSet,
    dim: Dim,
    oracle_mesh: &AdaptiveMesh,
    check_mesh: Option<&AdaptiveMesh>,
) -> Result<ForwardData> {
    let data = forward_on_mesh(source, points, ks, dim, oracle_mesh)?;
    let mut resolution_gap = None;
    if let Some(fine) = check_mesh {
        // Spot check: first wavenumber, up to 8 points.
        let sample: Vec<MeasurementPoint> = points.iter().take(8).cloned().collect();
        let k0 = WavenumberSet::new(vec![ks.values()[0]])?;
        let coarse = forward_on_mesh(source, &sample, &k0, dim, oracle_mesh)?;
        let refined = forward_on_mesh(source, &sample, &k0, dim, fine)?;
        let mut worst: f64 = 0.0;
        for (key, v) in &coarse.dirichlet {
            let w = refined.dirichlet[key];
            let denom = w.norm().max(1e-300);
            worst = worst.max((v - w).norm() / denom);
        }
        for (key, v) in &coarse.neumann {
            let w = refined.neumann[key];
            let denom = w.norm().max(1e-300);
            worst = worst.max((v - w).norm() / denom);
        }
        if worst > 1e-6 {
            eprintln!(
                "warning: oracle quadrature may be under-resolved \
                 (doubling the rule moved sampled data by {worst:.2e})"
            );
        }
        resolution_gap = Some(worst);
    }
    Ok(ForwardData {
        data,
        resolution_gap,
    })
}

fn forward_on_mesh(
    source: &dyn Fn(Point) -> f64,
    points: &[MeasurementPoint],
    ks: &WavenumberSet,
    dim: Dim,
    mesh: &AdaptiveMesh,
) -> Result<BoundaryData> {
    // Weighted source samples are shared by all points and wavenumbers.
    let quad: Vec<(Point, f64)> = mesh
        .points()
        .map(|(y, w)| (y, w * source(y)))
        .collect();
    let results: Vec<(usize, Vec<(Complex64, Complex64)>)> = points
        .par_iter()
        .enumerate()
        .map(|(pi, p)| {
            let per_k: Vec<(Complex64, Complex64)> = ks
                .values()
                .iter()
                .map(|&k| {
                    let mut u = Complex64::new(0.0, 0.0);
                    let mut du = Complex64::new(0.0, 0.0);
                    for &(y, ws) in &quad {
                        if ws == 0.0 {
                            continue;
                        }
                        let r = dist(p.x, y);
                        u += phi_from_r(k, r, dim) * ws;
                        if p.neumann {
                            let nu = p.nu.expect("neumann point without normal");
                            let proj = dot(sub(p.x, y), nu) / r;
                            du += phi_dr_from_r(k, r, dim) * (proj * ws);
                        }
                    }
                    (u, du)
                })
                .collect();
            (pi, per_k)
        })
        .collect();

    let mut data = BoundaryData::default();
    for (pi, per_k) in results {
        for (ki, (u, du)) in per_k.into_iter().enumerate() {
            if points[pi].dirichlet {
                data.dirichlet.insert((ki, pi), u);
            }
            if points[pi].neumann {
                data.neumann.insert((ki, pi), du);
            }
        }
    }
    Ok(data)
}

/// Multiplicative magnitude/phase noise: each datum `u` becomes
/// `u + δ ε₁ |u| e^{iπε₂}` with `ε₁, ε₂ ~ U(-1, 1)` drawn independently per
/// datum, in deterministic (key-sorted) order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

pub fn add_noise(data: &BoundaryData, spec: NoiseSpec) -> Result<BoundaryData> {
    if spec.delta < 0.0 {
        return Err(Error::Data("negative noise level".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = data.clone();
    let perturb = |v: &mut Complex64, rng: &mut ChaCha8Rng| {
        let eps1: f64 = rng.random_range(-1.0..1.0);
        let eps2: f64 = rng.random_range(-1.0..1.0);
        let phase = Complex64::new(0.0, std::f64::consts::PI * eps2).exp();
        *v += spec.delta * eps1 * v.norm() * phase;
    };
    for v in out.dirichlet.values_mut() {
        perturb(v, &mut rng);
    }
    for v in out.neumann.values_mut() {
        perturb(v, &mut rng);
    }
    Ok(out)
}

/// Parameters of the circular-harmonic extension.
#[derive(Debug, Clone, Copy)]
pub struct CircularExtension {
    pub k: f64,
    /// Observation radius (data lives here).
    pub radius_obs: f64,
    /// Generation radius (> observation radius).
    pub radius_gen: f64,
    /// Harmonic truncation: modes |n| ≤ truncation are kept.
    pub truncation: usize,
    /// Number of output points, uniform in angle on the generation circle.
    pub n_generate: usize,
    pub center: [f64; 2],
}

/// Default truncation `2 ⌊δ^{-1/3}⌋` from the noise level.
pub fn default_truncation(delta: f64) -> usize {
    if delta <= 0.0 {
        8
    } else {
        2 * delta.powf(-1.0 / 3.0).floor() as usize
    }
}

/// Extends uniformly sampled Dirichlet values on the observation circle to
/// Cauchy data on the generation circle via the ratio of Hankel functions,
///
/// ```text
/// u(ρ, θ) = Σ_n (H_n(kρ) / H_n(kR)) û_n e^{inθ},
/// ∂u/∂ν(ρ, θ) = Σ_n k (H_n'(kρ) / H_n(kR)) û_n e^{inθ}.
/// ```
///
/// Vanishing `|H_n(kR)|` denominators drop their modes (count reported).
/// Returns per-output-point `(u, ∂u/∂ν)` plus the number of dropped modes.
pub fn circular_extension(
    samples: &[Complex64],
    ext: &CircularExtension,
) -> Result<(Vec<(Complex64, Complex64)>, usize)> {
    let n_obs = samples.len();
    if n_obs < 2 {
        return Err(Error::Data("need at least two observation samples".into()));
    }
    if ext.radius_gen <= ext.radius_obs {
        return Err(Error::Data(format!(
            "generation radius {} must exceed observation radius {}",
            ext.radius_gen, ext.radius_obs
        )));
    }
    if ext.truncation > n_obs / 2 {
        return Err(Error::Data(format!(
            "truncation {} exceeds half the sample count {}",
            ext.truncation, n_obs
        )));
    }
    // Fourier coefficients û_n = (1/N) Σ_j u_j e^{-i n θ_j}.
    let mut coeffs = Vec::with_capacity(2 * ext.truncation + 1);
    for n in -(ext.truncation as i64)..=(ext.truncation as i64) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &u) in samples.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_obs as f64;
            acc += u * Complex64::new(0.0, -(n as f64) * theta).exp();
        }
        coeffs.push((n, acc / n_obs as f64));
    }

    // Radial transfer factors per |n| (integer-order symmetry
    // H_{-n} = (-1)^n H_n makes the ratios even in n).
    let mut dirichlet_factor = vec![Complex64::new(0.0, 0.0); ext.truncation + 1];
    let mut neumann_factor = vec![Complex64::new(0.0, 0.0); ext.truncation + 1];
    let mut dropped = 0usize;
    for n in 0..=ext.truncation {
        let denom = hankel1(n as u32, ext.k * ext.radius_obs)?;
        if denom.norm() < 1e-300 {
            dropped += 1;
            continue;
        }
        let h_gen = hankel1(n as u32, ext.k * ext.radius_gen)?;
        let dh_gen = hankel1_derivative(n as u32, ext.k * ext.radius_gen)?;
        dirichlet_factor[n] = h_gen / denom;
        neumann_factor[n] = ext.k * dh_gen / denom;
    }

    let out = (0..ext.n_generate)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / ext.n_generate as f64;
            let mut u = Complex64::new(0.0, 0.0);
            let mut du = Complex64::new(0.0, 0.0);
            for &(n, c) in &coeffs {
                let a = n.unsigned_abs() as usize;
                let phase = Complex64::new(0.0, n as f64 * theta).exp();
                u += dirichlet_factor[a] * c * phase;
                du += neumann_factor[a] * c * phase;
            }
            (u, du)
        })
        .collect();
    Ok((out, dropped))
}

/// Synthetic system pieces for the error-bound experiments.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub w: Array1<f64>,
    pub s_star: Array1<f64>,
    pub eta_vec: Array1<f64>,
    pub u_true: Array1<f64>,
    pub w_norm: f64,
    pub eta_m: f64,
}

/// Builds `s* = (AᵀA)^ν w` for a random `w`, a left-null-space vector of
/// norm exactly `eta_m`, and `U_true = A s* + η`.
pub fn synthesize_consistent_data(
    a: &Array2<f64>,
    nu: f64,
    eta_m: f64,
    seed: u64,
) -> Result<SynthSpec> {
    let factors = SvdFactors::compute(a)?;
    synthesize_from_factors(a, &factors, nu, eta_m, seed)
}

/// [`synthesize_consistent_data`] with a precomputed factorization, so one
/// SVD can serve a whole η_M sweep.
pub fn synthesize_from_factors(
    a: &Array2<f64>,
    factors: &SvdFactors,
    nu: f64,
    eta_m: f64,
    seed: u64,
) -> Result<SynthSpec> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Data(format!("ν = {nu} outside (0, 1]")));
    }
    if eta_m < 0.0 {
        return Err(Error::Data("eta_m must be nonnegative".into()));
    }
    let (n, m) = (a.nrows(), a.ncols());
    let rank_bound = factors.sigma.len(); // min(n, m)
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));

    // s* = V Σ^{2ν} Vᵀ w.
    let vt_w = factors.v.t().dot(&w);
    let scaled = Array1::from_shape_fn(rank_bound, |i| factors.sigma[i].powf(2.0 * nu) * vt_w[i]);
    let s_star = factors.v.dot(&scaled);

    // Left-null projection of a random vector, scaled to eta_m exactly.
    let eta_vec = if eta_m == 0.0 {
        Array1::zeros(n)
    } else {
        let g = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let proj = factors.u.dot(&factors.u.t().dot(&g));
        let mut eta = &g - &proj;
        let len = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len < 1e-10 * g.iter().map(|v| v * v).sum::<f64>().sqrt() {
            return Err(Error::Data(
                "operator has (numerically) full row rank: no left null space \
                 to carry the model inconsistency"
                    .into(),
            ));
        }
        eta.mapv_inplace(|v| v * eta_m / len);
        eta
    };

    let u_true = a.dot(&s_star) + &eta_vec;
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(SynthSpec {
        w,
        s_star,
        eta_vec,
        u_true,
        w_norm,
        eta_m,
    })
}

/// Per-entry real multiplicative perturbation `(1 + δ ε_i) u_i` used on the
/// stacked synthetic data; returns the perturbed vector and the bound
/// `δ ‖U_true‖₂` on the perturbation norm.
pub fn perturb_stacked(u_true: &Array1<f64>, delta: f64, seed: u64) -> (Array1<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = u_true.mapv(|v| v * (1.0 + delta * rng.random_range(-1.0..1.0)));
    let bound = delta * u_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    (noisy, bound)
}

/// Inverse-crime guard: the training rule and the oracle rule must differ,
/// and sampled points must not coincide.
pub fn assert_no_inverse_crime(training: &AdaptiveMesh, oracle: &AdaptiveMesh) -> Result<()> {
    if training.rule().len() == oracle.rule().len()
        && training.leaf_count() == oracle.leaf_count()
    {
        return Err(Error::Config {
            path: "data.oracle".into(),
            msg: "oracle quadrature matches the training quadrature; \
                  use a different rule or cell count"
                .into(),
        });
    }
    let training_pts: std::collections::HashSet<[u64; 3]> = training
        .points()
        .map(|(p, _)| [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()])
        .collect();
    for (p, _) in oracle.points().take(4096) {
        if training_pts.contains(&[p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]) {
            return Err(Error::Config {
                path: "data.oracle".into(),
                msg: format!("oracle and training rules share the point {p:?}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadmesh::{build_uniform_mesh, gauss_legendre};
    use approx::assert_relative_eq;

    fn oracle_mesh(cells: usize, n: usize) -> AdaptiveMesh {
        build_uniform_mesh(
            [0.0; 3],
            [1.0, 1.0, 0.0],
            [cells, cells, 1],
            gauss_legendre(n).unwrap(),
            Dim::Two,
        )
        .unwrap()
    }

    fn ring() -> Vec<MeasurementPoint> {
        crate::pipeline::testkit::ring_points()
    }

    #[test]
    fn zero_source_gives_zero_data() {
        let mesh = oracle_mesh(4, 4);
        let ks = WavenumberSet::new(vec![1.0, 5.0]).unwrap();
        let out = forward_data(&|_| 0.0, &ring(), &ks, Dim::Two, &mesh, None).unwrap();
        assert!(out.data.dirichlet.values().all(|v| v.norm() == 0.0));
        assert!(out.data.neumann.values().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn linearity_in_the_source() {
        let mesh = oracle_mesh(4, 4);
        let ks = WavenumberSet::new(vec![3.0]).unwrap();
        let s1 = |p: Point| (-30.0 * ((p[0] - 0.4).powi(2) + (p[1] - 0.5).powi(2))).exp();
        let s2 = |p: Point| (-50.0 * ((p[0] - 0.6).powi(2) + (p[1] - 0.3).powi(2))).exp();
        let sum = |p: Point| s1(p) + s2(p);
        let d1 = forward_data(&s1, &ring(), &ks, Dim::Two, &mesh, None).unwrap().data;
        let d2 = forward_data(&s2, &ring(), &ks, Dim::Two, &mesh, None).unwrap().data;
        let ds = forward_data(&sum, &ring(), &ks, Dim::Two, &mesh, None).unwrap().data;
        for key in ds.dirichlet.keys() {
            let lhs = ds.dirichlet[key];
            let rhs = d1.dirichlet[key] + d2.dirichlet[key];
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1e-12));
        }
    }

    #[test]
    fn narrow_bump_radiates_like_point_source() {
        // A very narrow Gaussian with unit mass approaches Φ_k(x, c).
        let v = 2.0e5;
        let mass = std::f64::consts::PI / v; // ∫ exp(-v r²) over the plane
        let c = [0.45, 0.55, 0.0];
        let source = move |p: Point| (-v * ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))).exp();
        let mesh = oracle_mesh(60, 8);
        let ks = WavenumberSet::new(vec![2.0]).unwrap();
        let far = vec![MeasurementPoint::dirichlet([3.0, -1.0, 0.0])];
        let data = forward_data(&source, &far, &ks, Dim::Two, &mesh, None)
            .unwrap()
            .data;
        let got = data.dirichlet[&(0, 0)];
        let want = phi_from_r(2.0, dist([3.0, -1.0, 0.0], c), Dim::Two) * mass;
        assert!(
            (got - want).norm() / want.norm() < 0.01,
            "{got} vs {want}"
        );
    }

    #[test]
    fn resolution_check_runs() {
        let mesh = oracle_mesh(6, 4);
        let fine = oracle_mesh(12, 4);
        let ks = WavenumberSet::new(vec![2.0]).unwrap();
        let s = |p: Point| (-40.0 * ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2))).exp();
        let out = forward_data(&s, &ring(), &ks, Dim::Two, &mesh, Some(&fine)).unwrap();
        assert!(out.resolution_gap.is_some());
        assert!(out.resolution_gap.unwrap() < 1e-6); // smooth integrand: converged
    }

    #[test]
    fn noise_zero_is_identity() {
        let mesh = oracle_mesh(3, 3);
        let ks = WavenumberSet::new(vec![1.0]).unwrap();
        let s = |p: Point| p[0] + p[1];
        let data = forward_data(&s, &ring(), &ks, Dim::Two, &mesh, None).unwrap().data;
        let noisy = add_noise(&data, NoiseSpec { delta: 0.0, seed: 1 }).unwrap();
        assert_eq!(noisy, data);
    }

    #[test]
    fn noise_bounded_per_datum() {
        let mesh = oracle_mesh(3, 3);
        let ks = WavenumberSet::new(vec![1.0, 5.0]).unwrap();
        let s = |p: Point| (-10.0 * ((p[0] - 0.5).powi(2) + (p[1] - 0.4).powi(2))).exp();
        let data = forward_data(&s, &ring(), &ks, Dim::Two, &mesh, None).unwrap().data;
        let delta = 0.2;
        let noisy = add_noise(&data, NoiseSpec { delta, seed: 9 }).unwrap();
        for (key, v) in &data.dirichlet {
            let w = noisy.dirichlet[key];
            assert!((w - v).norm() <= delta * v.norm() * (1.0 + 1e-12));
        }
        // Reproducible per seed.
        let again = add_noise(&data, NoiseSpec { delta, seed: 9 }).unwrap();
        assert_eq!(again, noisy);
    }

    #[test]
    fn noise_mean_magnitude_matches_expectation() {
        // E |u^δ - u| / |u| = δ E|ε₁| = δ/2.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = BoundaryData::default();
        for i in 0..100_000usize {
            data.dirichlet.insert(
                (0, i),
                Complex64::new(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0)),
            );
        }
        let delta = 0.1;
        let noisy = add_noise(&data, NoiseSpec { delta, seed: 4 }).unwrap();
        let mean: f64 = data
            .dirichlet
            .iter()
            .map(|(k, v)| (noisy.dirichlet[k] - v).norm() / v.norm())
            .sum::<f64>()
            / data.dirichlet.len() as f64;
        assert_relative_eq!(mean, delta / 2.0, max_relative = 0.02);
    }

    #[test]
    fn extension_at_same_radius_reproduces_input() {
        // Radiating single-mode field sampled on the observation circle.
        let k = 3.0;
        let radius = 0.5;
        let n_obs = 64;
        let mode = 2u32;
        let samples: Vec<Complex64> = (0..n_obs)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / n_obs as f64;
                hankel1(mode, k * radius).unwrap()
                    * Complex64::new(0.0, mode as f64 * theta).exp()
            })
            .collect();
        let ext = CircularExtension {
            k,
            radius_obs: radius,
            radius_gen: radius * (1.0 + 1e-12),
            truncation: 8,
            n_generate: n_obs,
            center: [0.0, 0.0],
        };
        let (out, dropped) = circular_extension(&samples, &ext).unwrap();
        assert_eq!(dropped, 0);
        for (j, (u, _)) in out.iter().enumerate() {
            assert!(
                (u - samples[j]).norm() < 1e-8,
                "sample {j}: {u} vs {}",
                samples[j]
            );
        }
    }

    #[test]
    fn extension_matches_analytic_single_mode() {
        let k = 5.0;
        let r_obs = 0.5;
        let r_gen = 0.6;
        let n_obs = 128;
        let mode = 2u32;
        let samples: Vec<Complex64> = (0..n_obs)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / n_obs as f64;
                hankel1(mode, k * r_obs).unwrap()
                    * Complex64::new(0.0, mode as f64 * theta).exp()
            })
            .collect();
        let ext = CircularExtension {
            k,
            radius_obs: r_obs,
            radius_gen: r_gen,
            truncation: 6,
            n_generate: 40,
            center: [0.0, 0.0],
        };
        let (out, _) = circular_extension(&samples, &ext).unwrap();
        for (j, (u, du)) in out.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / 40.0;
            let phase = Complex64::new(0.0, mode as f64 * theta).exp();
            let want_u = hankel1(mode, k * r_gen).unwrap() * phase;
            let want_du = k * hankel1_derivative(mode, k * r_gen).unwrap() * phase;
            assert!((u - want_u).norm() < 1e-8, "u at {j}");
            assert!((du - want_du).norm() < 1e-8, "du at {j}");
        }
    }

    #[test]
    fn truncation_rule_default() {
        assert_eq!(default_truncation(0.05), 4); // 2·⌊20^{1/3}⌋ = 2·2
        assert_eq!(default_truncation(0.01), 8); // 2·⌊100^{1/3}⌋ = 2·4
        assert_eq!(default_truncation(0.001), 18);
    }

    #[test]
    fn extension_preconditions() {
        let samples = vec![Complex64::new(1.0, 0.0); 16];
        let bad_radius = CircularExtension {
            k: 1.0,
            radius_obs: 0.6,
            radius_gen: 0.5,
            truncation: 4,
            n_generate: 8,
            center: [0.0, 0.0],
        };
        assert!(circular_extension(&samples, &bad_radius).is_err());
        let bad_trunc = CircularExtension {
            k: 1.0,
            radius_obs: 0.5,
            radius_gen: 0.6,
            truncation: 9,
            n_generate: 8,
            center: [0.0, 0.0],
        };
        assert!(circular_extension(&samples, &bad_trunc).is_err());
    }

    fn small_matrix(seed: u64, n: usize, m: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn synthetic_eta_norm_exact() {
        let a = small_matrix(1, 40, 12);
        for eta_m in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
            let spec = synthesize_consistent_data(&a, 1.0, eta_m, 3).unwrap();
            let norm = spec.eta_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_relative_eq!(norm, eta_m, max_relative = 1e-12);
        }
    }

    #[test]
    fn synthetic_eta_in_left_null_space() {
        let a = small_matrix(2, 50, 15);
        let spec = synthesize_consistent_data(&a, 1.0, 0.3, 4).unwrap();
        let at_eta = a.t().dot(&spec.eta_vec);
        let a_scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gap = at_eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(gap <= 1e-10 * a_scale * 0.3);
    }

    #[test]
    fn synthetic_zero_eta_is_consistent() {
        let a = small_matrix(3, 30, 10);
        let spec = synthesize_consistent_data(&a, 1.0, 0.0, 5).unwrap();
        let resid = &a.dot(&spec.s_star) - &spec.u_true;
        assert!(resid.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12);
    }

    #[test]
    fn synthetic_full_row_rank_rejected() {
        // Wide matrix: rows independent, no left null space.
        let a = small_matrix(4, 8, 20);
        assert!(synthesize_consistent_data(&a, 1.0, 0.1, 6).is_err());
    }

    #[test]
    fn source_condition_holds_by_construction() {
        let a = small_matrix(5, 30, 10);
        let spec = synthesize_consistent_data(&a, 1.0, 0.1, 7).unwrap();
        // s* = AᵀA w for ν = 1.
        let want = a.t().dot(&a.dot(&spec.w));
        for i in 0..10 {
            assert_relative_eq!(spec.s_star[i], want[i], max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_crime_guard_fires_on_same_rule() {
        let training = oracle_mesh(4, 3);
        let oracle = oracle_mesh(4, 3);
        assert!(assert_no_inverse_crime(&training, &oracle).is_err());
        let oracle = oracle_mesh(11, 7);
        assert!(assert_no_inverse_crime(&training, &oracle).is_ok());
    }
}
