//! Matrix exponentials and zero-order-hold discretization, plus the power and
//! geometric-sum tables consumed by the dropout model.

use nalgebra::{DMatrix, Matrix2, Vector2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DiscretizeError {
    #[error("matrix exponential requires a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix exponential limited to n <= 64, got {0}")]
    TooLarge(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("sampling period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("sampling set is empty")]
    EmptySamplingSet,
    #[error("power/sum table depth must be at least 1")]
    ZeroDepth,
    #[error("period {0} not present in the table sampling set")]
    UnknownPeriod(f64),
}

// Pade coefficients from Higham, "The Scaling and Squaring Method for the
// Matrix Exponential Revisited" (2005).
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25_200.0, 1_512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

fn pade_uv(a: &DMatrix<f64>, coeffs: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::identity(n, n);
    let a2 = a * a;
    // even/odd polynomial split: U = A * sum(b[2k+1] A^{2k}), V = sum(b[2k] A^{2k})
    let mut even = &id * coeffs[0];
    let mut odd = &id * coeffs[1];
    let mut pow = id.clone();
    let mut k = 2;
    while k < coeffs.len() {
        pow = &pow * &a2;
        even += &pow * coeffs[k];
        if k + 1 < coeffs.len() {
            odd += &pow * coeffs[k + 1];
        }
        k += 2;
    }
    (a * odd, even)
}

fn pade13_uv(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * B13[13] + &a4 * B13[11] + &a2 * B13[9]);
    let u_lo = &a6 * B13[7] + &a4 * B13[5] + &a2 * B13[3] + &id * B13[1];
    let u = a * (u_hi + u_lo);
    let v_hi = &a6 * (&a6 * B13[12] + &a4 * B13[10] + &a2 * B13[8]);
    let v = v_hi + &a6 * B13[6] + &a4 * B13[4] + &a2 * B13[2] + &id * B13[0];
    (u, v)
}

/// Matrix exponential via scaling-and-squaring with diagonal Pade
/// approximants. Relative accuracy around 1e-12 or better for
/// well-conditioned inputs up to n = 64.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>, DiscretizeError> {
    if m.nrows() != m.ncols() {
        return Err(DiscretizeError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() > 64 {
        return Err(DiscretizeError::TooLarge(m.nrows()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(DiscretizeError::NonFinite);
    }
    let norm = one_norm(m);
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_uv(m, &B3);
        (u, v, 0u32)
    } else if norm <= THETA5 {
        let (u, v) = pade_uv(m, &B5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_uv(m, &B7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_uv(m, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as u32;
        let scaled = m * 0.5_f64.powi(s as i32);
        let (u, v) = pade13_uv(&scaled);
        (u, v, s)
    };
    let denom = &v - &u;
    let numer = &v + &u;
    let lu = denom.lu();
    let mut r = lu
        .solve(&numer)
        .ok_or(DiscretizeError::NonFinite)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Exponential of a 2x2 matrix, fixed-size convenience.
pub fn matrix_exponential2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let d = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    let e = matrix_exponential(&d).expect("2x2 exponential");
    Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)])
}

/// One-step ZOH discretization x(k+1) = A_d x(k) + B_d u(k) of
/// xdot = A x + B u over a period h.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a_d: Matrix2<f64>,
    pub b_d: Vector2<f64>,
    pub h: f64,
}

/// ZOH discretization via the augmented identity
/// exp([[A, B], [0, 0]] h) = [[A_d, B_d], [0, I]].
pub fn zoh_discretize(a: &Matrix2<f64>, b: &Vector2<f64>, h: f64) -> Result<DiscreteModel, DiscretizeError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DiscretizeError::NonPositivePeriod(h));
    }
    let mut aug = DMatrix::zeros(3, 3);
    for i in 0..2 {
        for j in 0..2 {
            aug[(i, j)] = a[(i, j)] * h;
        }
        aug[(i, 2)] = b[i] * h;
    }
    let e = matrix_exponential(&aug)?;
    Ok(DiscreteModel {
        a_d: Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]),
        b_d: Vector2::new(e[(0, 2)], e[(1, 2)]),
        h,
    })
}

/// Discretizations for every period in the sampling set plus the power and
/// geometric-sum tables over the base period h_max:
/// powers\[k\] = Phi_b^k and sums\[k\] = sum_{i=0}^{k-1} Phi_b^i Gamma_b.
#[derive(Debug, Clone)]
pub struct ExponentialTables {
    entries: Vec<DiscreteModel>,
    pub h_max: f64,
    pub powers: Vec<Matrix2<f64>>,
    pub sums: Vec<Vector2<f64>>,
}

impl ExponentialTables {
    pub fn base(&self) -> &DiscreteModel {
        self.lookup(self.h_max).expect("h_max entry present")
    }

    pub fn lookup(&self, h: f64) -> Option<&DiscreteModel> {
        self.entries.iter().find(|e| (e.h - h).abs() <= 1e-12 * h.max(1.0))
    }

    pub fn depth(&self) -> usize {
        self.sums.len()
    }
}

/// Build the tables for a sampling set and a dropout bound `k_max` (the
/// Markov state count M). Powers run 0..=k_max, sums 1..=k_max.
pub fn build_tables(
    a: &Matrix2<f64>,
    b: &Vector2<f64>,
    sampling_set: &[f64],
    h_max: f64,
    k_max: usize,
) -> Result<ExponentialTables, DiscretizeError> {
    if sampling_set.is_empty() {
        return Err(DiscretizeError::EmptySamplingSet);
    }
    if k_max == 0 {
        return Err(DiscretizeError::ZeroDepth);
    }
    let mut hs: Vec<f64> = sampling_set.to_vec();
    if !hs.iter().any(|&h| (h - h_max).abs() <= 1e-12 * h_max.max(1.0)) {
        hs.push(h_max);
    }
    let mut entries = Vec::with_capacity(hs.len());
    for &h in &hs {
        entries.push(zoh_discretize(a, b, h)?);
    }
    let base = entries
        .iter()
        .find(|e| (e.h - h_max).abs() <= 1e-12 * h_max.max(1.0))
        .expect("base entry just inserted")
        .clone();
    let mut powers = Vec::with_capacity(k_max + 1);
    powers.push(Matrix2::identity());
    for k in 0..k_max {
        powers.push(powers[k] * base.a_d);
    }
    let mut sums = Vec::with_capacity(k_max);
    sums.push(base.b_d);
    for k in 1..k_max {
        sums.push(base.a_d * sums[k - 1] + base.b_d);
    }
    Ok(ExponentialTables { entries, h_max, powers, sums })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{continuous_matrices, reference_params, RobotParams};
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::zeros(2, 2);
        let e = matrix_exponential(&z).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn exp_of_nilpotent() {
        let h = 0.37;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, h, 0.0, 0.0]);
        let e = matrix_exponential(&m).unwrap();
        assert_relative_eq!(e[(0, 1)], h, max_relative = 1e-14);
        assert_relative_eq!(e[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], 1.0, max_relative = 1e-14);
        assert_eq!(e[(1, 0)], 0.0);
    }

    #[test]
    fn exp_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let e = matrix_exponential(&m).unwrap();
        assert_relative_eq!(e[(0, 0)], 1.0_f64.exp(), max_relative = 1e-13);
        assert_relative_eq!(e[(1, 1)], (-1.0_f64).exp(), max_relative = 1e-13);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn exp_rejects_bad_input() {
        assert!(matrix_exponential(&DMatrix::zeros(2, 3)).is_err());
        let mut nan = DMatrix::zeros(2, 2);
        nan[(0, 0)] = f64::NAN;
        assert!(matrix_exponential(&nan).is_err());
    }

    #[test]
    fn exp_large_norm_scaling_path() {
        // companion-type matrix with norm ~3000 exercises the squaring branch
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -3069.0]);
        let e = matrix_exponential(&(m.clone() * 1e-3)).unwrap();
        // exact: [[1, (1-exp(-c t))/c],[0, exp(-c t)]] with c=3069, t=1e-3
        let c = 3069.0_f64;
        let t = 1e-3;
        assert_relative_eq!(e[(1, 1)], (-c * t).exp(), max_relative = 1e-12);
        assert_relative_eq!(e[(0, 1)], (1.0 - (-c * t).exp()) / c, max_relative = 1e-11);
    }

    #[test]
    fn zoh_reproduces_printed_sec6_matrices() {
        let p = RobotParams::new(reference_params::INERTIA, reference_params::DAMPING).unwrap();
        let (a, b) = continuous_matrices(p);
        let d = zoh_discretize(&a, &b, 0.001).unwrap();
        assert_relative_eq!(d.a_d[(0, 0)], 1.0, max_relative = 1e-9);
        assert_relative_eq!(d.a_d[(0, 1)], 9.999932e-4, max_relative = 1e-5);
        assert_relative_eq!(d.a_d[(1, 1)], 0.999986, max_relative = 1e-5);
        assert_relative_eq!(d.b_d[0], 5.896478e-5, max_relative = 1e-5);
        assert_relative_eq!(d.b_d[1], 0.117929, max_relative = 1e-5);
    }

    #[test]
    fn zoh_zero_dynamics() {
        let a = Matrix2::zeros();
        let b = nalgebra::Vector2::new(0.3, -1.2);
        let d = zoh_discretize(&a, &b, 0.25).unwrap();
        assert_relative_eq!(d.a_d, Matrix2::identity(), max_relative = 1e-14);
        assert_relative_eq!(d.b_d[0], 0.25 * 0.3, max_relative = 1e-13);
        assert_relative_eq!(d.b_d[1], 0.25 * -1.2, max_relative = 1e-13);
    }

    #[test]
    fn zoh_double_integrator_closed_form() {
        let m = 2.0;
        let p = RobotParams::new(m, 0.0).unwrap();
        let (a, b) = continuous_matrices(p);
        let h = 0.1;
        let d = zoh_discretize(&a, &b, h).unwrap();
        assert_relative_eq!(d.a_d[(0, 1)], h, max_relative = 1e-13);
        assert_relative_eq!(d.b_d[0], h * h / (2.0 * m), max_relative = 1e-12);
        assert_relative_eq!(d.b_d[1], h / m, max_relative = 1e-13);
    }

    #[test]
    fn zoh_rejects_nonpositive_period() {
        let a = Matrix2::zeros();
        let b = nalgebra::Vector2::new(0.0, 1.0);
        assert!(zoh_discretize(&a, &b, 0.0).is_err());
        assert!(zoh_discretize(&a, &b, -0.1).is_err());
    }

    #[test]
    fn tables_base_case() {
        let p = RobotParams::new(1.0, 0.5).unwrap();
        let (a, b) = continuous_matrices(p);
        let t = build_tables(&a, &b, &[0.1], 0.1, 1).unwrap();
        assert_eq!(t.powers.len(), 2);
        assert_eq!(t.powers[0], Matrix2::identity());
        assert_eq!(t.sums.len(), 1);
        assert_relative_eq!(t.sums[0], t.base().b_d, max_relative = 1e-14);
    }

    #[test]
    fn tables_sum_matches_brute_force() {
        let p = RobotParams::new(reference_params::INERTIA, reference_params::DAMPING).unwrap();
        let (a, b) = continuous_matrices(p);
        let t = build_tables(&a, &b, &reference_params::H_SET, 0.21, 3).unwrap();
        let base = t.base().clone();
        let s2 = base.a_d * base.b_d + base.b_d;
        assert_relative_eq!(t.sums[1], s2, max_relative = 1e-14);
        let s3 = base.a_d * base.a_d * base.b_d + base.a_d * base.b_d + base.b_d;
        assert_relative_eq!(t.sums[2], s3, max_relative = 1e-13);
    }

    #[test]
    fn tables_power_matches_exponential_additivity() {
        let p = RobotParams::new(reference_params::INERTIA, reference_params::DAMPING).unwrap();
        let (a, b) = continuous_matrices(p);
        let h_max = 0.21;
        let t = build_tables(&a, &b, &[0.045, h_max], h_max, 3).unwrap();
        let direct = matrix_exponential2(&(a * (3.0 * h_max)));
        assert_relative_eq!(t.powers[3], direct, max_relative = 1e-10);
    }

    #[test]
    fn tables_reject_bad_input() {
        let a = Matrix2::zeros();
        let b = nalgebra::Vector2::new(0.0, 1.0);
        assert!(matches!(build_tables(&a, &b, &[], 0.1, 1), Err(DiscretizeError::EmptySamplingSet)));
        assert!(matches!(build_tables(&a, &b, &[0.1], 0.1, 0), Err(DiscretizeError::ZeroDepth)));
    }
}
