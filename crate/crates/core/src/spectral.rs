//! The linear map governing expected inequities, its spectrum, and the
//! stable / knife-edge / unstable classification.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::DecayFactor;
use crate::system::{validate_system, SystemSpec, Term};

/// Largest dimension solved with a full dense eigendecomposition; above it
/// only the dominant pair is found, by power iteration.
pub const DENSE_LIMIT: usize = 64;

/// Default knife-edge tolerance for maps built from analytic parameters.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// `E[y(t)] = A·E[y(t−1)]` on the person-major flattening of the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationMap {
    pub dimension: usize,
    /// Row-major, `dimension × dimension`.
    pub matrix: Vec<f64>,
}

impl ExpectationMap {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("expectation map must be square and non-empty".into()));
        }
        let matrix = rows.concat();
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("expectation map entries must be finite".into()));
        }
        Ok(Self { dimension: n, matrix })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.dimension + c]
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.matrix[r * self.dimension + c] += v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.dimension).map(<[f64]>::to_vec).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks(self.dimension)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᵗ·x`.
    pub fn propagate(&self, x: &[f64], t: usize) -> Vec<f64> {
        (0..t).fold(x.to_vec(), |acc, _| self.apply(&acc))
    }

    /// Sub-map on two coordinates (the rest held at zero).
    pub fn restrict(&self, coords: [usize; 2]) -> Result<Self> {
        if coords.iter().any(|&c| c >= self.dimension) || coords[0] == coords[1] {
            return Err(Error::InvalidArgument(format!(
                "cannot restrict a {}-dimensional map to {coords:?}",
                self.dimension
            )));
        }
        let rows: Vec<Vec<f64>> = coords.iter().map(|&r| coords.iter().map(|&c| self.get(r, c)).collect()).collect();
        Self::from_rows(&rows)
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dimension, self.dimension, &self.matrix)
    }
}

/// Builds `A` from a validated system: δ on the diagonal plus every
/// amplifier's coupling. Synergy enters as `c·E[|ε|]` because the current
/// shock is independent of the lagged source inequity.
pub fn build_expectation_map(spec: &SystemSpec) -> Result<ExpectationMap> {
    validate_system(spec).into_result()?;
    let (n, m) = spec.dims();
    let dim = n * m;
    let at = |i: usize, j: usize| i * m + j;
    let mut a = ExpectationMap { dimension: dim, matrix: vec![0.0; dim * dim] };
    for r in 0..dim {
        a.add(r, r, spec.delta.value());
    }
    let abs_shock = spec.shock.half_normal_mean();
    for term in &spec.terms {
        match term {
            Term::Spillover(t) => {
                for i in (0..n).filter(|&i| t.persons.contains(i)) {
                    a.add(at(i, t.target), at(i, t.source), t.b);
                }
            }
            Term::Synergy(t) => {
                for i in (0..n).filter(|&i| t.persons.contains(i)) {
                    a.add(at(i, t.target), at(i, t.source), t.c * abs_shock);
                }
            }
            Term::Multiplier(t) => {
                for (i, row) in t.weights.iter().enumerate() {
                    for (k, &w) in row.iter().enumerate() {
                        if k != i {
                            a.add(at(i, t.inequity), at(k, t.inequity), w);
                        }
                    }
                }
            }
            Term::Reinforcement(t) => {
                for i in (0..n).filter(|&i| t.persons.contains(i)) {
                    if t.is_direct() {
                        a.add(at(i, t.j), at(i, t.j), t.b);
                    } else {
                        a.add(at(i, t.j), at(i, t.k), t.b);
                        a.add(at(i, t.k), at(i, t.j), t.c);
                    }
                }
            }
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Stable,
    KnifeEdge,
    Unstable,
}

impl Classification {
    pub fn from_radius(rho: f64, tol: f64) -> Self {
        if rho < 1.0 - tol {
            Classification::Stable
        } else if rho > 1.0 + tol {
            Classification::Unstable
        } else {
            Classification::KnifeEdge
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Full spectrum for dense solves; only the dominant eigenvalue after
    /// power iteration.
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_radius: f64,
    /// Real dominant eigenvalue, when there is one.
    pub dominant_eigenvalue: Option<f64>,
    /// Unit right eigenvector: the direction expected inequities grow along.
    pub dominant_eigenvector: Option<Vec<f64>>,
    /// Unit left eigenvector: `w·y` is the dominant-mode coordinate of a state,
    /// which decides where a trajectory heads.
    pub dominant_left_eigenvector: Option<Vec<f64>>,
    pub classification: Classification,
    pub tolerance: f64,
    pub method: String,
}

impl StabilityReport {
    /// Coordinate of `state` along the dominant mode, `w·y`.
    pub fn mode_coordinate(&self, state: &[f64]) -> Option<f64> {
        self.dominant_left_eigenvector
            .as_ref()
            .map(|w| w.iter().zip(state).map(|(a, b)| a * b).sum())
    }
}

pub fn eigen_analysis(map: &ExpectationMap) -> Result<StabilityReport> {
    eigen_analysis_with_tolerance(map, DEFAULT_TOLERANCE)
}

pub fn eigen_analysis_with_tolerance(map: &ExpectationMap, tol: f64) -> Result<StabilityReport> {
    check_tolerance(tol)?;
    if map.dimension == 0 {
        return Err(Error::InvalidArgument("empty expectation map".into()));
    }
    if map.dimension <= DENSE_LIMIT {
        Ok(dense_analysis(map, tol))
    } else {
        power_analysis(map, tol)
    }
}

pub fn classify_stability(report: &StabilityReport, tol: f64) -> Result<Classification> {
    check_tolerance(tol)?;
    Ok(Classification::from_radius(report.spectral_radius, tol))
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 0.1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must lie in (0, 0.1], got {tol}")))
    }
}

fn dense_analysis(map: &ExpectationMap, tol: f64) -> StabilityReport {
    let a = map.to_dmatrix();
    let mut eigenvalues: Vec<Eigenvalue> = a
        .complex_eigenvalues()
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    eigenvalues.sort_by(|x, y| y.modulus().total_cmp(&x.modulus()).then(y.re.total_cmp(&x.re)));
    let rho = eigenvalues.iter().map(Eigenvalue::modulus).fold(0.0, f64::max);

    // Prefer a real eigenvalue attaining the radius (always present for the
    // non-negative maps built from systems).
    let real_tol = 1e-12 * rho.max(1.0);
    let dominant = eigenvalues
        .iter()
        .filter(|z| z.im.abs() <= real_tol && (z.modulus() - rho).abs() <= 1e-9 * rho.max(1.0))
        .map(|z| z.re)
        .max_by(f64::total_cmp);

    let (right, left) = match dominant {
        Some(lambda) => (
            Some(null_vector(&a, lambda)),
            Some(null_vector(&a.transpose(), lambda)),
        ),
        None => (None, None),
    };

    StabilityReport {
        eigenvalues,
        spectral_radius: rho,
        dominant_eigenvalue: dominant,
        dominant_eigenvector: right,
        dominant_left_eigenvector: left,
        classification: Classification::from_radius(rho, tol),
        tolerance: tol,
        method: "dense".into(),
    }
}

/// Unit vector spanning (approximately) the null space of `a − λI`.
fn null_vector(a: &DMatrix<f64>, lambda: f64) -> Vec<f64> {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty");
    orient(v_t.row(idx).iter().copied().collect())
}

/// Unit length, and a canonical sign: positive component sum, or a positive
/// first non-negligible component when the sum vanishes.
fn orient(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let sum: f64 = v.iter().sum();
    let flip = if sum.abs() > 1e-12 {
        sum < 0.0
    } else {
        v.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

const POWER_MAX_ITER: usize = 200_000;
const POWER_TOL: f64 = 1e-14;

/// Dominant eigenpair of a non-negative map via power iteration on `A + I`,
/// whose Perron root is strictly dominant even when `A` is periodic.
fn power_analysis(map: &ExpectationMap, tol: f64) -> Result<StabilityReport> {
    let (rho, right) = power_iterate(map, false)?;
    let (_, left) = power_iterate(map, true)?;
    Ok(StabilityReport {
        eigenvalues: vec![Eigenvalue { re: rho, im: 0.0 }],
        spectral_radius: rho.abs(),
        dominant_eigenvalue: Some(rho),
        dominant_eigenvector: Some(orient(right)),
        dominant_left_eigenvector: Some(orient(left)),
        classification: Classification::from_radius(rho.abs(), tol),
        tolerance: tol,
        method: "power".into(),
    })
}

fn power_iterate(map: &ExpectationMap, transpose: bool) -> Result<(f64, Vec<f64>)> {
    let n = map.dimension;
    let mul = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|r| {
                let dot: f64 = (0..n)
                    .map(|c| if transpose { map.get(c, r) } else { map.get(r, c) } * x[c])
                    .sum();
                dot + x[r]
            })
            .collect()
    };
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let y = mul(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok((0.0, x));
        }
        let next: Vec<f64> = y.iter().map(|v| v / ny).collect();
        let new_lambda: f64 = next.iter().zip(mul(&next)).map(|(a, b)| a * b).sum();
        residual = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        let settled = (new_lambda - lambda).abs() <= POWER_TOL * new_lambda.abs().max(1.0);
        lambda = new_lambda;
        if residual <= 1e-12 && settled {
            return Ok((lambda - 1.0, x));
        }
    }
    Err(Error::NoConvergence { iterations: POWER_MAX_ITER, residual })
}

/// Which closed-form phase transition to solve for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum ThresholdMechanism {
    /// Two-way reinforcement. With `b` fixed, solves for `c`; without it,
    /// solves the symmetric `b = c` form.
    Reinforcement { delta: f64, b: Option<f64> },
    /// `d1` such that `√(d1·d2) = 1 − δ`.
    TwoAgentMultiplier { delta: f64, d2: f64 },
    /// Common peer weight `d` among `persons` people.
    CommonMultiplier { delta: f64, persons: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub mechanism: String,
    pub fixed: BTreeMap<String, f64>,
    pub free_parameter: String,
    pub critical_value: f64,
    pub map_at_critical: ExpectationMap,
}

pub fn stability_threshold(mechanism: ThresholdMechanism) -> Result<ThresholdReport> {
    let delta_of = |d: f64| DecayFactor::new(d).map(DecayFactor::value);
    let positive = |name: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
        }
    };
    match mechanism {
        ThresholdMechanism::Reinforcement { delta, b } => {
            let d = delta_of(delta)?;
            let gap = 1.0 - d;
            let mut fixed = BTreeMap::from([("delta".to_string(), d)]);
            let (free, b_val, c_val) = match b {
                Some(b) => {
                    let b = positive("b", b)?;
                    fixed.insert("b".into(), b);
                    let c = gap * gap / b;
                    ("c", b, c)
                }
                None => ("b=c", gap, gap),
            };
            Ok(ThresholdReport {
                mechanism: "reinforcement".into(),
                fixed,
                free_parameter: free.into(),
                critical_value: if free == "c" { c_val } else { gap },
                map_at_critical: ExpectationMap::from_rows(&[vec![d, b_val], vec![c_val, d]])?,
            })
        }
        ThresholdMechanism::TwoAgentMultiplier { delta, d2 } => {
            let d = delta_of(delta)?;
            let d2 = positive("d2", d2)?;
            let d1 = (1.0 - d) * (1.0 - d) / d2;
            Ok(ThresholdReport {
                mechanism: "two-agent-multiplier".into(),
                fixed: BTreeMap::from([("delta".to_string(), d), ("d2".to_string(), d2)]),
                free_parameter: "d1".into(),
                critical_value: d1,
                map_at_critical: ExpectationMap::from_rows(&[vec![d, d1], vec![d2, d]])?,
            })
        }
        ThresholdMechanism::CommonMultiplier { delta, persons } => {
            let d = delta_of(delta)?;
            if persons < 2 {
                return Err(Error::InvalidArgument("common multiplier needs at least 2 persons".into()));
            }
            let crit = (1.0 - d) / (persons - 1) as f64;
            let rows: Vec<Vec<f64>> = (0..persons)
                .map(|i| (0..persons).map(|k| if i == k { d } else { crit }).collect())
                .collect();
            Ok(ThresholdReport {
                mechanism: "common-d-multiplier".into(),
                fixed: BTreeMap::from([("delta".to_string(), d), ("persons".to_string(), persons as f64)]),
                free_parameter: "d".into(),
                critical_value: crit,
                map_at_critical: ExpectationMap::from_rows(&rows)?,
            })
        }
    }
}

/// Factor κ by which every amplifier coupling must be scaled so that
/// `δI + κ·(A − δI)` has spectral radius one. None when the system has no
/// coupling that can reach the boundary.
pub fn critical_amplifier_scale(map: &ExpectationMap, delta: f64) -> Result<Option<f64>> {
    let scaled = |k: f64| -> Result<f64> {
        let n = map.dimension;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        let base = if r == c { delta } else { 0.0 };
                        base + k * (map.get(r, c) - base)
                    })
                    .collect()
            })
            .collect();
        Ok(eigen_analysis(&ExpectationMap::from_rows(&rows)?)?.spectral_radius)
    };
    let mut hi = 1.0;
    let mut tries = 0;
    while scaled(hi)? < 1.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if scaled(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
