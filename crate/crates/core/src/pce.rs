//! Affine polynomial chaos expansions and exact central moments.
//!
//! Every predicted output is an affine function of mutually independent,
//! zero-mean basis variables. Term 0 of a basis is the constant `1`; the other
//! terms are whitened residual components `ξ_i(k)` (and, optionally, germs of
//! uncertain inputs). Central moments of a PCE row follow from the per-term
//! moment tables without sampling.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::residual::ResidualModel;

/// Highest supported central-moment order in [`moment2n`].
pub const MAX_MOMENT_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTerm {
    Constant,
    /// Germ of an uncertain input or initial condition.
    Input {
        index: usize,
    },
    /// Whitened residual component `ξ_component(step)`.
    Residual {
        step: usize,
        component: usize,
    },
}

impl BasisTerm {
    /// Time step the term belongs to; inputs and the constant are known at step 0.
    pub fn step(&self) -> usize {
        match self {
            BasisTerm::Residual { step, .. } => *step,
            _ => 0,
        }
    }
}

/// Ordered basis with a table of central moments `μ_p`, `p = 0..=max_order`, per term.
#[derive(Debug, Clone, PartialEq)]
pub struct PceBasis {
    terms: Vec<BasisTerm>,
    moments: Vec<Arc<Vec<f64>>>,
}

impl PceBasis {
    /// The basis `{1}` alone.
    pub fn constant() -> Self {
        PceBasis {
            terms: vec![BasisTerm::Constant],
            moments: vec![Arc::new(vec![1.0])],
        }
    }

    /// Appends a stochastic term with the given central-moment table (`table[p] = μ_p`).
    pub fn push(&mut self, term: BasisTerm, table: Arc<Vec<f64>>) {
        self.terms.push(term);
        self.moments.push(table);
    }

    /// `{1, ξ_1, …, ξ_m}` with independent standard-normal terms.
    pub fn gaussian(count: usize, max_order: usize) -> Self {
        let table = Arc::new(gaussian_moments(max_order));
        let mut b = PceBasis::constant();
        for index in 0..count {
            b.push(BasisTerm::Input { index }, table.clone());
        }
        b
    }

    /// Basis with one term per stochastic column, each with its own moment table.
    pub fn from_tables(tables: Vec<Vec<f64>>) -> Self {
        let mut b = PceBasis::constant();
        for (index, t) in tables.into_iter().enumerate() {
            b.push(BasisTerm::Input { index }, Arc::new(t));
        }
        b
    }

    /// Joint basis `{φ̄} ∪ {ξ_1(k), …, ξ_{n_ξ}(k)}_{k<N}` for a residual model.
    ///
    /// `input_basis` is the basis of the (possibly uncertain) initial
    /// condition and future inputs; pass [`PceBasis::constant`] for the
    /// deterministic case.
    pub fn joint(
        input_basis: &PceBasis,
        rm: &ResidualModel,
        horizon: usize,
        max_order: usize,
    ) -> Self {
        let mut b = input_basis.clone();
        let tables: Vec<Arc<Vec<f64>>> = (0..rm.n_xi())
            .map(|i| {
                Arc::new(central_moments(
                    rm.whitened.column(i).iter().copied(),
                    max_order,
                ))
            })
            .collect();
        for step in 0..horizon {
            for (component, table) in tables.iter().enumerate() {
                b.push(BasisTerm::Residual { step, component }, table.clone());
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    /// Central moment `μ_p` of term `j`.
    pub fn moment(&self, j: usize, p: usize) -> Option<f64> {
        self.moments[j].get(p).copied()
    }

    /// Highest moment order available for every stochastic term.
    pub fn max_order(&self) -> usize {
        self.moments
            .iter()
            .skip(1)
            .map(|t| t.len().saturating_sub(1))
            .min()
            .unwrap_or(usize::MAX)
    }
}

/// Central moments `E[(x − E x)^p]`, `p = 0..=max_order`, of a sample set.
pub fn central_moments(samples: impl Iterator<Item = f64> + Clone, max_order: usize) -> Vec<f64> {
    let (sum, n) = samples
        .clone()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        return vec![0.0; max_order + 1];
    }
    let mean = sum / n as f64;
    let mut acc = vec![0.0; max_order + 1];
    for x in samples {
        let d = x - mean;
        let mut p = 1.0;
        for a in acc.iter_mut() {
            *a += p;
            p *= d;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

/// Standard-normal moments `E[ξ^p] = (p−1)!!` for even `p`, zero for odd `p`.
pub fn gaussian_moments(max_order: usize) -> Vec<f64> {
    (0..=max_order)
        .map(|p| {
            if p % 2 == 1 {
                0.0
            } else {
                (1..p).step_by(2).map(|k| k as f64).product()
            }
        })
        .collect()
}

/// Affine PCE of a random vector: column 0 is the mean, the rest the factor.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePce {
    pub coeffs: DMatrix<f64>,
}

impl AffinePce {
    pub fn mean(&self) -> DVector<f64> {
        self.coeffs.column(0).into_owned()
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Realization for the germ `ξ`: `mean + factor · ξ`.
    pub fn evaluate(&self, xi: &DVector<f64>) -> DVector<f64> {
        let n = self.coeffs.ncols() - 1;
        self.mean() + self.coeffs.columns(1, n) * xi
    }
}

/// `V = E[V] + F ξ` with `F Fᵀ = Σ`; the layout is `[mean | F]`.
pub fn affine_pce(mean: &DVector<f64>, factor: &DMatrix<f64>) -> Result<AffinePce> {
    if factor.nrows() != mean.len() {
        return Err(Error::Dimension(format!(
            "factor has {} rows, mean has {} entries",
            factor.nrows(),
            mean.len()
        )));
    }
    if factor.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite PCE input".into()));
    }
    let mut coeffs = DMatrix::zeros(mean.len(), 1 + factor.ncols());
    coeffs.set_column(0, mean);
    coeffs.columns_mut(1, factor.ncols()).copy_from(factor);
    Ok(AffinePce { coeffs })
}

fn check_row(row: &[f64], basis: &PceBasis) -> Result<()> {
    if row.len() != basis.len() {
        return Err(Error::Dimension(format!(
            "coefficient row has {} entries, basis has {} terms",
            row.len(),
            basis.len()
        )));
    }
    Ok(())
}

fn required_moment(basis: &PceBasis, j: usize, p: usize) -> Result<f64> {
    basis
        .moment(j, p)
        .ok_or_else(|| Error::Domain(format!("basis term {j} lacks moment of order {p}")))
}

/// Variance `Σ_{j≥1} c_j² μ₂(φʲ)`.
pub fn moment2(row: &[f64], basis: &PceBasis) -> Result<f64> {
    check_row(row, basis)?;
    let mut acc = 0.0;
    for (j, c) in row.iter().enumerate().skip(1) {
        if *c != 0.0 {
            acc += c * c * required_moment(basis, j, 2)?;
        }
    }
    Ok(acc)
}

/// Fourth central moment under independent, zero-mean terms:
/// `Σ_j c_j⁴ μ₄(φʲ) + Σ_{i<j} 6 c_i² c_j² μ₂(φⁱ) μ₂(φʲ)`.
pub fn moment4(row: &[f64], basis: &PceBasis) -> Result<f64> {
    check_row(row, basis)?;
    let mut quartic = 0.0;
    let mut pair_sum = 0.0;
    // running Σ_{i<j} c_i² μ₂(φⁱ)
    let mut prefix = 0.0;
    for (j, c) in row.iter().enumerate().skip(1) {
        if *c == 0.0 {
            continue;
        }
        let c2 = c * c;
        let a = c2 * required_moment(basis, j, 2)?;
        quartic += c2 * c2 * required_moment(basis, j, 4)?;
        pair_sum += prefix * a;
        prefix += a;
    }
    Ok(quartic + 6.0 * pair_sum)
}

/// `2n`-th central moment: the multinomial sum over exponent multisets,
/// factorized under independence and dropping every multiset with a unit
/// exponent.
///
/// The sum is accumulated one term at a time: after absorbing term `j`, entry
/// `r` holds the `r`-th moment of the partial sum, updated by the binomial
/// convolution `m'_r = Σ_a C(r, a) m_{r−a} c_j^a μ_a(φʲ)`.
pub fn moment2n(row: &[f64], basis: &PceBasis, n: usize) -> Result<f64> {
    let order = 2 * n;
    if n == 0 || order > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            max: MAX_MOMENT_ORDER,
        });
    }
    check_row(row, basis)?;
    let binom = binomial_table(order);
    let mut m = vec![0.0; order + 1];
    m[0] = 1.0;
    let mut powers = vec![0.0; order + 1];
    for (j, c) in row.iter().enumerate().skip(1) {
        if *c == 0.0 {
            continue;
        }
        powers[0] = 1.0;
        for a in 1..=order {
            powers[a] = powers[a - 1] * c;
        }
        let mut weighted = vec![0.0; order + 1];
        for (a, w) in weighted.iter_mut().enumerate() {
            *w = if a == 1 {
                0.0
            } else {
                powers[a] * required_moment(basis, j, a)?
            };
        }
        let prev = m.clone();
        for r in 0..=order {
            m[r] = (0..=r)
                .map(|a| binom[r][a] * prev[r - a] * weighted[a])
                .sum();
        }
    }
    Ok(m[order])
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n + 1]; n + 1];
    for r in 0..=n {
        t[r][0] = 1.0;
        for a in 1..=r {
            t[r][a] = t[r - 1][a - 1] + if a < r { t[r - 1][a] } else { 0.0 };
        }
    }
    t
}

/// PCE of a predicted trajectory: `N·n_y` rows, one column per basis term.
#[derive(Debug, Clone)]
pub struct PcePrediction {
    pub coeffs: DMatrix<f64>,
    pub basis: Arc<PceBasis>,
    pub n_y: usize,
}

impl PcePrediction {
    /// Predicted mean trajectory (column 0), stacked step by step.
    pub fn mean(&self) -> DVector<f64> {
        self.coeffs.column(0).into_owned()
    }

    pub fn horizon(&self) -> usize {
        self.coeffs.nrows().checked_div(self.n_y).unwrap_or(0)
    }

    fn row_vec(&self, r: usize) -> Vec<f64> {
        self.coeffs.row(r).iter().copied().collect()
    }

    /// Per-row variances.
    pub fn variances(&self) -> Result<DVector<f64>> {
        self.per_row(|row| moment2(row, &self.basis))
    }

    /// Per-row fourth central moments.
    pub fn fourth_moments(&self) -> Result<DVector<f64>> {
        self.per_row(|row| moment4(row, &self.basis))
    }

    /// Per-row `2n`-th central moments.
    pub fn moments_2n(&self, n: usize) -> Result<DVector<f64>> {
        self.per_row(|row| moment2n(row, &self.basis, n))
    }

    fn per_row(&self, f: impl Fn(&[f64]) -> Result<f64>) -> Result<DVector<f64>> {
        let vals = (0..self.coeffs.nrows())
            .map(|r| f(&self.row_vec(r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    /// Realization of the trajectory for germ values `xi` (one per stochastic term).
    pub fn evaluate(&self, xi: &DVector<f64>) -> DVector<f64> {
        let n = self.coeffs.ncols() - 1;
        self.mean() + self.coeffs.columns(1, n) * xi
    }

    /// Whether rows of step `k` only load on terms of step `≤ k` (up to `tol`).
    pub fn is_causal(&self, tol: f64) -> bool {
        for r in 0..self.coeffs.nrows() {
            let k = r / self.n_y;
            for (j, term) in self.basis.terms().iter().enumerate() {
                if term.step() > k && self.coeffs[(r, j)].abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Literal multinomial sum over all exponent vectors `k` with `Σk = 2n`.
    fn brute_force_moment(row: &[f64], basis: &PceBasis, order: usize) -> f64 {
        fn rec(
            j: usize,
            left: usize,
            row: &[f64],
            basis: &PceBasis,
            ks: &mut Vec<usize>,
            acc: &mut f64,
            order: usize,
        ) {
            if j == row.len() {
                if left == 0 {
                    let mut coef = factorial(order);
                    let mut term = 1.0;
                    for (i, &k) in ks.iter().enumerate() {
                        coef /= factorial(k);
                        term *= row[i + 1].powi(k as i32) * basis.moment(i + 1, k).unwrap();
                    }
                    *acc += coef * term;
                }
                return;
            }
            for k in 0..=left {
                ks.push(k);
                rec(j + 1, left - k, row, basis, ks, acc, order);
                ks.pop();
            }
        }
        fn factorial(k: usize) -> f64 {
            (1..=k).map(|x| x as f64).product()
        }
        let mut acc = 0.0;
        rec(1, order, row, basis, &mut Vec::new(), &mut acc, order);
        acc
    }

    #[test]
    fn affine_examples() {
        let p = affine_pce(&dvector![2.0], &DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!(p.coeffs.as_slice(), &[2.0, 3.0]);
        let p = affine_pce(&dvector![1.0, -1.0], &DMatrix::zeros(2, 0)).unwrap();
        assert_eq!(p.n_terms(), 1);
        let p = affine_pce(&dvector![0.0, 0.0], &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(p.n_terms(), 3);
        assert_eq!(p.evaluate(&dvector![0.5, -2.0]), dvector![0.5, -2.0]);
    }

    #[test]
    fn variance_examples() {
        let g1 = PceBasis::gaussian(1, 4);
        assert_eq!(moment2(&[5.0, 3.0], &g1).unwrap(), 9.0);
        let g2 = PceBasis::gaussian(2, 4);
        assert_eq!(moment2(&[0.0, 1.0, 1.0], &g2).unwrap(), 2.0);
        assert_eq!(moment2(&[7.0, 0.0, 0.0], &g2).unwrap(), 0.0);
        assert!(moment2(&[1.0], &g2).is_err());
    }

    #[test]
    fn fourth_moment_examples() {
        assert_eq!(
            moment4(&[0.0, 1.0], &PceBasis::gaussian(1, 4)).unwrap(),
            3.0
        );
        let m = moment4(&[0.0, 1.0, 1.0], &PceBasis::gaussian(2, 4)).unwrap();
        assert!((m - 12.0).abs() < 1e-12);
    }

    #[test]
    fn higher_moment_examples() {
        let g = PceBasis::gaussian(1, 8);
        assert!((moment2n(&[0.0, 2.0], &g, 1).unwrap() - 4.0).abs() < 1e-12);
        assert!((moment2n(&[0.0, 1.0], &g, 3).unwrap() - 15.0).abs() < 1e-9);
        assert!((moment2n(&[0.0, 1.0], &g, 4).unwrap() - 105.0).abs() < 1e-9);
        assert!(matches!(
            moment2n(&[0.0, 1.0], &g, 5),
            Err(Error::UnsupportedOrder { order: 10, .. })
        ));
        assert!(moment2n(&[0.0, 1.0], &PceBasis::gaussian(1, 4), 3).is_err());
    }

    #[test]
    fn fourth_moment_matches_monte_carlo_on_uniform_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n_terms = 3;
        let samples: Vec<Vec<f64>> = (0..n_terms)
            .map(|_| (0..5000).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        // whiten each component
        let tables: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let c = central_moments(s.iter().copied(), 2);
                let sd = c[2].sqrt();
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                central_moments(s.iter().map(|x| (x - mean) / sd), 8)
            })
            .collect();
        let basis = PceBasis::from_tables(tables);
        let row = [0.3, 1.0, -0.7, 0.4];
        let exact = moment4(&row, &basis).unwrap();
        // Monte-Carlo over independent draws from each empirical germ
        let whitened: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                let sd =
                    (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
                s.iter().map(|x| (x - mean) / sd).collect()
            })
            .collect();
        let draws = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let m: f64 = (0..n_terms)
                .map(|j| row[j + 1] * whitened[j][rng.random_range(0..5000)])
                .sum();
            acc += m.powi(4);
        }
        let mc = acc / draws as f64;
        assert!((exact - mc).abs() <= 0.02 * mc, "exact {exact} vs MC {mc}");
    }

    #[test]
    fn gaussian_kurtosis_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let row = [0.0, 0.5, 1.5, -1.0];
        let basis = PceBasis::gaussian(3, 4);
        let k = moment4(&row, &basis).unwrap() / moment2(&row, &basis).unwrap().powi(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                (1..4)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        row[j] * z
                    })
                    .sum()
            })
            .collect();
        let c = central_moments(xs.iter().copied(), 4);
        let k_mc = c[4] / (c[2] * c[2]);
        assert!((k - k_mc).abs() <= 0.1 * k);
    }

    #[test]
    fn joint_basis_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let len = 300;
        let ut = DMatrix::from_fn(len, 1, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(len, 2, |_, _| rng.random_range(-1.0..1.0));
        let rm = ResidualModel::estimate(&ut, &y, 1).unwrap();
        let horizon = 4;
        let b = PceBasis::joint(&PceBasis::constant(), &rm, horizon, 4);
        assert_eq!(b.len(), 1 + horizon * 2);
        assert_eq!(
            b.terms()[3],
            BasisTerm::Residual {
                step: 1,
                component: 0
            }
        );
        for j in 1..b.len() {
            assert!(b.moment(j, 1).unwrap().abs() < 1e-8);
            assert!((b.moment(j, 2).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn moment2n_equals_enumeration(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 1..5),
            n in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tables: Vec<Vec<f64>> = coeffs
                .iter()
                .map(|_| {
                    let s: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0f64).powi(3)).collect();
                    central_moments(s.into_iter(), 8)
                })
                .collect();
            let basis = PceBasis::from_tables(tables);
            let mut row = vec![1.0];
            row.extend(&coeffs);
            let fast = moment2n(&row, &basis, n).unwrap();
            let slow = brute_force_moment(&row, &basis, 2 * n);
            prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0));
            if n == 1 {
                prop_assert!((fast - moment2(&row, &basis).unwrap()).abs() <= 1e-12 * fast.max(1.0));
            }
            if n == 2 {
                let m4 = moment4(&row, &basis).unwrap();
                prop_assert!((fast - m4).abs() <= 1e-12 * m4.max(1.0));
                let m2 = moment2(&row, &basis).unwrap();
                prop_assert!(m4 >= m2 * m2 * (1.0 - 1e-12));
            }
        }
    }
}
