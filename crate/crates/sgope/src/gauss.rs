//! Finite-dimensional Gaussian toolkit: covariance matrices, Isserlis pairing
//! sums, the complete-the-square identity and reproducible sampling.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// A symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    /// Builds a covariance from a square matrix, symmetrising exactly.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::param("covariance must be a non-empty square matrix"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("covariance entries must be finite"));
        }
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::param(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(CovMatrix { m: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::param("covariance rows must all have the matrix dimension"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// PSD tolerance `τ = 1e-10 · max diagonal`.
    pub fn psd_tolerance(&self) -> f64 {
        1e-10 * self.m.diagonal().iter().fold(0.0f64, |a, &v| a.max(v))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v))
    }

    fn not_psd(&self) -> Error {
        Error::NotPsd {
            min_eig: self.min_eigenvalue(),
            tol: self.psd_tolerance(),
        }
    }

    /// A factor `L` (dim × rank) with `L Lᵀ = Σ` up to the PSD tolerance,
    /// from Cholesky with diagonal pivoting. Pivots below `τ` end the
    /// factorisation, so semidefinite matrices get an exact low-rank factor.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        Self::pivoted_cholesky(self.m.clone(), self.psd_tolerance()).ok_or_else(|| self.not_psd())
    }

    /// [`Self::factor`], retried with diagonal jitter `10⁻¹²…10⁻⁸ · max diagonal`
    /// when rounding has left tiny negative eigenvalues. Returns the factor and
    /// the relative jitter used (0 when none was needed).
    pub fn factor_repaired(&self) -> Result<(DMatrix<f64>, f64)> {
        let tol = self.psd_tolerance();
        if let Some(l) = Self::pivoted_cholesky(self.m.clone(), tol) {
            return Ok((l, 0.0));
        }
        let scale = self.m.diagonal().iter().fold(0.0f64, |a, &v| a.max(v));
        let mut jitter = 1e-12;
        while jitter <= 1e-8 * 1.000_001 {
            let mut m = self.m.clone();
            for i in 0..self.dim() {
                m[(i, i)] += jitter * scale;
            }
            if let Some(l) = Self::pivoted_cholesky(m, tol) {
                return Ok((l, jitter));
            }
            jitter *= 10.0;
        }
        Err(Error::Factorization(1e-8))
    }

    fn pivoted_cholesky(mut a: DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
        let n = a.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rank = n;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)])).expect("non-empty");
            if a[(p, p)] <= tol {
                for j in k..n {
                    for i in j..n {
                        if a[(i, j)].abs() > tol {
                            return None;
                        }
                    }
                }
                rank = k;
                break;
            }
            if p != k {
                a.swap_rows(p, k);
                a.swap_columns(p, k);
                perm.swap(p, k);
            }
            let root = a[(k, k)].sqrt();
            a[(k, k)] = root;
            for i in k + 1..n {
                a[(i, k)] /= root;
            }
            for j in k + 1..n {
                let lj = a[(j, k)];
                if lj == 0.0 {
                    continue;
                }
                // both triangles: later pivot swaps move entries across the diagonal
                for i in k + 1..n {
                    a[(i, j)] -= a[(i, k)] * lj;
                }
            }
        }
        let mut l = DMatrix::zeros(n, rank);
        for (row, &orig) in perm.iter().enumerate() {
            for c in 0..rank.min(row + 1) {
                l[(orig, c)] = a[(row, c)];
            }
        }
        Some(l)
    }
}

/// `Σ_Π ∏_{{a,b} ∈ Π} Σ_ab` over all perfect pairings of `indices`
/// (0-based); zero for odd length.
pub fn wick_pairing_sum(sigma: &CovMatrix, indices: &[usize]) -> Result<f64> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= sigma.dim()) {
        return Err(Error::param(format!("index {bad} out of range for dimension {}", sigma.dim())));
    }
    fn rec(s: &CovMatrix, idx: &mut Vec<usize>) -> f64 {
        if idx.is_empty() {
            return 1.0;
        }
        let a = idx.remove(0);
        let mut total = 0.0;
        for k in 0..idx.len() {
            let b = idx.remove(k);
            let w = s.get(a, b);
            if w != 0.0 {
                total += w * rec(s, idx);
            }
            idx.insert(k, b);
        }
        idx.insert(0, a);
        total
    }
    if indices.len() % 2 == 1 {
        return Ok(0.0);
    }
    Ok(rec(sigma, &mut indices.to_vec()))
}

/// A polynomial in `dim` variables with complex coefficients, stored as a map
/// from exponent vectors to coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, Complex64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Complex64) {
        assert_eq!(exps.len(), self.dim, "exponent vector length");
        *self.terms.entry(exps).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    /// `c · x_{i₁} x_{i₂} …` (0-based variable indices).
    pub fn monomial(dim: usize, vars: &[usize], c: Complex64) -> Self {
        let mut e = vec![0; dim];
        for &v in vars {
            e[v] += 1;
        }
        let mut p = Self::zero(dim);
        p.add_term(e, c);
        p
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Parses terms such as `2*x1*x2 - 0.5i*x3^2 + 1` (1-based variables; an
    /// `i` suffix marks an imaginary coefficient).
    pub fn parse(dim: usize, text: &str) -> Result<Self> {
        let mut p = Self::zero(dim);
        let cleaned = text.replace(' ', "").replace('-', "+-");
        for term in cleaned.split('+').filter(|t| !t.is_empty()) {
            let (mut coef, mut exps) = (Complex64::new(1.0, 0.0), vec![0u32; dim]);
            let mut body = term;
            if let Some(rest) = body.strip_prefix('-') {
                coef = -coef;
                body = rest;
            }
            for factor in body.split('*').filter(|f| !f.is_empty()) {
                if let Some(var) = factor.strip_prefix('x') {
                    let (v, k) = match var.split_once('^') {
                        Some((v, k)) => (v, k),
                        None => (var, "1"),
                    };
                    let v: usize = v.parse().map_err(|_| Error::param(format!("bad variable in '{term}'")))?;
                    let k: u32 = k.parse().map_err(|_| Error::param(format!("bad exponent in '{term}'")))?;
                    if v == 0 || v > dim {
                        return Err(Error::param(format!("variable x{v} out of range 1..={dim}")));
                    }
                    exps[v - 1] += k;
                } else if let Some(num) = factor.strip_suffix('i') {
                    let c: f64 = if num.is_empty() { 1.0 } else { num.parse().map_err(|_| Error::param(format!("bad coefficient '{factor}'")))? };
                    coef *= Complex64::new(0.0, c);
                } else {
                    let c: f64 = factor.parse().map_err(|_| Error::param(format!("bad coefficient '{factor}'")))?;
                    coef *= c;
                }
            }
            p.add_term(exps, coef);
        }
        Ok(p)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E[P(V)]` for centred Gaussian `V` with covariance `sigma`.
pub fn gaussian_expectation(sigma: &CovMatrix, poly: &Polynomial) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for (e, c) in &poly.terms {
        let idx: Vec<usize> = e.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize)).collect();
        total += c * wick_pairing_sum(sigma, &idx)?;
    }
    Ok(total)
}

/// `E[P(V) e^{z V₁}] = e^{z²Σ₁₁/2} E[P(V₁ + zΣ₁₁, …, V_n + zΣ₁ₙ)]`, with the
/// shifted polynomial expanded binomially and its moments by Isserlis.
pub fn girsanov_expectation(sigma: &CovMatrix, poly: &Polynomial, z: Complex64) -> Result<Complex64> {
    if poly.dim != sigma.dim() {
        return Err(Error::param("polynomial and covariance dimensions differ"));
    }
    sigma.factor()?;
    let n = sigma.dim();
    let shift: Vec<Complex64> = (0..n).map(|i| z * sigma.get(0, i)).collect();
    let mut shifted = Polynomial::zero(n);
    for (e, c) in &poly.terms {
        // expand ∏ (V_i + s_i)^{e_i}
        let mut partial: Vec<(Vec<u32>, Complex64)> = vec![(vec![0; n], *c)];
        for i in 0..n {
            let mut next = Vec::new();
            for (ex, co) in &partial {
                for j in 0..=e[i] {
                    let mut ex2 = ex.clone();
                    ex2[i] = j;
                    next.push((ex2, co * binomial(e[i], j) * shift[i].powu(e[i] - j)));
                }
            }
            partial = next;
        }
        for (ex, co) in partial {
            shifted.add_term(ex, co);
        }
    }
    Ok((z * z * sigma.get(0, 0) * 0.5).exp() * gaussian_expectation(sigma, &shifted)?)
}

/// Draws centred Gaussian vectors with a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    /// Fails with [`Error::Factorization`] when even the largest jitter
    /// cannot repair the matrix.
    pub fn new(sigma: &CovMatrix) -> Result<Self> {
        let (factor, _) = sigma.factor_repaired()?;
        Ok(GaussianSampler { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.rank()).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.factor.row(i).iter().zip(&z).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.sample_into(rng, &mut v);
        v
    }
}

/// `count` reproducible samples from `N(0, sigma)`.
pub fn sample_gaussian_vector(sigma: &CovMatrix, seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    let sampler = GaussianSampler::new(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sampler.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cov(rows: &[&[f64]]) -> CovMatrix {
        CovMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // all pairings by explicit enumeration of perfect matchings via permutations
    fn brute_pairings(s: &CovMatrix, idx: &[usize]) -> f64 {
        fn perms(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == v.len() {
                out.push(v.clone());
                return;
            }
            for i in k..v.len() {
                v.swap(k, i);
                perms(v, k + 1, out);
                v.swap(k, i);
            }
        }
        let n = idx.len();
        let mut all = Vec::new();
        perms(&mut (0..n).collect(), 0, &mut all);
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0.0;
        for p in all {
            let mut pairs: Vec<(usize, usize)> = p.chunks(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
            pairs.sort();
            if seen.insert(pairs.clone()) {
                total += pairs.iter().map(|&(a, b)| s.get(idx[a], idx[b])).product::<f64>();
            }
        }
        total
    }

    #[test]
    fn pairing_examples() {
        let s = cov(&[&[2.0, 0.3, 0.1, 0.4], &[0.3, 1.0, 0.2, 0.0], &[0.1, 0.2, 1.5, 0.6], &[0.4, 0.0, 0.6, 1.2]]);
        assert_eq!(wick_pairing_sum(&s, &[0, 1]).unwrap(), 0.3);
        assert_eq!(wick_pairing_sum(&s, &[0, 1, 2]).unwrap(), 0.0);
        let four = wick_pairing_sum(&s, &[0, 1, 2, 3]).unwrap();
        assert!((four - (0.3 * 0.6 + 0.1 * 0.0 + 0.4 * 0.2)).abs() < 1e-15);
        assert!(wick_pairing_sum(&s, &[0, 7]).is_err());
    }

    #[test]
    fn pairings_match_brute_force() {
        let s = cov(&[&[2.0, 0.3, 0.1, 0.4], &[0.3, 1.0, 0.2, -0.5], &[0.1, 0.2, 1.5, 0.6], &[0.4, -0.5, 0.6, 1.2]]);
        for idx in [vec![0, 0], vec![0, 1, 2, 3], vec![0, 0, 1, 1, 2, 3], vec![0, 1, 1, 2, 2, 3, 3, 3], vec![3, 3, 3, 3, 0, 0, 2, 1]] {
            let a = wick_pairing_sum(&s, &idx).unwrap();
            let b = brute_pairings(&s, &idx);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "{idx:?}");
        }
        // (2m-1)!! pairings of identical unit-variance indices
        let one = cov(&[&[1.0]]);
        assert_eq!(wick_pairing_sum(&one, &[0; 8]).unwrap(), 105.0);
    }

    #[test]
    fn girsanov_constant_is_mgf() {
        let s = cov(&[&[0.7, 0.2], &[0.2, 1.1]]);
        for z in [c(1.0, 0.0), c(0.0, 1.0), c(0.3, -0.8)] {
            let v = girsanov_expectation(&s, &Polynomial::constant(2, c(1.0, 0.0)), z).unwrap();
            assert!((v - (z * z * 0.35).exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn girsanov_product_with_imaginary_z() {
        let (s11, s12, s22) = (0.8, 0.3, 1.4);
        let s = cov(&[&[s11, s12], &[s12, s22]]);
        let p = Polynomial::monomial(2, &[0, 1], c(1.0, 0.0));
        let v = girsanov_expectation(&s, &p, c(0.0, 1.0)).unwrap();
        // e^{-Σ11/2}(Σ12 − Σ11Σ12): the G-term minus the product of shifts
        let want = (-s11 / 2.0f64).exp() * (s12 - s11 * s12);
        assert!((v - c(want, 0.0)).norm() < 1e-14, "{v} {want}");
    }

    #[test]
    fn girsanov_linear_frozen_value() {
        // E[V₂ e^{iV₁}] with Σ11 = 1, Σ12 = 0.3; value 0.3i·e^{-1/2}, checked
        // against 10⁶ Monte Carlo samples in the acceptance suite
        let s = cov(&[&[1.0, 0.3], &[0.3, 1.0]]);
        let v = girsanov_expectation(&s, &Polynomial::monomial(2, &[1], c(1.0, 0.0)), c(0.0, 1.0)).unwrap();
        assert!((v - c(0.0, 0.3 * (-0.5f64).exp())).norm() < 1e-15);
    }

    #[test]
    fn girsanov_rejects_non_psd() {
        let s = cov(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let r = girsanov_expectation(&s, &Polynomial::constant(2, c(1.0, 0.0)), c(1.0, 0.0));
        assert!(matches!(r, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sampling_examples() {
        let one = cov(&[&[1.0]]);
        let xs = sample_gaussian_vector(&one, 11, 1_000_000).unwrap();
        let var = xs.iter().map(|v| v[0] * v[0]).sum::<f64>() / xs.len() as f64;
        assert!((var - 1.0).abs() < 0.01);

        let zero = cov(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert!(sample_gaussian_vector(&zero, 1, 10).unwrap().iter().all(|v| v == &vec![0.0, 0.0]));

        let rank1 = cov(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let ys = sample_gaussian_vector(&rank1, 2, 100).unwrap();
        assert!(ys.iter().all(|v| v[0] == v[1]));
        assert!(ys.iter().any(|v| v[0] != 0.0));

        let s = cov(&[&[1.0, 0.5], &[0.5, 2.0]]);
        assert_eq!(sample_gaussian_vector(&s, 5, 50).unwrap(), sample_gaussian_vector(&s, 5, 50).unwrap());
    }

    #[test]
    fn non_psd_detected_even_with_zero_diagonal() {
        let s = cov(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(s.factor(), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn parse_polynomial() {
        let p = Polynomial::parse(3, "2*x1*x2 - 0.5i*x3^2 + 1").unwrap();
        let v = p.eval(&[1.0, 2.0, 3.0]);
        assert!((v - c(5.0, -4.5)).norm() < 1e-15);
        assert!(Polynomial::parse(2, "x3").is_err());
    }

    proptest! {
        #[test]
        fn girsanov_at_zero_is_plain_expectation(a in 0.5..2.0f64, b in -0.4..0.4f64, d in 0.5..2.0f64, k1 in 0u32..3, k2 in 0u32..3) {
            let s = cov(&[&[a, b], &[b, d]]);
            let mut p = Polynomial::zero(2);
            p.add_term(vec![k1, k2], c(1.0, 0.5));
            p.add_term(vec![1, 1], c(-0.3, 0.0));
            let g = girsanov_expectation(&s, &p, c(0.0, 0.0)).unwrap();
            let e = gaussian_expectation(&s, &p).unwrap();
            prop_assert!((g - e).norm() < 1e-13);
        }

        #[test]
        fn factor_reproduces_covariance(a in 0.1..3.0f64, b in -1.0..1.0f64, d in 0.1..3.0f64, e in -1.0..1.0f64) {
            let m = DMatrix::from_row_slice(3, 3, &[a, b, 0.0, b, d, e, 0.0, e, 2.0]);
            let mm = &m * m.transpose();
            let s = CovMatrix::new(mm.clone()).unwrap();
            let l = s.factor().unwrap();
            let back = &l * l.transpose();
            prop_assert!((back - mm).abs().max() < 1e-9 * s.psd_tolerance().max(1e-10) * 1e10);
        }
    }
}
