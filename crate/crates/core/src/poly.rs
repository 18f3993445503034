//! Dense univariate polynomials, real roots, and coefficient recovery on a
//! fixed bivariate monomial basis.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coefficients below this fraction of the largest one are treated as zero
/// when determining the effective degree.
pub const TRIM_REL: f64 = 1e-11;

/// Real polynomial with ascending coefficients and trimmed effective degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial, dropping leading coefficients that are
    /// negligible relative to the largest one.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.abs() <= TRIM_REL * max) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if max == 0.0 {
            coeffs.truncate(1);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut p = Polynomial::constant(1.0);
        for r in roots {
            p = p.mul(&Polynomial::new(vec![-r, 1.0]));
        }
        p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new(
            (0..n)
                .map(|k| self.coeffs.get(k).copied().unwrap_or(0.0) + other.coeffs.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// Number of leading zero coefficients at the low end, i.e. the
    /// multiplicity of `z = 0` as a root, using the same relative threshold.
    pub fn zero_root_multiplicity(&self) -> usize {
        let max = self.max_abs();
        if max == 0.0 {
            return 0;
        }
        self.coeffs.iter().take_while(|c| c.abs() <= TRIM_REL * max).count()
    }

    /// Divides out `z^k` for the low-order zero coefficients.
    pub fn deflate_zero_roots(&self) -> (Polynomial, usize) {
        let k = self.zero_root_multiplicity();
        (Polynomial::new(self.coeffs[k..].to_vec()), k)
    }

    /// Degree after removing roots at `z = 0`.
    pub fn deflated_degree(&self) -> usize {
        self.deflate_zero_roots().0.degree()
    }
}

fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn newton_polish(p: &Polynomial, dp: &Polynomial, z0: f64) -> f64 {
    let mut z = z0;
    let mut best = (p.eval(z).abs(), z);
    for _ in 0..20 {
        let d = dp.eval(z);
        if d == 0.0 {
            break;
        }
        let zn = z - p.eval(z) / d;
        if !zn.is_finite() {
            break;
        }
        let v = p.eval(zn).abs();
        if v < best.0 {
            best = (v, zn);
        }
        if (zn - z).abs() <= 1e-16 * (1.0 + z.abs()) {
            break;
        }
        z = zn;
    }
    best.1
}

/// Residual bound a root must meet to be reported.
fn certified(p: &Polynomial, z: f64) -> bool {
    let bound = 1e-7 * p.max_abs() * z.abs().max(1.0).powi(p.degree() as i32);
    p.eval(z).abs() < bound
}

/// Real roots, ascending, with multiple roots collapsed. Eigenvalues of the
/// balanced companion matrix whose imaginary part is below
/// `tol·(1 + |λ|)` are polished by Newton's method and kept if they pass the
/// residual certificate.
pub fn real_roots(p: &Polynomial, tol: f64) -> Result<Vec<f64>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let (q, zeros) = p.deflate_zero_roots();
    let mut roots = Vec::new();
    if zeros > 0 {
        roots.push(0.0);
    }
    let n = q.degree();
    if n >= 1 {
        let lead = q.coeffs[n];
        let mut comp = DMatrix::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -q.coeffs[i] / lead;
        }
        balance(&mut comp);
        let eig = comp.complex_eigenvalues();
        let dq = q.derivative();
        for e in eig.iter() {
            if !(e.re.is_finite() && e.im.is_finite()) {
                continue;
            }
            if e.im.abs() > tol * (1.0 + e.re.abs()) {
                continue;
            }
            let z = newton_polish(&q, &dq, e.re);
            if certified(&q, z) {
                roots.push(z);
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(roots.len());
    for z in roots {
        match out.last() {
            Some(last) if (z - last).abs() <= 1e-9 * (1.0 + z.abs()) => {}
            _ => out.push(z),
        }
    }
    Ok(out)
}

/// Set of monomials `yⁱ zʲ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis2 {
    terms: Vec<(u32, u32)>,
}

impl MonomialBasis2 {
    pub fn new(terms: Vec<(u32, u32)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &terms {
            if !seen.insert(*t) {
                return Err(Error::InvalidInput(format!("duplicate monomial y^{} z^{}", t.0, t.1)));
            }
        }
        if terms.is_empty() {
            return Err(Error::InvalidInput("empty monomial basis".into()));
        }
        Ok(MonomialBasis2 { terms })
    }

    /// All monomials of total degree at most `deg`.
    pub fn total_degree(deg: u32) -> Self {
        let mut terms = Vec::new();
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                terms.push((i, j));
            }
        }
        MonomialBasis2 { terms }
    }

    pub fn terms(&self) -> &[(u32, u32)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, i: u32, j: u32) -> Option<usize> {
        self.terms.iter().position(|t| *t == (i, j))
    }

    pub fn max_y(&self) -> u32 {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }

    pub fn max_z(&self) -> u32 {
        self.terms.iter().map(|t| t.1).max().unwrap_or(0)
    }

    pub fn row(&self, y: f64, z: f64) -> Vec<f64> {
        self.terms.iter().map(|(i, j)| y.powi(*i as i32) * z.powi(*j as i32)).collect()
    }

    /// Tensor grid of Chebyshev points in `[-1, 1]²` that is unisolvent for
    /// this basis. `shift` in `[0, 1)` offsets the angles to produce a
    /// disjoint grid for held-out checks.
    pub fn chebyshev_nodes(&self, shift: f64) -> Vec<(f64, f64)> {
        let ny = self.max_y() as usize + 1;
        let nz = self.max_z() as usize + 1;
        let cheb = |k: usize, n: usize| (std::f64::consts::PI * (k as f64 + 0.5 + shift * 0.5) / n as f64).cos();
        let mut out = Vec::with_capacity(ny * nz);
        for a in 0..ny {
            for b in 0..nz {
                out.push((cheb(a, ny), cheb(b, nz)));
            }
        }
        out
    }
}

/// Polynomial in `(y, z)` stored on an explicit basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariatePoly {
    pub basis: MonomialBasis2,
    pub coeffs: Vec<f64>,
}

impl BivariatePoly {
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        self.basis.row(y, z).iter().zip(&self.coeffs).map(|(m, c)| m * c).sum()
    }

    /// Partial derivatives `(∂/∂y, ∂/∂z)`.
    pub fn gradient(&self, y: f64, z: f64) -> (f64, f64) {
        let mut gy = 0.0;
        let mut gz = 0.0;
        for ((i, j), c) in self.basis.terms().iter().zip(&self.coeffs) {
            if *i > 0 {
                gy += c * *i as f64 * y.powi(*i as i32 - 1) * z.powi(*j as i32);
            }
            if *j > 0 {
                gz += c * *j as f64 * y.powi(*i as i32) * z.powi(*j as i32 - 1);
            }
        }
        (gy, gz)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.basis.index_of(i, j).map_or(0.0, |k| self.coeffs[k])
    }

    /// Coefficient of `yᵏ` as a polynomial in `z`.
    pub fn y_coefficient(&self, k: u32) -> Polynomial {
        let maxz = self.basis.max_z() as usize;
        let mut c = vec![0.0; maxz + 1];
        for ((i, j), v) in self.basis.terms().iter().zip(&self.coeffs) {
            if *i == k {
                c[*j as usize] += v;
            }
        }
        Polynomial { coeffs: c }
    }

    /// `(a, b, c)` with `p = a y² + b y + c`; fails if `p` has higher powers of y.
    pub fn as_quadratic_in_y(&self) -> Result<QuadraticInY> {
        if self.basis.max_y() > 2 {
            let hi = self.basis.terms().iter().zip(&self.coeffs).any(|((i, _), c)| *i > 2 && *c != 0.0);
            if hi {
                return Err(Error::InvalidInput("polynomial is not quadratic in y".into()));
            }
        }
        Ok(QuadraticInY { a: self.y_coefficient(2), b: self.y_coefficient(1), c: self.y_coefficient(0) })
    }
}

/// `a(z) y² + b(z) y + c(z)`, coefficients kept untrimmed so that
/// cancellations are visible to the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticInY {
    pub a: Polynomial,
    pub b: Polynomial,
    pub c: Polynomial,
}

impl QuadraticInY {
    pub fn max_abs(&self) -> f64 {
        self.a.max_abs().max(self.b.max_abs()).max(self.c.max_abs())
    }

    pub fn eval(&self, y: f64, z: f64) -> f64 {
        (self.a.eval(z) * y + self.b.eval(z)) * y + self.c.eval(z)
    }
}

/// Least-squares coefficients of `evaluator` on `basis` from `nodes`, with the
/// fit certified on an equally sized held-out grid.
pub fn interpolate_coeffs<F>(evaluator: F, basis: &MonomialBasis2, nodes: &[(f64, f64)]) -> Result<BivariatePoly>
where
    F: Fn(f64, f64) -> f64,
{
    let m = basis.len();
    if nodes.len() < m {
        return Err(Error::RankDeficient(format!("{} nodes for {} monomials", nodes.len(), m)));
    }
    let v = DMatrix::from_fn(nodes.len(), m, |r, k| {
        let (y, z) = nodes[r];
        let (i, j) = basis.terms()[k];
        y.powi(i as i32) * z.powi(j as i32)
    });
    let f = DVector::from_iterator(nodes.len(), nodes.iter().map(|(y, z)| evaluator(*y, *z)));
    let svd = v.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 0.0) || smax / smin > 1e8 {
        return Err(Error::RankDeficient(format!("node matrix condition {:e}", smax / smin)));
    }
    let a = svd.solve(&f, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let poly = BivariatePoly { basis: basis.clone(), coeffs: a.iter().copied().collect() };

    let fit_res = (&v * &a - &f).amax();
    let held = basis.chebyshev_nodes(0.61);
    let held_vals: Vec<f64> = held.iter().map(|(y, z)| evaluator(*y, *z)).collect();
    let fmax = f.amax().max(held_vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
    let held_res = held
        .iter()
        .zip(&held_vals)
        .fold(0.0f64, |acc, ((y, z), fv)| acc.max((poly.eval(*y, *z) - fv).abs()));
    let residual = fit_res.max(held_res);
    let tolerance = 1e-9 * fmax;
    if residual > tolerance && fmax > 0.0 {
        return Err(Error::ResidualTooLarge { residual, tolerance });
    }
    Ok(poly)
}

/// Eliminates `y` between `q4 = d y² + e y + f` and `q3 = a y² + b y + c` by
/// solving `q3` for `y` and squaring out the radical:
/// with `u = −b`, `D = b² − 4ac`, `K = d(u² + D) + 2a e u + 4a² f` and
/// `L = 2(d u + a e)`, the result is `K² − L² D`, which equals `16 a²`
/// times the resultant. Requires a non-negligible `a`.
pub fn poly_compose_resultant(q4: &QuadraticInY, q3: &QuadraticInY) -> Result<Polynomial> {
    let a_rel = q3.a.max_abs() / q3.max_abs().max(f64::MIN_POSITIVE);
    if a_rel <= TRIM_REL {
        return Err(Error::DegenerateQuadratic(a_rel));
    }
    let (a, b, c) = (&q3.a, &q3.b, &q3.c);
    let (d, e, f) = (&q4.a, &q4.b, &q4.c);
    let u = b.scale(-1.0);
    let disc = b.mul(b).sub(&a.mul(c).scale(4.0));
    let k = d
        .mul(&u.mul(&u).add(&disc))
        .add(&a.mul(e).mul(&u).scale(2.0))
        .add(&a.mul(a).mul(f).scale(4.0));
    let l = d.mul(&u).add(&a.mul(e)).scale(2.0);
    Ok(k.mul(&k).sub(&l.mul(&l).mul(&disc)))
}

/// Resultant in `y` of two quadratics via the Sylvester determinant,
/// `(af − cd)² − (ae − bd)(bf − ce)`.
pub fn sylvester_resultant(q4: &QuadraticInY, q3: &QuadraticInY) -> Polynomial {
    let (a, b, c) = (&q3.a, &q3.b, &q3.c);
    let (d, e, f) = (&q4.a, &q4.b, &q4.c);
    let t1 = a.mul(f).sub(&c.mul(d));
    let t2 = a.mul(e).sub(&b.mul(d));
    let t3 = b.mul(f).sub(&c.mul(e));
    t1.mul(&t1).sub(&t2.mul(&t3))
}

/// Elimination when `q3` is linear in `y` (`a ≡ 0`): substituting
/// `y = −c/b` into `q4` and clearing `b²` gives `b² f − b c e + c² d`.
pub fn linear_elimination(q4: &QuadraticInY, q3: &QuadraticInY) -> Polynomial {
    let (b, c) = (&q3.b, &q3.c);
    let (d, e, f) = (&q4.a, &q4.b, &q4.c);
    b.mul(b).mul(f).sub(&b.mul(c).mul(e)).add(&c.mul(c).mul(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_relative_to_max() {
        let p = Polynomial::new(vec![1.0, 2.0, 1e-12]);
        assert_eq!(p.degree(), 1);
        let p = Polynomial::new(vec![1.0, 2.0, 1e-10]);
        assert_eq!(p.degree(), 2);
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn roots_of_small_examples() {
        let r = real_roots(&Polynomial::new(vec![2.0, -3.0, 1.0]), 1e-8).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
        assert!(real_roots(&Polynomial::new(vec![1.0, 0.0, 1.0]), 1e-8).unwrap().is_empty());
        assert_eq!(real_roots(&Polynomial::zero(), 1e-8), Err(Error::ZeroPolynomial));
    }

    #[test]
    fn degree_ten_constructed_roots() {
        let want: Vec<f64> = (-5..=4).map(|k| k as f64 / 10.0).collect();
        let p = Polynomial::from_roots(&want);
        assert_eq!(p.degree(), 10);
        let got = real_roots(&p, 1e-6).unwrap();
        assert_eq!(got.len(), 10);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn double_root_collapses() {
        let p = Polynomial::from_roots(&[0.5, 0.5, -2.0]);
        let r = real_roots(&p, 1e-6).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn zero_roots_are_deflated() {
        let p = Polynomial::new(vec![0.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(p.zero_root_multiplicity(), 2);
        assert_eq!(p.deflated_degree(), 2);
        let r = real_roots(&p, 1e-8).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[0] + 1.0).abs() < 1e-14 && r[1] == 0.0 && (r[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_recovers_direct_coefficients() {
        let basis = MonomialBasis2::new(vec![(2, 0), (0, 1), (0, 0)]).unwrap();
        let nodes = basis.chebyshev_nodes(0.0);
        let p = interpolate_coeffs(|y, z| 2.0 * y * y + 3.0 * z + 1.0, &basis, &nodes).unwrap();
        for (got, want) in p.coeffs.iter().zip([2.0, 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_rejects_term_outside_basis() {
        let basis = MonomialBasis2::new(vec![(2, 0), (0, 1), (0, 0)]).unwrap();
        let nodes = basis.chebyshev_nodes(0.0);
        let err = interpolate_coeffs(|y, z| 2.0 * y * y + 3.0 * z + 1.0 + y * z, &basis, &nodes).unwrap_err();
        assert!(matches!(err, Error::ResidualTooLarge { .. }));
    }

    #[test]
    fn interpolation_rejects_too_few_nodes() {
        let basis = MonomialBasis2::total_degree(2);
        let err = interpolate_coeffs(|y, _| y, &basis, &[(0.0, 0.0), (1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
    }

    #[test]
    fn duplicate_monomials_rejected() {
        assert!(MonomialBasis2::new(vec![(1, 0), (1, 0)]).is_err());
    }

    fn quad(a: &[f64], b: &[f64], c: &[f64]) -> QuadraticInY {
        QuadraticInY { a: Polynomial::new(a.to_vec()), b: Polynomial::new(b.to_vec()), c: Polynomial::new(c.to_vec()) }
    }

    #[test]
    fn resultant_vanishes_at_constructed_common_root() {
        // q3 and q4 share (y*, z*) = (0.7, -0.4).
        let (ys, zs) = (0.7, -0.4);
        let mut q3 = quad(&[1.3], &[0.2, -0.5, 0.9], &[0.0, 0.3, 0.1, -0.2]);
        let off3 = q3.eval(ys, zs);
        q3.c = q3.c.sub(&Polynomial::constant(off3));
        let mut q4 = quad(&[0.4, 0.1, 0.6], &[0.3, -0.2, 0.2], &[0.5, -0.1, 0.2, 0.3, -0.4]);
        let off4 = q4.eval(ys, zs);
        q4.c = q4.c.sub(&Polynomial::constant(off4));

        let k16 = poly_compose_resultant(&q4, &q3).unwrap();
        assert_eq!(k16.degree(), 10);
        assert!(k16.eval(zs).abs() < 1e-8 * k16.max_abs());

        let syl = sylvester_resultant(&q4, &q3);
        let a = q3.a.eval(0.0);
        for z in [-1.0, -0.3, 0.2, 0.9] {
            assert!((k16.eval(z) - 16.0 * a * a * syl.eval(z)).abs() < 1e-10 * k16.max_abs());
        }
    }

    #[test]
    fn compose_rejects_vanishing_leading_term() {
        let q3 = quad(&[0.0], &[1.0, 1.0], &[1.0]);
        let q4 = quad(&[1.0], &[1.0], &[1.0]);
        assert!(matches!(poly_compose_resultant(&q4, &q3), Err(Error::DegenerateQuadratic(_))));
    }

    #[test]
    fn linear_elimination_vanishes_at_common_root() {
        let (ys, zs) = (0.25, 0.6);
        let mut q3 = quad(&[0.0], &[0.3, 0.7, -0.2], &[0.1, 0.4, 0.2, -0.6]);
        let off = q3.eval(ys, zs);
        q3.c = q3.c.sub(&Polynomial::constant(off));
        let mut q4 = quad(&[0.4, 0.1, 0.6], &[0.3, -0.2, 0.2], &[0.5, -0.1, 0.2, 0.3, -0.4]);
        let off = q4.eval(ys, zs);
        q4.c = q4.c.sub(&Polynomial::constant(off));
        let p = linear_elimination(&q4, &q3);
        assert!(p.eval(zs).abs() < 1e-12 * p.max_abs());
    }
}
