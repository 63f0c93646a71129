//! Angular-momentum algebra.
//!
//! Conventions used throughout the crate:
//!
//! * Condon-Shortley phases for Clebsch-Gordan coefficients.
//! * Magnetic sublevels are ordered by *descending* projection, `m = j, j-1, ..., -j`,
//!   so index `k` of a `(2j+1)`-vector holds `m = j - k`.
//! * Reduced matrix elements follow the Edmonds/Wigner-Eckart form
//!   `<jb mb|T_q|ja ma> = <ja ma; 1 q|jb mb> <jb||T||ja> / sqrt(2 jb + 1)`.
//! * Wigner-d matrices rotate about ŷ: `d^j_{m'm}(β) = <j m'|exp(-iβJy)|j m>`.
//!
//! Factorial ratios are evaluated from exact prime factorisations, so all
//! arguments up to 99/2 are handled without overflow.

use std::fmt;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// A non-negative or signed half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt(i32);

/// Alias used where the value is an angular momentum magnitude.
pub type AngularMomentum = HalfInt;

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        let t = 2.0 * x;
        if !t.is_finite() || (t - t.round()).abs() > 1e-9 || t.abs() > 1e6 {
            return Err(Error::Domain(format!("{x} is not a half-integer")));
        }
        Ok(HalfInt(t.round() as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// `2j + 1`
    pub fn multiplicity(self) -> usize {
        (self.0 + 1).max(0) as usize
    }

    /// Projections `j, j-1, ..., -j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> + Clone {
        let j = self.0;
        (0..=(2 * j).max(-1)).step_by(2).map(move |k| HalfInt(j - k)).take(self.multiplicity())
    }

    /// Index of `m` in the descending ordering.
    pub fn index_of(self, m: HalfInt) -> Option<usize> {
        if m.0.abs() > self.0 || (self.0 - m.0) % 2 != 0 {
            None
        } else {
            Some(((self.0 - m.0) / 2) as usize)
        }
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: Self) -> Self {
        HalfInt(self.0 + rhs.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: Self) -> Self {
        HalfInt(self.0 - rhs.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> Self {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Prime-factorised factorials

const PRIMES: [u32; 46] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199,
];
const MAX_FACTORIAL: u32 = 200;

/// Integer (possibly rational) represented by prime exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Factorized([i32; PRIMES.len()]);

impl Factorized {
    fn factorial(n: u32) -> Self {
        assert!(n <= MAX_FACTORIAL, "factorial argument {n} exceeds {MAX_FACTORIAL}");
        let mut e = [0; PRIMES.len()];
        for (slot, &p) in e.iter_mut().zip(PRIMES.iter()) {
            // Legendre's formula
            let mut q = n / p;
            while q > 0 {
                *slot += q as i32;
                q /= p;
            }
        }
        Factorized(e)
    }

    fn mul(mut self, o: &Self) -> Self {
        self.0.iter_mut().zip(o.0.iter()).for_each(|(a, b)| *a += b);
        self
    }

    fn div(mut self, o: &Self) -> Self {
        self.0.iter_mut().zip(o.0.iter()).for_each(|(a, b)| *a -= b);
        self
    }

    fn squared(mut self) -> Self {
        self.0.iter_mut().for_each(|a| *a *= 2);
        self
    }

    /// `sqrt` of the represented rational, evaluated in double precision.
    fn sqrt_f64(&self) -> f64 {
        let mut acc = ScaledFloat::ONE;
        let mut odd = ScaledFloat::ONE;
        for (&e, &p) in self.0.iter().zip(PRIMES.iter()) {
            acc.mul_pow(p as f64, e.div_euclid(2));
            if e.rem_euclid(2) == 1 {
                odd.mul_pow(p as f64, 1);
            }
        }
        let (m, k) = (odd.mant, odd.exp2);
        // sqrt(m 2^k) with k made even
        let (m, k) = if k % 2 == 0 { (m, k) } else { (m * 2.0, k - 1) };
        acc.mant *= m.sqrt();
        acc.exp2 += k / 2;
        acc.value()
    }
}

/// Mantissa/binary-exponent pair that cannot overflow while accumulating.
#[derive(Clone, Copy)]
struct ScaledFloat {
    mant: f64,
    exp2: i32,
}

impl ScaledFloat {
    const ONE: ScaledFloat = ScaledFloat { mant: 1.0, exp2: 0 };

    fn mul_pow(&mut self, p: f64, mut e: i32) {
        while e != 0 {
            let step = e.clamp(-8, 8);
            self.mant *= p.powi(step);
            e -= step;
            let k = self.mant.abs().log2().floor() as i32;
            self.mant *= 2f64.powi(-k);
            self.exp2 += k;
        }
    }

    fn value(self) -> f64 {
        // split to avoid intermediate overflow of 2^exp2
        let half = self.exp2 / 2;
        self.mant * 2f64.powi(half) * 2f64.powi(self.exp2 - half)
    }
}

fn fact(twice_arg: i32) -> Factorized {
    debug_assert!(twice_arg >= 0 && twice_arg % 2 == 0);
    Factorized::factorial((twice_arg / 2) as u32)
}

fn triangle(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
    let (a, b, c) = (a.0, b.0, c.0);
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// Δ(abc)² numerator/denominator as a factorisation.
fn triangle_coefficient(a: HalfInt, b: HalfInt, c: HalfInt) -> Factorized {
    let (a, b, c) = (a.0, b.0, c.0);
    fact(a + b - c)
        .mul(&fact(a - b + c))
        .mul(&fact(-a + b + c))
        .div(&fact(a + b + c + 2))
}

fn check_projection(j: HalfInt, m: HalfInt, what: &str) -> Result<()> {
    if j.0 < 0 {
        return Err(Error::Domain(format!("{what}: negative angular momentum {j}")));
    }
    if m.0.abs() > j.0 || (j.0 - m.0) % 2 != 0 {
        return Err(Error::Domain(format!("{what}: invalid projection m={m} for j={j}")));
    }
    Ok(())
}

fn parity_sign(twice_exponent: i32) -> f64 {
    debug_assert!(twice_exponent % 2 == 0);
    if (twice_exponent / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)` via the Racah formula.
pub fn wigner_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<f64> {
    check_projection(j1, m1, "3j")?;
    check_projection(j2, m2, "3j")?;
    check_projection(j3, m3, "3j")?;
    if !triangle(j1, j2, j3) || m1.0 + m2.0 + m3.0 != 0 {
        return Ok(0.0);
    }
    let (j1, j2, j3, m1, m2, m3) = (j1.0, j2.0, j3.0, m1.0, m2.0, m3.0);
    let prefactor = triangle_coefficient(HalfInt(j1), HalfInt(j2), HalfInt(j3))
        .mul(&fact(j1 + m1))
        .mul(&fact(j1 - m1))
        .mul(&fact(j2 + m2))
        .mul(&fact(j2 - m2))
        .mul(&fact(j3 + m3))
        .mul(&fact(j3 - m3));

    // k runs over values keeping every factorial argument non-negative (doubled units)
    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    let mut k = k_min;
    while k <= k_max {
        let den = fact(k)
            .mul(&fact(j3 - j2 + k + m1))
            .mul(&fact(j3 - j1 + k - m2))
            .mul(&fact(j1 + j2 - j3 - k))
            .mul(&fact(j1 - k - m1))
            .mul(&fact(j2 - k + m2));
        sum += parity_sign(k) * prefactor.div(&den.squared()).sqrt_f64();
        k += 2;
    }
    Ok(parity_sign(j1 - j2 - m3) * sum)
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2|J M>` (Condon-Shortley).
///
/// Returns 0 when the triangle rule fails or `M != m1 + m2`.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    check_projection(j, m, "clebsch_gordan")?;
    let w = wigner_3j(j1, j2, j, m1, m2, -m)?;
    if w == 0.0 {
        return Ok(0.0);
    }
    Ok(parity_sign(j1.0 - j2.0 + m.0) * ((j.0 + 1) as f64).sqrt() * w)
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`.
///
/// Returns 0 (by convention) when any of the four triads violates the
/// triangle rule.
pub fn wigner_6j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    j4: HalfInt,
    j5: HalfInt,
    j6: HalfInt,
) -> f64 {
    if !(triangle(j1, j2, j3)
        && triangle(j1, j5, j6)
        && triangle(j4, j2, j6)
        && triangle(j4, j5, j3))
    {
        return 0.0;
    }
    let delta = triangle_coefficient(j1, j2, j3)
        .mul(&triangle_coefficient(j1, j5, j6))
        .mul(&triangle_coefficient(j4, j2, j6))
        .mul(&triangle_coefficient(j4, j5, j3));
    let (j1, j2, j3, j4, j5, j6) = (j1.0, j2.0, j3.0, j4.0, j5.0, j6.0);
    let a1 = j1 + j2 + j3;
    let a2 = j1 + j5 + j6;
    let a3 = j4 + j2 + j6;
    let a4 = j4 + j5 + j3;
    let b1 = j1 + j2 + j4 + j5;
    let b2 = j2 + j3 + j5 + j6;
    let b3 = j3 + j1 + j6 + j4;
    let t_min = a1.max(a2).max(a3).max(a4);
    let t_max = b1.min(b2).min(b3);
    let mut sum = 0.0;
    let mut t = t_min;
    while t <= t_max {
        let num = fact(t + 2);
        let den = fact(t - a1)
            .mul(&fact(t - a2))
            .mul(&fact(t - a3))
            .mul(&fact(t - a4))
            .mul(&fact(b1 - t))
            .mul(&fact(b2 - t))
            .mul(&fact(b3 - t));
        let term = delta.mul(&num.squared()).div(&den.squared());
        sum += parity_sign(t) * term.sqrt_f64();
        t += 2;
    }
    sum
}

/// Rotation of the quantization axis about ŷ by the Euler angle `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationSpec {
    pub beta: f64,
    pub j: AngularMomentum,
}

impl RotationSpec {
    /// The ẑ → x̂ rotation used for pairs lying along the trap axis.
    pub fn z_to_x(j: AngularMomentum) -> Self {
        RotationSpec { beta: std::f64::consts::FRAC_PI_2, j }
    }
}

/// Wigner small-d matrix `d^j_{m'm}(β)`, rows `m'` and columns `m`, both descending.
///
/// For `j = 1/2`, `β = π/2` this is `[[c, -s], [s, c]]` with `c = s = 1/√2`.
pub fn wigner_d_matrix(spec: RotationSpec) -> DMatrix<f64> {
    let j = spec.j.0;
    assert!(j >= 0, "wigner_d_matrix: negative j");
    let dim = spec.j.multiplicity();
    let (c, s) = ((spec.beta / 2.0).cos(), (spec.beta / 2.0).sin());
    let ms: Vec<i32> = spec.j.projections().map(|m| m.0).collect();
    DMatrix::from_fn(dim, dim, |r, col| {
        let (mp, m) = (ms[r], ms[col]);
        let pre = fact(j + mp).mul(&fact(j - mp)).mul(&fact(j + m)).mul(&fact(j - m));
        let k_min = 0.max(m - mp);
        let k_max = (j + m).min(j - mp);
        let mut sum = 0.0;
        let mut k = k_min;
        while k <= k_max {
            let den = fact(j + m - k).mul(&fact(k)).mul(&fact(j - k - mp)).mul(&fact(k - m + mp));
            let coeff = pre.div(&den.squared()).sqrt_f64();
            let pc = (2 * j - 2 * k + m - mp) / 2;
            let ps = (2 * k - m + mp) / 2;
            sum += parity_sign(k - m + mp) * coeff * c.powi(pc) * s.powi(ps);
            k += 2;
        }
        sum
    })
}

/// Angular factors of one spherical component of a rank-1 operator.
#[derive(Clone, Debug)]
pub struct DipoleBlock {
    /// `(2jb+1) × (2ja+1)`, element `(mb, ma) = <ja ma; 1 q|jb mb>`.
    pub matrix: DMatrix<f64>,
    /// False when `(ja, 1, jb)` fails the triangle rule; the matrix is then zero.
    pub triangle_ok: bool,
}

/// Wigner-Eckart angular factors for `<jb mb|T_q|ja ma>`; the reduced element
/// `<jb||T||ja>/sqrt(2jb+1)` is left to the caller.
pub fn dipole_component_matrix(ja: AngularMomentum, jb: AngularMomentum, q: i32) -> Result<DipoleBlock> {
    if !(-1..=1).contains(&q) {
        return Err(Error::Domain(format!("spherical component q={q} not in -1..=1")));
    }
    if ja.0 < 0 || jb.0 < 0 {
        return Err(Error::Domain("negative angular momentum".into()));
    }
    let (na, nb) = (ja.multiplicity(), jb.multiplicity());
    let triangle_ok = triangle(ja, HalfInt::ONE, jb);
    let mut matrix = DMatrix::zeros(nb, na);
    if triangle_ok {
        for (ia, ma) in ja.projections().enumerate() {
            let mb = ma + HalfInt::int(q);
            if let Some(ib) = jb.index_of(mb) {
                matrix[(ib, ia)] = clebsch_gordan(ja, ma, HalfInt::ONE, HalfInt::int(q), jb, mb)?;
            }
        }
    }
    Ok(DipoleBlock { matrix, triangle_ok })
}

/// Edmonds reduced matrix element of the unit-radial dipole between
/// fine-structure levels, `<lb jb||r̂||la ja>` with s = 1/2 and radial integral 1.
pub fn fine_structure_reduced_factor(la: u32, ja: HalfInt, lb: u32, jb: HalfInt) -> f64 {
    let (la_h, lb_h) = (HalfInt::int(la as i32), HalfInt::int(lb as i32));
    let s = HalfInt::HALF;
    // <lb||C1||la>
    let orbital = parity_sign(2 * lb as i32)
        * (((2 * la + 1) * (2 * lb + 1)) as f64).sqrt()
        * wigner_3j(lb_h, HalfInt::ONE, la_h, HalfInt::ZERO, HalfInt::ZERO, HalfInt::ZERO)
            .unwrap_or(0.0);
    let phase = parity_sign(lb_h.0 + s.0 + ja.0 + HalfInt::ONE.0);
    phase
        * (((ja.0 + 1) * (jb.0 + 1)) as f64).sqrt()
        * wigner_6j(lb_h, jb, s, ja, la_h, HalfInt::ONE)
        * orbital
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn singlet_coefficient() {
        let cg = clebsch_gordan(h(1), h(1), h(1), h(-1), h(0), h(0)).unwrap();
        assert!((cg - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let cg = clebsch_gordan(h(1), h(-1), h(1), h(1), h(0), h(0)).unwrap();
        assert!((cg + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn projection_mismatch_is_zero() {
        assert_eq!(clebsch_gordan(h(2), h(2), h(2), h(0), h(2), h(0)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_projection_is_domain_error() {
        assert!(clebsch_gordan(h(2), h(1), h(2), h(0), h(2), h(1)).is_err());
        assert!(HalfInt::from_f64(0.3).is_err());
        assert_eq!(HalfInt::from_f64(2.5).unwrap(), h(5));
    }

    #[test]
    fn known_closed_forms() {
        // <3/2 1/2; 1 0|1/2 1/2> = -sqrt(1/3)
        let cg = clebsch_gordan(h(3), h(1), h(2), h(0), h(1), h(1)).unwrap();
        assert!((cg + (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        // <1/2 1/2; 1 0|3/2 1/2> = sqrt(2/3)
        let cg = clebsch_gordan(h(1), h(1), h(2), h(0), h(3), h(1)).unwrap();
        assert!((cg - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let j = h(99);
        let cg = clebsch_gordan(j, h(1), j, h(-1), h(0), h(0)).unwrap();
        // <j m; j -m|0 0> = (-1)^(j-m)/sqrt(2j+1)
        assert!((cg.abs() - 1.0 / 100f64.sqrt()).abs() < 1e-12);
        let w = wigner_6j(h(99), h(99), h(0), h(99), h(99), h(0));
        assert!((w.abs() - 1.0 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn six_j_with_zero_collapses() {
        // {a b 0; d e f} = δ_ab δ_de (-1)^(a+e+f) / sqrt((2a+1)(2e+1))
        for a in 0..=6 {
            for e in 0..=6 {
                for f in 0..=12 {
                    let (ha, he, hf) = (h(a), h(e), h(f));
                    let w = wigner_6j(ha, ha, h(0), he, he, hf);
                    if triangle(ha, he, hf) {
                        let sign = parity_sign(a + e + f);
                        let want = sign / (((a + 1) * (e + 1)) as f64).sqrt();
                        assert!((w - want).abs() < 1e-14, "a={a} e={e} f={f}: {w} vs {want}");
                    } else {
                        assert_eq!(w, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn spin_half_rotation() {
        let d = wigner_d_matrix(RotationSpec::z_to_x(h(1)));
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let want = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        assert!((d - want).abs().max() < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        for t in 0..=9 {
            let d = wigner_d_matrix(RotationSpec { beta: 0.0, j: h(t) });
            let n = d.nrows();
            assert!((d - DMatrix::identity(n, n)).abs().max() < 1e-15);
        }
    }

    #[test]
    fn j_five_halves_orthogonal() {
        let d = wigner_d_matrix(RotationSpec::z_to_x(h(5)));
        for r in 0..6 {
            let s: f64 = d.row(r).iter().map(|x| x * x).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((d.transpose() * &d - DMatrix::identity(6, 6)).abs().max() < 1e-12);
    }

    #[test]
    fn dipole_q0_half_half() {
        let b = dipole_component_matrix(h(1), h(1), 0).unwrap();
        assert!(b.triangle_ok);
        // <1/2 ±1/2; 1 0|1/2 ±1/2> = ±1/√3 in this argument order
        let s3 = 1.0 / 3f64.sqrt();
        assert!((b.matrix[(0, 0)] - s3).abs() < 1e-15, "{}", b.matrix);
        assert!((b.matrix[(1, 1)] + s3).abs() < 1e-15);
        assert_eq!(b.matrix[(0, 1)], 0.0);
    }

    #[test]
    fn dipole_triangle_violation_flagged() {
        let b = dipole_component_matrix(h(1), h(5), 0).unwrap();
        assert!(!b.triangle_ok);
        assert_eq!(b.matrix.abs().max(), 0.0);
        assert!(dipole_component_matrix(h(1), h(1), 2).is_err());
    }

    #[test]
    fn dipole_selection_rule_and_completeness() {
        for ja in 0..=7 {
            for jb in [ja - 2, ja, ja + 2] {
                if jb < 0 || (ja == 0 && jb == 0) {
                    continue;
                }
                let (ja, jb) = (h(ja), h(jb));
                let mut total = DMatrix::zeros(ja.multiplicity(), ja.multiplicity());
                for q in -1..=1 {
                    let b = dipole_component_matrix(ja, jb, q).unwrap();
                    for (ib, mb) in jb.projections().enumerate() {
                        for (ia, ma) in ja.projections().enumerate() {
                            if mb != ma + HalfInt::int(q) {
                                assert_eq!(b.matrix[(ib, ia)], 0.0);
                            }
                        }
                    }
                    total += b.matrix.transpose() * &b.matrix;
                }
                let want = (jb.0 + 1) as f64 / (ja.0 + 1) as f64;
                let diff = total - DMatrix::identity(ja.multiplicity(), ja.multiplicity()) * want;
                assert!(diff.abs().max() < 1e-13);
            }
        }
    }

    #[test]
    fn fine_structure_factors_sum_to_orbital_strength() {
        // Σ_jb |<lb jb||r||la ja>|² = (2ja+1)/(2la+1) |<lb||C1||la>|²
        let la = 2;
        for ja in [h(3), h(5)] {
            for lb in [1u32, 3] {
                let sum: f64 = [2 * lb as i32 - 1, 2 * lb as i32 + 1]
                    .iter()
                    .map(|&jb| fine_structure_reduced_factor(la, ja, lb, h(jb)).powi(2))
                    .sum();
                let orb = (5 * (2 * lb + 1)) as f64
                    * wigner_3j(h(2 * lb as i32), h(2), h(4), h(0), h(0), h(0)).unwrap().powi(2);
                assert!((sum - (ja.0 + 1) as f64 * orb / 5.0).abs() < 1e-12);
            }
        }
    }

    // brute-force orthogonality oracle
    fn cg_orthogonality(j1: HalfInt, j2: HalfInt) {
        let totals: Vec<HalfInt> = ((j1.0 - j2.0).abs()..=(j1.0 + j2.0))
            .step_by(2)
            .map(h)
            .collect();
        for &ja in &totals {
            for ma in ja.projections() {
                for &jb in &totals {
                    for mb in jb.projections() {
                        let mut s = 0.0;
                        for m1 in j1.projections() {
                            for m2 in j2.projections() {
                                s += clebsch_gordan(j1, m1, j2, m2, ja, ma).unwrap()
                                    * clebsch_gordan(j1, m1, j2, m2, jb, mb).unwrap();
                            }
                        }
                        let want = if ja == jb && ma == mb { 1.0 } else { 0.0 };
                        assert!((s - want).abs() < 1e-12, "j1={j1} j2={j2} J={ja} M={ma}");
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn cg_orthogonal(j1 in 0i32..=8, j2 in 0i32..=8) {
            cg_orthogonality(h(j1), h(j2));
        }

        #[test]
        fn six_j_column_permutations(a in 0i32..=9, b in 0i32..=9, c in 0i32..=9,
                                     d in 0i32..=9, e in 0i32..=9, f in 0i32..=9) {
            let w = wigner_6j(h(a), h(b), h(c), h(d), h(e), h(f));
            let perms = [
                wigner_6j(h(b), h(a), h(c), h(e), h(d), h(f)),
                wigner_6j(h(a), h(c), h(b), h(d), h(f), h(e)),
                wigner_6j(h(c), h(b), h(a), h(f), h(e), h(d)),
                // swap upper/lower in two columns
                wigner_6j(h(d), h(e), h(c), h(a), h(b), h(f)),
                wigner_6j(h(a), h(e), h(f), h(d), h(b), h(c)),
            ];
            for p in perms {
                prop_assert!((w - p).abs() < 1e-13);
            }
        }

        #[test]
        fn biedenharn_elliott(a in 0i32..=4, b in 0i32..=4, c in 0i32..=4, d in 0i32..=4,
                              e in 0i32..=4, f in 0i32..=4, g in 0i32..=4, hh in 0i32..=4,
                              k in 0i32..=4) {
            // Σ_x (-1)^(S+x) (2x+1) {a b x; c d p}{c d x; e f q}{e f x; b a r}
            //   = {p q r; e a d}{p q r; f b c},   S = a+b+c+d+e+f+p+q+r
            let (a, b, c, d, e, f) = (h(a), h(b), h(c), h(d), h(e), h(f));
            let (p, q, r) = (h(g), h(hh), h(k));
            let big_s = a.0 + b.0 + c.0 + d.0 + e.0 + f.0 + p.0 + q.0 + r.0;
            let mut lhs = 0.0;
            for x2 in 0..=20 {
                let x = h(x2);
                let t = wigner_6j(a, b, x, c, d, p)
                    * wigner_6j(c, d, x, e, f, q)
                    * wigner_6j(e, f, x, b, a, r);
                if t != 0.0 {
                    lhs += parity_sign(big_s + x2) * (x2 + 1) as f64 * t;
                }
            }
            let rhs = wigner_6j(p, q, r, e, a, d) * wigner_6j(p, q, r, f, b, c);
            prop_assert!((lhs - rhs).abs() < 1e-12, "lhs={} rhs={}", lhs, rhs);
        }

        #[test]
        fn d_matrix_inverse_and_determinant(t in 0i32..=9, beta in 0.0f64..std::f64::consts::PI) {
            let j = h(t);
            let d = wigner_d_matrix(RotationSpec { beta, j });
            let dm = wigner_d_matrix(RotationSpec { beta: -beta, j });
            let n = j.multiplicity();
            prop_assert!((&d * &dm - DMatrix::identity(n, n)).abs().max() < 1e-12);
            prop_assert!((&dm - d.transpose()).abs().max() < 1e-12);
            prop_assert!((d.determinant() - 1.0).abs() < 1e-10);
        }
    }
}
