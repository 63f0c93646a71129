//! Rydberg level energies from the Rydberg-Ritz quantum-defect expansion,
//! Förster energy defects, Zeeman shifts and radial dipole matrix elements.
//!
//! Energies are in Hz relative to the ionization limit (negative for bound
//! states). Radial matrix elements are in Bohr radii.

use std::fmt;

use crate::angular::HalfInt;
use crate::constants::AtomData;
use crate::{Error, Result};

/// A fine-structure level `n l_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RydbergLevel {
    pub n: u32,
    pub l: u32,
    pub j: HalfInt,
}

impl RydbergLevel {
    pub fn new(n: u32, l: u32, j: HalfInt) -> Result<Self> {
        if n == 0 || l >= n {
            return Err(Error::Domain(format!("invalid level n={n} l={l}: need 0 <= l < n")));
        }
        let l2 = 2 * l as i32;
        if j.twice() != l2 + 1 && (l == 0 || j.twice() != l2 - 1) {
            return Err(Error::Domain(format!("invalid level n={n} l={l} j={j}: need j = l ± 1/2")));
        }
        Ok(RydbergLevel { n, l, j })
    }

    /// Convenience constructor taking `j` as twice its value.
    pub fn nlj(n: u32, l: u32, twice_j: i32) -> Result<Self> {
        Self::new(n, l, HalfInt::from_twice(twice_j))
    }

    pub fn is_dipole_coupled(&self, other: &RydbergLevel) -> bool {
        self.l.abs_diff(other.l) == 1 && (self.j.twice() - other.j.twice()).abs() <= 2
    }
}

impl fmt::Display for RydbergLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const L: [char; 7] = ['s', 'p', 'd', 'f', 'g', 'h', 'i'];
        match L.get(self.l as usize) {
            Some(c) => write!(f, "{}{}{}", self.n, c, self.j),
            None => write!(f, "{}(l={}){}", self.n, self.l, self.j),
        }
    }
}

/// One `(l, j)` quantum-defect series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefectSeries {
    pub l: u32,
    pub j: HalfInt,
    pub delta0: f64,
    pub delta2: f64,
}

impl DefectSeries {
    pub fn defect(&self, n: u32) -> f64 {
        let x = n as f64 - self.delta0;
        self.delta0 + self.delta2 / (x * x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumDefectModel {
    pub rydberg_hz: f64,
    pub series: Vec<DefectSeries>,
}

impl QuantumDefectModel {
    pub fn from_atom(data: &AtomData) -> Result<Self> {
        let series = data
            .quantum_defect
            .iter()
            .map(|e| {
                Ok(DefectSeries {
                    l: e.l,
                    j: HalfInt::from_f64(e.j)?,
                    delta0: e.delta0,
                    delta2: e.delta2,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantumDefectModel { rydberg_hz: data.rydberg_constant_hz, series })
    }

    /// The compiled-in ⁸⁷Rb table.
    pub fn rb87() -> Self {
        Self::from_atom(&AtomData::builtin()).expect("builtin defect table is valid")
    }

    /// Zero defects for every series with `l <= l_max`.
    pub fn hydrogenic(rydberg_hz: f64, l_max: u32) -> Self {
        let series = (0..=l_max)
            .flat_map(|l| {
                let l2 = 2 * l as i32;
                let js = if l == 0 { vec![1] } else { vec![l2 - 1, l2 + 1] };
                js.into_iter().map(move |j| DefectSeries {
                    l,
                    j: HalfInt::from_twice(j),
                    delta0: 0.0,
                    delta2: 0.0,
                })
            })
            .collect();
        QuantumDefectModel { rydberg_hz, series }
    }

    pub fn series_for(&self, l: u32, j: HalfInt) -> Result<&DefectSeries> {
        self.series
            .iter()
            .find(|s| s.l == l && s.j == j)
            .ok_or_else(|| Error::Config(format!("no quantum-defect series for l={l} j={j}")))
    }

    pub fn defect(&self, level: &RydbergLevel) -> Result<f64> {
        Ok(self.series_for(level.l, level.j)?.defect(level.n))
    }

    /// Effective quantum number `n* = n - δ(n)`.
    pub fn n_star(&self, level: &RydbergLevel) -> Result<f64> {
        let ns = level.n as f64 - self.defect(level)?;
        if !(ns > 0.0 && ns <= level.n as f64) {
            return Err(Error::Domain(format!("effective quantum number {ns} out of range for {level}")));
        }
        Ok(ns)
    }

    /// `U = -Ry / n*²` in Hz.
    pub fn level_energy(&self, level: &RydbergLevel) -> Result<f64> {
        let ns = self.n_star(level)?;
        Ok(-self.rydberg_hz / (ns * ns))
    }

    /// Characteristic dipole `n*²` (units of e·a0) of the `n d5/2` level.
    ///
    /// An order-of-magnitude scale only.
    pub fn dipole_scale_estimate(&self, n: u32) -> Result<f64> {
        let s = self.series_for(2, HalfInt::from_twice(5))?;
        let ns = n as f64 - s.defect(n);
        Ok(ns * ns)
    }
}

/// A two-atom process `initial.0 + initial.1 -> final_.0 + final_.1`, where
/// atom 1 goes `initial.0 -> final_.0` and atom 2 goes `initial.1 -> final_.1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForsterChannel {
    pub initial: (RydbergLevel, RydbergLevel),
    pub final_: (RydbergLevel, RydbergLevel),
}

impl ForsterChannel {
    /// Validates the dipole selection rules on both atoms. The elastic
    /// channel (final = initial) is accepted.
    pub fn new(initial: (RydbergLevel, RydbergLevel), final_: (RydbergLevel, RydbergLevel)) -> Result<Self> {
        let ch = ForsterChannel { initial, final_ };
        if !ch.is_elastic() {
            for (a, b) in [(initial.0, final_.0), (initial.1, final_.1)] {
                if !a.is_dipole_coupled(&b) {
                    return Err(Error::SelectionRule(format!(
                        "{a} -> {b} violates |Δl| = 1, |Δj| <= 1"
                    )));
                }
            }
        }
        Ok(ch)
    }

    pub fn is_elastic(&self) -> bool {
        self.initial == self.final_
    }

    pub fn reversed(&self) -> Self {
        ForsterChannel { initial: self.final_, final_: self.initial }
    }

    /// Energy defect `δ_c/2π` in Hz.
    pub fn defect_hz(&self, model: &QuantumDefectModel) -> Result<f64> {
        forster_defect(self, model)
    }

    /// Energy defect `δ_c` in rad/s.
    pub fn defect_angular(&self, model: &QuantumDefectModel) -> Result<f64> {
        Ok(crate::constants::TWO_PI * self.defect_hz(model)?)
    }
}

/// `U(final₁) + U(final₂) - U(initial₁) - U(initial₂)` in Hz.
pub fn forster_defect(channel: &ForsterChannel, model: &QuantumDefectModel) -> Result<f64> {
    let e = |l: &RydbergLevel| model.level_energy(l);
    let d1 = e(&channel.final_.0)? - e(&channel.initial.0)?;
    let d2 = e(&channel.final_.1)? - e(&channel.initial.1)?;
    Ok(d1 + d2)
}

/// `43d5/2 + 43d5/2 -> 45p3/2 + 41f_j` with `twice_j_f` = 5 or 7.
pub fn rb_43d_channel(twice_j_f: i32) -> Result<ForsterChannel> {
    let d = RydbergLevel::nlj(43, 2, 5)?;
    ForsterChannel::new((d, d), (RydbergLevel::nlj(45, 1, 3)?, RydbergLevel::nlj(41, 3, twice_j_f)?))
}

/// Fine-structure Landé factor with `g_s = 2`, `s = 1/2`.
pub fn lande_g_j(l: u32, j: HalfInt) -> f64 {
    let jv = j.value();
    let lv = l as f64;
    1.0 + (jv * (jv + 1.0) + 0.75 - lv * (lv + 1.0)) / (2.0 * jv * (jv + 1.0))
}

/// Ground hyperfine sublevel and Rydberg fine-structure sublevel in a bias field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeemanStatePair {
    pub f: HalfInt,
    pub m_f: HalfInt,
    pub g_f: f64,
    pub l: u32,
    pub j: HalfInt,
    pub m_j: HalfInt,
    pub b_tesla: f64,
}

impl ZeemanStatePair {
    /// `|f=2, m_f=2> -> |d5/2, m_j=1/2>` at field `b_tesla`.
    pub fn rb_stretched_to_d52(g_f: f64, b_tesla: f64) -> Self {
        ZeemanStatePair {
            f: HalfInt::int(2),
            m_f: HalfInt::int(2),
            g_f,
            l: 2,
            j: HalfInt::from_twice(5),
            m_j: HalfInt::HALF,
            b_tesla,
        }
    }

    pub fn g_j(&self) -> f64 {
        lande_g_j(self.l, self.j)
    }
}

/// `μ_B B (g_j m_j - g_F m_f) / h` in Hz.
pub fn zeeman_resonance_shift(pair: &ZeemanStatePair, bohr_magneton_hz_per_tesla: f64) -> Result<f64> {
    if pair.f.index_of(pair.m_f).is_none() {
        return Err(Error::Domain(format!("m_f={} invalid for f={}", pair.m_f, pair.f)));
    }
    if pair.j.index_of(pair.m_j).is_none() {
        return Err(Error::Domain(format!("m_j={} invalid for j={}", pair.m_j, pair.j)));
    }
    let l2 = 2 * pair.l as i32;
    if pair.j.twice() != l2 + 1 && pair.j.twice() != l2 - 1 {
        return Err(Error::Domain(format!("j={} incompatible with l={}", pair.j, pair.l)));
    }
    Ok(bohr_magneton_hz_per_tesla
        * pair.b_tesla
        * (pair.g_j() * pair.m_j.value() - pair.g_f * pair.m_f.value()))
}

/// Semiclassical radial integral `<a|r|b>` in a0 for `|Δl| = 1`.
///
/// Correspondence-principle evaluation on the Kepler orbit with mean
/// effective quantum number `sqrt(n_a* n_b*)` and angular momentum
/// `(l_a + l_b + 1)/2`: the radial dipole is the Fourier component of the
/// orbit at the (non-integer) harmonic `n_b* - n_a*`, phased at aphelion.
pub fn radial_matrix_element(a: &RydbergLevel, b: &RydbergLevel, model: &QuantumDefectModel) -> Result<f64> {
    if a.l.abs_diff(b.l) != 1 {
        return Err(Error::SelectionRule(format!("radial dipole {a} -> {b} needs |Δl| = 1")));
    }
    let na = model.n_star(a)?;
    let nb = model.n_star(b)?;
    let sigma = if b.l > a.l { 1.0 } else { -1.0 };
    Ok(semiclassical_radial(na, nb, (a.l + b.l + 1) as f64 / 2.0, sigma))
}

fn semiclassical_radial(na: f64, nb: f64, l_mean: f64, sigma: f64) -> f64 {
    use std::f64::consts::PI;
    let s = nb - na;
    let nc = (na * nb).sqrt();
    let ecc = (1.0 - (l_mean / nc).powi(2)).max(0.0).sqrt();
    let semi_major = nc * nc;
    let minor = (1.0 - ecc * ecc).sqrt();
    let integrand = |e: f64| {
        let (se, ce) = e.sin_cos();
        let phase = s * (PI - (e - ecc * se));
        let x = (ce - ecc) * phase.cos();
        let y = minor * se * phase.sin();
        semi_major * (x - sigma * y) * (1.0 - ecc * ce)
    };
    // composite Simpson over the eccentric anomaly
    let steps = 2 * (400 + 40 * s.abs().ceil() as usize);
    let h = PI / steps as f64;
    let mut acc = integrand(0.0) + integrand(PI);
    for k in 1..steps {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(k as f64 * h);
    }
    (acc * h / 3.0 / PI).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rb() -> QuantumDefectModel {
        QuantumDefectModel::rb87()
    }

    #[test]
    fn hydrogenic_energy() {
        let m = QuantumDefectModel::hydrogenic(1.0e15, 3);
        let u = m.level_energy(&RydbergLevel::nlj(2, 0, 1).unwrap()).unwrap();
        assert_eq!(u, -1.0e15 / 4.0);
    }

    #[test]
    fn n_star_43d() {
        let ns = rb().n_star(&RydbergLevel::nlj(43, 2, 5).unwrap()).unwrap();
        let d0 = 1.34646572;
        let want = 43.0 - d0 + 0.596 / ((43.0f64 - d0) * (43.0 - d0));
        assert!((ns - want).abs() < 1e-12);
        assert!((ns - 41.653_877_792_5).abs() < 1e-9);
    }

    #[test]
    fn missing_series_is_config_error() {
        let m = QuantumDefectModel::hydrogenic(1.0, 1);
        let e = m.level_energy(&RydbergLevel::nlj(10, 3, 7).unwrap()).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("l=3"));
    }

    #[test]
    fn invalid_levels_rejected() {
        assert!(RydbergLevel::nlj(3, 3, 7).is_err());
        assert!(RydbergLevel::nlj(10, 0, 3).is_err());
        assert!(RydbergLevel::nlj(10, 2, 1).is_err());
    }

    #[test]
    fn forster_defects_43d() {
        let m = rb();
        let f5 = forster_defect(&rb_43d_channel(5).unwrap(), &m).unwrap();
        let f7 = forster_defect(&rb_43d_channel(7).unwrap(), &m).unwrap();
        assert!((f5 + 6.0e6).abs() < 0.5e6, "{f5}");
        assert!((f7 + 8.3e6).abs() < 0.5e6, "{f7}");
    }

    #[test]
    fn elastic_channel_is_exactly_zero() {
        let d = RydbergLevel::nlj(43, 2, 5).unwrap();
        let ch = ForsterChannel::new((d, d), (d, d)).unwrap();
        assert_eq!(forster_defect(&ch, &rb()).unwrap(), 0.0);
    }

    #[test]
    fn selection_rule_violation_names_transition() {
        let d = RydbergLevel::nlj(43, 2, 5).unwrap();
        let s = RydbergLevel::nlj(44, 0, 1).unwrap();
        let p = RydbergLevel::nlj(45, 1, 3).unwrap();
        let err = ForsterChannel::new((d, d), (s, p)).unwrap_err();
        assert!(matches!(err, Error::SelectionRule(_)));
        assert!(err.to_string().contains("43d5/2 -> 44s1/2"), "{err}");
    }

    #[test]
    fn forster_defect_antisymmetric() {
        let m = rb();
        for j in [5, 7] {
            let ch = rb_43d_channel(j).unwrap();
            let a = forster_defect(&ch, &m).unwrap();
            let b = forster_defect(&ch.reversed(), &m).unwrap();
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn lande_factor_d52() {
        assert!((lande_g_j(2, HalfInt::from_twice(5)) - 1.2).abs() < 1e-15);
        assert!((lande_g_j(0, HalfInt::HALF) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zeeman_shift_at_one_millitesla() {
        let data = AtomData::builtin();
        let pair = ZeemanStatePair::rb_stretched_to_d52(data.ground_g_f, 1e-3);
        let s = zeeman_resonance_shift(&pair, data.bohr_magneton_hz_per_tesla).unwrap();
        assert!((s + 5.6e6).abs() < 0.056e6, "{s}");
    }

    #[test]
    fn zeeman_trivial_cases() {
        let mu = AtomData::builtin().bohr_magneton_hz_per_tesla;
        let zero_b = ZeemanStatePair::rb_stretched_to_d52(0.5, 0.0);
        assert_eq!(zeeman_resonance_shift(&zero_b, mu).unwrap(), 0.0);
        let centred = ZeemanStatePair {
            f: HalfInt::int(2),
            m_f: HalfInt::ZERO,
            g_f: 0.5,
            l: 1,
            j: HalfInt::from_twice(3),
            m_j: HalfInt::HALF,
            b_tesla: 1.0,
        };
        assert!(zeeman_resonance_shift(&centred, mu).unwrap() > 0.0);
        let bad = ZeemanStatePair { m_f: HalfInt::int(3), ..centred };
        assert!(zeeman_resonance_shift(&bad, mu).is_err());
    }

    #[test]
    fn dipole_scale() {
        let m = rb();
        let d = m.dipole_scale_estimate(43).unwrap();
        assert!((d - 41.653_877_79f64.powi(2)).abs() < 1e-5);
        assert!(m.dipole_scale_estimate(44).unwrap() > d);
        let h = QuantumDefectModel::hydrogenic(1.0, 2);
        assert_eq!(h.dipole_scale_estimate(1).unwrap(), 1.0);
    }

    #[test]
    fn radial_selection_rule() {
        let m = rb();
        let d = RydbergLevel::nlj(43, 2, 5).unwrap();
        let s = RydbergLevel::nlj(44, 0, 1).unwrap();
        assert!(matches!(radial_matrix_element(&d, &s, &m), Err(Error::SelectionRule(_))));
    }

    #[test]
    fn radial_same_n_hydrogen_closed_form() {
        // <n l|r|n l+1> = (3/2) n sqrt(n² - (l+1)²)
        let h = QuantumDefectModel::hydrogenic(1.0, 5);
        for (n, l) in [(10u32, 1u32), (20, 3), (30, 0)] {
            let a = RydbergLevel::nlj(n, l, 2 * l as i32 + 1).unwrap();
            let b = RydbergLevel::nlj(n, l + 1, 2 * l as i32 + 3).unwrap();
            let r = radial_matrix_element(&a, &b, &h).unwrap();
            let lm = (l + 1) as f64;
            let want = 1.5 * n as f64 * (n as f64 * n as f64 - lm * lm).sqrt();
            assert!((r / want - 1.0).abs() < 1e-9, "n={n} l={l}: {r} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn energy_increasing_in_n(n in 5u32..200, series in 0usize..7) {
            let m = rb();
            let s = m.series[series];
            let a = RydbergLevel::new(n.max(s.l + 1), s.l, s.j).unwrap();
            let b = RydbergLevel { n: a.n + 1, ..a };
            prop_assert!(m.level_energy(&b).unwrap() > m.level_energy(&a).unwrap());
            prop_assert!(m.level_energy(&a).unwrap() < 0.0);
        }

        #[test]
        fn zeeman_linear_in_field(b in -0.01f64..0.01) {
            let mu = AtomData::builtin().bohr_magneton_hz_per_tesla;
            let one = zeeman_resonance_shift(&ZeemanStatePair::rb_stretched_to_d52(0.5, 1.0), mu).unwrap();
            let s = zeeman_resonance_shift(&ZeemanStatePair::rb_stretched_to_d52(0.5, b), mu).unwrap();
            prop_assert!((s - one * b).abs() <= 1e-9 * one.abs());
        }

        #[test]
        fn radial_symmetric(n in 20u32..80, dn in -3i32..=3) {
            let m = rb();
            let a = RydbergLevel::nlj(n, 2, 5).unwrap();
            let b = RydbergLevel::nlj((n as i32 + dn) as u32, 1, 3).unwrap();
            let ab = radial_matrix_element(&a, &b, &m).unwrap();
            let ba = radial_matrix_element(&b, &a, &m).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9 * ab.max(1.0));
        }
    }
}
