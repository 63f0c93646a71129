//! Two-photon ground-Rydberg excitation of a single atom.
//!
//! The intermediate `5p3/2` level is adiabatically eliminated, leaving a
//! two-level system with `H/ħ = (Ω/2) σx − δ n`, where `n = |r><r|` and
//! `δ = ω_laser − ω_atom`. Frequencies are angular (rad/s) unless a name
//! ends in `_hz`.

use nalgebra::{Complex, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::angular::{clebsch_gordan, fine_structure_reduced_factor, HalfInt};
use crate::constants::{si, AtomData};
use crate::levels::{radial_matrix_element, QuantumDefectModel, RydbergLevel};
use crate::mc::{map_indexed, Domain, TraceResult};
use crate::{Error, Result};

type C64 = Complex<f64>;

/// A Gaussian laser beam at its focus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamParams {
    pub power_w: f64,
    /// 1/e² intensity radius.
    pub waist_um: f64,
    pub wavelength_nm: f64,
}

impl BeamParams {
    pub fn new(power_w: f64, waist_um: f64, wavelength_nm: f64) -> Result<Self> {
        if !(power_w >= 0.0) || !(waist_um > 0.0) || !(wavelength_nm > 0.0) {
            return Err(Error::Domain(format!(
                "beam needs P >= 0, w > 0, λ > 0 (got {power_w} W, {waist_um} µm, {wavelength_nm} nm)"
            )));
        }
        Ok(BeamParams { power_w, waist_um, wavelength_nm })
    }

    /// Peak intensity `2P / (π w²)` in W/m².
    pub fn peak_intensity(&self) -> f64 {
        let w = self.waist_um * 1e-6;
        2.0 * self.power_w / (std::f64::consts::PI * w * w)
    }

    /// Peak field amplitude `sqrt(4P / (π ε₀ c w²))` in V/m.
    pub fn peak_field(&self) -> f64 {
        let w = self.waist_um * 1e-6;
        (4.0 * self.power_w / (std::f64::consts::PI * si::VACUUM_PERMITTIVITY * si::SPEED_OF_LIGHT * w * w)).sqrt()
    }
}

/// Sublevel-resolved dipole matrix elements (e·a0) along the `π`-polarized
/// path `|5s1/2, m_j=1/2> -> |5p3/2, 1/2> -> |n d5/2, 1/2>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleElements {
    pub lower_ea0: f64,
    pub upper_ea0: f64,
}

impl DipoleElements {
    /// Lower element from the tabulated reduced element; upper element from
    /// the semiclassical radial integral times the stored calibration factor.
    pub fn from_atom(data: &AtomData, qd: &QuantumDefectModel, n_rydberg: u32) -> Result<Self> {
        let half = HalfInt::HALF;
        let p32 = HalfInt::from_twice(3);
        let lower = data.dipoles.d_5s_5p32_ea0 * clebsch_gordan(half, half, HalfInt::ONE, HalfInt::ZERO, p32, half)?
            / ((p32.twice() + 1) as f64).sqrt();
        let upper = data.dipoles.rydberg_calibration * uncalibrated_upper_element(qd, n_rydberg)?;
        Ok(DipoleElements { lower_ea0: lower, upper_ea0: upper })
    }
}

/// `<n d5/2, 1/2| e z |5p3/2, 1/2>` from the semiclassical radial integral, in e·a0.
pub fn uncalibrated_upper_element(qd: &QuantumDefectModel, n_rydberg: u32) -> Result<f64> {
    let half = HalfInt::HALF;
    let p32 = HalfInt::from_twice(3);
    let d52 = HalfInt::from_twice(5);
    let p = RydbergLevel::new(5, 1, p32)?;
    let d = RydbergLevel::new(n_rydberg, 2, d52)?;
    let radial = radial_matrix_element(&p, &d, qd)?;
    let reduced = radial * fine_structure_reduced_factor(1, p32, 2, d52);
    Ok(reduced * clebsch_gordan(p32, half, HalfInt::ONE, HalfInt::ZERO, d52, half)? / ((d52.twice() + 1) as f64).sqrt())
}

/// Calibration factor on the upper element that makes `rabi_from_beams`
/// return `target_omega_r`.
pub fn calibrate_upper_element(
    data: &AtomData,
    qd: &QuantumDefectModel,
    n_rydberg: u32,
    lower: &BeamParams,
    upper: &BeamParams,
    delta: f64,
    target_omega_r: f64,
) -> Result<f64> {
    let mut unit = data.clone();
    unit.dipoles.rydberg_calibration = 1.0;
    let d = DipoleElements::from_atom(&unit, qd, n_rydberg)?;
    let p = rabi_from_beams(lower, upper, &d, delta)?;
    Ok(target_omega_r / p.omega_r())
}

/// Single-photon couplings and detunings of the three-level ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseParams {
    pub omega_lower: f64,
    pub omega_upper: f64,
    /// Intermediate-state detuning Δ (negative when red of 5p3/2).
    pub delta: f64,
    /// Two-photon detuning from the unshifted resonance.
    pub two_photon_detuning: f64,
    /// Whether the effective detuning includes the AC Stark shifts.
    pub include_light_shifts: bool,
}

impl PulseParams {
    /// `Ω_R = Ω_lower Ω_upper / 2|Δ|`.
    pub fn omega_r(&self) -> f64 {
        (self.omega_lower * self.omega_upper / (2.0 * self.delta)).abs()
    }

    /// Ground-state shift `Ω_lower² / 4Δ`.
    pub fn ground_light_shift(&self) -> f64 {
        self.omega_lower.powi(2) / (4.0 * self.delta)
    }

    /// Rydberg-state shift `−Ω_upper² / 4Δ`.
    pub fn rydberg_light_shift(&self) -> f64 {
        -self.omega_upper.powi(2) / (4.0 * self.delta)
    }

    /// Detuning entering the two-level Hamiltonian.
    pub fn effective_detuning(&self) -> f64 {
        if self.include_light_shifts {
            self.two_photon_detuning - (self.rydberg_light_shift() - self.ground_light_shift())
        } else {
            self.two_photon_detuning
        }
    }

    /// False when `|Δ| < 10 max(Ω_lower, Ω_upper)`.
    pub fn adiabatic_ok(&self) -> bool {
        self.delta.abs() >= 10.0 * self.omega_lower.abs().max(self.omega_upper.abs())
    }

    /// Photon scattering rate `Ω_lower² Γ / 4Δ²` from the intermediate level.
    pub fn scattering_rate(&self, gamma_intermediate: f64) -> f64 {
        self.omega_lower.powi(2) * gamma_intermediate / (4.0 * self.delta * self.delta)
    }

    pub fn two_level(&self) -> TwoLevel {
        TwoLevel { rabi: self.omega_r(), detuning: self.effective_detuning(), decay: 0.0 }
    }
}

/// Single-photon Rabi frequencies `d E / ħ` at the beam centres.
pub fn rabi_from_beams(lower: &BeamParams, upper: &BeamParams, dipoles: &DipoleElements, delta: f64) -> Result<PulseParams> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Domain("intermediate detuning must be nonzero".into()));
    }
    let ea0 = si::ELEMENTARY_CHARGE * si::BOHR_RADIUS;
    Ok(PulseParams {
        omega_lower: (dipoles.lower_ea0 * ea0 * lower.peak_field() / si::HBAR).abs(),
        omega_upper: (dipoles.upper_ea0 * ea0 * upper.peak_field() / si::HBAR).abs(),
        delta,
        two_photon_detuning: 0.0,
        include_light_shifts: true,
    })
}

/// Effective two-level drive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevel {
    pub rabi: f64,
    pub detuning: f64,
    /// Optional damping rate (1/s) of the coherent oscillation towards its time average.
    pub decay: f64,
}

impl TwoLevel {
    pub fn resonant(rabi: f64) -> Self {
        TwoLevel { rabi, detuning: 0.0, decay: 0.0 }
    }

    pub fn generalized_rabi(&self) -> f64 {
        self.rabi.hypot(self.detuning)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Populations {
    pub ground: f64,
    pub rydberg: f64,
}

/// `P_r = (Ω²/Ω'²) sin²(Ω' t / 2)`.
pub fn rabi_flop(p: &TwoLevel, t: f64) -> Populations {
    let w = p.generalized_rabi();
    let amp = if w > 0.0 { (p.rabi / w).powi(2) } else { 0.0 };
    let mut r = amp * (0.5 * w * t).sin().powi(2);
    if p.decay > 0.0 {
        let k = (-p.decay * t).exp();
        r = k * r + (1.0 - k) * 0.5 * amp;
    }
    let r = r.clamp(0.0, 1.0);
    Populations { ground: 1.0 - r, rydberg: r }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Pulse,
    Gap,
}

/// Piecewise-constant segment of a pulse sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceStep {
    pub kind: StepKind,
    pub duration: f64,
    pub detuning: f64,
    pub rabi: f64,
}

impl SequenceStep {
    pub fn pulse(duration: f64, rabi: f64, detuning: f64) -> Self {
        SequenceStep { kind: StepKind::Pulse, duration, detuning, rabi }
    }

    pub fn gap(duration: f64, detuning: f64) -> Self {
        SequenceStep { kind: StepKind::Gap, duration, detuning, rabi: 0.0 }
    }

    /// `exp(−i H t)` in the `(g, r)` basis.
    pub fn propagator(&self) -> Result<Matrix2<C64>> {
        if !(self.duration >= 0.0) {
            return Err(Error::Domain(format!("negative step duration {}", self.duration)));
        }
        let rabi = if self.kind == StepKind::Gap { 0.0 } else { self.rabi };
        let (t, d) = (self.duration, self.detuning);
        let w = rabi.hypot(d);
        let (s, c) = (0.5 * w * t).sin_cos();
        let (nx, nz) = if w > 0.0 { (rabi / w, d / w) } else { (0.0, 0.0) };
        let i = C64::i();
        let global = C64::from_polar(1.0, 0.5 * d * t);
        let u = Matrix2::new(
            C64::from(c) - i * s * nz,
            -i * s * nx,
            -i * s * nx,
            C64::from(c) + i * s * nz,
        );
        Ok(u * global)
    }
}

/// Applies the steps in order to `initial` (amplitudes of `g`, `r`).
pub fn propagate_sequence(steps: &[SequenceStep], initial: Vector2<C64>) -> Result<Vector2<C64>> {
    steps.iter().try_fold(initial, |psi, s| Ok(s.propagator()? * psi))
}

pub fn ground_state() -> Vector2<C64> {
    Vector2::new(C64::from(1.0), C64::from(0.0))
}

/// Rydberg probability after two equal pulses of total length `pulse_total`
/// separated by a free-evolution gap.
pub fn double_pulse_rydberg(rabi: f64, pulse_detuning: f64, pulse_total: f64, gap: f64, gap_detuning: f64) -> Result<f64> {
    let half = 0.5 * pulse_total;
    let steps = [
        SequenceStep::pulse(half, rabi, pulse_detuning),
        SequenceStep::gap(gap, gap_detuning),
        SequenceStep::pulse(half, rabi, pulse_detuning),
    ];
    Ok(propagate_sequence(&steps, ground_state())?[1].norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeamGeometry {
    CounterPropagating,
    CoPropagating,
}

/// Thermal velocity spread projected on the two-photon wavevector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DopplerModel {
    pub temperature_k: f64,
    pub mass_kg: f64,
    /// Effective two-photon wavevector (rad/m).
    pub k_eff: f64,
}

impl DopplerModel {
    pub fn new(temperature_k: f64, mass_kg: f64, lower_nm: f64, upper_nm: f64, geometry: BeamGeometry) -> Result<Self> {
        if !(temperature_k >= 0.0) || !(mass_kg > 0.0) {
            return Err(Error::Domain("Doppler model needs T >= 0 and m > 0".into()));
        }
        let (k1, k2) = (1.0 / (lower_nm * 1e-9), 1.0 / (upper_nm * 1e-9));
        let k = match geometry {
            BeamGeometry::CounterPropagating => (k2 - k1).abs(),
            BeamGeometry::CoPropagating => k1 + k2,
        };
        Ok(DopplerModel { temperature_k, mass_kg, k_eff: 2.0 * std::f64::consts::PI * k })
    }

    /// `sqrt(k_B T / m)` in m/s.
    pub fn sigma_velocity(&self) -> f64 {
        (si::BOLTZMANN * self.temperature_k / self.mass_kg).sqrt()
    }

    /// Standard deviation of the Doppler detuning (rad/s).
    pub fn sigma_detuning(&self) -> f64 {
        self.k_eff * self.sigma_velocity()
    }
}

/// `k_eff v` with `v ~ N(0, σ_v)`.
pub fn doppler_detuning_sample<R: Rng + ?Sized>(model: &DopplerModel, rng: &mut R) -> f64 {
    let s = model.sigma_detuning();
    if s == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, s).expect("finite sigma").sample(rng)
}

/// Monte Carlo average of the ground-state probability over Doppler detunings.
pub fn doppler_averaged_flop(p: &TwoLevel, model: &DopplerModel, t_s: &[f64], n_samples: usize, seed: u64) -> Result<TraceResult> {
    if n_samples < 100 {
        return Err(Error::Config(format!("Doppler averaging needs at least 100 samples, got {n_samples}")));
    }
    let rows = map_indexed(seed, Domain::Doppler, n_samples, |_, rng| {
        let shifted = TwoLevel { detuning: p.detuning + doppler_detuning_sample(model, rng), ..*p };
        t_s.iter().map(|&t| rabi_flop(&shifted, t).ground).collect::<Vec<_>>()
    });
    Ok(TraceResult::from_samples(t_s.to_vec(), &rows))
}

/// Doppler average of [`double_pulse_rydberg`] over total pulse lengths `pulse_totals`.
/// The Doppler shift adds to the detuning of the pulses and of the gap.
#[allow(clippy::too_many_arguments)]
pub fn doppler_averaged_double_pulse(
    rabi: f64,
    pulse_detuning: f64,
    pulse_totals: &[f64],
    gap: f64,
    gap_detuning: f64,
    model: &DopplerModel,
    n_samples: usize,
    seed: u64,
) -> Result<TraceResult> {
    if n_samples < 100 {
        return Err(Error::Config(format!("Doppler averaging needs at least 100 samples, got {n_samples}")));
    }
    let rows = map_indexed(seed, Domain::Doppler, n_samples, |_, rng| {
        let d = doppler_detuning_sample(model, rng);
        pulse_totals
            .iter()
            .map(|&t| double_pulse_rydberg(rabi, pulse_detuning + d, t, gap, gap_detuning + d))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(TraceResult::from_samples(pulse_totals.to_vec(), &rows))
}
