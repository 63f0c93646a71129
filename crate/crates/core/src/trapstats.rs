//! Optical trap, fluorescence counting and loss statistics.
//!
//! Trap coordinates: index 0 is along the trapping beam, index 1 is the
//! vertical radial axis (gravity along −1), index 2 the horizontal radial axis.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Normal, Poisson};
use statrs::function::erf::erf;

use crate::constants::{si, TWO_PI};
use crate::mc::{map_indexed, Domain};
use crate::{Error, Result};

/// Gaussian-beam dipole trap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapModel {
    pub depth_k: f64,
    pub waist_um: f64,
    pub wavelength_nm: f64,
    pub power_w: f64,
    pub mass_kg: f64,
}

impl TrapModel {
    pub fn new(depth_k: f64, waist_um: f64, wavelength_nm: f64, power_w: f64, mass_kg: f64) -> Result<Self> {
        if [depth_k, waist_um, wavelength_nm, mass_kg].iter().any(|x| !(*x > 0.0)) || !(power_w >= 0.0) {
            return Err(Error::Config("trap depth, waist, wavelength and mass must be positive".into()));
        }
        Ok(TrapModel { depth_k, waist_um, wavelength_nm, power_w, mass_kg })
    }

    /// 10 mK deep, 2.7 µm waist, 570 mW at 1030 nm.
    pub fn rb_fort(mass_kg: f64) -> Self {
        TrapModel { depth_k: 10e-3, waist_um: 2.7, wavelength_nm: 1030.0, power_w: 0.570, mass_kg }
    }

    pub fn depth_j(&self) -> f64 {
        self.depth_k * si::BOLTZMANN
    }

    pub fn rayleigh_range_um(&self) -> f64 {
        std::f64::consts::PI * self.waist_um.powi(2) / (self.wavelength_nm * 1e-3)
    }

    pub fn radial_frequency_hz(&self) -> f64 {
        let w = self.waist_um * 1e-6;
        (4.0 * self.depth_j() / (self.mass_kg * w * w)).sqrt() / TWO_PI
    }

    pub fn axial_frequency_hz(&self) -> f64 {
        let z = self.rayleigh_range_um() * 1e-6;
        (2.0 * self.depth_j() / (self.mass_kg * z * z)).sqrt() / TWO_PI
    }

    /// Potential energy (J) at `r` (m).
    pub fn potential(&self, r: &[f64; 3]) -> f64 {
        let zr = self.rayleigh_range_um() * 1e-6;
        let w0 = self.waist_um * 1e-6;
        let s = 1.0 + (r[0] / zr).powi(2);
        let rho2 = r[1] * r[1] + r[2] * r[2];
        -self.depth_j() / s * (-2.0 * rho2 / (w0 * w0 * s)).exp()
    }

    /// Thermal widths (m) of the harmonic approximation, ordered as the coordinates.
    fn harmonic_widths(&self, temperature_k: f64) -> [f64; 3] {
        let kt = si::BOLTZMANN * temperature_k;
        let radial = (kt / self.mass_kg).sqrt() / (TWO_PI * self.radial_frequency_hz());
        let axial = (kt / self.mass_kg).sqrt() / (TWO_PI * self.axial_frequency_hz());
        [axial, radial, radial]
    }
}

/// Fluorescence detection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionModel {
    /// Detected photoelectrons per atom per second of probing.
    pub rate_per_s: f64,
    pub background_per_s: f64,
    pub probe_time_s: f64,
    /// Wall time per unit probing time.
    pub duty_factor: f64,
    /// Already folded into `rate_per_s`; kept for reporting.
    pub collection_efficiency: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel { rate_per_s: 1e4, background_per_s: 0.0, probe_time_s: 12e-3, duty_factor: 2.5, collection_efficiency: 0.027 }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.rate_per_s, self.background_per_s, self.probe_time_s, self.duty_factor, self.collection_efficiency]
            .iter()
            .all(|x| *x >= 0.0 && x.is_finite());
        if !ok || self.rate_per_s * self.probe_time_s <= 0.0 {
            return Err(Error::Config("detection rates and times must be non-negative with a positive atom signal".into()));
        }
        Ok(())
    }

    pub fn single_atom_counts(&self) -> f64 {
        self.rate_per_s * self.probe_time_s
    }

    pub fn background_counts(&self) -> f64 {
        self.background_per_s * self.probe_time_s
    }

    pub fn mean_counts(&self, atoms: usize) -> f64 {
        atoms as f64 * self.single_atom_counts() + self.background_counts()
    }

    /// Lower count bound of class `k ≥ 1`: midway between the means for `k − 1` and `k` atoms.
    pub fn threshold(&self, k: usize) -> f64 {
        self.background_counts() + (k as f64 - 0.5) * self.single_atom_counts()
    }
}

/// Atom loss during and between measurements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossModel {
    /// Background-gas 1/e lifetime.
    pub lifetime_s: f64,
    /// Probability that a single atom survives one probe.
    pub probe_survival: f64,
    /// Light-assisted ejection rate per pair during probing; both atoms are lost.
    pub pair_loss_per_s: f64,
    /// Time between the two measurements.
    pub hold_s: f64,
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel { lifetime_s: 3.0, probe_survival: 0.88, pair_loss_per_s: 1000.0, hold_s: 0.03 }
    }
}

impl LossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime_s > 0.0) || !(0.0..=1.0).contains(&self.probe_survival) || !(self.pair_loss_per_s >= 0.0) || !(self.hold_s >= 0.0) {
            return Err(Error::Config("lifetime must be positive, survival in [0, 1], rates and hold time non-negative".into()));
        }
        Ok(())
    }
}

/// Photoelectron count for `atoms` atoms present throughout the probe.
pub fn histogram_counts<R: Rng + ?Sized>(atoms: usize, det: &DetectionModel, rng: &mut R) -> u64 {
    poisson(det.mean_counts(atoms), rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// Atom number whose mean count is nearest, with ties going to the larger number.
pub fn classify_atom_number(count: u64, det: &DetectionModel) -> usize {
    let x = (count as f64 - det.background_counts()) / det.single_atom_counts();
    (x + 0.5).floor().max(0.0) as usize
}

/// Loading draws for a count histogram: `(atoms, count)` per trial.
pub fn simulate_histogram(mean_atoms: f64, det: &DetectionModel, trials: usize, seed: u64) -> Result<Vec<(usize, u64)>> {
    det.validate()?;
    if !(mean_atoms >= 0.0) {
        return Err(Error::Config("mean atom number must be non-negative".into()));
    }
    Ok(map_indexed(seed, Domain::Histogram, trials, |_, rng| {
        let n = poisson(mean_atoms, rng) as usize;
        (n, histogram_counts(n, det, rng))
    }))
}

/// One probe: pair ejection while counting. Returns the count and the atoms left.
fn probe<R: Rng + ?Sized>(atoms: usize, det: &DetectionModel, loss: &LossModel, rng: &mut R) -> (u64, usize) {
    let mut n = atoms;
    let mut atom_time = 0.0;
    let mut t = 0.0;
    let total = det.probe_time_s;
    while n >= 2 && t < total {
        if loss.pair_loss_per_s.is_infinite() {
            n %= 2;
            break;
        }
        let rate = loss.pair_loss_per_s * (n * (n - 1) / 2) as f64;
        if rate <= 0.0 {
            break;
        }
        let dt = Exp::new(rate).expect("positive rate").sample(rng);
        if t + dt >= total {
            break;
        }
        atom_time += n as f64 * dt;
        t += dt;
        n -= 2;
    }
    atom_time += n as f64 * (total - t);
    let count = poisson(det.rate_per_s * atom_time + det.background_counts(), rng);
    (count, n)
}

fn binomial<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> usize {
    if n == 0 {
        return 0;
    }
    Binomial::new(n as u64, p.clamp(0.0, 1.0)).expect("valid binomial").sample(rng) as usize
}

/// Largest class reported separately; more atoms fall into this class.
pub const MAX_CLASS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct PreselectionResult {
    /// `joint[first][second]` trial counts.
    pub joint: [[u64; MAX_CLASS + 1]; MAX_CLASS + 1],
    pub trials: usize,
    /// `P(second = 1 | first = 1)` and its standard error.
    pub retention: (f64, f64),
    /// `P(second ≥ 2 | first ≥ 2)` and its standard error.
    pub multi_retention: (f64, f64),
}

fn conditional(hits: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Load, measure, hold, measure again.
pub fn preselection_experiment(mean_atoms: f64, det: &DetectionModel, loss: &LossModel, trials: usize, seed: u64) -> Result<PreselectionResult> {
    det.validate()?;
    loss.validate()?;
    if trials < 1000 {
        return Err(Error::Config(format!("preselection needs at least 1000 trials, got {trials}")));
    }
    if !(mean_atoms >= 0.0) {
        return Err(Error::Config("mean atom number must be non-negative".into()));
    }
    let hold_survival = (-loss.hold_s / loss.lifetime_s).exp();
    let outcomes = map_indexed(seed, Domain::Preselection, trials, |_, rng| {
        let n0 = poisson(mean_atoms, rng) as usize;
        let (c1, n1) = probe(n0, det, loss, rng);
        let n2 = binomial(binomial(n1, loss.probe_survival, rng), hold_survival, rng);
        let (c2, _) = probe(n2, det, loss, rng);
        (classify_atom_number(c1, det).min(MAX_CLASS), classify_atom_number(c2, det).min(MAX_CLASS))
    });
    let mut joint = [[0u64; MAX_CLASS + 1]; MAX_CLASS + 1];
    for (a, b) in outcomes {
        joint[a][b] += 1;
    }
    let first1: u64 = joint[1].iter().sum();
    let first_multi: u64 = joint[2..].iter().flatten().sum();
    let multi_hits: u64 = joint[2..].iter().map(|row| row[2..].iter().sum::<u64>()).sum();
    Ok(PreselectionResult {
        joint,
        trials,
        retention: conditional(joint[1][1], first1),
        multi_retention: conditional(multi_hits, first_multi),
    })
}

/// `P(K < E)` for a Maxwell–Boltzmann kinetic energy, `x = E/kT`.
fn bound_fraction(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (erf(x.sqrt()) - 2.0 * (x / std::f64::consts::PI).sqrt() * (-x).exp()).max(0.0)
}

const CHAIN_LENGTH: usize = 64;
const BURN_IN: usize = 400;
const THIN: usize = 8;

/// Bound atoms in thermal equilibrium: `(position m, velocity m/s)`.
fn thermal_chain<R: Rng + ?Sized>(trap: &TrapModel, temperature_k: f64, count: usize, rng: &mut R) -> Vec<([f64; 3], [f64; 3])> {
    let kt = si::BOLTZMANN * temperature_k;
    let widths = trap.harmonic_widths(temperature_k);
    let log_target = |r: &[f64; 3]| {
        let u = trap.potential(r);
        let f = bound_fraction(-u / kt);
        if f > 0.0 { -u / kt + f.ln() } else { f64::NEG_INFINITY }
    };
    let step = Normal::new(0.0, 1.0).expect("unit normal");
    let mut r = [0.0; 3];
    let mut lp = log_target(&r);
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let trial = [
            r[0] + 0.8 * widths[0] * step.sample(rng),
            r[1] + 0.8 * widths[1] * step.sample(rng),
            r[2] + 0.8 * widths[2] * step.sample(rng),
        ];
        let lq = log_target(&trial);
        if lq - lp >= rng.random::<f64>().ln() {
            r = trial;
            lp = lq;
        }
        k += 1;
        if k > BURN_IN && k.is_multiple_of(THIN) {
            let v = bound_velocity(trap, &r, kt, rng);
            out.push((r, v));
        }
    }
    out
}

/// Maxwell–Boltzmann velocity conditioned on a bound total energy at `r`.
fn bound_velocity<R: Rng + ?Sized>(trap: &TrapModel, r: &[f64; 3], kt: f64, rng: &mut R) -> [f64; 3] {
    let e_max = -trap.potential(r);
    let m = trap.mass_kg;
    let sigma = (kt / m).sqrt();
    let normal = Normal::new(0.0, sigma).expect("positive width");
    if e_max >= kt {
        loop {
            let v = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
            if 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) < e_max {
                return v;
            }
        }
    }
    let v_max = (2.0 * e_max / m).sqrt();
    loop {
        let v = [
            v_max * (2.0 * rng.random::<f64>() - 1.0),
            v_max * (2.0 * rng.random::<f64>() - 1.0),
            v_max * (2.0 * rng.random::<f64>() - 1.0),
        ];
        let k = 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if k < e_max && rng.random::<f64>() < (-k / kt).exp() {
            return v;
        }
    }
}

fn recaptured(trap: &TrapModel, r: &[f64; 3], v: &[f64; 3], t: f64) -> bool {
    let g = si::STANDARD_GRAVITY;
    let pos = [r[0] + v[0] * t, r[1] + v[1] * t - 0.5 * g * t * t, r[2] + v[2] * t];
    let vel = [v[0], v[1] - g * t, v[2]];
    let k = 0.5 * trap.mass_kg * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]);
    k + trap.potential(&pos) < 0.0
}

/// Recapture probability and standard error at each drop time, from one shared set of atoms.
pub fn drop_recapture_curve(trap: &TrapModel, temperature_k: f64, t_drop_s: &[f64], trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(temperature_k > 0.0) {
        return Err(Error::Domain("temperature must be positive".into()));
    }
    if t_drop_s.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Domain("drop times must be non-negative".into()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let chains = trials.div_ceil(CHAIN_LENGTH);
    let hits = map_indexed(seed, Domain::DropRecapture, chains, |c, rng| {
        let count = CHAIN_LENGTH.min(trials - c * CHAIN_LENGTH);
        let atoms = thermal_chain(trap, temperature_k, count, rng);
        t_drop_s
            .iter()
            .map(|&t| atoms.iter().filter(|(r, v)| recaptured(trap, r, v, t)).count())
            .collect::<Vec<_>>()
    });
    Ok((0..t_drop_s.len())
        .map(|k| {
            let h: usize = hits.iter().map(|row| row[k]).sum();
            conditional(h as u64, trials as u64)
        })
        .collect())
}

/// Recapture probability after a single drop.
pub fn drop_recapture(trap: &TrapModel, temperature_k: f64, t_drop_s: f64, trials: usize, seed: u64) -> Result<(f64, f64)> {
    Ok(drop_recapture_curve(trap, temperature_k, &[t_drop_s], trials, seed)?[0])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermometryOptions {
    /// Candidate temperatures (K), increasing.
    pub grid_k: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub bootstrap: usize,
}

impl Default for ThermometryOptions {
    fn default() -> Self {
        let grid_k = (0..=24).map(|k| 0.1e-3 * 30f64.powf(k as f64 / 24.0)).collect();
        ThermometryOptions { grid_k, trials: 4000, seed: 1, bootstrap: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureEstimate {
    pub temperature_k: f64,
    /// 2.5 % and 97.5 % bootstrap quantiles.
    pub interval_k: (f64, f64),
    /// Sum of squared residuals on the grid.
    pub objective: Vec<f64>,
}

/// Minimizer of `objective` over `ln T`, refined by a parabola through the best grid point.
fn refine_minimum(ln_t: &[f64], objective: &[f64]) -> f64 {
    let i = objective
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v < objective[best] { k } else { best });
    if i == 0 || i + 1 == objective.len() {
        return ln_t[i];
    }
    let (x0, x1, x2) = (ln_t[i - 1], ln_t[i], ln_t[i + 1]);
    let (y0, y1, y2) = (objective[i - 1], objective[i], objective[i + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den.abs() < f64::MIN_POSITIVE {
        return x1;
    }
    (x1 - 0.5 * num / den).clamp(x0, x2)
}

/// Least-squares temperature from `(t_drop s, recapture)` points.
pub fn estimate_temperature(data: &[(f64, f64)], trap: &TrapModel, opts: &ThermometryOptions) -> Result<TemperatureEstimate> {
    if data.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 drop times, got {}", data.len())));
    }
    if opts.grid_k.len() < 3 || opts.grid_k.windows(2).any(|w| !(w[1] > w[0])) || !(opts.grid_k[0] > 0.0) {
        return Err(Error::Config("temperature grid needs at least 3 increasing positive values".into()));
    }
    let times: Vec<f64> = data.iter().map(|d| d.0).collect();
    let curves: Vec<Vec<f64>> = opts
        .grid_k
        .iter()
        .map(|&t| Ok(drop_recapture_curve(trap, t, &times, opts.trials, opts.seed)?.into_iter().map(|p| p.0).collect()))
        .collect::<Result<_>>()?;
    let sse = |idx: &[usize]| -> Vec<f64> {
        curves
            .iter()
            .map(|c| idx.iter().map(|&k| (c[k] - data[k].1).powi(2)).sum())
            .collect()
    };
    let all: Vec<usize> = (0..data.len()).collect();
    let objective = sse(&all);
    let lo = objective.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = objective.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-6 * data.len() as f64 {
        return Err(Error::Degenerate(
            "recapture data do not distinguish temperatures on the grid; use longer drop times".into(),
        ));
    }
    let ln_t: Vec<f64> = opts.grid_k.iter().map(|t| t.ln()).collect();
    let best = refine_minimum(&ln_t, &objective).exp();
    let mut boots = map_indexed(opts.seed, Domain::Bootstrap, opts.bootstrap, |_, rng| {
        let idx: Vec<usize> = (0..data.len()).map(|_| rng.random_range(0..data.len())).collect();
        refine_minimum(&ln_t, &sse(&idx)).exp()
    });
    boots.sort_by(f64::total_cmp);
    let interval = if boots.is_empty() {
        (best, best)
    } else {
        let q = |p: f64| boots[((p * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
        (q(0.025), q(0.975))
    };
    Ok(TemperatureEstimate { temperature_k: best, interval_k: interval, objective })
}
