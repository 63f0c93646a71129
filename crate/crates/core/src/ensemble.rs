//! Monte Carlo of few-atom clouds driven towards a Rydberg level.
//!
//! Each atom is a two-level system. A trial draws the atom number, the
//! positions, per-atom Doppler detunings and one van der Waals eigenvalue per
//! pair, then evolves the frozen configuration exactly under
//!
//! `H/ħ = Σ_i [(Ω/2) σx_i − δ_i n_i] + 2π Σ_{i<j} V_ij n_i n_j`
//!
//! with `Ω`, `δ_i` in rad/s and the pair shifts `V_ij` in Hz.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::constants::TWO_PI;
use crate::mc::{map_indexed, Domain, TraceResult};
use crate::pulses::{doppler_detuning_sample, DopplerModel, TwoLevel};
use crate::vdw::{eigenmodes, effective_vdw_operator, overlap_weights, VdwModel};
use crate::{Error, Result};

/// Largest atom number handled (state dimension 2¹²).
pub const MAX_ATOMS: usize = 12;
/// Pairs closer than this (µm) are redrawn.
pub const MIN_SEPARATION_UM: f64 = 0.05;
/// Polar-angle bins of the overlap table (1° wide, 0°..=180°).
pub const POLAR_BINS: usize = 181;

/// Gaussian cloud widths in µm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudGeometry {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
}

impl Default for CloudGeometry {
    fn default() -> Self {
        CloudGeometry { sigma_x: 3.9, sigma_y: 0.43, sigma_z: 0.43 }
    }
}

impl CloudGeometry {
    pub fn validate(&self) -> Result<()> {
        if [self.sigma_x, self.sigma_y, self.sigma_z].iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("cloud widths must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AtomNumberLaw {
    Poisson { mean: f64 },
    Fixed(usize),
}

impl AtomNumberLaw {
    /// Probability that a draw exceeds `cap`.
    pub fn truncation_mass(&self, cap: usize) -> f64 {
        match *self {
            AtomNumberLaw::Fixed(n) => (n > cap) as u8 as f64,
            AtomNumberLaw::Poisson { mean } => {
                let mut term = (-mean).exp();
                let mut cdf = term;
                for k in 1..=cap {
                    term *= mean / k as f64;
                    cdf += term;
                }
                (1.0 - cdf).max(0.0)
            }
        }
    }
}

/// Eigenvalues `D` and their weights `|κ|²` per polar angle of the pair axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTable {
    pub d: Vec<f64>,
    /// `weights[bin][mode]`, bin = polar angle in whole degrees.
    pub weights: Vec<Vec<f64>>,
}

impl ModeTable {
    /// Fills every bin up front; the table is read-only afterwards.
    pub fn from_model(model: &VdwModel) -> Result<Self> {
        let op = effective_vdw_operator(model)?;
        let modes = eigenmodes(&op, model.j());
        let weights = (0..POLAR_BINS)
            .map(|b| overlap_weights(&modes, model.j(), (b as f64).to_radians()))
            .collect();
        Ok(ModeTable { d: modes.iter().map(|m| m.d).collect(), weights })
    }

    pub fn bin(polar: f64) -> usize {
        (polar.to_degrees().round() as usize).min(POLAR_BINS - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, polar: f64, rng: &mut R) -> f64 {
        let w = &self.weights[Self::bin(polar)];
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (d, wi) in self.d.iter().zip(w) {
            if u < *wi {
                return *d;
            }
            u -= wi;
        }
        *self.d.last().expect("non-empty table")
    }
}

/// How a pair's eigenvalue `D` is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum PairModeRule {
    /// Draw from `|κ_φ|²` for the pair's actual axis.
    Sampled(Arc<ModeTable>),
    /// Use the same `D` for every pair.
    Forced(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRule {
    pub c6_hz_um6: f64,
    pub modes: PairModeRule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub law: AtomNumberLaw,
    pub cap: usize,
    pub geometry: CloudGeometry,
    pub drive: TwoLevel,
    pub doppler: Option<DopplerModel>,
    pub interaction: InteractionRule,
    pub trials: usize,
    pub seed: u64,
    /// Basis states holding a pair with `|V| > cutoff` (Hz) are dropped; `None` keeps all.
    pub blockade_cutoff_hz: Option<f64>,
    /// Keep per-trial samples for auditing.
    pub record_trials: bool,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.cap == 0 || self.cap > MAX_ATOMS {
            return Err(Error::Config(format!("atom cap must be in 1..={MAX_ATOMS}, got {}", self.cap)));
        }
        if let AtomNumberLaw::Poisson { mean } = self.law {
            if !(mean >= 0.0) {
                return Err(Error::Config("mean atom number must be non-negative".into()));
            }
        }
        if let Some(c) = self.blockade_cutoff_hz {
            if !(c > 0.0) {
                return Err(Error::Config("blockade cutoff must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One trial's atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSample {
    pub positions: Vec<[f64; 3]>,
    /// Doppler detunings (rad/s).
    pub doppler: Vec<f64>,
    /// The drawn number exceeded the cap and was clipped.
    pub truncated: bool,
    /// Positions redrawn because a pair was closer than [`MIN_SEPARATION_UM`].
    pub resampled_pairs: usize,
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Draws the atom number, positions (µm) and Doppler detunings.
pub fn sample_atoms<R: Rng + ?Sized>(config: &EnsembleConfig, rng: &mut R) -> Result<AtomSample> {
    let drawn = match config.law {
        AtomNumberLaw::Fixed(n) => n,
        AtomNumberLaw::Poisson { mean } if mean > 0.0 => {
            Poisson::new(mean).map_err(|e| Error::Config(e.to_string()))?.sample(rng) as usize
        }
        AtomNumberLaw::Poisson { .. } => 0,
    };
    let n = drawn.min(config.cap);
    let g = config.geometry;
    let axis = |s: f64| Normal::new(0.0, s).expect("validated width");
    let (nx, ny, nz) = (axis(g.sigma_x), axis(g.sigma_y), axis(g.sigma_z));
    let all_zero = g.sigma_x == 0.0 && g.sigma_y == 0.0 && g.sigma_z == 0.0;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut resampled = 0;
    for _ in 0..n {
        loop {
            let p = [nx.sample(rng), ny.sample(rng), nz.sample(rng)];
            if all_zero || positions.iter().all(|q| distance(&p, q) >= MIN_SEPARATION_UM) {
                positions.push(p);
                break;
            }
            resampled += 1;
        }
    }
    let doppler = (0..n)
        .map(|_| config.doppler.as_ref().map_or(0.0, |m| doppler_detuning_sample(m, rng)))
        .collect();
    Ok(AtomSample { positions, doppler, truncated: drawn > config.cap, resampled_pairs: resampled })
}

/// Pairwise shifts and the eigenvalue drawn for each pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairShifts {
    /// Symmetric, zero diagonal, Hz.
    pub v_hz: DMatrix<f64>,
    /// `D` per pair in `(i, j)` order with `i < j`.
    pub d: Vec<f64>,
}

/// `V_ij = C6 D_ij / R_ij⁶` with `D_ij` drawn independently per pair.
pub fn assign_pair_interactions<R: Rng + ?Sized>(positions: &[[f64; 3]], rule: &InteractionRule, rng: &mut R) -> Result<PairShifts> {
    let n = positions.len();
    let mut v = DMatrix::zeros(n, n);
    let mut ds = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&positions[i], &positions[j]);
            let r = distance(a, b);
            if r < MIN_SEPARATION_UM {
                return Err(Error::Domain(format!("atoms {i} and {j} are {r:.3} µm apart")));
            }
            let d = match &rule.modes {
                PairModeRule::Forced(d) => *d,
                PairModeRule::Sampled(table) => {
                    let polar = ((b[2] - a[2]) / r).clamp(-1.0, 1.0).acos();
                    table.sample(polar, rng)
                }
            };
            let x = rule.c6_hz_um6 * d / r.powi(6);
            v[(i, j)] = x;
            v[(j, i)] = x;
            ds.push(d);
        }
    }
    Ok(PairShifts { v_hz: v, d: ds })
}

/// Populations on the time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveResult {
    /// `p_ground[t][i]`.
    pub p_ground: Vec<Vec<f64>>,
    /// `rydberg_count[t][k]` = probability of exactly `k` Rydberg atoms.
    pub rydberg_count: Vec<Vec<f64>>,
    /// Largest block diagonalized.
    pub dimension: usize,
}

/// Exact evolution from the all-ground state by diagonalizing `H`.
///
/// `detunings` are per-atom (rad/s), `shifts_hz` the symmetric pair matrix.
/// Groups of atoms with no shift between them evolve independently.
pub fn evolve_ensemble(
    rabi: f64,
    detunings: &[f64],
    shifts_hz: &DMatrix<f64>,
    times: &[f64],
    cutoff_hz: Option<f64>,
) -> Result<EvolveResult> {
    let n = detunings.len();
    if n > MAX_ATOMS {
        return Err(Error::Capacity { atoms: n, cap: MAX_ATOMS });
    }
    if shifts_hz.nrows() != n || shifts_hz.ncols() != n {
        return Err(Error::Domain("shift matrix does not match the atom number".into()));
    }
    let nt = times.len();
    let mut out = EvolveResult { p_ground: vec![vec![1.0; n]; nt], rydberg_count: vec![vec![1.0]; nt], dimension: 1 };
    for group in interacting_groups(shifts_hz) {
        let det: Vec<f64> = group.iter().map(|&i| detunings[i]).collect();
        let sub = shifts_hz.select_rows(&group).select_columns(&group);
        let part = evolve_block(rabi, &det, &sub, times, cutoff_hz)?;
        out.dimension = out.dimension.max(part.dimension);
        for ti in 0..nt {
            for (k, &i) in group.iter().enumerate() {
                out.p_ground[ti][i] = part.p_ground[ti][k];
            }
            let a = &out.rydberg_count[ti];
            let b = &part.rydberg_count[ti];
            let mut c = vec![0.0; a.len() + b.len() - 1];
            for (x, pa) in a.iter().enumerate() {
                for (y, pb) in b.iter().enumerate() {
                    c[x + y] += pa * pb;
                }
            }
            out.rydberg_count[ti] = c;
        }
    }
    Ok(out)
}

/// Connected components of the graph with an edge wherever `V_ij ≠ 0`.
fn interacting_groups(shifts_hz: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = shifts_hz.nrows();
    let mut label = vec![usize::MAX; n];
    let mut groups = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut group = vec![start];
        label[start] = groups.len();
        let mut k = 0;
        while k < group.len() {
            let i = group[k];
            for j in 0..n {
                if label[j] == usize::MAX && shifts_hz[(i, j)] != 0.0 {
                    label[j] = groups.len();
                    group.push(j);
                }
            }
            k += 1;
        }
        group.sort_unstable();
        groups.push(group);
    }
    groups
}

fn evolve_block(rabi: f64, detunings: &[f64], shifts_hz: &DMatrix<f64>, times: &[f64], cutoff_hz: Option<f64>) -> Result<EvolveResult> {
    let n = detunings.len();
    let mut forbidden = Vec::new();
    if let Some(c) = cutoff_hz {
        for i in 0..n {
            for j in i + 1..n {
                if shifts_hz[(i, j)].abs() > c {
                    forbidden.push((1usize << i) | (1usize << j));
                }
            }
        }
    }
    let states: Vec<usize> = (0..1usize << n)
        .filter(|s| forbidden.iter().all(|f| s & f != *f))
        .collect();
    let mut index = vec![usize::MAX; 1 << n];
    for (k, &s) in states.iter().enumerate() {
        index[s] = k;
    }
    let dim = states.len();

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (k, &s) in states.iter().enumerate() {
        let mut e = 0.0;
        for i in 0..n {
            if s >> i & 1 == 1 {
                e -= detunings[i];
                for j in i + 1..n {
                    if s >> j & 1 == 1 {
                        e += TWO_PI * shifts_hz[(i, j)];
                    }
                }
            }
            let t = index[s ^ (1 << i)];
            if t != usize::MAX {
                h[(k, t)] = 0.5 * rabi;
            }
        }
        h[(k, k)] = e;
    }

    let eig = SymmetricEigen::new(h);
    let u = &eig.eigenvectors;
    let c: Vec<f64> = (0..dim).map(|m| u[(0, m)]).collect();
    let nt = times.len();
    let mut re = DMatrix::<f64>::zeros(dim, nt);
    let mut im = DMatrix::<f64>::zeros(dim, nt);
    for (ti, &t) in times.iter().enumerate() {
        for m in 0..dim {
            let (s, co) = (eig.eigenvalues[m] * t).sin_cos();
            re[(m, ti)] = c[m] * co;
            im[(m, ti)] = -c[m] * s;
        }
    }
    let re = u * re;
    let im = u * im;

    let mut p_ground = Vec::with_capacity(nt);
    let mut rydberg_count = Vec::with_capacity(nt);
    for ti in 0..nt {
        let mut pr = vec![0.0; n];
        let mut counts = vec![0.0; n + 1];
        for (k, &s) in states.iter().enumerate() {
            let p = re[(k, ti)].powi(2) + im[(k, ti)].powi(2);
            counts[s.count_ones() as usize] += p;
            for (i, x) in pr.iter_mut().enumerate() {
                if s >> i & 1 == 1 {
                    *x += p;
                }
            }
        }
        let norm: f64 = counts.iter().sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!("state norm drifted to {norm}")));
        }
        p_ground.push(pr.iter().map(|x| 1.0 - x).collect());
        rydberg_count.push(counts);
    }
    Ok(EvolveResult { p_ground, rydberg_count, dimension: dim })
}

/// Audit record of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub positions: Vec<[f64; 3]>,
    pub d: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    /// Mean retained fraction given at least one atom, normalized at the first time point.
    pub trace: TraceResult,
    pub trials_total: usize,
    pub trials_empty: usize,
    pub trials_truncated: usize,
    /// Probability mass of the atom-number law above the cap.
    pub truncation_mass: f64,
    pub resampled_pairs: usize,
    /// Retained fraction per trial with at least one atom, same normalization as `trace`.
    pub per_trial: Vec<Vec<f64>>,
    pub records: Vec<TrialRecord>,
}

struct TrialOutcome {
    retained: Option<Vec<f64>>,
    truncated: bool,
    resampled: usize,
    record: Option<TrialRecord>,
}

fn run_trial<R: Rng + ?Sized>(config: &EnsembleConfig, times: &[f64], trial: usize, rng: &mut R) -> Result<TrialOutcome> {
    let atoms = sample_atoms(config, rng)?;
    let n = atoms.positions.len();
    let shifts = assign_pair_interactions(&atoms.positions, &config.interaction, rng)?;
    let record = config.record_trials.then(|| TrialRecord {
        trial,
        n,
        positions: atoms.positions.clone(),
        d: shifts.d.clone(),
    });
    let retained = if n == 0 {
        None
    } else {
        let det: Vec<f64> = atoms.doppler.iter().map(|d| config.drive.detuning + d).collect();
        let ev = evolve_ensemble(config.drive.rabi, &det, &shifts.v_hz, times, config.blockade_cutoff_hz)?;
        Some(ev.p_ground.iter().map(|pg| pg.iter().sum::<f64>() / n as f64).collect())
    };
    Ok(TrialOutcome { retained, truncated: atoms.truncated, resampled: atoms.resampled_pairs, record })
}

/// Mean ground-state retention over `config.trials` trials.
pub fn retention_signal(config: &EnsembleConfig, times: &[f64]) -> Result<EnsembleResult> {
    config.validate()?;
    let outcomes = map_indexed(config.seed, Domain::Ensemble, config.trials, |i, rng| run_trial(config, times, i, rng));
    let mut rows = Vec::new();
    let mut res = EnsembleResult {
        trace: TraceResult { t_s: times.to_vec(), signal: vec![], stderr: vec![], trials: 0 },
        trials_total: config.trials,
        trials_empty: 0,
        trials_truncated: 0,
        truncation_mass: config.law.truncation_mass(config.cap),
        resampled_pairs: 0,
        per_trial: Vec::new(),
        records: Vec::new(),
    };
    for o in outcomes {
        let o = o?;
        res.trials_truncated += o.truncated as usize;
        res.resampled_pairs += o.resampled;
        res.records.extend(o.record);
        match o.retained {
            Some(r) => rows.push(r),
            None => res.trials_empty += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} trials had zero atoms; increase the mean atom number or the trial count",
            config.trials
        )));
    }
    let first = TraceResult::from_samples(times.to_vec(), &rows).signal.first().copied().unwrap_or(1.0);
    if first > 0.0 {
        rows.iter_mut().flatten().for_each(|x| *x /= first);
    }
    res.trace = TraceResult::from_samples(times.to_vec(), &rows);
    res.per_trial = rows;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::rabi_flop;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(law: AtomNumberLaw) -> EnsembleConfig {
        EnsembleConfig {
            law,
            cap: MAX_ATOMS,
            geometry: CloudGeometry::default(),
            drive: TwoLevel::resonant(TWO_PI * 0.49e6),
            doppler: None,
            interaction: InteractionRule { c6_hz_um6: 450e9, modes: PairModeRule::Forced(0.81) },
            trials: 10,
            seed: 1,
            blockade_cutoff_hz: None,
            record_trials: false,
        }
    }

    fn grid() -> Vec<f64> {
        (0..60).map(|k| k as f64 * 0.1e-6).collect()
    }

    #[test]
    fn poisson_counts() {
        let cfg = config(AtomNumberLaw::Poisson { mean: 1.7 });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let mut hist = [0usize; 3];
        for _ in 0..draws {
            let n = sample_atoms(&cfg, &mut rng).unwrap().positions.len();
            if n < 3 {
                hist[n] += 1;
            }
        }
        for (k, want) in [(0, (-1.7f64).exp()), (1, 1.7 * (-1.7f64).exp())] {
            let p = hist[k] as f64 / draws as f64;
            let sd = (want * (1.0 - want) / draws as f64).sqrt();
            assert!((p - want).abs() < 3.0 * sd, "k={k}: {p} vs {want}");
        }
    }

    #[test]
    fn pair_distance_scale() {
        let cfg = config(AtomNumberLaw::Fixed(2));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let mut s = 0.0;
        for _ in 0..n {
            let a = sample_atoms(&cfg, &mut rng).unwrap();
            s += distance(&a.positions[0], &a.positions[1]).powi(2);
        }
        let g = cfg.geometry;
        let want = (2.0 * (g.sigma_x.powi(2) + g.sigma_y.powi(2) + g.sigma_z.powi(2))).sqrt();
        let rms = (s / n as f64).sqrt();
        assert!((rms / want - 1.0).abs() < 0.01, "{rms} vs {want}");
    }

    #[test]
    fn point_cloud_collapses() {
        let mut cfg = config(AtomNumberLaw::Fixed(4));
        cfg.geometry = CloudGeometry { sigma_x: 0.0, sigma_y: 0.0, sigma_z: 0.0 };
        let a = sample_atoms(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(a.positions.iter().all(|p| p == &[0.0, 0.0, 0.0]));
    }

    #[test]
    fn interaction_strengths() {
        let rule = |d| InteractionRule { c6_hz_um6: 450e9, modes: PairModeRule::Forced(d) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pos = [[0.0, 0.0, 0.0], [7.8, 0.0, 0.0]];
        let v = assign_pair_interactions(&pos, &rule(0.81), &mut rng).unwrap().v_hz[(0, 1)];
        assert!((v / 1.6e6 - 1.0).abs() < 0.02);
        let w = assign_pair_interactions(&pos, &rule(0.0024), &mut rng).unwrap().v_hz[(1, 0)];
        assert!((w / 4.8e3 - 1.0).abs() < 0.02);
        let far = [[0.0, 0.0, 0.0], [15.6, 0.0, 0.0]];
        let u = assign_pair_interactions(&far, &rule(0.81), &mut rng).unwrap().v_hz[(0, 1)];
        assert!((v / u - 64.0).abs() < 1e-9);
        assert!(assign_pair_interactions(&[[0.0; 3], [0.01, 0.0, 0.0]], &rule(0.81), &mut rng).is_err());
    }

    #[test]
    fn single_atom_reduces_to_rabi_flop() {
        let t = grid();
        let drive = TwoLevel { rabi: TWO_PI * 0.49e6, detuning: TWO_PI * 0.2e6, decay: 0.0 };
        let ev = evolve_ensemble(drive.rabi, &[drive.detuning], &DMatrix::zeros(1, 1), &t, None).unwrap();
        assert_eq!(ev.dimension, 2);
        for (k, &ti) in t.iter().enumerate() {
            assert!((ev.p_ground[k][0] - rabi_flop(&drive, ti).ground).abs() < 1e-10);
        }
    }

    #[test]
    fn independent_pair_flops_as_product() {
        let t = grid();
        let om = TWO_PI * 0.5e6;
        let ev = evolve_ensemble(om, &[0.0, 0.0], &DMatrix::zeros(2, 2), &t, None).unwrap();
        for (k, &ti) in t.iter().enumerate() {
            let want = (0.5 * om * ti).sin().powi(4);
            assert!((ev.rydberg_count[k][2] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn blockaded_pair() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.01e-6).collect();
        let om = TWO_PI * 0.5e6;
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 50e6, 50e6, 0.0]);
        let ev = evolve_ensemble(om, &[0.0, 0.0], &v, &t, None).unwrap();
        for (k, &ti) in t.iter().enumerate() {
            assert!(ev.rydberg_count[k][2] < 1e-3);
            let single = (std::f64::consts::SQRT_2 * om * ti / 2.0).sin().powi(2);
            assert!((ev.rydberg_count[k][1] - single).abs() < 2e-3);
        }
    }

    #[test]
    fn split_groups_match_joint_evolution() {
        let t = grid();
        let v = DMatrix::from_row_slice(4, 4, &[
            0.0, 2e5, 0.0, 0.0, //
            2e5, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 7e5, //
            0.0, 0.0, 7e5, 0.0,
        ]);
        let det = [1e5, -2e5, 3e5, 0.0];
        let split = evolve_ensemble(3e6, &det, &v, &t, None).unwrap();
        let joint = evolve_block(3e6, &det, &v, &t, None).unwrap();
        assert_eq!(split.dimension, 4);
        assert_eq!(joint.dimension, 16);
        for ti in 0..t.len() {
            for (a, b) in split.rydberg_count[ti].iter().zip(&joint.rydberg_count[ti]) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in split.p_ground[ti].iter().zip(&joint.p_ground[ti]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn too_many_atoms() {
        let n = MAX_ATOMS + 1;
        let err = evolve_ensemble(1.0, &vec![0.0; n], &DMatrix::zeros(n, n), &[0.0], None).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn cutoff_drops_only_blockaded_states() {
        let v = DMatrix::from_row_slice(3, 3, &[0.0, 1e9, 1.0, 1e9, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let ev = evolve_ensemble(1e6, &[0.0; 3], &v, &[0.0, 1e-6], Some(1e8)).unwrap();
        assert_eq!(ev.dimension, 6);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pos: Vec<[f64; 3]> = (0..4).map(|i| [3.0 * i as f64 + rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
        let rule = InteractionRule { c6_hz_um6: 450e9, modes: PairModeRule::Forced(0.3) };
        let det = [0.1e6, -0.2e6, 0.3e6, 0.0];
        let t = grid();
        let run = |perm: &[usize]| {
            let p: Vec<[f64; 3]> = perm.iter().map(|&i| pos[i]).collect();
            let d: Vec<f64> = perm.iter().map(|&i| det[i]).collect();
            let v = assign_pair_interactions(&p, &rule, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().v_hz;
            evolve_ensemble(TWO_PI * 0.49e6, &d, &v, &t, None).unwrap().rydberg_count
        };
        let a = run(&[0, 1, 2, 3]);
        let b = run(&[2, 0, 3, 1]);
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn all_empty_is_an_error() {
        let cfg = config(AtomNumberLaw::Poisson { mean: 0.0 });
        let err = retention_signal(&cfg, &grid()).unwrap_err();
        assert!(err.to_string().contains("increase"));
    }

    #[test]
    fn fixed_single_atom_retention() {
        let mut cfg = config(AtomNumberLaw::Fixed(1));
        cfg.trials = 3;
        let t = grid();
        let r = retention_signal(&cfg, &t).unwrap();
        for (k, &ti) in t.iter().enumerate() {
            assert!((r.trace.signal[k] - rabi_flop(&cfg.drive, ti).ground).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_mass() {
        let m = AtomNumberLaw::Poisson { mean: 8.0 }.truncation_mass(12);
        assert!((m - 0.063_797).abs() < 1e-5, "{m}");
        assert_eq!(AtomNumberLaw::Fixed(3).truncation_mass(12), 0.0);
    }
}
