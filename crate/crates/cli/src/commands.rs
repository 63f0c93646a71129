//! Subcommand implementations. Each returns the files it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rydberg_core::analysis::{fit_damped_cosine, visibility, FitStatus};
use rydberg_core::angular::{clebsch_gordan, wigner_3j, HalfInt};
use rydberg_core::constants::{AtomData, TWO_PI};
use rydberg_core::ensemble::{
    retention_signal, AtomNumberLaw, CloudGeometry, EnsembleConfig, InteractionRule, ModeTable, PairModeRule,
};
use rydberg_core::levels::{forster_defect, zeeman_resonance_shift, ForsterChannel, QuantumDefectModel, RydbergLevel, ZeemanStatePair};
use rydberg_core::mc::TraceResult;
use rydberg_core::pulses::{
    double_pulse_rydberg, doppler_averaged_double_pulse, doppler_averaged_flop, rabi_flop, rabi_from_beams, BeamGeometry,
    BeamParams, DipoleElements, DopplerModel, PulseParams, TwoLevel,
};
use rydberg_core::trapstats::{
    classify_atom_number, drop_recapture_curve, estimate_temperature, preselection_experiment, simulate_histogram, DetectionModel,
    LossModel, ThermometryOptions, TrapModel, MAX_CLASS,
};
use rydberg_core::vdw::{excited_state_overlaps, C6Source, VdwChannel, VdwModel};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, read_table, OutputDir};

pub type Written = Vec<PathBuf>;

const MHZ: f64 = TWO_PI * 1e6;

/// Configuration with the atomic data it names.
pub struct Context {
    pub cfg: RunConfig,
    pub atom: AtomData,
    pub qd: QuantumDefectModel,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let atom = AtomData::resolve(cfg.constants.path.as_deref())?;
        let qd = QuantumDefectModel::from_atom(&atom)?;
        Ok(Context { cfg, atom, qd })
    }

    fn out(&self, dir: &Path, command: &str) -> Result<OutputDir, CliError> {
        OutputDir::create(dir, command, &self.cfg)
    }

    /// `nd5/2`, `(n+2)p3/2`, `(n−2)f5/2`, `(n−2)f7/2`.
    fn pair_levels(&self) -> Result<[RydbergLevel; 4], CliError> {
        let n = self.cfg.levels.n;
        if n < 5 {
            return Err(CliError::Config(format!("levels.n must be at least 5, got {n}")));
        }
        Ok([
            RydbergLevel::nlj(n, 2, 5)?,
            RydbergLevel::nlj(n + 2, 1, 3)?,
            RydbergLevel::nlj(n - 2, 3, 5)?,
            RydbergLevel::nlj(n - 2, 3, 7)?,
        ])
    }

    fn channels(&self) -> Result<Vec<ForsterChannel>, CliError> {
        let [d, p, f5, f7] = self.pair_levels()?;
        Ok(vec![ForsterChannel::new((d, d), (p, f5))?, ForsterChannel::new((d, d), (p, f7))?])
    }

    fn vdw_model(&self) -> Result<VdwModel, CliError> {
        let ic = &self.cfg.interaction;
        let reference = match ic.reference_twice_j_f {
            5 => 0,
            7 => 1,
            other => return Err(CliError::Config(format!("interaction.reference_twice_j_f must be 5 or 7, got {other}"))),
        };
        let channels = self
            .channels()?
            .into_iter()
            .map(|c| VdwChannel::from_model(c, &self.qd))
            .collect::<Result<Vec<_>, _>>()?;
        let c6 = if ic.computed_c6 { C6Source::Computed } else { C6Source::Given(ic.c6_hz_um6) };
        Ok(VdwModel::new(self.pair_levels()?[0], channels, reference, c6)?)
    }

    fn beam_pulse(&self) -> Result<PulseParams, CliError> {
        let b = &self.cfg.beams;
        let lower = BeamParams::new(b.p780_w, b.waist_um, b.lambda780_nm)?;
        let upper = BeamParams::new(b.p480_w, b.waist_um, b.lambda480_nm)?;
        let dipoles = DipoleElements::from_atom(&self.atom, &self.qd, self.cfg.levels.n)?;
        Ok(rabi_from_beams(&lower, &upper, &dipoles, TWO_PI * b.delta_ghz * 1e9)?)
    }

    /// Drive relative to the light-shifted resonance.
    fn drive(&self) -> Result<TwoLevel, CliError> {
        let p = &self.cfg.pulse;
        let rabi = if p.from_beams { self.beam_pulse()?.omega_r() } else { MHZ * p.rabi_mhz };
        Ok(TwoLevel { rabi, detuning: MHZ * p.detuning_mhz, decay: 0.0 })
    }

    fn doppler(&self) -> Result<Option<DopplerModel>, CliError> {
        let t = self.cfg.pulse.temperature_mk;
        if t < 0.0 {
            return Err(CliError::Config(format!("pulse.temperature_mk must be non-negative, got {t}")));
        }
        if t == 0.0 {
            return Ok(None);
        }
        let b = &self.cfg.beams;
        Ok(Some(DopplerModel::new(t * 1e-3, self.atom.mass_kg, b.lambda780_nm, b.lambda480_nm, BeamGeometry::CounterPropagating)?))
    }

    fn trap(&self) -> Result<TrapModel, CliError> {
        let t = &self.cfg.trap;
        Ok(TrapModel::new(t.depth_mk * 1e-3, t.waist_um, t.wavelength_nm, t.power_w, self.atom.mass_kg)?)
    }

    fn detection(&self) -> DetectionModel {
        let d = &self.cfg.detection;
        DetectionModel {
            rate_per_s: d.rate_per_s,
            background_per_s: d.background_per_s,
            probe_time_s: d.probe_time_ms * 1e-3,
            duty_factor: d.duty_factor,
            collection_efficiency: d.collection_efficiency,
        }
    }

    fn loss(&self) -> LossModel {
        let l = &self.cfg.loss;
        LossModel { lifetime_s: l.lifetime_s, probe_survival: l.probe_survival, pair_loss_per_s: l.pair_loss_per_s, hold_s: l.hold_s }
    }

    fn times(&self) -> Result<Vec<f64>, CliError> {
        let mc = &self.cfg.mc;
        if mc.t_points < 2 || !(mc.t_max_us > 0.0) {
            return Err(CliError::Config("mc.t_points must be at least 2 and mc.t_max_us positive".into()));
        }
        Ok(mc.times_s())
    }
}

/// Seconds to µs, rounded to fs so grid points print cleanly.
fn us(t_s: f64) -> f64 {
    (t_s * 1e15).round() / 1e9
}

fn trace_rows(trace: &TraceResult, map: impl Fn(f64) -> f64) -> Vec<Vec<String>> {
    trace
        .t_s
        .iter()
        .zip(&trace.signal)
        .zip(&trace.stderr)
        .map(|((t, s), e)| vec![num(us(*t)), num(map(*s)), num(*e)])
        .collect()
}

pub fn levels(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let mut out = ctx.out(dir, "levels")?;
    let mut t = out.table("levels.csv");
    t.header(&["level", "quantum_defect", "n_star", "energy_ghz"]);
    println!("{:<10} {:>14} {:>14} {:>16}", "level", "defect", "n*", "U (GHz)");
    for l in ctx.pair_levels()? {
        let (d, ns, u) = (ctx.qd.defect(&l)?, ctx.qd.n_star(&l)?, ctx.qd.level_energy(&l)? * 1e-9);
        println!("{:<10} {:>14.8} {:>14.8} {:>16.6}", l.to_string(), d, ns, u);
        t.row(vec![l.to_string(), num(d), num(ns), num(u)]);
    }
    out.write(&t)?;

    let mut c = out.table("channels.csv");
    c.header(&["channel", "defect_mhz"]);
    println!();
    for ch in ctx.channels()? {
        let name = format!("{}+{} -> {}+{}", ch.initial.0, ch.initial.1, ch.final_.0, ch.final_.1);
        let mhz = forster_defect(&ch, &ctx.qd)? * 1e-6;
        println!("{name:<34} δ/2π = {mhz:>9.4} MHz");
        c.row(vec![name, num(mhz)]);
    }
    let b = ctx.cfg.levels.field_tesla;
    let zeeman = zeeman_resonance_shift(&ZeemanStatePair::rb_stretched_to_d52(ctx.atom.ground_g_f, b), ctx.atom.bohr_magneton_hz_per_tesla)? * 1e-6;
    println!("Zeeman shift of |f=2,m_f=2> -> |d5/2,m_j=1/2> at {b} T: {zeeman:.4} MHz");
    c.meta("field_tesla", num(b)).meta("zeeman_shift_mhz", num(zeeman));
    out.write(&c)?;
    Ok(out.written)
}

pub fn vdw_spectrum(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let model = ctx.vdw_model()?;
    let modes = excited_state_overlaps(&model)?;
    let mut out = ctx.out(dir, "vdw-spectrum")?;
    let mut t = out.table("vdw_spectrum.csv");
    let total: f64 = modes.iter().map(|m| m.kappa_sq()).sum();
    t.meta("c6_hz_um6", num(model.c6_hz_um6))
        .meta("reference_twice_j_f", ctx.cfg.interaction.reference_twice_j_f)
        .meta("kappa_sq_sum", num(total))
        .header(&["index", "M", "D", "kappa_abs", "kappa_sq", "symmetric"]);
    for (i, m) in modes.iter().enumerate() {
        t.row(vec![i.to_string(), m.m.to_string(), num(m.d), num(m.kappa.abs()), num(m.kappa_sq()), m.symmetric.to_string()]);
    }
    out.write(&t)?;
    Ok(out.written)
}

pub fn rabi(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let drive = ctx.drive()?;
    let times = ctx.times()?;
    let trace = match ctx.doppler()? {
        Some(m) => doppler_averaged_flop(&drive, &m, &times, ctx.cfg.mc.doppler_samples, ctx.cfg.mc.seed)?,
        None => coherent(&times, |t| rabi_flop(&drive, t).ground),
    };
    let mut out = ctx.out(dir, "rabi")?;
    let mut t = out.table("rabi.csv");
    t.meta("rabi_mhz", num(drive.rabi / MHZ))
        .meta("detuning_mhz", num(drive.detuning / MHZ))
        .meta("temperature_mk", num(ctx.cfg.pulse.temperature_mk))
        .meta("samples", trace.trials);
    if ctx.cfg.pulse.from_beams {
        let p = ctx.beam_pulse()?;
        t.meta("ground_light_shift_mhz", num(p.ground_light_shift() / MHZ))
            .meta("rydberg_light_shift_mhz", num(p.rydberg_light_shift() / MHZ));
    }
    t.header(&["t_us", "P_ground_mean", "P_ground_stderr"]);
    t.rows = trace_rows(&trace, |s| s);
    out.write(&t)?;
    Ok(out.written)
}

fn coherent(times: &[f64], f: impl Fn(f64) -> f64) -> TraceResult {
    TraceResult { t_s: times.to_vec(), signal: times.iter().map(|&t| f(t)).collect(), stderr: vec![0.0; times.len()], trials: 1 }
}

pub fn double_pulse(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let dp = &ctx.cfg.double_pulse;
    if dp.points < 2 || !(dp.pulse_max_us > 0.0) || !(dp.gap_us >= 0.0) {
        return Err(CliError::Config("double_pulse needs points >= 2, pulse_max_us > 0 and gap_us >= 0".into()));
    }
    let rabi = MHZ * dp.rabi_mhz;
    let det = MHZ * ctx.cfg.pulse.detuning_mhz;
    let gap = dp.gap_us * 1e-6;
    let gap_det = MHZ * dp.gap_detuning_mhz;
    let totals: Vec<f64> = (0..dp.points).map(|k| dp.pulse_max_us * 1e-6 * k as f64 / (dp.points - 1) as f64).collect();
    let coherent_ryd = totals
        .iter()
        .map(|&t| double_pulse_rydberg(rabi, det, t, gap, gap_det))
        .collect::<Result<Vec<_>, _>>()?;
    let averaged = match (dp.doppler, ctx.doppler()?) {
        (true, Some(m)) => doppler_averaged_double_pulse(rabi, det, &totals, gap, gap_det, &m, ctx.cfg.mc.doppler_samples, ctx.cfg.mc.seed)?,
        _ => TraceResult { t_s: totals.clone(), signal: coherent_ryd.clone(), stderr: vec![0.0; totals.len()], trials: 1 },
    };
    let mut out = ctx.out(dir, "double-pulse")?;
    let mut t = out.table("double_pulse.csv");
    let max_avg = averaged.signal.iter().copied().fold(0.0, f64::max);
    let max_coh = coherent_ryd.iter().copied().fold(0.0, f64::max);
    t.meta("rabi_mhz", num(dp.rabi_mhz))
        .meta("gap_us", num(dp.gap_us))
        .meta("gap_detuning_mhz", num(dp.gap_detuning_mhz))
        .meta("samples", averaged.trials)
        .meta("max_P_rydberg", num(max_avg))
        .meta("max_P_rydberg_coherent", num(max_coh))
        .header(&["t_us", "P_ground_mean", "P_ground_stderr", "P_ground_coherent"]);
    for (k, row) in trace_rows(&averaged, |s| 1.0 - s).into_iter().enumerate() {
        let mut row = row;
        row.push(num(1.0 - coherent_ryd[k]));
        t.row(row);
    }
    out.write(&t)?;
    Ok(out.written)
}

fn ensemble_config(ctx: &Context, law: AtomNumberLaw) -> Result<EnsembleConfig, CliError> {
    let ic = &ctx.cfg.interaction;
    let model = ctx.vdw_model()?;
    let modes = match ic.force_d {
        Some(d) => PairModeRule::Forced(d),
        None => PairModeRule::Sampled(Arc::new(ModeTable::from_model(&model)?)),
    };
    let c = &ctx.cfg.cloud;
    Ok(EnsembleConfig {
        law,
        cap: ctx.cfg.ensemble.cap,
        geometry: CloudGeometry { sigma_x: c.sigma_x_um, sigma_y: c.sigma_y_um, sigma_z: c.sigma_z_um },
        drive: ctx.drive()?,
        doppler: ctx.doppler()?,
        interaction: InteractionRule { c6_hz_um6: model.c6_hz_um6, modes },
        trials: ctx.cfg.mc.trials,
        seed: ctx.cfg.mc.seed,
        blockade_cutoff_hz: ic.blockade_cutoff_mhz.map(|c| c * 1e6),
        record_trials: ctx.cfg.ensemble.dump_trials,
    })
}

fn ensemble_into(ctx: &Context, out: &mut OutputDir, law: AtomNumberLaw, name: &str) -> Result<(), CliError> {
    let config = ensemble_config(ctx, law)?;
    let times = ctx.times()?;
    let res = retention_signal(&config, &times)?;
    let mut t = out.table(&format!("{name}.csv"));
    match law {
        AtomNumberLaw::Poisson { mean } => t.meta("mean_atoms", num(mean)),
        AtomNumberLaw::Fixed(n) => t.meta("fixed_atoms", n),
    };
    let t_us: Vec<f64> = times.iter().map(|&x| us(x)).collect();
    let period_us = TWO_PI / config.drive.rabi * 1e6;
    let window = 4.0_f64.min(t_us[t_us.len() - 1]);
    if window >= period_us {
        t.meta("visibility_first_4us", num(visibility(&t_us, &res.trace.signal, period_us, window / period_us)?));
    }
    t.meta("trials_total", res.trials_total)
        .meta("trials_empty", res.trials_empty)
        .meta("trials_truncated", res.trials_truncated)
        .meta("truncation_mass", num(res.truncation_mass))
        .meta("resampled_pairs", res.resampled_pairs)
        .header(&["t_us", "signal", "stderr", "n_trials"]);
    for mut row in trace_rows(&res.trace, |s| s) {
        row.push(res.trace.trials.to_string());
        t.row(row);
    }
    out.write(&t)?;
    if ctx.cfg.ensemble.dump_trials {
        let mut d = out.table(&format!("{name}_trials.csv"));
        d.header(&["trial", "N", "positions_um", "D"]);
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(";");
        for r in &res.records {
            let pos = join(&mut r.positions.iter().map(|p| format!("{} {} {}", num(p[0]), num(p[1]), num(p[2]))));
            let dv = join(&mut r.d.iter().map(|x| num(*x)));
            d.row(vec![r.trial.to_string(), r.n.to_string(), pos, dv]);
        }
        out.write(&d)?;
    }
    Ok(())
}

fn atom_law(ctx: &Context) -> AtomNumberLaw {
    match ctx.cfg.ensemble.fixed_atoms {
        Some(n) => AtomNumberLaw::Fixed(n),
        None => AtomNumberLaw::Poisson { mean: ctx.cfg.ensemble.mean_atoms },
    }
}

pub fn ensemble(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let mut out = ctx.out(dir, "ensemble")?;
    ensemble_into(ctx, &mut out, atom_law(ctx), "ensemble")?;
    Ok(out.written)
}

pub fn histogram(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let det = ctx.detection();
    let h = &ctx.cfg.histogram;
    let draws = simulate_histogram(h.mean_atoms, &det, h.trials, ctx.cfg.mc.seed)?;
    let mut bins: BTreeMap<u64, u64> = BTreeMap::new();
    let (mut singles, mut wrong) = (0u64, 0u64);
    for &(n, c) in &draws {
        *bins.entry(c).or_default() += 1;
        if n == 1 {
            singles += 1;
            wrong += u64::from(classify_atom_number(c, &det) != 1);
        }
    }
    let mut out = ctx.out(dir, "histogram")?;
    let mut t = out.table("histogram.csv");
    t.meta("mean_atoms", num(h.mean_atoms))
        .meta("trials", h.trials)
        .meta("single_atom_counts", num(det.single_atom_counts()))
        .meta("single_atom_misclassified", num(if singles > 0 { wrong as f64 / singles as f64 } else { 0.0 }))
        .header(&["count", "trials", "class"]);
    for (c, k) in bins {
        t.row(vec![c.to_string(), k.to_string(), classify_atom_number(c, &det).to_string()]);
    }
    out.write(&t)?;
    Ok(out.written)
}

pub fn preselect(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let p = &ctx.cfg.preselect;
    let r = preselection_experiment(p.mean_atoms, &ctx.detection(), &ctx.loss(), p.trials, ctx.cfg.mc.seed)?;
    let mut out = ctx.out(dir, "preselect")?;
    let mut t = out.table("preselect.csv");
    t.meta("mean_atoms", num(p.mean_atoms))
        .meta("trials", r.trials)
        .meta("retention_1_to_1", num(r.retention.0))
        .meta("retention_1_to_1_stderr", num(r.retention.1))
        .meta("retention_multi", num(r.multi_retention.0))
        .meta("retention_multi_stderr", num(r.multi_retention.1))
        .meta("top_class", format!("{MAX_CLASS} means {MAX_CLASS} or more atoms"))
        .header(&["first_class", "second_class", "trials"]);
    for (a, row) in r.joint.iter().enumerate() {
        for (b, k) in row.iter().enumerate() {
            t.row(vec![a.to_string(), b.to_string(), k.to_string()]);
        }
    }
    println!("P(second=1 | first=1) = {:.4} ± {:.4}", r.retention.0, r.retention.1);
    out.write(&t)?;
    Ok(out.written)
}

pub fn drop_recapture(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let dr = &ctx.cfg.drop_recapture;
    let trap = ctx.trap()?;
    let mut out = ctx.out(dir, "drop-recapture")?;
    if let Some(path) = &dr.data {
        let data = read_pairs(path, "t_drop_us", "recapture")?;
        if !(dr.grid_min_mk > 0.0 && dr.grid_max_mk > dr.grid_min_mk && dr.grid_points >= 3) {
            return Err(CliError::Config("thermometry grid needs 0 < grid_min_mk < grid_max_mk and at least 3 points".into()));
        }
        let n = dr.grid_points;
        let ratio = dr.grid_max_mk / dr.grid_min_mk;
        let grid_k = (0..n).map(|k| dr.grid_min_mk * 1e-3 * ratio.powf(k as f64 / (n - 1) as f64)).collect();
        let opts = ThermometryOptions { grid_k, trials: dr.trials, seed: ctx.cfg.mc.seed, bootstrap: ctx.cfg.mc.bootstrap };
        let pts: Vec<(f64, f64)> = data.iter().map(|(t, p)| (t * 1e-6, *p)).collect();
        let est = estimate_temperature(&pts, &trap, &opts)?;
        let mut t = out.table("thermometry.csv");
        t.meta("input", path.display())
            .meta("temperature_mk", num(est.temperature_k * 1e3))
            .meta("interval_low_mk", num(est.interval_k.0 * 1e3))
            .meta("interval_high_mk", num(est.interval_k.1 * 1e3))
            .header(&["temperature_mk", "sse"]);
        for (tk, s) in opts.grid_k.iter().zip(&est.objective) {
            t.row(vec![num(tk * 1e3), num(*s)]);
        }
        println!(
            "T = {:.4} mK (95% interval {:.4} to {:.4} mK)",
            est.temperature_k * 1e3,
            est.interval_k.0 * 1e3,
            est.interval_k.1 * 1e3
        );
        out.write(&t)?;
    } else {
        let t_s: Vec<f64> = dr.t_drop_us.iter().map(|t| t * 1e-6).collect();
        let curve = drop_recapture_curve(&trap, dr.temperature_mk * 1e-3, &t_s, dr.trials, ctx.cfg.mc.seed)?;
        let mut t = out.table("drop_recapture.csv");
        t.meta("temperature_mk", num(dr.temperature_mk))
            .meta("trials", dr.trials)
            .meta("radial_frequency_hz", num(trap.radial_frequency_hz()))
            .meta("axial_frequency_hz", num(trap.axial_frequency_hz()))
            .header(&["t_drop_us", "recapture", "stderr"]);
        for (td, (p, e)) in dr.t_drop_us.iter().zip(curve) {
            t.row(vec![num(*td), num(p), num(e)]);
        }
        out.write(&t)?;
    }
    Ok(out.written)
}

/// Two numeric columns by name, falling back to the first two columns.
fn read_pairs(path: &Path, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let (header, rows) = read_table(path)?;
    if header.len() < 2 {
        return Err(CliError::Config(format!("{} needs at least two columns", path.display())));
    }
    let find = |name: &str, fallback: usize| header.iter().position(|h| h == name).unwrap_or(fallback);
    let (ix, iy) = (find(x, 0), find(y, 1));
    rows.iter()
        .enumerate()
        .map(|(k, r)| Ok((parse_cell(r, ix, k, path)?, parse_cell(r, iy, k, path)?)))
        .collect()
}

fn parse_cell(row: &[String], i: usize, line: usize, path: &Path) -> Result<f64, CliError> {
    row.get(i)
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| CliError::Config(format!("{}: row {} column {} is not a number", path.display(), line + 1, i + 1)))
}

pub fn fit(ctx: &Context, dir: &Path) -> Result<Written, CliError> {
    let f = &ctx.cfg.fit;
    let path = f.input.as_ref().ok_or_else(|| CliError::Config("fit.input must name a trace CSV".into()))?;
    let (header, rows) = read_table(path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let it = col("t_us").ok_or_else(|| CliError::Config(format!("{} has no t_us column; columns are {header:?}", path.display())))?;
    let iy = match &f.column {
        Some(c) => col(c).ok_or_else(|| CliError::Config(format!("column `{c}` not in {header:?}")))?,
        None => 1,
    };
    let ie = header.get(iy + 1).filter(|h| h.contains("stderr")).map(|_| iy + 1);
    let mut t = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    let mut e = Vec::with_capacity(rows.len());
    for (k, r) in rows.iter().enumerate() {
        t.push(parse_cell(r, it, k, path)?);
        y.push(parse_cell(r, iy, k, path)?);
        if let Some(ie) = ie {
            e.push(parse_cell(r, ie, k, path)?);
        }
    }
    let sigma = (ie.is_some() && e.iter().all(|s| *s > 0.0)).then_some(e.as_slice());
    let res = fit_damped_cosine(&t, &y, sigma)?;
    if res.status == FitStatus::Degenerate {
        return Err(rydberg_core::Error::Degenerate("the trace shows no oscillation to fit".into()).into());
    }
    let m = res.model;
    let params = [
        ("a", m.a, res.errors[0]),
        ("tau_us", m.tau, res.errors[1]),
        ("rabi_mhz", m.omega / TWO_PI, res.errors[2] / TWO_PI),
    ];
    let mut out = ctx.out(dir, "fit")?;
    let mut tab = out.table("fit.csv");
    tab.meta("input", path.display())
        .meta("column", &header[iy])
        .meta("status", format!("{:?}", res.status))
        .meta("residual_rms", num(res.residual_rms))
        .meta("iterations", res.iterations)
        .header(&["parameter", "value", "stderr"]);
    println!("fit of {} ({:?})", header[iy], res.status);
    for (name, v, s) in params {
        println!("  {name:<9} = {v:.6} ± {s:.6}");
        tab.row(vec![name.to_string(), num(v), num(s)]);
    }
    out.write(&tab)?;
    Ok(out.written)
}

/// Spot evaluation of `<j1 m1; j2 m2|j m>` and the matching 3j symbol.
pub fn angular(args: &[f64]) -> Result<(), CliError> {
    if args.len() != 6 {
        return Err(CliError::Config("angular takes j1 m1 j2 m2 j m".into()));
    }
    let h = args.iter().map(|x| HalfInt::from_f64(*x)).collect::<Result<Vec<_>, _>>()?;
    let cg = clebsch_gordan(h[0], h[1], h[2], h[3], h[4], h[5])?;
    let w3j = wigner_3j(h[0], h[2], h[4], h[1], h[3], -h[5])?;
    println!("clebsch_gordan = {cg:.15}");
    println!("wigner_3j      = {w3j:.15}");
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

/// Runs a figure recipe with the sections it depends on reset to their defaults.
pub fn reproduce(mut cfg: RunConfig, figure: Figure, dir: &Path) -> Result<Written, CliError> {
    let d = RunConfig::default();
    match figure {
        Figure::Fig2 => {
            cfg.detection = d.detection;
            cfg.loss = d.loss;
            cfg.histogram = d.histogram;
            cfg.preselect = d.preselect;
            let ctx = Context::new(cfg)?;
            let mut w = histogram(&ctx, dir)?;
            w.extend(preselect(&ctx, dir)?);
            Ok(w)
        }
        Figure::Fig3 => {
            cfg.pulse = d.pulse;
            cfg.beams = d.beams;
            cfg.levels = d.levels;
            let ctx = Context::new(cfg)?;
            let mut w = rabi(&ctx, dir)?;
            let mut fctx = Context::new(ctx.cfg.clone())?;
            fctx.cfg.fit.input = Some(dir.join("rabi.csv"));
            fctx.cfg.fit.column = None;
            w.extend(fit(&fctx, dir)?);
            let p = ctx.beam_pulse()?;
            println!("theory Rabi frequency from beams: {:.4} MHz", p.omega_r() / MHZ);
            Ok(w)
        }
        Figure::Fig4 => {
            cfg.double_pulse = d.double_pulse;
            cfg.pulse = d.pulse;
            cfg.beams = fig4_beams();
            let ctx = Context::new(cfg)?;
            let p = ctx.beam_pulse()?;
            println!("780 nm ground-state light shift: {:.4} MHz", p.ground_light_shift().abs() / MHZ);
            double_pulse(&ctx, dir)
        }
        Figure::Fig5 => {
            cfg.levels = d.levels;
            cfg.interaction = d.interaction;
            vdw_spectrum(&Context::new(cfg)?, dir)
        }
        Figure::Fig6 => {
            cfg.cloud = d.cloud;
            cfg.pulse = d.pulse;
            cfg.interaction = d.interaction;
            cfg.levels = d.levels;
            cfg.ensemble.fixed_atoms = None;
            let ctx = Context::new(cfg)?;
            let mut out = ctx.out(dir, "reproduce-fig6")?;
            for mean in [0.3, 1.7, 8.0] {
                ensemble_into(&ctx, &mut out, AtomNumberLaw::Poisson { mean }, &format!("fig6_nbar_{mean}"))?;
            }
            Ok(out.written)
        }
    }
}

/// Double-pulse beam settings: 3.3 µW at 780 nm, 9.0 mW at 480 nm, Δ/2π = −3.8 GHz.
pub fn fig4_beams() -> crate::config::BeamsSection {
    crate::config::BeamsSection { p780_w: 3.3e-6, p480_w: 9.0e-3, delta_ghz: -3.8, ..Default::default() }
}
