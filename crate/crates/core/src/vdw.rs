//! Second-order van der Waals operator for a pair of identical Rydberg atoms
//! coupled through Förster channels, and its eigenmodes.
//!
//! The quantization axis is the interatomic axis. The two-atom basis is the
//! product `|m1> ⊗ |m2>` with index `i1 * (2j+1) + i2`, both factors in
//! descending-m order.
//!
//! For a channel `c` with defect `δ_c` the pair Hamiltonian is
//! `H = -Σ_c V_c V_c† / (h δ_c)`, written as `H = (C6 / R⁶) 𝒟` with
//! `C6 = (e² R_1 R_2 / 4πε₀)² / (h |δ_ref|)` taken from a reference channel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::angular::{dipole_component_matrix, fine_structure_reduced_factor, wigner_d_matrix, HalfInt, RotationSpec};
use crate::constants::si;
use crate::levels::{forster_defect, radial_matrix_element, rb_43d_channel, ForsterChannel, QuantumDefectModel, RydbergLevel};
use crate::{Error, Result};

/// `C6` quoted for `43d5/2`, in Hz·µm⁶.
pub const RB_43D52_QUOTED_C6_HZ_UM6: f64 = 450e9;

/// Angular factors of a unit-radial dipole `<b mb|r̂_q|a ma>`, rows `mb`, columns `ma`.
fn unit_dipole(a: &RydbergLevel, b: &RydbergLevel, q: i32) -> Result<DMatrix<f64>> {
    let block = dipole_component_matrix(a.j, b.j, q)?;
    let red = fine_structure_reduced_factor(a.l, a.j, b.l, b.j) / ((b.j.twice() + 1) as f64).sqrt();
    Ok(block.matrix * red)
}

/// Unit-radial dipole-dipole couplings from the initial pair to the final pair.
///
/// Rows span the initial pair space, columns the final pair space: first
/// atom 1 in `final_.0` and atom 2 in `final_.1`, then (if the two final
/// levels differ) the exchanged assignment. Entries are in units of
/// `R_1 R_2 e² a0² / (4πε₀ R³)`.
pub fn dipole_dipole_block(channel: &ForsterChannel) -> Result<DMatrix<f64>> {
    let (a, b) = channel.initial;
    let (c, d) = channel.final_;
    if channel.is_elastic() {
        return Err(Error::Domain("elastic channel has no dipole-dipole coupling".into()));
    }
    let mut orderings = vec![(c, d)];
    if c != d {
        orderings.push((d, c));
    }
    let rows = a.j.multiplicity() * b.j.multiplicity();
    let mut parts = Vec::new();
    for (fa, fb) in orderings {
        let mut v = DMatrix::<f64>::zeros(fa.j.multiplicity() * fb.j.multiplicity(), rows);
        if a.is_dipole_coupled(&fa) && b.is_dipole_coupled(&fb) {
            for (q, w) in [(-1, 1.0), (0, 2.0), (1, 1.0)] {
                let d1 = unit_dipole(&a, &fa, q)?;
                let d2 = unit_dipole(&b, &fb, -q)?;
                v -= d1.kronecker(&d2) * w;
            }
        }
        parts.push(v.transpose());
    }
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        if p.nrows() != rows {
            return Err(Error::Numerical("dipole block dimension mismatch".into()));
        }
        out.columns_mut(at, p.ncols()).copy_from(&p);
        at += p.ncols();
    }
    Ok(out)
}

/// Where the model's `C6` normalization comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum C6Source {
    /// From the reference channel's radial integrals and defect.
    Computed,
    /// A fixed value in Hz·µm⁶.
    Given(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VdwChannel {
    pub channel: ForsterChannel,
    /// Radial integrals (a0) for atom 1 `initial.0 -> final_.0` and atom 2 `initial.1 -> final_.1`.
    pub radial: (f64, f64),
    /// `δ_c / 2π` in Hz.
    pub defect_hz: f64,
}

impl VdwChannel {
    pub fn from_model(channel: ForsterChannel, qd: &QuantumDefectModel) -> Result<Self> {
        let r1 = radial_matrix_element(&channel.initial.0, &channel.final_.0, qd)?;
        let r2 = radial_matrix_element(&channel.initial.1, &channel.final_.1, qd)?;
        Ok(VdwChannel { channel, radial: (r1, r2), defect_hz: forster_defect(&channel, qd)? })
    }

    fn radial_product(&self) -> f64 {
        self.radial.0 * self.radial.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VdwModel {
    pub initial: RydbergLevel,
    pub channels: Vec<VdwChannel>,
    /// Index into `channels` of the defect that sets the `C6` scale.
    pub reference: usize,
    pub c6_hz_um6: f64,
}

/// `C6 = (e² a0² R_1 R_2 / 4πε₀)² / (h² |δ|)` in Hz·µm⁶.
pub fn c6_from_radial(radial_product_a0: f64, defect_hz: f64) -> f64 {
    let coupling = si::ELEMENTARY_CHARGE.powi(2) * si::BOHR_RADIUS.powi(2) * radial_product_a0
        / (4.0 * std::f64::consts::PI * si::VACUUM_PERMITTIVITY);
    coupling * coupling / (si::PLANCK * si::PLANCK * defect_hz.abs()) * 1e36
}

impl VdwModel {
    pub fn new(initial: RydbergLevel, channels: Vec<VdwChannel>, reference: usize, c6: C6Source) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Config("van der Waals model needs at least one channel".into()));
        }
        if reference >= channels.len() {
            return Err(Error::Config(format!("reference channel {reference} out of range")));
        }
        for ch in &channels {
            if ch.channel.initial != (initial, initial) {
                return Err(Error::Config("all channels must start from the model's pair state".into()));
            }
            if ch.defect_hz == 0.0 || !ch.defect_hz.is_finite() {
                return Err(Error::Domain(format!(
                    "channel {} + {} has zero energy defect; exact Förster resonance is outside the second-order model",
                    ch.channel.final_.0, ch.channel.final_.1
                )));
            }
        }
        let mut model = VdwModel { initial, channels, reference, c6_hz_um6: 0.0 };
        model.c6_hz_um6 = match c6 {
            C6Source::Computed => model.computed_c6(),
            C6Source::Given(v) if v > 0.0 && v.is_finite() => v,
            C6Source::Given(v) => return Err(Error::Config(format!("C6 must be positive, got {v}"))),
        };
        Ok(model)
    }

    /// `43d5/2 + 43d5/2 -> 45p3/2 + 41f5/2, 41f7/2` with the reference defect
    /// taken from `41f_{ref/2}` (`reference_twice_j_f` = 5 or 7).
    pub fn rb_43d52(qd: &QuantumDefectModel, reference_twice_j_f: i32, c6: C6Source) -> Result<Self> {
        let reference = match reference_twice_j_f {
            5 => 0,
            7 => 1,
            other => return Err(Error::Config(format!("reference f level must be j=5/2 or 7/2, got twice_j={other}"))),
        };
        let channels = [5, 7]
            .into_iter()
            .map(|j| VdwChannel::from_model(rb_43d_channel(j)?, qd))
            .collect::<Result<Vec<_>>>()?;
        Self::new(RydbergLevel::nlj(43, 2, 5)?, channels, reference, c6)
    }

    pub fn computed_c6(&self) -> f64 {
        let r = &self.channels[self.reference];
        c6_from_radial(r.radial_product(), r.defect_hz)
    }

    pub fn j(&self) -> HalfInt {
        self.initial.j
    }

    pub fn dim(&self) -> usize {
        self.j().multiplicity().pow(2)
    }
}

/// Dimensionless operator `𝒟 = -Σ_c (|δ_ref|/δ_c) (ρ_c/ρ_ref)² B_c B_cᵀ`,
/// with `B_c` from [`dipole_dipole_block`] and `ρ_c` the radial product.
pub fn effective_vdw_operator(model: &VdwModel) -> Result<DMatrix<f64>> {
    let r = &model.channels[model.reference];
    let (delta_ref, rho_ref) = (r.defect_hz.abs(), r.radial_product());
    let n = model.dim();
    let mut out = DMatrix::zeros(n, n);
    for ch in &model.channels {
        if ch.defect_hz == 0.0 {
            return Err(Error::Domain("zero energy defect".into()));
        }
        let b = dipole_dipole_block(&ch.channel)?;
        let w = -(delta_ref / ch.defect_hz) * (ch.radial_product() / rho_ref).powi(2);
        out += (&b * b.transpose()) * w;
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// One eigenvector of `𝒟`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEigenmode {
    pub d: f64,
    /// Total projection on the interatomic axis.
    pub m: i32,
    /// Symmetric under exchange of the two atoms.
    pub symmetric: bool,
    /// Real unit vector in the product basis; the largest component is positive.
    pub vector: DVector<f64>,
    /// Overlap with the laser-excited pair state.
    pub kappa: f64,
}

impl PairEigenmode {
    pub fn kappa_sq(&self) -> f64 {
        self.kappa * self.kappa
    }
}

/// Diagonalizes `𝒟` sector by sector (total M, exchange symmetry).
///
/// Modes are sorted by M, then |D|, symmetric first on ties; `kappa` is 0.
pub fn eigenmodes(op: &DMatrix<f64>, j: HalfInt) -> Vec<PairEigenmode> {
    let nm = j.multiplicity();
    let ms: Vec<i32> = j.projections().map(|m| m.twice()).collect();
    let mut modes = Vec::with_capacity(nm * nm);
    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
    for big_m2 in (-2 * j.twice()..=2 * j.twice()).step_by(2) {
        let pairs: Vec<(usize, usize)> = (0..nm)
            .flat_map(|a| (a..nm).map(move |b| (a, b)))
            .filter(|&(a, b)| ms[a] + ms[b] == big_m2)
            .collect();
        for symmetric in [true, false] {
            let mut basis = Vec::new();
            for &(a, b) in &pairs {
                let mut v = DVector::zeros(nm * nm);
                if a == b {
                    if !symmetric {
                        continue;
                    }
                    v[a * nm + a] = 1.0;
                } else {
                    v[a * nm + b] = sqrt_half;
                    v[b * nm + a] = if symmetric { sqrt_half } else { -sqrt_half };
                }
                basis.push(v);
            }
            if basis.is_empty() {
                continue;
            }
            let p = DMatrix::from_columns(&basis);
            let sub = p.transpose() * op * &p;
            let eig = SymmetricEigen::new(sub);
            for k in 0..basis.len() {
                let mut v = &p * eig.eigenvectors.column(k);
                let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
                if pivot < 0.0 {
                    v = -v;
                }
                modes.push(PairEigenmode {
                    d: eig.eigenvalues[k],
                    m: big_m2 / 2,
                    symmetric,
                    vector: v,
                    kappa: 0.0,
                });
            }
        }
    }
    modes.sort_by(|x, y| {
        x.m.cmp(&y.m)
            .then(x.d.abs().total_cmp(&y.d.abs()))
            .then(y.symmetric.cmp(&x.symmetric))
    });
    modes
}

/// The laser-excited product state `|j, m=1/2>⊗|j, m=1/2>` (quantized along
/// the beam axis) expressed in a pair frame whose axis is tilted by `polar`.
pub fn excited_pair_state(j: HalfInt, polar: f64) -> DVector<f64> {
    let d = wigner_d_matrix(RotationSpec { beta: polar, j });
    let col = j.index_of(HalfInt::HALF).expect("laser sublevel m=1/2 must exist");
    let single = d.column(col).into_owned();
    single.kronecker(&single)
}

/// `|κ_φ|²` for every mode when the pair axis makes angle `polar` with the
/// laser quantization axis. The azimuth only contributes M-dependent phases.
pub fn overlap_weights(modes: &[PairEigenmode], j: HalfInt, polar: f64) -> Vec<f64> {
    let psi = excited_pair_state(j, polar);
    modes.iter().map(|m| m.vector.dot(&psi).powi(2)).collect()
}

/// All eigenmodes with overlaps for a pair lying along x̂.
pub fn excited_state_overlaps(model: &VdwModel) -> Result<Vec<PairEigenmode>> {
    let op = effective_vdw_operator(model)?;
    let mut modes = eigenmodes(&op, model.j());
    let psi = excited_pair_state(model.j(), std::f64::consts::FRAC_PI_2);
    for m in &mut modes {
        m.kappa = m.vector.dot(&psi);
    }
    Ok(modes)
}

/// Separation and axis of an atom pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairGeometry {
    pub r_um: f64,
    pub axis: [f64; 3],
}

impl PairGeometry {
    pub fn along_x(r_um: f64) -> Self {
        PairGeometry { r_um, axis: [1.0, 0.0, 0.0] }
    }
}

/// `C6 D / R⁶` in Hz.
pub fn pair_interaction_strength(c6_hz_um6: f64, d: f64, geometry: &PairGeometry) -> Result<f64> {
    if !(geometry.r_um > 0.0) {
        return Err(Error::Domain(format!("pair separation must be positive, got {}", geometry.r_um)));
    }
    Ok(c6_hz_um6 * d / geometry.r_um.powi(6))
}
