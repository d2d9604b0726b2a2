//! Benchmark open systems as (Hamiltonian, jump operators, rates) bundles.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::operator::{
    annihilation, embed, sigma_minus, sigma_plus, sigma_x, sigma_y, sigma_z, HilbertSpace,
    Operator, HERMITIAN_TOL,
};
use crate::random_matrix;

/// A dissipation channel `rate * D[op]`.
#[derive(Clone, Debug)]
pub struct Jump {
    pub op: Operator,
    pub rate: f64,
    pub label: String,
}

/// Generator data of a Lindblad master equation.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    name: String,
    space: HilbertSpace,
    hamiltonian: Operator,
    jumps: Vec<Jump>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, hamiltonian: Operator, jumps: Vec<Jump>) -> Result<Self> {
        let space = hamiltonian.space().clone();
        if !hamiltonian.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::InvalidParameter("Hamiltonian is not Hermitian".into()));
        }
        for j in &jumps {
            if j.op.space() != &space {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: j.op.dim(),
                });
            }
            if !(j.rate >= 0.0) || !j.rate.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "jump '{}' has invalid rate {}",
                    j.label, j.rate
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            space,
            hamiltonian,
            jumps,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn liouvillian_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Same jumps, Hamiltonian negated. Used for "backward" propagation.
    pub fn with_reversed_hamiltonian(&self) -> Self {
        Self {
            name: format!("{}-reversed", self.name),
            space: self.space.clone(),
            hamiltonian: self.hamiltonian.scale_real(-1.0),
            jumps: self.jumps.clone(),
        }
    }

    /// Same model with every jump rate set to zero.
    pub fn closed(&self) -> Self {
        Self {
            name: format!("{}-closed", self.name),
            space: self.space.clone(),
            hamiltonian: self.hamiltonian.clone(),
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    rate: 0.0,
                    ..j.clone()
                })
                .collect(),
        }
    }

    /// Multiplies the Hamiltonian and every rate by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            name: self.name.clone(),
            space: self.space.clone(),
            hamiltonian: self.hamiltonian.scale_real(factor),
            jumps: self
                .jumps
                .iter()
                .map(|j| Jump {
                    rate: j.rate * factor,
                    ..j.clone()
                })
                .collect(),
        }
    }

    /// SHA-256 over dimensions, matrix entries and rates. Stable across runs
    /// on the same platform; used as the eigenbasis cache key.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"dqchaos-model-v1");
        for &d in self.space.factor_dims() {
            h.update((d as u64).to_le_bytes());
        }
        let mut feed = |op: &Operator| {
            let d = op.dim();
            for j in 0..d {
                for i in 0..d {
                    let z = op.get(i, j);
                    h.update(z.re.to_le_bytes());
                    h.update(z.im.to_le_bytes());
                }
            }
        };
        feed(&self.hamiltonian);
        for j in &self.jumps {
            feed(&j.op);
        }
        for j in &self.jumps {
            h.update(j.rate.to_le_bytes());
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Driven-dissipative Bose-Hubbard chain, drive on the first site.
/// Energies are in the same (arbitrary) unit; the usual convention is `U = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoseHubbardParams {
    pub detuning: f64,
    #[serde(default = "one")]
    pub interaction: f64,
    pub hopping: f64,
    pub drive: f64,
    pub loss: f64,
    #[serde(default = "two")]
    pub n_sites: usize,
    /// Fock cutoff: each mode keeps levels `0..=cutoff`.
    pub cutoff: usize,
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

impl BoseHubbardParams {
    /// The dimer at `U = J/2 = gamma = 1` used throughout the main phase diagrams.
    pub fn dimer(detuning: f64, drive: f64, cutoff: usize) -> Self {
        Self {
            detuning,
            interaction: 1.0,
            hopping: 2.0,
            drive,
            loss: 1.0,
            n_sites: 2,
            cutoff,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoff must be >= 2, got {}",
                self.cutoff
            )));
        }
        if self.n_sites < 1 {
            return Err(Error::InvalidParameter("need at least one site".into()));
        }
        if !(self.loss >= 0.0) {
            return Err(Error::InvalidParameter(format!("loss rate {} < 0", self.loss)));
        }
        Ok(())
    }
}

/// Bose-Hubbard Hamiltonian on `n_sites` modes of local dimension `cutoff + 1`.
pub fn bose_hubbard_hamiltonian(p: &BoseHubbardParams) -> Result<Operator> {
    p.validate()?;
    let local = p.cutoff + 1;
    let space = HilbertSpace::new(vec![local; p.n_sites])?;
    let a = annihilation(local)?;
    let ad = a.adjoint();
    let n = &ad * &a;
    let onsite = &n.scale_real(-p.detuning) + &(&(&ad * &ad) * &(&a * &a)).scale_real(0.5 * p.interaction);
    let mut h = Operator::zeros(&space);
    let ops: Vec<Operator> = (0..p.n_sites)
        .map(|j| embed(&a, j, &space))
        .collect::<Result<_>>()?;
    for j in 0..p.n_sites {
        h = &h + &embed(&onsite, j, &space)?;
    }
    for j in 0..p.n_sites.saturating_sub(1) {
        let hop = &ops[j + 1].adjoint() * &ops[j];
        h = &h - &(&hop + &hop.adjoint()).scale_real(p.hopping);
    }
    h = &h + &(&ops[0] + &ops[0].adjoint()).scale_real(p.drive);
    Ok(h)
}

pub fn build_bose_hubbard(p: &BoseHubbardParams) -> Result<ModelSpec> {
    let h = bose_hubbard_hamiltonian(p)?;
    let space = h.space().clone();
    let a = annihilation(p.cutoff + 1)?;
    let jumps = (0..p.n_sites)
        .map(|j| {
            Ok(Jump {
                op: embed(&a, j, &space)?,
                rate: p.loss,
                label: format!("a{}", j + 1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelSpec::new(
        format!("bose-hubbard-{}site", p.n_sites),
        h,
        jumps,
    )
}

/// Total particle number `sum_j a_j^dagger a_j` on the Bose-Hubbard space.
pub fn total_number(space: &HilbertSpace) -> Result<Operator> {
    let mut n = Operator::zeros(space);
    for (j, &d) in space.factor_dims().iter().enumerate() {
        let a = annihilation(d)?;
        n = &n + &embed(&(&a.adjoint() * &a), j, space)?;
    }
    Ok(n)
}

/// Single-mode Kerr resonator with coherent one-photon drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub detuning: f64,
    pub interaction: f64,
    pub drive: f64,
    pub loss: f64,
    pub cutoff: usize,
}

pub fn build_kerr_resonator(p: &KerrParams) -> Result<ModelSpec> {
    let bh = BoseHubbardParams {
        detuning: p.detuning,
        interaction: p.interaction,
        hopping: 0.0,
        drive: p.drive,
        loss: p.loss,
        n_sites: 1,
        cutoff: p.cutoff,
    };
    let mut m = build_bose_hubbard(&bh)?;
    m.name = "kerr".into();
    m.jumps[0].label = "a".into();
    Ok(m)
}

/// Boundary-driven XXZ chain with bulk dephasing and a transverse field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinChainParams {
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default)]
    pub anisotropy: f64,
    pub drive: f64,
    pub dephasing: f64,
    pub gain_first: f64,
    pub loss_first: f64,
    pub gain_last: f64,
    pub loss_last: f64,
    pub length: usize,
}

impl SpinChainParams {
    /// Rate set `gamma = gamma_1^+ = J`, `gamma_1^- = 0.8 J`,
    /// `gamma_L^+ = 0.5 J`, `gamma_L^- = 1.2 J`.
    pub fn reference(length: usize, drive: f64) -> Self {
        Self {
            coupling: 1.0,
            anisotropy: 0.0,
            drive,
            dephasing: 1.0,
            gain_first: 1.0,
            loss_first: 0.8,
            gain_last: 0.5,
            loss_last: 1.2,
            length,
        }
    }
}

pub fn build_spin_chain(p: &SpinChainParams) -> Result<ModelSpec> {
    if p.length < 2 {
        return Err(Error::InvalidParameter(format!(
            "chain length must be >= 2, got {}",
            p.length
        )));
    }
    let rates = [
        p.dephasing,
        p.gain_first,
        p.loss_first,
        p.gain_last,
        p.loss_last,
    ];
    if rates.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidParameter("negative spin-chain rate".into()));
    }
    let l = p.length;
    let space = HilbertSpace::new(vec![2; l])?;
    let site = |op: &Operator, j: usize| embed(op, j, &space);
    let (sx, sy, sz) = (sigma_x(), sigma_y(), sigma_z());
    let mut h = Operator::zeros(&space);
    for j in 0..l - 1 {
        let xx = &site(&sx, j)? * &site(&sx, j + 1)?;
        let yy = &site(&sy, j)? * &site(&sy, j + 1)?;
        let zz = &site(&sz, j)? * &site(&sz, j + 1)?;
        let bond = &(&xx + &yy) + &zz.scale_real(p.anisotropy);
        h = &h + &bond.scale_real(p.coupling);
    }
    for j in 0..l {
        h = &h + &site(&sx, j)?.scale_real(p.drive);
    }
    let mut jumps = Vec::new();
    for j in 0..l {
        jumps.push(Jump {
            op: site(&sz, j)?,
            rate: p.dephasing,
            label: format!("sz{}", j + 1),
        });
    }
    jumps.push(Jump {
        op: site(&sigma_plus(), 0)?,
        rate: p.gain_first,
        label: "sp1".into(),
    });
    jumps.push(Jump {
        op: site(&sigma_minus(), 0)?,
        rate: p.loss_first,
        label: "sm1".into(),
    });
    jumps.push(Jump {
        op: site(&sigma_plus(), l - 1)?,
        rate: p.gain_last,
        label: format!("sp{l}"),
    });
    jumps.push(Jump {
        op: site(&sigma_minus(), l - 1)?,
        rate: p.loss_last,
        label: format!("sm{l}"),
    });
    ModelSpec::new(format!("spin-chain-L{l}"), h, jumps)
}

/// Random Liouvillian: GUE Hamiltonian and `n_jumps` traceless jump
/// operators `g * sum_j G_j w_{j,mu}` over an orthonormal Hermitian basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomLiouvillianParams {
    pub dim: usize,
    pub n_jumps: usize,
    pub strength: f64,
    pub seed: u64,
}

/// Orthonormal traceless Hermitian basis `G_1..G_{N^2-1}` (generalized
/// Gell-Mann matrices with `Tr[G_i G_j] = delta_ij`). `G_0 = 1/sqrt(N)` is
/// not included.
pub fn gell_mann_basis(n: usize) -> Result<Vec<Operator>> {
    let space = HilbertSpace::single(n)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(n * n - 1);
    for k in 0..n {
        for j in 0..k {
            basis.push(Operator::from_fn(space.clone(), |a, b| {
                if (a, b) == (j, k) || (a, b) == (k, j) {
                    c(s)
                } else {
                    c(0.0)
                }
            }));
            basis.push(Operator::from_fn(space.clone(), |a, b| {
                if (a, b) == (j, k) {
                    C64::new(0.0, -s)
                } else if (a, b) == (k, j) {
                    C64::new(0.0, s)
                } else {
                    c(0.0)
                }
            }));
        }
    }
    for l in 1..n {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..n)
            .map(|m| {
                if m < l {
                    norm
                } else if m == l {
                    -(l as f64) * norm
                } else {
                    0.0
                }
            })
            .collect();
        basis.push(Operator::diagonal(&space, &diag)?);
    }
    Ok(basis)
}

pub fn build_random_liouvillian(p: &RandomLiouvillianParams) -> Result<ModelSpec> {
    if p.dim < 2 || p.n_jumps < 1 || !(p.strength >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "random Liouvillian needs dim >= 2, n_jumps >= 1, strength >= 0; got {p:?}"
        )));
    }
    let n = p.dim;
    let space = HilbertSpace::single(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let h = Operator::new(space.clone(), random_matrix::gue(n, &mut rng))?;
    let basis = gell_mann_basis(n)?;
    let w = random_matrix::ginibre(basis.len(), p.n_jumps, &mut rng);
    let mut jumps = Vec::with_capacity(p.n_jumps);
    for mu in 0..p.n_jumps {
        let mut m = Mat::<C64>::zeros(n, n);
        for (j, g) in basis.iter().enumerate() {
            let coeff = w[(j, mu)] * p.strength;
            for &(a, b, v) in &g.nonzeros() {
                m[(a, b)] += v * coeff;
            }
        }
        jumps.push(Jump {
            op: Operator::new(space.clone(), m)?,
            rate: 1.0,
            label: format!("L{}", mu + 1),
        });
    }
    ModelSpec::new(format!("random-N{n}-r{}", p.n_jumps), h, jumps)
}

/// Relative gap below which the two leading steady-state populations count
/// as degenerate.
pub const SINK_TIE_TOL: f64 = 1e-9;

/// Appends a basis state `|N>` and the channel `D[|N><Psi_0|]` (at
/// `sink_rate`), where `Psi_0` is the most populated eigenvector of the
/// steady state of `model`. The extended model has `|N><N|` as its steady
/// state.
pub fn extend_with_pure_sink(
    model: &ModelSpec,
    steady_state: &Operator,
    sink_rate: f64,
) -> Result<ModelSpec> {
    if model.space().n_factors() != 1 {
        return Err(Error::InvalidParameter(
            "pure-sink extension is defined for single-factor spaces".into(),
        ));
    }
    if steady_state.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: steady_state.dim(),
        });
    }
    let (pops, vecs) = steady_state.hermitian_eigen()?;
    let n = model.dim();
    let lead = pops[n - 1];
    if n >= 2 && lead - pops[n - 2] < SINK_TIE_TOL {
        return Err(Error::DegenerateSteadyState(format!(
            "populations {:.12} and {:.12} tie within {SINK_TIE_TOL:e}",
            pops[n - 1],
            pops[n - 2]
        )));
    }
    let new_dim = n + 1;
    let space = HilbertSpace::single(new_dim)?;
    let h = model.hamiltonian().pad_to(new_dim)?;
    let mut jumps: Vec<Jump> = model
        .jumps()
        .iter()
        .map(|j| {
            Ok(Jump {
                op: j.op.pad_to(new_dim)?,
                rate: j.rate,
                label: j.label.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let psi0: Vec<C64> = (0..n).map(|i| vecs[(i, n - 1)]).collect();
    let sink = Operator::from_fn(space, |a, b| {
        if a == n && b < n {
            psi0[b].conj()
        } else {
            c(0.0)
        }
    });
    jumps.push(Jump {
        op: sink,
        rate: sink_rate,
        label: "sink".into(),
    });
    ModelSpec::new(format!("{}-sink", model.name()), h, jumps)
}

/// `U -> U / L`, `F -> F sqrt(L)`; leaves `U F^2` invariant.
pub fn apply_thermodynamic_scaling(p: &BoseHubbardParams, scale: f64) -> Result<BoseHubbardParams> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling parameter must be positive, got {scale}"
        )));
    }
    Ok(BoseHubbardParams {
        interaction: p.interaction / scale,
        drive: p.drive * scale.sqrt(),
        ..p.clone()
    })
}
