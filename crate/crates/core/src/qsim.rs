//! Few-qubit linear algebra and Born-rule simulation of the star and bilocal networks.
//!
//! Qubit ordering: the star's global state is laid out as (A1, B1, A2, B2, A3, B3),
//! one (branch, centre) pair per source, with qubit 0 the most significant bit of a
//! basis index. The centre party B holds (B1, B2, B3). Outcome `a` of a ±1 observable
//! corresponds to eigenvalue (−1)^a, and b = 0 is GHZ success.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::dist::{ConditionalDistribution, Scenario};
use crate::error::{domain, structural, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(structural(format!(
                "matrix of dimension {dim} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("matrix entries must be finite"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::new(dim, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C1;
        }
        m
    }

    /// |ψ⟩⟨ψ|
    pub fn outer(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut data = Vec::with_capacity(dim * dim);
        for a in psi {
            for b in psi {
                data.push(a * b.conj());
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut data = vec![C0; dim * dim];
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a == C0 {
                    continue;
                }
                for k in 0..m {
                    let row = (i * m + k) * dim + j * m;
                    for l in 0..m {
                        data[row + l] = a * other.data[k * m + l];
                    }
                }
            }
        }
        Self { dim, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut data = vec![C0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Self { dim: n, data }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in sub");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, data }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|a| a * c).collect() }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = vec![C0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Self { dim: n, data }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in trace_product");
        let n = self.dim;
        let mut acc = C0;
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * other.data[j * n + i];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Hermitian PSD test: a Cholesky factorization of `self + tol·𝟙` must exist.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol.max(1e-12)) {
            return false;
        }
        let n = self.dim;
        let mut l = vec![C0; n * n];
        for j in 0..n {
            let mut d = self.data[j * n + j].re + tol;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if d <= 0.0 {
                return false;
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        true
    }

    pub fn num_qubits(&self) -> Option<usize> {
        self.dim.is_power_of_two().then(|| self.dim.trailing_zeros() as usize)
    }

    /// Reorders tensor factors: output qubit k is input qubit `order[k]`.
    pub fn reorder_qubits(&self, order: &[usize]) -> Result<Self> {
        let n = self
            .num_qubits()
            .ok_or_else(|| structural(format!("dimension {} is not a qubit register", self.dim)))?;
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&q| q >= n || std::mem::replace(&mut seen[q], true)) {
            return Err(structural(format!("{order:?} is not a permutation of {n} qubits")));
        }
        let source: Vec<usize> = (0..self.dim)
            .map(|out| {
                let mut idx = 0;
                for (k, &q) in order.iter().enumerate() {
                    let bit = (out >> (n - 1 - k)) & 1;
                    idx |= bit << (n - 1 - q);
                }
                idx
            })
            .collect();
        let dim = self.dim;
        let mut data = vec![C0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = self.data[source[r] * dim + source[c]];
            }
        }
        Ok(Self { dim, data })
    }

    /// Tr_front[(op ⊗ 𝟙) · self], where `op` acts on the leading tensor factor.
    pub fn contract_front(&self, op: &Self) -> Result<Self> {
        let f = op.dim;
        if self.dim % f != 0 {
            return Err(structural(format!("factor of dimension {f} does not divide {}", self.dim)));
        }
        let r = self.dim / f;
        let dim = self.dim;
        let mut out = vec![C0; r * r];
        for l in 0..f {
            for k in 0..f {
                let w = op.data[l * f + k];
                if w == C0 {
                    continue;
                }
                for i in 0..r {
                    let row = (k * r + i) * dim + l * r;
                    for j in 0..r {
                        out[i * r + j] += w * self.data[row + j];
                    }
                }
            }
        }
        Ok(Self { dim: r, data: out })
    }
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("static shape")
}

pub fn pauli_y() -> ComplexMatrix {
    let i = Complex64::new(0.0, 1.0);
    ComplexMatrix { dim: 2, data: vec![C0, -i, i, C0] }
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("static shape")
}

/// Unit trace, Hermitian, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(ComplexMatrix);

impl DensityOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_hermitian(1e-12) {
            return Err(domain("density operator must be Hermitian"));
        }
        if (m.trace() - C1).norm() > 1e-12 {
            return Err(domain(format!("density operator has trace {}", m.trace())));
        }
        if !m.is_positive_semidefinite(1e-10) {
            return Err(domain("density operator must be positive semidefinite"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    /// Born rule: Re Tr(ρ E).
    pub fn probability(&self, effect: &Projector) -> f64 {
        self.0.trace_product(&effect.0).re
    }
}

/// Hermitian with eigenvalues ±1, i.e. O = O† and O² = 𝟙.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable(ComplexMatrix);

impl Observable {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_hermitian(1e-12) {
            return Err(domain("observable must be Hermitian"));
        }
        if m.matmul(&m).max_abs_diff(&ComplexMatrix::identity(m.dim)) > 1e-10 {
            return Err(domain("observable must square to the identity"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    /// Projector onto the eigenspace (−1)^outcome.
    pub fn projector(&self, outcome: usize) -> Projector {
        let sign = if outcome % 2 == 0 { 1.0 } else { -1.0 };
        let id = ComplexMatrix::identity(self.0.dim);
        Projector(id.add(&self.0.scale(sign)).scale(0.5))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projector(ComplexMatrix);

impl Projector {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_hermitian(1e-12) || m.matmul(&m).max_abs_diff(&m) > 1e-12 {
            return Err(domain("not an orthogonal projector"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn complement(&self) -> Self {
        Self(ComplexMatrix::identity(self.0.dim).sub(&self.0))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairState {
    /// (|00⟩ + |11⟩)/√2
    PhiPlus,
    /// (|01⟩ − |10⟩)/√2
    Singlet,
}

impl PairState {
    pub fn amplitudes(self) -> [Complex64; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            PairState::PhiPlus => [h, C0, C0, h],
            PairState::Singlet => [C0, h, -h, C0],
        }
    }
}

/// Isotropic state v·|ψ⟩⟨ψ| + (1−v)·𝟙/4.
pub fn make_entangled_pair(kind: PairState, visibility: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(domain(format!("visibility {visibility} outside [0, 1]")));
    }
    let pure = ComplexMatrix::outer(&kind.amplitudes());
    let noise = ComplexMatrix::identity(4).scale(0.25);
    DensityOperator::new(pure.scale(visibility).add(&noise.scale(1.0 - visibility)))
}

/// sinθ cosφ σX + sinθ sinφ σY + cosθ σZ
pub fn branch_observable(theta: f64, phi: f64) -> Observable {
    let m = pauli_x()
        .scale(theta.sin() * phi.cos())
        .add(&pauli_y().scale(theta.sin() * phi.sin()))
        .add(&pauli_z().scale(theta.cos()));
    Observable(m)
}

/// Projector onto (|0…0⟩ + |1…1⟩)/√2.
pub fn ghz_projector(n: usize) -> Result<Projector> {
    if n < 2 {
        return Err(domain(format!("GHZ projector needs at least 2 qubits, got {n}")));
    }
    let dim = 1usize << n;
    let mut psi = vec![C0; dim];
    psi[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    psi[dim - 1] = psi[0];
    Ok(Projector(ComplexMatrix::outer(&psi)))
}

/// Every branch party measures the observable at (θ_x, φ_x) for input x; source i emits
/// an isotropic |φ⁺⟩ pair with visibility `visibility[i]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarStrategy {
    pub theta0: f64,
    pub theta1: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub visibility: [f64; 3],
}

impl StarStrategy {
    pub fn new(theta0: f64, theta1: f64) -> Self {
        Self { theta0, theta1, phi0: 0.0, phi1: 0.0, visibility: [1.0; 3] }
    }

    pub fn with_phi(mut self, phi0: f64, phi1: f64) -> Self {
        self.phi0 = phi0;
        self.phi1 = phi1;
        self
    }

    pub fn with_visibility(mut self, v: f64) -> Self {
        self.visibility = [v; 3];
        self
    }

    pub fn with_visibilities(mut self, v: [f64; 3]) -> Self {
        self.visibility = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.visibility {
            if !(0.0..=1.0).contains(&v) {
                return Err(domain(format!("visibility {v} outside [0, 1]")));
            }
        }
        for a in [self.theta0, self.theta1, self.phi0, self.phi1] {
            if !a.is_finite() {
                return Err(domain("angles must be finite"));
            }
        }
        Ok(())
    }

    /// Source/branch i of the result is source/branch `perm[i]` of `self`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let mut out = *self;
        out.visibility = perm.map(|i| self.visibility[i]);
        out
    }

    pub fn observables(&self) -> [Observable; 2] {
        [branch_observable(self.theta0, self.phi0), branch_observable(self.theta1, self.phi1)]
    }
}

/// p(a1,a2,a3,b | x1,x2,x3) for the three-branch star with a GHZ-projecting centre.
pub fn simulate_star(strategy: &StarStrategy) -> Result<ConditionalDistribution> {
    strategy.validate()?;
    let pairs = strategy
        .visibility
        .iter()
        .map(|&v| make_entangled_pair(PairState::PhiPlus, v))
        .collect::<Result<Vec<_>>>()?;
    let global = pairs[0].kron(&pairs[1]).kron(&pairs[2]);
    // (A1,B1,A2,B2,A3,B3) -> (A1,A2,A3,B1,B2,B3) so branches form one leading block.
    let grouped = global.matrix().reorder_qubits(&[0, 2, 4, 1, 3, 5])?;
    let ghz = ghz_projector(3)?;
    let centre = [ghz.clone(), ghz.complement()];
    let proj: Vec<[Projector; 2]> =
        strategy.observables().iter().map(|o| [o.projector(0), o.projector(1)]).collect();

    let scenario = Scenario::star();
    let mut table = vec![0.0; scenario.table_len()];
    for x in 0..8 {
        let xs = [(x >> 2) & 1, (x >> 1) & 1, x & 1];
        for a in 0..8 {
            let as_ = [(a >> 2) & 1, (a >> 1) & 1, a & 1];
            let branch = proj[xs[0]][as_[0]].kron(&proj[xs[1]][as_[1]]).kron(&proj[xs[2]][as_[2]]);
            let conditional = grouped.contract_front(branch.matrix())?;
            for (b, effect) in centre.iter().enumerate() {
                let p = conditional.trace_product(effect.matrix()).re;
                table[x * 16 + a * 2 + b] = p;
            }
        }
    }
    ConditionalDistribution::new(scenario, table)
}

/// Same Born rule as [`simulate_star`] without forming the 64-dimensional state. Each
/// branch projector Π on an isotropic φ⁺ pair leaves the centre qubit in
/// M = v·Πᵀ/2 + (1−v)·𝟙/4, and the GHZ effect only reads the 000/111 corner entries of
/// M₁⊗M₂⊗M₃. Branch marginals are 1/2 per party, which fixes the b = 1 entries.
pub fn simulate_star_factorized(strategy: &StarStrategy) -> Result<ConditionalDistribution> {
    strategy.validate()?;
    let dirs = [(strategy.theta0, strategy.phi0), (strategy.theta1, strategy.phi1)]
        .map(|(t, f)| (t.sin() * f.cos(), t.sin() * f.sin(), t.cos()));
    // centre[i][x][a] = (M00, M11, M01)
    let centre: Vec<[[(f64, f64, Complex64); 2]; 2]> = strategy
        .visibility
        .iter()
        .map(|&v| {
            dirs.map(|(nx, ny, nz)| {
                [1.0, -1.0].map(|s| {
                    let q = v / 4.0;
                    let flat = (1.0 - v) / 4.0;
                    (q * (1.0 + s * nz) + flat, q * (1.0 - s * nz) + flat, Complex64::new(q * s * nx, q * s * ny))
                })
            })
        })
        .collect();
    let scenario = Scenario::star();
    let mut table = vec![0.0; scenario.table_len()];
    for x in 0..8 {
        let xs = [(x >> 2) & 1, (x >> 1) & 1, x & 1];
        for a in 0..8 {
            let as_ = [(a >> 2) & 1, (a >> 1) & 1, a & 1];
            let m: Vec<_> = (0..3).map(|i| centre[i][xs[i]][as_[i]]).collect();
            let diag = m.iter().map(|e| e.0).product::<f64>() + m.iter().map(|e| e.1).product::<f64>();
            let off = m.iter().map(|e| e.2).product::<Complex64>();
            let p0 = 0.5 * (diag + 2.0 * off.re);
            table[x * 16 + a * 2] = p0;
            table[x * 16 + a * 2 + 1] = 0.125 - p0;
        }
    }
    ConditionalDistribution::new(scenario, table)
}

/// p(a,b,c | x,z) for the bilocal line with two singlets and a partial Bell measurement
/// {φ⁺, φ⁻, rest} at the centre.
pub fn simulate_bilocal() -> Result<ConditionalDistribution> {
    let pair = make_entangled_pair(PairState::Singlet, 1.0)?;
    // (A, B1, B2, C) -> (A, C, B1, B2)
    let grouped = pair.kron(&pair).matrix().reorder_qubits(&[0, 3, 1, 2])?;
    let diag = pauli_z().add(&pauli_x()).scale(FRAC_1_SQRT_2);
    let anti = pauli_z().sub(&pauli_x()).scale(FRAC_1_SQRT_2);
    let alice = [Observable::new(pauli_x())?, Observable::new(pauli_z())?];
    let charlie = [Observable::new(diag)?, Observable::new(anti)?];

    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let phi_plus = Projector(ComplexMatrix::outer(&[h, C0, C0, h]));
    let phi_minus = Projector(ComplexMatrix::outer(&[h, C0, C0, -h]));
    let rest = Projector(
        ComplexMatrix::identity(4).sub(phi_plus.matrix()).sub(phi_minus.matrix()),
    );
    let centre = [phi_plus, phi_minus, rest];

    let scenario = Scenario::bilocal();
    let mut table = vec![0.0; scenario.table_len()];
    for x in 0..2 {
        for z in 0..2 {
            let input = scenario.encode_inputs(&[x, 0, z]);
            for a in 0..2 {
                for c in 0..2 {
                    let outer = alice[x].projector(a).kron(&charlie[z].projector(c));
                    let conditional = grouped.contract_front(outer.matrix())?;
                    for (b, effect) in centre.iter().enumerate() {
                        let out = scenario.encode_outputs(&[a, b, c]);
                        table[scenario.index(input, out)] =
                            conditional.trace_product(effect.matrix()).re;
                    }
                }
            }
        }
    }
    ConditionalDistribution::new(scenario, table)
}
