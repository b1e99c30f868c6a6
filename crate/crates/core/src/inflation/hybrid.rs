//! Hybrid star models: one classical source, arbitrary no-signaling resources elsewhere.
//!
//! A model is a finite mixture over the classical variable λ. Given λ, the branch fed by
//! the classical source answers deterministically, and the other two branches together
//! with the centre share a no-signaling box q_λ(a_j, a_l, b | x_j, x_l). Because the
//! classical answer can be copied, such models have an explicit inflation
//! p_inf = Σ_λ w_λ Π_c [a1c = f_λ(x1c)] q_λ(a2, a3, b | x2, x3).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{branch_response, inflated_scenario, placement_permutation};
use crate::dist::{ConditionalDistribution, Party, Scenario};
use crate::error::{domain, Result};
use crate::qsim::{
    branch_observable, make_entangled_pair, ComplexMatrix, DensityOperator, Observable, PairState,
};

pub const MAX_COMPONENTS: usize = 8;

/// q(a_j, a_l, b | x_j, x_l) over parties (Aj, Al, B).
#[derive(Clone, Debug, PartialEq)]
pub struct NsiBox(ConditionalDistribution);

fn nsi_scenario() -> Scenario {
    Scenario::new(vec![Party::new("Aj", 2, 2), Party::new("Al", 2, 2), Party::new("B", 1, 2)])
        .expect("static scenario")
}

impl NsiBox {
    pub fn new(d: ConditionalDistribution) -> Result<Self> {
        if d.scenario() != &nsi_scenario() {
            return Err(domain("box must be over (Aj: 2 in/2 out, Al: 2 in/2 out, B: 1 in/2 out)"));
        }
        if !d.validate().is_valid() {
            return Err(domain("box must be normalized and no-signaling"));
        }
        Ok(Self(d))
    }

    /// Born rule on two pairs with qubit order (Aj, Bj) and (Al, Bl); the centre applies
    /// the two-qubit effect `effect` (0 ≤ E ≤ 𝟙) for b = 0 and 𝟙 − E for b = 1.
    pub fn quantum(
        pair_j: &DensityOperator,
        pair_l: &DensityOperator,
        obs_j: &[Observable; 2],
        obs_l: &[Observable; 2],
        effect: &ComplexMatrix,
    ) -> Result<Self> {
        let state = pair_j.kron(pair_l).matrix().reorder_qubits(&[0, 2, 1, 3])?;
        let effects = [effect.clone(), ComplexMatrix::identity(4).sub(effect)];
        let s = nsi_scenario();
        let mut table = vec![0.0; s.table_len()];
        for xj in 0..2 {
            for xl in 0..2 {
                let x = s.encode_inputs(&[xj, xl, 0]);
                for aj in 0..2 {
                    for al in 0..2 {
                        let op = obs_j[xj].projector(aj).kron(&obs_l[xl].projector(al));
                        let centre = state.contract_front(op.matrix())?;
                        for (b, e) in effects.iter().enumerate() {
                            table[s.index(x, s.encode_outputs(&[aj, al, b]))] = centre.trace_product(e).re;
                        }
                    }
                }
            }
        }
        Self::new(ConditionalDistribution::new(s, table)?)
    }

    /// Local deterministic box: a_j = f(x_j), a_l = g(x_l), fixed b.
    pub fn deterministic(f: usize, g: usize, b: usize) -> Self {
        let d = ConditionalDistribution::deterministic(nsi_scenario(), |x: &[usize]| {
            vec![branch_response(f, x[0]), branch_response(g, x[1]), b]
        })
        .expect("valid deterministic box");
        Self(d)
    }

    /// Uniform over the four outcomes with a_j ⊕ a_l ⊕ b = x_j·x_l ⊕ α·x_j ⊕ β·x_l ⊕ γ.
    pub fn parity(alpha: usize, beta: usize, gamma: usize) -> Self {
        let s = nsi_scenario();
        let mut table = vec![0.0; s.table_len()];
        for x in 0..s.num_joint_inputs() {
            let xs = s.decode_inputs(x);
            let target = (xs[0] * xs[1] + alpha * xs[0] + beta * xs[1] + gamma) % 2;
            for o in 0..s.num_joint_outputs() {
                let os = s.decode_outputs(o);
                if (os[0] + os[1] + os[2]) % 2 == target {
                    table[s.index(x, o)] = 0.25;
                }
            }
        }
        Self(ConditionalDistribution::new(s, table).expect("valid parity box"))
    }

    pub fn prob(&self, aj: usize, al: usize, b: usize, xj: usize, xl: usize) -> f64 {
        self.0.prob(&[aj, al, b], &[xj, xl, 0])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridComponent {
    pub weight: f64,
    /// Classical branch's answer as a [`branch_response`] kind.
    pub response: usize,
    pub nsi: NsiBox,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    classical_source: usize,
    components: Vec<HybridComponent>,
}

impl HybridModel {
    pub fn new(classical_source: usize, components: Vec<HybridComponent>) -> Result<Self> {
        placement_permutation(classical_source)?;
        if components.is_empty() || components.len() > MAX_COMPONENTS {
            return Err(domain(format!("need 1 to {MAX_COMPONENTS} components, got {}", components.len())));
        }
        if components.iter().any(|c| c.weight < 0.0 || c.response > 3) {
            return Err(domain("weights must be nonnegative and responses in 0..4"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("weights sum to {total}")));
        }
        Ok(Self { classical_source, components })
    }

    pub fn classical_source(&self) -> usize {
        self.classical_source
    }

    pub fn components(&self) -> &[HybridComponent] {
        &self.components
    }

    /// The observed star distribution in the original party labeling.
    pub fn distribution(&self) -> Result<ConditionalDistribution> {
        let s = Scenario::star();
        let relabel = placement_permutation(self.classical_source)?;
        let map = s.permutation_index_map(&relabel)?;
        let mut table = vec![0.0; s.table_len()];
        for (new, &old) in map.iter().enumerate() {
            let (xs, os) = (s.decode_inputs(new / 16), s.decode_outputs(new % 16));
            table[old] = self
                .components
                .iter()
                .filter(|c| branch_response(c.response, xs[0]) == os[0])
                .map(|c| c.weight * c.nsi.prob(os[1], os[2], os[3], xs[1], xs[2]))
                .sum();
        }
        ConditionalDistribution::new(s, table)
    }

    /// Explicit inflation in the LP's column layout for this model's placement.
    pub fn inflation_point(&self) -> Vec<f64> {
        let inf = inflated_scenario();
        (0..inf.table_len())
            .map(|col| {
                let (xs, os) = (inf.decode_inputs(col / 64), inf.decode_outputs(col % 64));
                self.components
                    .iter()
                    .filter(|c| (0..3).all(|k| branch_response(c.response, xs[k]) == os[k]))
                    .map(|c| c.weight * c.nsi.prob(os[3], os[4], os[5], xs[3], xs[4]))
                    .sum()
            })
            .collect()
    }
}

fn component_count<R: Rng + ?Sized>(rng: &mut R) -> usize {
    rng.random_range(1..=MAX_COMPONENTS)
}

fn random_effect<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    let mut psi: Vec<Complex64> = (0..4)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|c| *c /= norm);
    ComplexMatrix::outer(&psi)
}

fn random_observables<R: Rng + ?Sized>(rng: &mut R) -> [Observable; 2] {
    let mut pick = || {
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        branch_observable(theta, phi)
    };
    [pick(), pick()]
}

/// Random quantum box: isotropic φ⁺ pairs with random visibilities, random measurement
/// directions, and a random rank-one centre projector.
pub fn random_quantum_box<R: Rng + ?Sized>(rng: &mut R) -> Result<NsiBox> {
    let pj = make_entangled_pair(PairState::PhiPlus, rng.random_range(0.0..=1.0))?;
    let pl = make_entangled_pair(PairState::PhiPlus, rng.random_range(0.0..=1.0))?;
    let (oj, ol) = (random_observables(rng), random_observables(rng));
    NsiBox::quantum(&pj, &pl, &oj, &ol, &random_effect(rng))
}

/// Hybrid model with up to eight λ values, random weights, and quantum boxes.
pub fn sample_quantum_model<R: Rng + ?Sized>(classical_source: usize, rng: &mut R) -> Result<HybridModel> {
    let n = component_count(rng);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let components = raw
        .into_iter()
        .map(|w| {
            Ok(HybridComponent { weight: w / total, response: rng.random_range(0..4), nsi: random_quantum_box(rng)? })
        })
        .collect::<Result<Vec<_>>>()?;
    HybridModel::new(classical_source, components)
}

/// Hybrid model whose weights are multiples of 1/8 and whose boxes are deterministic or
/// parity boxes, so every probability is an exact dyadic rational.
pub fn sample_rational_model<R: Rng + ?Sized>(classical_source: usize, rng: &mut R) -> Result<HybridModel> {
    let n = component_count(rng);
    let mut units = vec![1usize; n];
    for _ in n..MAX_COMPONENTS {
        units[rng.random_range(0..n)] += 1;
    }
    let components = units
        .into_iter()
        .map(|u| {
            let nsi = if rng.random_bool(0.5) {
                NsiBox::deterministic(rng.random_range(0..4), rng.random_range(0..4), rng.random_range(0..2))
            } else {
                NsiBox::parity(rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2))
            };
            HybridComponent { weight: u as f64 / MAX_COMPONENTS as f64, response: rng.random_range(0..4), nsi }
        })
        .collect();
    HybridModel::new(classical_source, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inflation::build_inflation_lp;
    use crate::lpsolve::{verify_point, SolverOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boxes_are_no_signaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let b = random_quantum_box(&mut rng).unwrap();
            assert!(b.0.validate().no_signaling_residual() < 1e-12);
        }
        for (a, b, c) in [(0, 0, 0), (1, 0, 1), (1, 1, 1)] {
            assert!(NsiBox::parity(a, b, c).0.validate().is_valid());
        }
    }

    #[test]
    fn explicit_inflation_satisfies_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..=3 {
            let m = sample_quantum_model(k, &mut rng).unwrap();
            let d = m.distribution().unwrap();
            let p = build_inflation_lp(&d, k).unwrap();
            // the target was rounded onto a grid, so compare the marginal rows against d itself
            let exact = crate::inflation::build_inflation_lp_exact(
                &d.table().iter().map(|&v| num_rational::BigRational::from_float(v).unwrap()).collect::<Vec<_>>(),
                k,
            )
            .unwrap();
            assert!(exact.residual(&m.inflation_point()) < 1e-12);
            assert!(p.residual(&m.inflation_point()) < 1e-3);
        }
    }

    #[test]
    fn dyadic_model_inflation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=3 {
            let m = sample_rational_model(k, &mut rng).unwrap();
            let p = build_inflation_lp(&m.distribution().unwrap(), k).unwrap();
            let point: Vec<_> = m
                .inflation_point()
                .iter()
                .map(|&v| num_rational::BigRational::from_float(v).unwrap())
                .collect();
            assert!(verify_point(p.system(), &point));
            assert!(p.solve(&SolverOptions::default()).unwrap().is_feasible());
        }
    }

    #[test]
    fn weights_are_checked() {
        let c = HybridComponent { weight: 0.5, response: 0, nsi: NsiBox::deterministic(0, 0, 0) };
        assert!(HybridModel::new(1, vec![c.clone()]).is_err());
        assert!(HybridModel::new(1, vec![c.clone(), c.clone()]).is_ok());
        assert!(HybridModel::new(4, vec![c.clone(), c]).is_err());
    }
}
