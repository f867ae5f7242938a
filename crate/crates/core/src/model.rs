//! Parametric coefficient families for the scalar ergodic jump diffusion
//!
//! ```text
//! dX_t = a(X_t, theta) dt + b(X_t, sigma) dW_t + dJ_t,
//! ```
//!
//! where `J` is a compound Poisson process with intensity `lambda` and jump
//! marks drawn from a parametric density `F`. The built-in catalogue is a
//! nested family grid: three drift families, two diffusion families and two
//! jump densities, together with the affine embeddings that realize the
//! nesting and the data-generating model of the built-in experiment.

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use rand::Rng;

/// Identifies one of the built-in drift / diffusion coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyId {
    /// a1(x, t) = (t0 * x|x| + t1 * x + t2) / (1 + x^2)
    Drift1,
    /// a2(x, t) = (t0 * x|x| + t1) / (1 + x^2)
    Drift2,
    /// a3(x, t) = t0 * x|x| / (1 + x^2)
    Drift3,
    /// b1(x, s) = (1 + x^2) / (s0 * x^2 + s1 * x + s2)
    Diffusion1,
    /// b2(x, s) = (1 + x^2) / (s0 * x^2 + s1)
    Diffusion2,
}

/// A drift or diffusion coefficient family: a pure function of the state and
/// a fixed-dimension parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoefficientFamily {
    id: FamilyId,
}

impl CoefficientFamily {
    pub fn new(id: FamilyId) -> Self {
        CoefficientFamily { id }
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn param_dim(&self) -> usize {
        match self.id {
            FamilyId::Drift1 | FamilyId::Diffusion1 => 3,
            FamilyId::Drift2 | FamilyId::Diffusion2 => 2,
            FamilyId::Drift3 => 1,
        }
    }

    pub fn is_diffusion(&self) -> bool {
        matches!(self.id, FamilyId::Diffusion1 | FamilyId::Diffusion2)
    }

    /// Evaluate the coefficient at state `x`.
    ///
    /// Diffusion families must be strictly positive to be meaningful; callers
    /// reject non-positive values (possible for `Diffusion1` in parts of its
    /// parameter box where the denominator changes sign).
    #[inline]
    pub fn eval(&self, x: f64, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.param_dim());
        let x2 = x * x;
        match self.id {
            FamilyId::Drift1 => (params[0] * x * x.abs() + params[1] * x + params[2]) / (1.0 + x2),
            FamilyId::Drift2 => (params[0] * x * x.abs() + params[1]) / (1.0 + x2),
            FamilyId::Drift3 => params[0] * x * x.abs() / (1.0 + x2),
            FamilyId::Diffusion1 => {
                (1.0 + x2) / (params[0] * x2 + params[1] * x + params[2])
            }
            FamilyId::Diffusion2 => (1.0 + x2) / (params[0] * x2 + params[1]),
        }
    }

    /// State derivative of the coefficient at `x`.
    pub fn eval_dx(&self, x: f64, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.param_dim());
        let x2 = x * x;
        let den = 1.0 + x2;
        match self.id {
            FamilyId::Drift1 | FamilyId::Drift2 | FamilyId::Drift3 => {
                let (num, dnum) = match self.id {
                    FamilyId::Drift1 => (
                        params[0] * x * x.abs() + params[1] * x + params[2],
                        2.0 * params[0] * x.abs() + params[1],
                    ),
                    FamilyId::Drift2 => {
                        (params[0] * x * x.abs() + params[1], 2.0 * params[0] * x.abs())
                    }
                    _ => (params[0] * x * x.abs(), 2.0 * params[0] * x.abs()),
                };
                (dnum * den - 2.0 * x * num) / (den * den)
            }
            FamilyId::Diffusion1 | FamilyId::Diffusion2 => {
                let (d, dd) = match self.id {
                    FamilyId::Diffusion1 => (
                        params[0] * x2 + params[1] * x + params[2],
                        2.0 * params[0] * x + params[1],
                    ),
                    _ => (params[0] * x2 + params[1], 2.0 * params[0] * x),
                };
                (2.0 * x * d - den * dd) / (d * d)
            }
        }
    }

    /// Declared positive lower bound of a diffusion family over its default
    /// box, when one holds uniformly in x. `Diffusion1` has none: its
    /// denominator can vanish inside the box, and those parameter points are
    /// rejected at evaluation sites instead.
    pub fn diffusion_lower_bound(&self) -> Option<f64> {
        match self.id {
            FamilyId::Diffusion2 => Some(0.1),
            _ => None,
        }
    }
}

/// Identifies one of the built-in jump mark densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpFamilyId {
    /// Gaussian with parameters (mean, standard deviation).
    Gaussian,
    /// Laplace with parameters (location, scale): (2s)^-1 exp(-|z - m| / s).
    Laplace,
}

/// A parametric jump-mark density with log-density, sampler and (analytic)
/// normalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpDensityFamily {
    id: JumpFamilyId,
}

impl JumpDensityFamily {
    pub fn new(id: JumpFamilyId) -> Self {
        JumpDensityFamily { id }
    }

    pub fn id(&self) -> JumpFamilyId {
        self.id
    }

    pub fn param_dim(&self) -> usize {
        2
    }

    #[inline]
    pub fn log_density(&self, z: f64, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), 2);
        let (loc, scale) = (params[0], params[1]);
        match self.id {
            JumpFamilyId::Gaussian => {
                let u = (z - loc) / scale;
                -0.5 * u * u - scale.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            JumpFamilyId::Laplace => -(z - loc).abs() / scale - (2.0 * scale).ln(),
        }
    }

    #[inline]
    pub fn density(&self, z: f64, params: &[f64]) -> f64 {
        self.log_density(z, params).exp()
    }

    /// Draw one mark.
    pub fn sample<R: Rng + ?Sized>(&self, params: &[f64], rng: &mut R) -> f64 {
        let (loc, scale) = (params[0], params[1]);
        match self.id {
            JumpFamilyId::Gaussian => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                loc + scale * z
            }
            JumpFamilyId::Laplace => {
                let u: f64 = rng.random_range(-0.5..0.5);
                loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    /// Total mass of the density; both built-ins are normalized analytically.
    pub fn normalizer(&self, _params: &[f64]) -> f64 {
        1.0
    }

    /// Radius around the location parameter beyond which the log-density is
    /// below `log_floor`. Used to pick quadrature windows.
    pub fn support_radius(&self, params: &[f64], log_floor: f64) -> f64 {
        let scale = params[1];
        match self.id {
            JumpFamilyId::Gaussian => scale * (2.0 * (-log_floor)).sqrt() + 1.0,
            JumpFamilyId::Laplace => scale * (-log_floor) + 1.0,
        }
    }

    /// Location of the density's non-smooth point, if any.
    pub fn kink(&self, params: &[f64]) -> Option<f64> {
        match self.id {
            JumpFamilyId::Gaussian => None,
            JumpFamilyId::Laplace => Some(params[0]),
        }
    }

    /// Numerical check of the unit mass, by adaptive quadrature.
    pub fn integrate_density(&self, params: &[f64]) -> Result<f64> {
        let r = self.support_radius(params, -40.0);
        let f = |z: f64| self.density(z, params);
        let breaks: Vec<f64> = self.kink(params).into_iter().collect();
        quad::integrate_split(&f, params[0] - r, params[0] + r, &breaks, QuadOptions::default())
    }
}

/// A box constraint: componentwise finite bounds with lower < upper.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidParameter(format!(
                    "box bounds must be finite with lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(ParameterBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| x >= l && x <= u)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Uniform draw from the box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| rng.random_range(l..u))
            .collect()
    }
}

/// One candidate model: coefficient families with their parameter boxes and
/// the admissible intensity interval. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    drift: CoefficientFamily,
    drift_box: ParameterBox,
    diffusion: CoefficientFamily,
    diffusion_box: ParameterBox,
    jump: JumpDensityFamily,
    jump_box: ParameterBox,
    lambda_bounds: (f64, f64),
}

impl ModelSpec {
    pub fn new(
        drift: CoefficientFamily,
        drift_box: ParameterBox,
        diffusion: CoefficientFamily,
        diffusion_box: ParameterBox,
        jump: JumpDensityFamily,
        jump_box: ParameterBox,
        lambda_bounds: (f64, f64),
    ) -> Result<Self> {
        if drift.is_diffusion() || !diffusion.is_diffusion() {
            return Err(Error::InvalidParameter(
                "drift slot takes a drift family, diffusion slot a diffusion family".into(),
            ));
        }
        for (fam_dim, b) in [
            (drift.param_dim(), &drift_box),
            (diffusion.param_dim(), &diffusion_box),
            (jump.param_dim(), &jump_box),
        ] {
            if fam_dim != b.dim() {
                return Err(Error::DimensionMismatch {
                    expected: fam_dim,
                    got: b.dim(),
                });
            }
        }
        let (ll, lu) = lambda_bounds;
        if !(ll.is_finite() && lu.is_finite() && 0.0 < ll && ll < lu) {
            return Err(Error::InvalidParameter(format!(
                "lambda bounds must satisfy 0 < low < high, got ({ll}, {lu})"
            )));
        }
        Ok(ModelSpec {
            drift,
            drift_box,
            diffusion,
            diffusion_box,
            jump,
            jump_box,
            lambda_bounds,
        })
    }

    pub fn drift(&self) -> &CoefficientFamily {
        &self.drift
    }
    pub fn drift_box(&self) -> &ParameterBox {
        &self.drift_box
    }
    pub fn diffusion(&self) -> &CoefficientFamily {
        &self.diffusion
    }
    pub fn diffusion_box(&self) -> &ParameterBox {
        &self.diffusion_box
    }
    pub fn jump(&self) -> &JumpDensityFamily {
        &self.jump
    }
    pub fn jump_box(&self) -> &ParameterBox {
        &self.jump_box
    }
    pub fn lambda_bounds(&self) -> (f64, f64) {
        self.lambda_bounds
    }

    /// Total dimension of the coefficient parameters (drift + diffusion +
    /// jump), excluding the intensity.
    pub fn alpha_dim(&self) -> usize {
        self.drift.param_dim() + self.diffusion.param_dim() + self.jump.param_dim()
    }

    /// Short human-readable tag, e.g. `drift3+diffusion2+laplace`.
    pub fn label(&self) -> String {
        let d = match self.drift.id() {
            FamilyId::Drift1 => "drift1",
            FamilyId::Drift2 => "drift2",
            FamilyId::Drift3 => "drift3",
            _ => unreachable!(),
        };
        let s = match self.diffusion.id() {
            FamilyId::Diffusion1 => "diffusion1",
            FamilyId::Diffusion2 => "diffusion2",
            _ => unreachable!(),
        };
        let j = match self.jump.id() {
            JumpFamilyId::Gaussian => "gaussian",
            JumpFamilyId::Laplace => "laplace",
        };
        format!("{d}+{s}+{j}")
    }
}

/// Parameter values for one model, split by component.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub drift: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub jump: Vec<f64>,
}

/// An affine embedding of a smaller parameter space into a bigger one:
/// `big = F * small + c` with orthonormal columns of F.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedMap {
    embed: Vec<Vec<f64>>, // row-major, big_dim rows x small_dim columns
    offset: Vec<f64>,
}

impl NestedMap {
    pub fn new(embed: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let rows = embed.len();
        if rows == 0 {
            return Err(Error::InvalidParameter("embed matrix has no rows".into()));
        }
        let cols = embed[0].len();
        if embed.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged embed matrix".into()));
        }
        if cols >= rows {
            return Err(Error::InvalidParameter(format!(
                "embedding must be into a strictly bigger space, got {rows}x{cols}"
            )));
        }
        if offset.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: offset.len(),
            });
        }
        let map = NestedMap { embed, offset };
        let defect = map.gram_defect();
        if defect >= 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "embed columns not orthonormal, gram defect {defect:.3e}"
            )));
        }
        Ok(map)
    }

    pub fn small_dim(&self) -> usize {
        self.embed[0].len()
    }

    pub fn big_dim(&self) -> usize {
        self.embed.len()
    }

    /// Max-norm of F^T F - I.
    pub fn gram_defect(&self) -> f64 {
        let cols = self.small_dim();
        let mut worst = 0.0f64;
        for i in 0..cols {
            for j in 0..cols {
                let dot: f64 = self.embed.iter().map(|r| r[i] * r[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Map parameters of the smaller family into the bigger one.
    pub fn embed_params(&self, small_params: &[f64]) -> Result<Vec<f64>> {
        if small_params.len() != self.small_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.small_dim(),
                got: small_params.len(),
            });
        }
        Ok(self
            .embed
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| {
                row.iter()
                    .zip(small_params)
                    .map(|(f, p)| f * p)
                    .sum::<f64>()
                    + c
            })
            .collect())
    }
}

/// A nesting relation between two built-in families.
#[derive(Debug, Clone)]
pub struct NestedRelation {
    pub small: FamilyId,
    pub big: FamilyId,
    pub map: NestedMap,
}

fn unit_column(rows: usize, hot: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|r| vec![if r == hot { 1.0 } else { 0.0 }])
        .collect()
}

/// Embeddings realizing Drift3 < Drift2 < Drift1 and Diffusion2 < Diffusion1.
pub fn builtin_nested_maps() -> Vec<NestedRelation> {
    let d3_in_d2 = NestedMap::new(unit_column(2, 0), vec![0.0, 0.0]).unwrap();
    let d3_in_d1 = NestedMap::new(unit_column(3, 0), vec![0.0, 0.0, 0.0]).unwrap();
    // (lead, constant) -> (lead, 0, constant)
    let two_in_three = vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]];
    let d2_in_d1 = NestedMap::new(two_in_three.clone(), vec![0.0, 0.0, 0.0]).unwrap();
    let s2_in_s1 = NestedMap::new(two_in_three, vec![0.0, 0.0, 0.0]).unwrap();
    vec![
        NestedRelation {
            small: FamilyId::Drift3,
            big: FamilyId::Drift2,
            map: d3_in_d2,
        },
        NestedRelation {
            small: FamilyId::Drift3,
            big: FamilyId::Drift1,
            map: d3_in_d1,
        },
        NestedRelation {
            small: FamilyId::Drift2,
            big: FamilyId::Drift1,
            map: d2_in_d1,
        },
        NestedRelation {
            small: FamilyId::Diffusion2,
            big: FamilyId::Diffusion1,
            map: s2_in_s1,
        },
    ]
}

/// Default parameter box for a drift family.
pub fn default_drift_box(dim: usize) -> ParameterBox {
    ParameterBox::new(vec![-10.0; dim], vec![10.0; dim]).unwrap()
}

/// Default parameter box for a diffusion family.
pub fn default_diffusion_box(dim: usize) -> ParameterBox {
    ParameterBox::new(vec![0.1; dim], vec![10.0; dim]).unwrap()
}

/// Default parameter box for a jump density: location in [-5, 5], scale in
/// [0.1, 10].
pub fn default_jump_box() -> ParameterBox {
    ParameterBox::new(vec![-5.0, 0.1], vec![5.0, 10.0]).unwrap()
}

/// Default admissible intensity interval.
pub const DEFAULT_LAMBDA_BOUNDS: (f64, f64) = (0.1, 10.0);

fn candidate(drift: FamilyId, diffusion: FamilyId, jump: JumpFamilyId) -> ModelSpec {
    let dfam = CoefficientFamily::new(drift);
    let sfam = CoefficientFamily::new(diffusion);
    let jfam = JumpDensityFamily::new(jump);
    ModelSpec::new(
        dfam,
        default_drift_box(dfam.param_dim()),
        sfam,
        default_diffusion_box(sfam.param_dim()),
        jfam,
        default_jump_box(),
        DEFAULT_LAMBDA_BOUNDS,
    )
    .unwrap()
}

/// The data-generating model of the built-in experiment, with its true
/// parameter values and intensity: Drift3 at -1, Diffusion2 at (2, 3),
/// Laplace marks at location 0 and scale 2, intensity 1.
pub fn builtin_true_model() -> (ModelSpec, ParamSet, f64) {
    let spec = candidate(FamilyId::Drift3, FamilyId::Diffusion2, JumpFamilyId::Laplace);
    let params = ParamSet {
        drift: vec![-1.0],
        diffusion: vec![2.0, 3.0],
        jump: vec![0.0, 2.0],
    };
    (spec, params, 1.0)
}

/// All 3 x 2 x 2 built-in candidate combinations, drift-major order.
pub fn builtin_candidates() -> Vec<ModelSpec> {
    let mut out = Vec::with_capacity(12);
    for drift in [FamilyId::Drift1, FamilyId::Drift2, FamilyId::Drift3] {
        for diffusion in [FamilyId::Diffusion1, FamilyId::Diffusion2] {
            for jump in [JumpFamilyId::Gaussian, JumpFamilyId::Laplace] {
                out.push(candidate(drift, diffusion, jump));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn true_model_values() {
        let (spec, p, lambda) = builtin_true_model();
        assert_eq!(lambda, 1.0);
        // drift at x = 1 with the true parameter
        assert_relative_eq!(spec.drift().eval(1.0, &p.drift), -0.5, epsilon = 1e-15);
        // jump log-density at z = 0
        assert_relative_eq!(
            spec.jump().log_density(0.0, &p.jump),
            (0.25f64).ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(spec.jump().density(0.0, &p.jump), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn candidate_counts() {
        let all = builtin_candidates();
        assert_eq!(all.len(), 12);
        let mut dd: Vec<(FamilyId, FamilyId)> = all
            .iter()
            .map(|m| (m.drift().id(), m.diffusion().id()))
            .collect();
        dd.sort_by_key(|k| format!("{k:?}"));
        dd.dedup();
        assert_eq!(dd.len(), 6);
        let mut jumps: Vec<JumpFamilyId> = all.iter().map(|m| m.jump().id()).collect();
        jumps.sort_by_key(|k| format!("{k:?}"));
        jumps.dedup();
        assert_eq!(jumps.len(), 2);
        let d2 = CoefficientFamily::new(FamilyId::Drift2);
        assert_eq!(d2.param_dim(), 2);
    }

    #[test]
    fn embed_drift3_into_drift2() {
        let maps = builtin_nested_maps();
        let rel = maps
            .iter()
            .find(|r| r.small == FamilyId::Drift3 && r.big == FamilyId::Drift2)
            .unwrap();
        let big = rel.map.embed_params(&[-1.0]).unwrap();
        assert_eq!(big, vec![-1.0, 0.0]);
        // identity check: embedding then evaluating the bigger family matches
        let small_fam = CoefficientFamily::new(FamilyId::Drift3);
        let big_fam = CoefficientFamily::new(FamilyId::Drift2);
        for i in 0..=100 {
            let x = -5.0 + 0.1 * i as f64;
            assert_relative_eq!(
                big_fam.eval(x, &big),
                small_fam.eval(x, &[-1.0]),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn embed_identity_and_orthonormality() {
        for rel in builtin_nested_maps() {
            assert!(rel.map.gram_defect() < 1e-12);
        }
        // square identity maps are rejected: embedding must enlarge dimension
        assert!(NestedMap::new(vec![vec![1.0]], vec![0.0]).is_err());
        // dimension mismatch is an error
        let maps = builtin_nested_maps();
        assert!(maps[0].map.embed_params(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn nested_evaluation_identity_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for rel in builtin_nested_maps() {
            let small_fam = CoefficientFamily::new(rel.small);
            let big_fam = CoefficientFamily::new(rel.big);
            let small_box = if small_fam.is_diffusion() {
                default_diffusion_box(small_fam.param_dim())
            } else {
                default_drift_box(small_fam.param_dim())
            };
            for _ in 0..5 {
                let sp = small_box.sample_uniform(&mut rng);
                let bp = rel.map.embed_params(&sp).unwrap();
                let mut worst = 0.0f64;
                for i in 0..=1000 {
                    let x = -10.0 + 0.02 * i as f64;
                    let lhs = big_fam.eval(x, &bp);
                    let rhs = small_fam.eval(x, &sp);
                    worst = worst.max((lhs - rhs).abs());
                }
                assert!(worst < 1e-12, "{:?} in {:?}: defect {worst}", rel.small, rel.big);
            }
        }
    }

    #[test]
    fn diffusion2_lower_bound_on_box() {
        let fam = CoefficientFamily::new(FamilyId::Diffusion2);
        let bound = fam.diffusion_lower_bound().unwrap();
        let b = default_diffusion_box(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = b.sample_uniform(&mut rng);
            for i in 0..=200 {
                let x = -100.0 + i as f64;
                let v = fam.eval(x, &p);
                assert!(v >= bound - 1e-12, "b({x}) = {v} below {bound}");
                assert!(v <= 10.0 + 1e-12);
            }
        }
    }

    #[test]
    fn state_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for id in [
            FamilyId::Drift1,
            FamilyId::Drift2,
            FamilyId::Drift3,
            FamilyId::Diffusion1,
            FamilyId::Diffusion2,
        ] {
            let fam = CoefficientFamily::new(id);
            let bx = if fam.is_diffusion() {
                default_diffusion_box(fam.param_dim())
            } else {
                default_drift_box(fam.param_dim())
            };
            for _ in 0..5 {
                let p = bx.sample_uniform(&mut rng);
                for i in 0..=40 {
                    let x = -4.0 + 0.2 * i as f64;
                    let v = fam.eval(x, &p);
                    if !v.is_finite() || v.abs() > 1e6 {
                        continue; // Diffusion1 denominator can vanish
                    }
                    let eps = 1e-6 * (1.0 + x.abs());
                    let fd = (fam.eval(x + eps, &p) - fam.eval(x - eps, &p)) / (2.0 * eps);
                    let dx = fam.eval_dx(x, &p);
                    if !fd.is_finite() {
                        continue;
                    }
                    assert!(
                        (dx - fd).abs() <= 1e-5 * (1.0 + fd.abs().max(dx.abs())),
                        "{id:?} at x = {x}, params {p:?}: analytic {dx} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn jump_densities_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = default_jump_box();
        for id in [JumpFamilyId::Gaussian, JumpFamilyId::Laplace] {
            let fam = JumpDensityFamily::new(id);
            for _ in 0..20 {
                let p = b.sample_uniform(&mut rng);
                let mass = fam.integrate_density(&p).unwrap();
                assert!(
                    (mass - 1.0).abs() < 1e-6,
                    "{id:?} at {p:?} integrates to {mass}"
                );
                assert_eq!(fam.normalizer(&p), 1.0);
            }
        }
    }

    #[test]
    fn laplace_tail_bound_holds() {
        // log-density <= C - c|z| on a grid out to |z| = 50, for box params
        let fam = JumpDensityFamily::new(JumpFamilyId::Laplace);
        let b = default_jump_box();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = b.sample_uniform(&mut rng);
            // c = 1 / scale works once |z| clears the location offset
            let c = 1.0 / p[1];
            let cap = fam.log_density(p[0], &p) + c * p[0].abs();
            for i in 0..=100 {
                let z = -50.0 + i as f64;
                assert!(fam.log_density(z, &p) <= cap - c * z.abs() + 1e-9);
            }
        }
    }

    #[test]
    fn model_spec_validation() {
        let d = CoefficientFamily::new(FamilyId::Drift3);
        let s = CoefficientFamily::new(FamilyId::Diffusion2);
        let j = JumpDensityFamily::new(JumpFamilyId::Laplace);
        // wrong box dimension
        assert!(ModelSpec::new(
            d,
            default_drift_box(2),
            s,
            default_diffusion_box(2),
            j,
            default_jump_box(),
            (0.1, 10.0),
        )
        .is_err());
        // invalid lambda bounds
        assert!(ModelSpec::new(
            d,
            default_drift_box(1),
            s,
            default_diffusion_box(2),
            j,
            default_jump_box(),
            (0.0, 10.0),
        )
        .is_err());
        assert!(ParameterBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(ParameterBox::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn sampler_matches_density_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let fam = JumpDensityFamily::new(JumpFamilyId::Laplace);
        let p = [0.0, 2.0];
        let n = 200_000;
        let mut mean = 0.0;
        let mut absdev = 0.0;
        for _ in 0..n {
            let z = fam.sample(&p, &mut rng);
            mean += z;
            absdev += z.abs();
        }
        mean /= n as f64;
        absdev /= n as f64;
        // Laplace(0, 2): E|Z| = 2, E Z = 0
        assert!(mean.abs() < 0.03);
        assert!((absdev - 2.0).abs() < 0.03);
    }
}
