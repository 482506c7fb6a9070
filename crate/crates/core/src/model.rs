//! Model specifications and the exact jump rates of the N-particle generator.
//!
//! Each particle jumps up at rate `1 + δ`, down at rate 1 when it is away
//! from the origin, and for every partner strictly below it, down by
//! `ψ(x_i, x_k)` at rate `(λ/N) φ(x_i, x_k)`.
//!
//! The kernels are assumed Lipschitz enough for the mean-field limit to be
//! well posed; nothing here checks that for tabulated kernels.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::measure::ProbabilityVector;

/// Closed-form kernels; also used past the cutoff of a tabulated kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKernel {
    /// φ ≡ 1, ψ ≡ 1.
    SmallJump,
    /// φ ≡ 1, ψ(x, y) = |y − x|: the upper particle lands on the lower one.
    JumpToLower,
}

impl BuiltinKernel {
    fn phi(self, _x: u64, _y: u64) -> f64 {
        1.0
    }

    fn psi(self, x: u64, y: u64) -> u64 {
        match self {
            BuiltinKernel::SmallJump => 1,
            BuiltinKernel::JumpToLower => x.abs_diff(y),
        }
    }
}

/// Dense kernel table on `{0..=cutoff}²`. Pairs absent from the table, and
/// pairs with a coordinate past the cutoff, fall back to a builtin kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    cutoff: u64,
    phi: Vec<f64>,
    psi: Vec<u64>,
    fallback: BuiltinKernel,
}

impl TabulatedKernel {
    /// Builds a table from `(x, y, φ, ψ)` rows. Each row also sets `(y, x)`.
    pub fn from_rows(rows: &[(u64, u64, f64, u64)], fallback: BuiltinKernel) -> Result<Self> {
        let cutoff = rows.iter().map(|r| r.0.max(r.1)).max().unwrap_or(0);
        if cutoff > 4096 {
            return Err(Error::invalid(format!(
                "kernel table cutoff {cutoff} exceeds 4096"
            )));
        }
        let side = cutoff as usize + 1;
        let mut phi: Vec<f64> = Vec::with_capacity(side * side);
        let mut psi: Vec<u64> = Vec::with_capacity(side * side);
        for x in 0..=cutoff {
            for y in 0..=cutoff {
                phi.push(fallback.phi(x, y));
                psi.push(fallback.psi(x, y));
            }
        }
        let mut seen = vec![false; side * side];
        for &(x, y, f, s) in rows {
            if x == y {
                // the generator never evaluates the kernel on the diagonal
                continue;
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("phi({x},{y}) = {f} not in [0,1]")));
            }
            if s < 1 || s > x.max(y) {
                return Err(Error::invalid(format!(
                    "psi({x},{y}) = {s} not in [1, max(x,y)]"
                )));
            }
            for (a, b) in [(x, y), (y, x)] {
                let idx = a as usize * side + b as usize;
                if seen[idx] && (phi[idx] != f || psi[idx] != s) {
                    return Err(Error::invalid(format!(
                        "kernel table is not symmetric at ({x},{y})"
                    )));
                }
                seen[idx] = true;
                phi[idx] = f;
                psi[idx] = s;
            }
        }
        Ok(Self {
            cutoff,
            phi,
            psi,
            fallback,
        })
    }

    /// Reads a CSV with header `x,y,phi,psi`.
    pub fn read_csv(path: &Path, fallback: BuiltinKernel) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse(format!(
                    "{}: kernel rows need 4 fields, found {}",
                    path.display(),
                    record.len()
                )));
            }
            let parse_u = |i: usize| -> Result<u64> {
                record[i]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer `{}`", &record[i])))
            };
            let phi: f64 = record[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad phi `{}`", &record[2])))?;
            rows.push((parse_u(0)?, parse_u(1)?, phi, parse_u(3)?));
        }
        Self::from_rows(&rows, fallback)
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    fn index(&self, x: u64, y: u64) -> Option<usize> {
        (x <= self.cutoff && y <= self.cutoff)
            .then(|| x as usize * (self.cutoff as usize + 1) + y as usize)
    }

    pub fn phi(&self, x: u64, y: u64) -> f64 {
        match self.index(x, y) {
            Some(i) => self.phi[i],
            None => self.fallback.phi(x, y),
        }
    }

    pub fn psi(&self, x: u64, y: u64) -> u64 {
        match self.index(x, y) {
            Some(i) => self.psi[i],
            None => self.fallback.psi(x, y),
        }
    }

    fn off_diagonal(&self) -> impl Iterator<Item = usize> + '_ {
        let side = self.cutoff as usize + 1;
        (0..side * side).filter(move |i| i / side != i % side)
    }

    fn unit_phi(&self) -> bool {
        self.off_diagonal().all(|i| self.phi[i] == 1.0)
    }

    fn unit_psi(&self) -> bool {
        self.fallback == BuiltinKernel::SmallJump && self.off_diagonal().all(|i| self.psi[i] == 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    SmallJump,
    JumpToLower,
    Tabulated(Arc<TabulatedKernel>),
}

impl Kernel {
    pub fn phi(&self, x: u64, y: u64) -> f64 {
        match self {
            Kernel::SmallJump => BuiltinKernel::SmallJump.phi(x, y),
            Kernel::JumpToLower => BuiltinKernel::JumpToLower.phi(x, y),
            Kernel::Tabulated(t) => t.phi(x, y),
        }
    }

    pub fn psi(&self, x: u64, y: u64) -> u64 {
        match self {
            Kernel::SmallJump => 1,
            Kernel::JumpToLower => x.abs_diff(y),
            Kernel::Tabulated(t) => t.psi(x, y),
        }
    }

    /// φ ≡ 1 on all off-diagonal pairs.
    pub fn has_unit_phi(&self) -> bool {
        match self {
            Kernel::SmallJump | Kernel::JumpToLower => true,
            Kernel::Tabulated(t) => t.unit_phi(),
        }
    }

    /// φ ≡ 1 and ψ ≡ 1, whatever the representation.
    pub fn is_small_jump(&self) -> bool {
        match self {
            Kernel::SmallJump => true,
            Kernel::JumpToLower => false,
            Kernel::Tabulated(t) => t.unit_phi() && t.unit_psi(),
        }
    }

    /// Parses `small_jump`, `jump_to_lower` or `tabulated:<path>`; relative
    /// paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        match text.trim() {
            "small_jump" => Ok(Kernel::SmallJump),
            "jump_to_lower" => Ok(Kernel::JumpToLower),
            other => {
                let Some(path) = other.strip_prefix("tabulated:") else {
                    return Err(Error::Parse(format!("unknown kernel `{other}`")));
                };
                let mut full = PathBuf::from(path.trim());
                if full.is_relative() {
                    if let Some(base) = base {
                        full = base.join(full);
                    }
                }
                let table = TabulatedKernel::read_csv(&full, BuiltinKernel::SmallJump)?;
                Ok(Kernel::Tabulated(Arc::new(table)))
            }
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::SmallJump => f.write_str("small_jump"),
            Kernel::JumpToLower => f.write_str("jump_to_lower"),
            Kernel::Tabulated(t) => write!(f, "tabulated(cutoff={})", t.cutoff),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n_particles: usize,
    pub delta: f64,
    pub lambda: f64,
    pub kernel: Kernel,
}

impl ModelSpec {
    pub fn new(n_particles: usize, delta: f64, lambda: f64, kernel: Kernel) -> Result<Self> {
        let spec = Self {
            n_particles,
            delta,
            lambda,
            kernel,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn small_jump(n_particles: usize, delta: f64, lambda: f64) -> Result<Self> {
        Self::new(n_particles, delta, lambda, Kernel::SmallJump)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::invalid("need at least one particle"));
        }
        check_rate_parameters(self.delta, self.lambda)
    }

    /// Loads `n`, `delta`, `lambda` and `kernel` (default `small_jump`) from a
    /// key-value file. Other keys are ignored so that one file can drive
    /// several commands.
    pub fn from_config(kv: &KeyValues, base: Option<&Path>) -> Result<Self> {
        let kernel = match kv.raw("kernel") {
            Some(k) => Kernel::parse(k, base)?,
            None => Kernel::SmallJump,
        };
        Self::new(
            kv.required_scalar("n")?,
            kv.required_scalar("delta")?,
            kv.required_scalar("lambda")?,
            kernel,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = KeyValues::read(path)?;
        Self::from_config(&kv, path.parent())
    }

    /// `N(2 + δ + λ)`, an upper bound on the total jump rate from any state.
    pub fn rate_ceiling(&self) -> f64 {
        self.n_particles as f64 * (2.0 + self.delta + self.lambda)
    }

    pub fn same_parameters(&self, other: &Self) -> bool {
        self.n_particles == other.n_particles
            && self.delta == other.delta
            && self.lambda == other.lambda
    }
}

pub(crate) fn check_rate_parameters(delta: f64, lambda: f64) -> Result<()> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be finite and >= 0, got {delta}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParticleState(pub Vec<u64>);

impl ParticleState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn positions(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_against(&self, model: &ModelSpec) -> Result<()> {
        if self.0.len() != model.n_particles {
            return Err(Error::invalid(format!(
                "state has {} coordinates, model has {} particles",
                self.0.len(),
                model.n_particles
            )));
        }
        Ok(())
    }

    fn with(&self, i: usize, value: u64) -> Self {
        let mut next = self.0.clone();
        next[i] = value;
        Self(next)
    }
}

impl From<Vec<u64>> for ParticleState {
    fn from(v: Vec<u64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionLabel {
    Up(usize),
    IntrinsicDown(usize),
    /// `partner` is `None` when the per-pair terms have been aggregated.
    InteractionDown {
        particle: usize,
        partner: Option<usize>,
    },
}

impl TransitionLabel {
    pub fn particle(&self) -> usize {
        match *self {
            TransitionLabel::Up(i) | TransitionLabel::IntrinsicDown(i) => i,
            TransitionLabel::InteractionDown { particle, .. } => particle,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub target: ParticleState,
    pub rate: f64,
    pub label: TransitionLabel,
}

/// All transitions out of `state`. Small-jump interaction terms are summed
/// per particle; other kernels give one entry per ordered pair.
pub fn jump_rates(state: &ParticleState, model: &ModelSpec) -> Result<Vec<Transition>> {
    state.check_against(model)?;
    let x = state.positions();
    let n = x.len();
    let per_pair = model.lambda / n as f64;
    let aggregate = matches!(model.kernel, Kernel::SmallJump);
    let mut sorted = x.to_vec();
    sorted.sort_unstable();

    let mut out = Vec::with_capacity(3 * n);
    for (i, &xi) in x.iter().enumerate() {
        out.push(Transition {
            target: state.with(i, xi + 1),
            rate: 1.0 + model.delta,
            label: TransitionLabel::Up(i),
        });
        if xi == 0 {
            continue;
        }
        out.push(Transition {
            target: state.with(i, xi - 1),
            rate: 1.0,
            label: TransitionLabel::IntrinsicDown(i),
        });
        if per_pair == 0.0 {
            continue;
        }
        if aggregate {
            let below = sorted.partition_point(|&v| v < xi);
            if below > 0 {
                out.push(Transition {
                    target: state.with(i, xi - 1),
                    rate: per_pair * below as f64,
                    label: TransitionLabel::InteractionDown {
                        particle: i,
                        partner: None,
                    },
                });
            }
            continue;
        }
        for (k, &xk) in x.iter().enumerate() {
            if xk >= xi {
                continue;
            }
            let rate = per_pair * model.kernel.phi(xi, xk);
            if rate <= 0.0 {
                continue;
            }
            let size = model.kernel.psi(xi, xk);
            out.push(Transition {
                target: state.with(i, xi.saturating_sub(size)),
                rate,
                label: TransitionLabel::InteractionDown {
                    particle: i,
                    partner: Some(k),
                },
            });
        }
    }
    Ok(out)
}

/// `(1/N) Σ δ_{x_i}`.
pub fn empirical_measure(state: &ParticleState) -> Result<ProbabilityVector> {
    let x = state.positions();
    let Some(&top) = x.iter().max() else {
        return Err(Error::invalid("empty state"));
    };
    let mut counts = vec![0.0; top as usize + 1];
    for &v in x {
        counts[v as usize] += 1.0;
    }
    ProbabilityVector::from_weights(&counts)
}

/// Whether `a` stochastically dominates `b` under the shared-clock coupling:
/// equal parameters, `a` a small-jump kernel and `b` activating every lower
/// pair (φ ≡ 1). With φ < 1 somewhere the dominated model can miss pulls the
/// small-jump model receives, and the order is lost.
pub fn dominates(a: &ModelSpec, b: &ModelSpec) -> Result<bool> {
    if !a.same_parameters(b) {
        return Err(Error::invalid(
            "domination is only defined between models with equal (N, delta, lambda)",
        ));
    }
    Ok(a.kernel.is_small_jump() && b.kernel.has_unit_phi())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(v: &[u64]) -> ParticleState {
        ParticleState(v.to_vec())
    }

    fn rate_to(ts: &[Transition], target: &[u64]) -> f64 {
        ts.iter()
            .filter(|t| t.target.positions() == target)
            .map(|t| t.rate)
            .sum()
    }

    #[test]
    fn small_jump_rates_at_origin() {
        let m = ModelSpec::small_jump(2, 0.0, 2.0).unwrap();
        let ts = jump_rates(&state(&[0, 0]), &m).unwrap();
        assert_eq!(ts.len(), 2);
        assert!(ts.iter().all(|t| matches!(t.label, TransitionLabel::Up(_)) && t.rate == 1.0));
    }

    #[test]
    fn small_jump_rates_with_one_lower_partner() {
        let m = ModelSpec::small_jump(2, 0.0, 2.0).unwrap();
        let ts = jump_rates(&state(&[0, 1]), &m).unwrap();
        assert_eq!(rate_to(&ts, &[0, 0]), 2.0);
        assert_eq!(rate_to(&ts, &[0, 2]), 1.0);
        assert_eq!(rate_to(&ts, &[1, 1]), 1.0);
        assert_eq!(ts.iter().filter(|t| t.label.particle() == 0).count(), 1);
    }

    #[test]
    fn jump_to_lower_lands_on_partner() {
        let m = ModelSpec::new(2, 0.0, 2.0, Kernel::JumpToLower).unwrap();
        let ts = jump_rates(&state(&[0, 3]), &m).unwrap();
        let pull: Vec<_> = ts
            .iter()
            .filter(|t| matches!(t.label, TransitionLabel::InteractionDown { .. }))
            .collect();
        assert_eq!(pull.len(), 1);
        assert_eq!(pull[0].target.positions(), &[0, 0]);
        assert_eq!(pull[0].rate, 1.0);
        assert_eq!(rate_to(&ts, &[0, 2]), 1.0);
        assert_eq!(rate_to(&ts, &[0, 4]), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = ModelSpec::small_jump(3, 0.0, 1.0).unwrap();
        assert!(matches!(
            jump_rates(&state(&[0, 1]), &m),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn empirical_measure_counts() {
        let mu = empirical_measure(&state(&[0, 0, 3])).unwrap();
        assert!((mu.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((mu.get(3) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mu.tail_bound(), 0.0);
        assert_eq!(empirical_measure(&state(&[5])).unwrap(), ProbabilityVector::point_mass(5));
        assert_eq!(
            empirical_measure(&state(&[1, 1, 1, 1])).unwrap(),
            ProbabilityVector::point_mass(1)
        );
    }

    #[test]
    fn domination_table() {
        let sj = ModelSpec::small_jump(3, 0.5, 2.0).unwrap();
        let jl = ModelSpec::new(3, 0.5, 2.0, Kernel::JumpToLower).unwrap();
        assert!(dominates(&sj, &jl).unwrap());
        assert!(dominates(&sj, &sj).unwrap());
        assert!(!dominates(&jl, &sj).unwrap());
        let other = ModelSpec::small_jump(3, 0.5, 2.5).unwrap();
        assert!(dominates(&sj, &other).is_err());
        let lazy = TabulatedKernel::from_rows(&[(0, 1, 0.5, 1)], BuiltinKernel::SmallJump).unwrap();
        let lazy = ModelSpec::new(3, 0.5, 2.0, Kernel::Tabulated(Arc::new(lazy))).unwrap();
        assert!(!dominates(&sj, &lazy).unwrap());
    }

    #[test]
    fn tabulated_validation() {
        let bad_phi = TabulatedKernel::from_rows(&[(0, 2, 1.5, 1)], BuiltinKernel::SmallJump);
        assert!(bad_phi.is_err());
        let bad_psi = TabulatedKernel::from_rows(&[(1, 2, 1.0, 3)], BuiltinKernel::SmallJump);
        assert!(bad_psi.is_err());
        let asym = TabulatedKernel::from_rows(
            &[(1, 2, 1.0, 1), (2, 1, 0.5, 1)],
            BuiltinKernel::SmallJump,
        );
        assert!(asym.is_err());
        let t = TabulatedKernel::from_rows(&[(1, 4, 0.25, 2)], BuiltinKernel::JumpToLower).unwrap();
        assert_eq!(t.phi(4, 1), 0.25);
        assert_eq!(t.psi(4, 1), 2);
        assert_eq!(t.psi(9, 2), 7);
        assert_eq!(t.psi(3, 0), 3);
    }

    #[test]
    fn tabulated_small_jump_is_recognised() {
        let rows: Vec<_> = (0..4u64)
            .flat_map(|x| (0..x).map(move |y| (x, y, 1.0, 1)))
            .collect();
        let t = TabulatedKernel::from_rows(&rows, BuiltinKernel::SmallJump).unwrap();
        assert!(Kernel::Tabulated(Arc::new(t)).is_small_jump());
    }
}
