//! The arbitrarily varying channel `W(y|x,s)`, state costs and channel hulls.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{ChannelMatrix, InputDistribution, SIMPLEX_TOL};
use crate::{Error, Result};

/// Absolute slack for cost comparisons.
pub const COST_TOL: f64 = 1e-12;

/// Slack for hull-membership checks on mixing weights.
pub const HULL_TOL: f64 = 1e-9;

/// A finite-alphabet AVC with a state cost function normalised to `min l = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Avc {
    nx: usize,
    ny: usize,
    ns: usize,
    /// `w[s][x][y]`
    w: Vec<Vec<Vec<f64>>>,
    cost: Vec<f64>,
    lambda_star: f64,
}

impl Avc {
    /// `w[s]` is the `|X|×|Y|` matrix for state `s`.
    pub fn new(w: Vec<Vec<Vec<f64>>>, cost: Vec<f64>) -> Result<Self> {
        let ns = w.len();
        if ns == 0 {
            return Err(Error::DimensionMismatch("AVC needs at least one state".into()));
        }
        if cost.len() != ns {
            return Err(Error::DimensionMismatch(format!("{} costs for {ns} states", cost.len())));
        }
        let nx = w[0].len();
        if nx < 2 {
            return Err(Error::DimensionMismatch("input alphabet needs at least 2 symbols".into()));
        }
        let ny = w[0][0].len();
        if nx > 256 || ny > 256 || ns > 256 {
            return Err(Error::Unsupported("alphabets above 256 symbols".into()));
        }
        for (s, m) in w.iter().enumerate() {
            if m.len() != nx || m.iter().any(|r| r.len() != ny) {
                return Err(Error::DimensionMismatch(format!("W(.|.,{s}) is not {nx}x{ny}")));
            }
            ChannelMatrix::new(m.clone())
                .map_err(|e| Error::InvalidDistribution(format!("W(.|.,{s}): {e}")))?;
        }
        if cost.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::OutOfRange(format!("state costs must be finite and nonnegative: {cost:?}")));
        }
        let lmin = cost.iter().cloned().fold(f64::INFINITY, f64::min);
        if lmin.abs() > COST_TOL {
            return Err(Error::OutOfRange(format!("state costs must have minimum 0, got {lmin}")));
        }
        let lambda_star = cost.iter().cloned().fold(0.0, f64::max);
        Ok(Self { nx, ny, ns, w, cost, lambda_star })
    }

    /// Bit-flipping AVC: `y = x ⊕ s`, `l(s) = s`.
    pub fn bitflip() -> Self {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let flip = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        Self::new(vec![id, flip], vec![0.0, 1.0]).expect("bitflip preset")
    }

    /// Real adder AVC: `y = x + s` over `{0,1,2}`, `l(s) = s`.
    pub fn real_adder() -> Self {
        let s0 = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let s1 = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        Self::new(vec![s0, s1], vec![0.0, 1.0]).expect("real-adder preset")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "bitflip" => Ok(Self::bitflip()),
            "real-adder" | "real_adder" => Ok(Self::real_adder()),
            _ => Err(Error::MissingInput(format!("unknown AVC preset '{name}' (known: bitflip, real-adder)"))),
        }
    }

    /// Parse the TOML definition format (`X`, `Y`, `S`, `W`, `l`).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: AvcFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        f.into_avc()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// A preset name or a path to a definition file.
    pub fn load(spec: &str) -> Result<Self> {
        match Self::preset(spec) {
            Ok(a) => Ok(a),
            Err(_) if Path::new(spec).exists() => Self::from_file(Path::new(spec)),
            Err(e) => Err(e),
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ns(&self) -> usize {
        self.ns
    }
    pub fn costs(&self) -> &[f64] {
        &self.cost
    }
    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    /// `W(y|x,s)`.
    #[inline]
    pub fn prob(&self, y: usize, x: usize, s: usize) -> f64 {
        self.w[s][x][y]
    }

    /// The output distribution `W(·|x,s)`.
    #[inline]
    pub fn row(&self, x: usize, s: usize) -> &[f64] {
        &self.w[s][x]
    }

    /// The channel `W(·|·,s)` for a fixed state.
    pub fn state_channel(&self, s: usize) -> ChannelMatrix {
        ChannelMatrix::from_rows_unchecked(self.w[s].clone())
    }

    pub(crate) fn raw(&self) -> &[Vec<Vec<f64>>] {
        &self.w
    }

    /// Some state with zero cost.
    pub fn zero_cost_state(&self) -> usize {
        self.cost.iter().position(|l| *l <= COST_TOL).expect("normalised costs")
    }

    fn check_seq(seq: &[u8], size: usize) -> Result<()> {
        match seq.iter().find(|&&v| v as usize >= size) {
            Some(&v) => Err(Error::SymbolOutOfRange { symbol: v as usize, size }),
            None => Ok(()),
        }
    }

    /// Draw one channel output for input `x` in state `s`.
    pub fn sample_output<R: Rng + ?Sized>(&self, x: usize, s: usize, rng: &mut R) -> u8 {
        let row = &self.w[s][x];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return y as u8;
            }
        }
        // rounding: return the last symbol with positive mass
        row.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u8
    }

    /// Pass `x` through the channel in states `s`.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &[u8], s: &[u8], rng: &mut R) -> Result<Vec<u8>> {
        if x.len() != s.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: s.len() });
        }
        Self::check_seq(x, self.nx)?;
        Self::check_seq(s, self.ns)?;
        Ok(x.iter().zip(s).map(|(&a, &b)| self.sample_output(a as usize, b as usize, rng)).collect())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WField {
    Nested(Vec<Vec<Vec<f64>>>),
    Flat(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AvcFile {
    #[serde(rename = "X")]
    x: usize,
    #[serde(rename = "Y")]
    y: usize,
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "W")]
    w: WField,
    l: Vec<f64>,
}

impl AvcFile {
    fn into_avc(self) -> Result<Avc> {
        let w = match self.w {
            WField::Nested(w) => w,
            WField::Flat(v) => {
                if v.len() != self.s * self.x * self.y {
                    return Err(Error::DimensionMismatch(format!(
                        "W: flat list has {} entries, expected S*X*Y = {}",
                        v.len(),
                        self.s * self.x * self.y
                    )));
                }
                v.chunks(self.x * self.y).map(|m| m.chunks(self.y).map(|r| r.to_vec()).collect()).collect()
            }
        };
        if w.len() != self.s || w.iter().any(|m| m.len() != self.x || m.iter().any(|r| r.len() != self.y)) {
            return Err(Error::DimensionMismatch(format!("W: expected {} matrices of {}x{}", self.s, self.x, self.y)));
        }
        Avc::new(w, self.l)
    }
}

/// The per-symbol average cost budget `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateConstraint {
    pub lambda: f64,
}

impl StateConstraint {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::OutOfRange(format!("cost budget {lambda} must be finite and >= 0")));
        }
        Ok(Self { lambda })
    }

    pub fn is_unconstrained(&self, avc: &Avc) -> bool {
        self.lambda >= avc.lambda_star()
    }
}

/// Mixing weights of a hull point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    /// `Q(s)`: a state distribution (convex closure).
    Q(Vec<f64>),
    /// `U(s|x)`: one state distribution per input (row-convex closure).
    U(Vec<Vec<f64>>),
}

/// A point of one of the channel hulls together with its induced channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    pub mixing: Mixing,
    pub induced: ChannelMatrix,
    /// Expected state cost under the mixing (for `U`, averaged with `P`).
    pub cost: f64,
}

/// `Π_t W(y_t | x_t, s_t)`.
pub fn block_prob(avc: &Avc, x: &[u8], s: &[u8], y: &[u8]) -> Result<f64> {
    if x.len() != s.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: s.len() });
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    Avc::check_seq(x, avc.nx)?;
    Avc::check_seq(s, avc.ns)?;
    Avc::check_seq(y, avc.ny)?;
    Ok(x.iter().zip(s).zip(y).map(|((&a, &b), &c)| avc.prob(c as usize, a as usize, b as usize)).product())
}

/// `Σ_t l(s_t)`.
pub fn state_cost(avc: &Avc, s: &[u8]) -> Result<f64> {
    Avc::check_seq(s, avc.ns)?;
    Ok(s.iter().map(|&v| avc.cost[v as usize]).sum())
}

/// Whether `l(s) ≤ nΛ` (with absolute slack [`COST_TOL`]).
pub fn admissible(avc: &Avc, s: &[u8], lambda: f64) -> bool {
    match state_cost(avc, s) {
        Ok(c) => c <= s.len() as f64 * lambda + COST_TOL,
        Err(_) => false,
    }
}

fn check_simplex(q: &[f64], what: &str) -> Result<()> {
    if q.iter().any(|v| !v.is_finite() || *v < -HULL_TOL) {
        return Err(Error::InvalidDistribution(format!("{what}: negative entry in {q:?}")));
    }
    let s: f64 = q.iter().sum();
    if (s - 1.0).abs() > HULL_TOL.max(SIMPLEX_TOL) {
        return Err(Error::InvalidDistribution(format!("{what}: sums to {s}")));
    }
    Ok(())
}

/// `V(y|x) = Σ_s W(y|x,s) Q(s)`.
pub fn induced_channel_q(avc: &Avc, q: &[f64]) -> Result<ChannelMatrix> {
    if q.len() != avc.ns {
        return Err(Error::DimensionMismatch(format!("Q has {} entries for {} states", q.len(), avc.ns)));
    }
    check_simplex(q, "Q")?;
    Ok(ChannelMatrix::from_rows_unchecked(induce_q_raw(avc, q)))
}

pub(crate) fn induce_q_raw(avc: &Avc, q: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; avc.ny]; avc.nx];
    for (s, &qs) in q.iter().enumerate() {
        if qs == 0.0 {
            continue;
        }
        for (x, row) in rows.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                *v += qs * avc.w[s][x][y];
            }
        }
    }
    rows
}

/// `V(y|x) = Σ_s W(y|x,s) U(s|x)`. `P` fixes the dimension and is used by
/// [`hull_point_u`] for the cost; the induced channel itself does not depend
/// on it.
pub fn induced_channel_u(avc: &Avc, p: &InputDistribution, u: &[Vec<f64>]) -> Result<ChannelMatrix> {
    if p.len() != avc.nx || u.len() != avc.nx {
        return Err(Error::DimensionMismatch(format!("U needs {} rows", avc.nx)));
    }
    for (x, r) in u.iter().enumerate() {
        if r.len() != avc.ns {
            return Err(Error::DimensionMismatch(format!("U row {x} has {} entries for {} states", r.len(), avc.ns)));
        }
        check_simplex(r, &format!("U(.|{x})"))?;
    }
    Ok(ChannelMatrix::from_rows_unchecked(induce_u_raw(avc, u)))
}

pub(crate) fn induce_u_raw(avc: &Avc, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; avc.ny]; avc.nx];
    for (x, row) in rows.iter_mut().enumerate() {
        for (s, &us) in u[x].iter().enumerate() {
            if us == 0.0 {
                continue;
            }
            for (y, v) in row.iter_mut().enumerate() {
                *v += us * avc.w[s][x][y];
            }
        }
    }
    rows
}

/// `Σ_s Q(s) l(s)`.
pub fn cost_q(avc: &Avc, q: &[f64]) -> f64 {
    q.iter().zip(&avc.cost).map(|(a, b)| a * b).sum()
}

/// `Σ_{x,s} P(x) U(s|x) l(s)`.
pub fn cost_u(avc: &Avc, p: &InputDistribution, u: &[Vec<f64>]) -> f64 {
    p.probs().iter().zip(u).map(|(px, r)| px * cost_q(avc, r)).sum()
}

pub fn hull_point_q(avc: &Avc, q: Vec<f64>) -> Result<HullPoint> {
    let induced = induced_channel_q(avc, &q)?;
    let cost = cost_q(avc, &q);
    Ok(HullPoint { mixing: Mixing::Q(q), induced, cost })
}

pub fn hull_point_u(avc: &Avc, p: &InputDistribution, u: Vec<Vec<f64>>) -> Result<HullPoint> {
    let induced = induced_channel_u(avc, p, &u)?;
    let cost = cost_u(avc, p, &u);
    Ok(HullPoint { mixing: Mixing::U(u), induced, cost })
}

impl HullPoint {
    /// Whether the point satisfies the cost constraint for budget `lambda`.
    pub fn within_budget(&self, lambda: f64) -> bool {
        self.cost <= lambda + HULL_TOL
    }
}
