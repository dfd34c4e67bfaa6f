//! States of conventional and extended phase space, and sampled trajectories.
//!
//! The extended phase space adds the pair (t, e) to the n pairs (qⁱ, pᵢ).
//! The pair is stored directly as time and energy; no factor of c is carried.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::{ConventionalHamiltonian, ExtendedHamiltonian};

fn check_finite(what: &str, q: &[f64], p: &[f64], scalars: &[f64]) -> Result<()> {
    let ok = q.iter().chain(p).chain(scalars).all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_dims(q: &[f64], p: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: p.len(),
        });
    }
    Ok(())
}

/// A point (q, p) at time t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl ConventionalState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        check_dims(&q, &p)?;
        check_finite("conventional state", &q, &p, &[t])?;
        Ok(Self { q, p, t })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// A point (q, p, t, e) of the 2n+2 dimensional extended phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub e: f64,
}

impl ExtendedState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64, e: f64) -> Result<Self> {
        check_dims(&q, &p)?;
        check_finite("extended state", &q, &p, &[t, e])?;
        Ok(Self { q, p, t, e })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        check_finite("", &self.q, &self.p, &[self.t, self.e]).is_ok()
    }

    /// Flattened layout `[q.., p.., t, e]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dim() + 2);
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.p);
        v.push(self.t);
        v.push(self.e);
        v
    }

    /// Inverse of [`ExtendedState::to_vec`]. The slice length must be even and at least 4.
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 4 || !v.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: v.len(),
            });
        }
        let n = (v.len() - 2) / 2;
        Ok(Self {
            q: v[..n].to_vec(),
            p: v[n..2 * n].to_vec(),
            t: v[2 * n],
            e: v[2 * n + 1],
        })
    }

    /// `self + h * v`, componentwise.
    pub fn advanced(&self, h: f64, v: &Tangent) -> ExtendedState {
        ExtendedState {
            q: self.q.iter().zip(&v.dq).map(|(x, d)| x + h * d).collect(),
            p: self.p.iter().zip(&v.dp).map(|(x, d)| x + h * d).collect(),
            t: self.t + h * v.dt,
            e: self.e + h * v.de,
        }
    }

    /// Largest absolute componentwise difference over (q, p, t, e).
    pub fn max_abs_diff(&self, other: &ExtendedState) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Partial derivatives of a scalar function on extended phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dt: f64,
    pub de: f64,
}

impl Gradient {
    pub fn zeros(n: usize) -> Self {
        Self {
            dq: vec![0.0; n],
            dp: vec![0.0; n],
            dt: 0.0,
            de: 0.0,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dp);
        v.push(self.dt);
        v.push(self.de);
        v
    }
}

/// A rate of change (dq, dp, dt, de) with respect to some evolution parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dt: f64,
    pub de: f64,
}

impl Tangent {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dp);
        v.push(self.dt);
        v.push(self.de);
        v
    }

    /// The Hamiltonian vector field of a function with gradient `g`:
    /// (∂g/∂p, −∂g/∂q, −∂g/∂e, ∂g/∂t).
    pub fn hamiltonian_field(g: &Gradient) -> Tangent {
        Tangent {
            dq: g.dp.clone(),
            dp: g.dq.iter().map(|d| -d).collect(),
            dt: -g.de,
            de: g.dt,
        }
    }
}

/// Embed `state` into extended phase space with e = H(q, p, t).
pub fn lift(state: &ConventionalState, h: &dyn ConventionalHamiltonian) -> Result<ExtendedState> {
    if state.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: state.dim(),
        });
    }
    let e = h.eval(&state.q, &state.p, state.t)?;
    ExtendedState::new(state.q.clone(), state.p.clone(), state.t, e)
}

/// Drop the energy coordinate.
pub fn project(xstate: &ExtendedState) -> ConventionalState {
    ConventionalState {
        q: xstate.q.clone(),
        p: xstate.p.clone(),
        t: xstate.t,
    }
}

/// Value of the extended Hamiltonian; zero on physical (on-shell) states.
pub fn constraint_residual(xstate: &ExtendedState, he: &dyn ExtendedHamiltonian) -> Result<f64> {
    he.eval(xstate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    /// Samples are indexed by physical time t.
    TimeT,
    /// Samples are indexed by the extended evolution parameter s.
    EvolutionS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub param: f64,
    pub state: ExtendedState,
    /// Constraint residual recorded by the integrator.
    pub residual: f64,
}

/// Ordered samples of extended states against t or s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    kind: ParameterKind,
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(kind: ParameterKind) -> Self {
        Self {
            kind,
            samples: Vec::new(),
        }
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.state.dim())
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Append a sample; rejects a parameter that does not exceed the last one
    /// and a state of a different dimension.
    pub fn push(&mut self, param: f64, state: ExtendedState, residual: f64) -> Result<()> {
        if !param.is_finite() {
            return Err(Error::NonFinite("trajectory parameter".into()));
        }
        if let Some(last) = self.samples.last() {
            if param <= last.param {
                return Err(Error::NonMonotone {
                    last: last.param,
                    next: param,
                });
            }
            if state.dim() != last.state.dim() {
                return Err(Error::DimensionMismatch {
                    expected: last.state.dim(),
                    got: state.dim(),
                });
            }
        }
        self.samples.push(Sample {
            param,
            state,
            residual,
        });
        Ok(())
    }

    /// Cubic interpolation through the four samples nearest to `param`.
    ///
    /// Falls back to lower order when fewer samples exist. `param` must lie
    /// within the sampled range.
    pub fn interpolate(&self, param: f64) -> Result<ExtendedState> {
        let n = self.samples.len();
        let (lo, hi) = match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (a.param, b.param),
            _ => return Err(Error::domain("interpolate", "empty trajectory")),
        };
        if !(lo..=hi).contains(&param) {
            return Err(Error::domain(
                "interpolate",
                format!("{param} outside [{lo}, {hi}]"),
            ));
        }
        if n == 1 {
            return Ok(self.samples[0].state.clone());
        }
        // index of the interval [k, k+1] containing param
        let k = self
            .samples
            .partition_point(|s| s.param <= param)
            .saturating_sub(1)
            .min(n - 2);
        let width = n.min(4);
        let start = (k + 1).saturating_sub(width / 2).min(n - width);
        let nodes = &self.samples[start..start + width];

        let weights: Vec<f64> = (0..width)
            .map(|i| {
                (0..width)
                    .filter(|&j| j != i)
                    .map(|j| (param - nodes[j].param) / (nodes[i].param - nodes[j].param))
                    .product()
            })
            .collect();
        let len = 2 * nodes[0].state.dim() + 2;
        let mut out = vec![0.0; len];
        for (node, w) in nodes.iter().zip(&weights) {
            for (o, v) in out.iter_mut().zip(node.state.to_vec()) {
                *o += w * v;
            }
        }
        ExtendedState::from_slice(&out)
    }

    /// CSV header `param,t,e,q1..qn,p1..pn,He_residual`.
    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("param,t,e");
        for i in 1..=n {
            let _ = write!(h, ",q{i}");
        }
        for i in 1..=n {
            let _ = write!(h, ",p{i}");
        }
        h.push_str(",He_residual");
        h
    }

    /// Write as CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.dim().unwrap_or(1);
        writeln!(out, "{}", Self::csv_header(n))?;
        for s in &self.samples {
            let mut line = String::new();
            let _ = write!(line, "{:.16e},{:.16e},{:.16e}", s.param, s.state.t, s.state.e);
            for v in s.state.q.iter().chain(&s.state.p) {
                let _ = write!(line, ",{v:.16e}");
            }
            let _ = write!(line, ",{:.16e}", s.residual);
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parse CSV written by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(input: R, kind: ParameterKind) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::config("empty CSV"))?
            .map_err(|e| Error::config(e.to_string()))?;
        let cols = header.split(',').count();
        if cols < 6 || (cols - 4) % 2 != 0 {
            return Err(Error::config(format!("unexpected CSV header `{header}`")));
        }
        let n = (cols - 4) / 2;
        if header != Self::csv_header(n) {
            return Err(Error::config(format!("unexpected CSV header `{header}`")));
        }
        let mut traj = Trajectory::new(kind);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::config(format!("line {}: {e}", lineno + 2)))?;
            if vals.len() != cols {
                return Err(Error::config(format!(
                    "line {}: expected {cols} fields, got {}",
                    lineno + 2,
                    vals.len()
                )));
            }
            let state = ExtendedState {
                q: vals[3..3 + n].to_vec(),
                p: vals[3 + n..3 + 2 * n].to_vec(),
                t: vals[1],
                e: vals[2],
            };
            traj.push(vals[0], state, vals[cols - 1])?;
        }
        Ok(traj)
    }
}
