use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use extham_core::brackets::{GradientMode, GradientScheme};
use extham_core::dynamics::{Method, StepperConfig};
use extham_core::systems::{CouplingSpec, PotentialSpec, SystemParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// Conventional equations, parameter t.
    T,
    /// Extended equations, parameter s.
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    Infinitesimal,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Analytic,
    Fd,
}

/// Everything a run depends on. Reports embed the resolved value, so a run
/// can be repeated from its report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: String,
    /// `const:<v>` or `sin:<a>,<w>`; absent means the system default.
    pub mu: Option<CouplingSpec>,
    pub mass: f64,
    pub c: f64,
    pub potential: PotentialSpec,
    pub dim: usize,

    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t0: f64,
    /// Initial e for extended runs; absent means the on-shell value H(q, p, t0).
    pub e: Option<f64>,

    pub param: Parametrization,
    pub span: f64,
    pub stepper: StepperConfig,

    pub invariants: Vec<String>,
    /// Bound on the drift of monitored quantities.
    pub drift_tol: f64,

    pub samples: usize,
    pub seed: u64,
    pub scheme: GradientScheme,
    /// Bound on max |[He, I]|; absent picks 1e-10 (analytic) or 1e-5 (fd).
    pub bracket_tol: Option<f64>,

    pub eps: f64,
    pub mode: TransformMode,
    pub flow_steps: usize,
    /// When set, `symmetry` also checks that the symmetry flow commutes with
    /// the dynamics over this parameter span.
    pub delta_s: Option<f64>,
    pub commute_tol: f64,
    pub rotation_tol: f64,

    pub out_csv: Option<PathBuf>,
    pub out_report: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            system: "kepler".into(),
            mu: None,
            mass: 1.0,
            c: 1.0,
            potential: PotentialSpec::Zero,
            dim: 2,
            q: vec![1.0, 0.0],
            p: vec![0.0, 1.0],
            t0: 0.0,
            e: None,
            param: Parametrization::S,
            span: 20.0 * std::f64::consts::PI,
            stepper: StepperConfig::default(),
            invariants: vec!["angular-momentum".into()],
            drift_tol: 1e-8,
            samples: 100,
            seed: 42,
            scheme: GradientScheme::analytic(),
            bracket_tol: None,
            eps: 1e-3,
            mode: TransformMode::Infinitesimal,
            flow_steps: 1000,
            delta_s: None,
            commute_tol: 1e-8,
            rotation_tol: 1e-9,
            out_csv: None,
            out_report: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            mu: self.mu,
            mass: self.mass,
            c: self.c,
            potential: self.potential,
            dim: self.dim,
        }
    }

    pub fn bracket_tol(&self) -> f64 {
        self.bracket_tol.unwrap_or(match self.scheme.mode {
            GradientMode::Analytic => 1e-10,
            GradientMode::CentralDifference => 1e-5,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.span > 0.0 && self.span.is_finite()) {
            return bad(format!("span must be > 0, got {}", self.span));
        }
        if self.q.len() != self.p.len() {
            return bad(format!(
                "q has {} components but p has {}",
                self.q.len(),
                self.p.len()
            ));
        }
        if self.invariants.iter().any(|s| s.trim().is_empty()) {
            return bad("empty invariant name".into());
        }
        for (name, v) in [
            ("drift_tol", self.drift_tol),
            ("commute_tol", self.commute_tol),
            ("rotation_tol", self.rotation_tol),
            ("fd_step", self.scheme.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if let Some(t) = self.bracket_tol {
            if t <= 0.0 || !t.is_finite() {
                return bad(format!("bracket_tol must be > 0, got {t}"));
            }
        }
        if !self.eps.is_finite() {
            return bad(format!("eps must be finite, got {}", self.eps));
        }
        if let Some(ds) = self.delta_s {
            if !(ds > 0.0 && ds.is_finite()) {
                return bad(format!("delta_s must be > 0, got {ds}"));
            }
        }
        if self.flow_steps == 0 {
            return bad("flow_steps must be > 0".into());
        }
        self.stepper
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// A comma-separated list of numbers given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberList(pub Vec<f64>);

fn parse_list(s: &str) -> Result<NumberList, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()
        .map(NumberList)
}

/// Flags shared by `simulate`, `bracket` and `symmetry`; each overrides the
/// matching field of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// JSON scenario file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// kepler, kepler-timedep, relativistic or free.
    #[arg(long)]
    pub system: Option<String>,
    /// Coupling: const:<v> or sin:<a>,<w> for mu(t) = 1 + a sin(w t).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<CouplingSpec>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// zero, const:<v> or coulomb:<k>.
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<PotentialSpec>,
    #[arg(long)]
    pub dim: Option<usize>,

    /// Initial positions, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub q: Option<NumberList>,
    /// Initial momenta, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub p: Option<NumberList>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Initial e; omit to start on shell.
    #[arg(long, allow_hyphen_values = true)]
    pub e: Option<f64>,
    /// Whole state as q1..qn,p1..pn[,t[,e]].
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub state: Option<NumberList>,

    #[arg(long, value_enum)]
    pub param: Option<Parametrization>,
    #[arg(long)]
    pub span: Option<f64>,
    /// rk4 or rk45.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,

    /// Invariant names; repeat the flag or separate with commas.
    #[arg(long = "invariant", visible_alias = "invariants", value_delimiter = ',')]
    pub invariants: Vec<String>,
    #[arg(long)]
    pub drift_tol: Option<f64>,

    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub bracket_tol: Option<f64>,

    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<TransformMode>,
    #[arg(long)]
    pub flow_steps: Option<usize>,
    #[arg(long)]
    pub delta_s: Option<f64>,
    #[arg(long)]
    pub commute_tol: Option<f64>,
    #[arg(long)]
    pub rotation_tol: Option<f64>,

    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

impl ScenarioArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            system,
            mass,
            c,
            potential,
            dim,
            t0,
            param,
            span,
            drift_tol,
            samples,
            seed,
            eps,
            mode,
            flow_steps,
            commute_tol,
            rotation_tol
        );
        if let Some(NumberList(q)) = &self.q {
            cfg.q = q.clone();
        }
        if let Some(NumberList(p)) = &self.p {
            cfg.p = p.clone();
        }
        if self.mu.is_some() {
            cfg.mu = self.mu;
        }
        if self.e.is_some() {
            cfg.e = self.e;
        }
        if self.bracket_tol.is_some() {
            cfg.bracket_tol = self.bracket_tol;
        }
        if self.delta_s.is_some() {
            cfg.delta_s = self.delta_s;
        }
        if self.out_csv.is_some() {
            cfg.out_csv = self.out_csv.clone();
        }
        if self.out_report.is_some() {
            cfg.out_report = self.out_report.clone();
        }
        if let Some(NumberList(state)) = &self.state {
            let n = cfg.dim;
            if !(2 * n..=2 * n + 2).contains(&state.len()) {
                return Err(CliError::Config(format!(
                    "--state needs {} to {} numbers for dim {n}, got {}",
                    2 * n,
                    2 * n + 2,
                    state.len()
                )));
            }
            cfg.q = state[..n].to_vec();
            cfg.p = state[n..2 * n].to_vec();
            if let Some(&t) = state.get(2 * n) {
                cfg.t0 = t;
            }
            if let Some(&e) = state.get(2 * n + 1) {
                cfg.e = Some(e);
            }
        }
        if let Some(m) = self.method {
            cfg.stepper.method = m;
        }
        if let Some(v) = self.step {
            cfg.stepper.step = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.stepper.abs_tol = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.stepper.rel_tol = v;
        }
        if let Some(v) = self.max_steps {
            cfg.stepper.max_steps = v;
        }
        if let Some(s) = self.scheme {
            cfg.scheme.mode = match s {
                SchemeArg::Analytic => GradientMode::Analytic,
                SchemeArg::Fd => GradientMode::CentralDifference,
            };
        }
        if let Some(h) = self.fd_step {
            cfg.scheme.fd_step = h;
        }
        if !self.invariants.is_empty() {
            cfg.invariants = self.invariants.iter().map(|s| s.trim().to_string()).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
