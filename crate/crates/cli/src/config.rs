//! Scenario files: schema, parsing and model construction.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use phdae::models::{
    circuit, make_cahn_hilliard_1d, make_circuit, make_mechanical, make_poroelastic,
    make_quantum_thermo, mechanical, poroelastic, CahnHilliard1DParams, CircuitParams, MechanicalParams,
    ModelError, PoroelasticParams, QuantumThermoParams, MODEL_NAMES,
};
use phdae::transforms::{regularize, RegularizationConfig};
use phdae::{InputSignal, Matrix, Scheme, SchemeConfig, State, SystemSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Model(#[from] ModelError),
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub model: ModelSection,
    pub scheme: SchemeSection,
    pub regularization: Option<RegularizationSection>,
    pub time: TimeSection,
    #[serde(default)]
    pub initial_state: InitialStateSection,
    pub outputs: Option<Outputs>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub name: String,
    pub tau: f64,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSection {
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
}

/// Either a preset name or a full state vector in the model's own
/// (unregularized) coordinates.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    pub preset: Option<String>,
    pub values: Option<Vec<f64>>,
    /// Used by the random Cahn–Hilliard presets.
    pub amplitude: Option<f64>,
    pub seed: Option<u64>,
    /// Initial pressure for the poroelastic preset.
    pub pressure: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory_csv: Option<String>,
    pub audit_csv: Option<String>,
    pub report_json: Option<String>,
    pub order_csv: Option<String>,
}

impl Outputs {
    /// Used when the scenario has no `[outputs]` table.
    pub fn all_defaults() -> Self {
        Outputs {
            trajectory_csv: Some("trajectory.csv".into()),
            audit_csv: Some("audit.csv".into()),
            report_json: Some("report.json".into()),
            order_csv: Some("orders.csv".into()),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<scenario>"),
            message: e.to_string(),
        })?;
        if s.schema != SCHEMA_VERSION {
            return Err(field(
                "schema",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", s.schema),
            ));
        }
        if !MODEL_NAMES.contains(&s.model.name.as_str()) {
            return Err(field(
                "model.name",
                format!("unknown model `{}`; expected one of {}", s.model.name, MODEL_NAMES.join(", ")),
            ));
        }
        if !(s.time.t_end > s.time.t0) || !s.time.t0.is_finite() || !s.time.t_end.is_finite() {
            return Err(field("time.t_end", format!("must exceed t0 = {}", s.time.t0)));
        }
        if let Some(r) = s.regularization {
            if !(r.epsilon > 0.0 && r.epsilon.is_finite()) {
                return Err(field(
                    "regularization.epsilon",
                    format!("must be positive and finite, got {}", r.epsilon),
                ));
            }
        }
        s.scheme_config()?;
        Ok(s)
    }

    pub fn scheme(&self) -> Result<Scheme, ConfigError> {
        Scheme::from_name(&self.scheme.name).ok_or_else(|| {
            let names: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
            field(
                "scheme.name",
                format!("unknown scheme `{}`; expected one of {}", self.scheme.name, names.join(", ")),
            )
        })
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig, ConfigError> {
        let mut cfg = SchemeConfig::new(self.scheme()?, self.scheme.tau);
        if let Some(tol) = self.scheme.newton_tol {
            cfg.newton_tol = tol;
        }
        if let Some(it) = self.scheme.newton_max_iter {
            cfg.newton_max_iter = it;
        }
        cfg.validate().map_err(|e| field("scheme", e.to_string()))?;
        Ok(cfg)
    }

    pub fn outputs(&self) -> Outputs {
        self.outputs.clone().unwrap_or_else(Outputs::all_defaults)
    }

    /// Builds the system and its initial state. `seed` overrides
    /// `initial_state.seed`.
    pub fn build(&self, seed: Option<u64>) -> Result<BuiltModel, ConfigError> {
        let seed = seed.or(self.initial_state.seed).unwrap_or(0);
        let params = &self.model.params;
        let init = &self.initial_state;
        let t0 = self.time.t0;
        let eps = self.regularization.map(|r| r.epsilon);
        match self.model.name.as_str() {
            "poroelastic" => {
                let p = poroelastic_params(params)?;
                let spec = make_poroelastic(&p)?;
                let np = p.c.rows();
                let s0 = match (init.values.as_ref(), preset(init, &["default"])?) {
                    (Some(v), _) => raw_state(&spec, v)?,
                    (None, _) => {
                        let p0 = init.pressure.clone().unwrap_or_else(|| vec![1.0; np]);
                        if p0.len() != np {
                            return Err(field(
                                "initial_state.pressure",
                                format!("has {} entries, expected {np}", p0.len()),
                            ));
                        }
                        poroelastic::consistent_state(&p, &p0, t0)?
                    }
                };
                BuiltModel::finish(spec, s0, eps, None)
            }
            "circuit" => {
                let p = circuit_params(params)?;
                let spec = make_circuit(&p)?;
                let s0 = match init.values.as_ref() {
                    Some(v) => raw_state(&spec, v)?,
                    None => {
                        preset(init, &["default"])?;
                        let nodes = p.nodes();
                        p.state(
                            &vec![1.0; p.a_c.cols()],
                            &vec![0.5; p.a_l.cols()],
                            &vec![0.0; p.a_s.cols()],
                            &vec![0.0; nodes],
                        )
                    }
                };
                BuiltModel::finish(spec, s0, eps, None)
            }
            "mechanical" => {
                let p = mechanical_params(params)?;
                let spec = make_mechanical(&p)?;
                let s0 = match init.values.as_ref() {
                    Some(v) => raw_state(&spec, v)?,
                    None => {
                        preset(init, &["default"])?;
                        let mut x = vec![0.0; p.nx()];
                        x[0] = 1.0;
                        p.state(&x, &vec![0.0; p.nx()], &vec![0.0; p.nc()])
                    }
                };
                BuiltModel::finish(spec, s0, eps, None)
            }
            "cahn_hilliard_1d" => {
                let p: CahnHilliard1DParams = typed_params(params)?;
                let spec = make_cahn_hilliard_1d(&p)?;
                let amplitude = init.amplitude.unwrap_or(0.1);
                let s0 = match (init.values.as_ref(), preset(init, &["random", "smooth", "default"])?) {
                    (Some(v), _) => {
                        if v.len() != p.n {
                            return Err(field(
                                "initial_state.values",
                                format!("has {} entries, expected the {} grid values of u", v.len(), p.n),
                            ));
                        }
                        p.state(v)
                    }
                    (None, Some("smooth")) => p.random_smooth_state(amplitude, 3, seed),
                    (None, _) => p.random_state(amplitude, seed),
                };
                BuiltModel::finish(spec, s0, eps, None)
            }
            "quantum_thermo" => {
                let mut p: QuantumThermoParams = typed_params(params)?;
                if let Some(e) = eps {
                    p.epsilon_reg = e;
                }
                let spec = make_quantum_thermo(&p)?;
                let s0 = match (init.values.as_ref(), preset(init, &["default", "consistent"])?) {
                    (Some(v), _) => {
                        if v.len() != 6 {
                            return Err(field(
                                "initial_state.values",
                                format!("has {} entries, expected 6 (rho1, rho2, S, Q, m, lambda)", v.len()),
                            ));
                        }
                        p.lift(&p.dae_state([v[0], v[1]], v[2], v[3], v[4], v[5]))
                    }
                    (None, Some("consistent")) => p.consistent_state(),
                    (None, _) => p.default_state(),
                };
                Ok(BuiltModel {
                    spec,
                    initial: s0,
                    quantum: Some(p),
                })
            }
            other => Err(field("model.name", format!("unknown model `{other}`"))),
        }
    }
}

pub struct BuiltModel {
    pub spec: SystemSpec,
    /// In the coordinates of `spec`.
    pub initial: State,
    pub quantum: Option<QuantumThermoParams>,
}

impl BuiltModel {
    fn finish(spec: SystemSpec, s0: State, eps: Option<f64>, quantum: Option<QuantumThermoParams>) -> Result<Self, ConfigError> {
        match eps {
            None => Ok(BuiltModel {
                spec,
                initial: s0,
                quantum,
            }),
            Some(epsilon) => {
                let reg = regularize(&spec, RegularizationConfig { epsilon })
                    .map_err(|e| field("regularization", e.to_string()))?;
                let info = reg.regularization.expect("regularized spec carries its info");
                Ok(BuiltModel {
                    spec: reg,
                    initial: info.lift(&s0),
                    quantum,
                })
            }
        }
    }

    /// Exact flow for an input-free linear ODE, `z(t) = exp((J − R) Q (t − t0)) z0`.
    pub fn linear_flow(&self, t0: f64) -> Option<impl Fn(f64) -> Vec<f64> + '_> {
        let spec = &self.spec;
        let p = spec.partition;
        if p.n1 != 0 || p.n3 != 0 || spec.nonlinear_dissipation.is_some() {
            return None;
        }
        let z0 = self.initial.as_slice();
        let q = spec.hamiltonian.hessian(z0)?;
        let zero = vec![0.0; spec.n()];
        let q_zero = spec.hamiltonian.hessian(&zero)?;
        if q.sub(&q_zero).max_abs() > 0.0 {
            return None;
        }
        let probe = [t0, t0 + 0.37, t0 + 1.91, t0 + 7.3];
        if probe.iter().any(|&t| spec.input.eval(t).iter().any(|&u| u != 0.0)) {
            return None;
        }
        let a = spec.structure.j_minus_r().matmul(&q);
        Some(move |t: f64| phdae::numkit::expm(&a.scale(t - t0)).mul_vec(z0))
    }
}

fn preset<'a>(init: &'a InitialStateSection, allowed: &[&str]) -> Result<Option<&'a str>, ConfigError> {
    match init.preset.as_deref() {
        None => Ok(None),
        Some(name) if allowed.contains(&name) => Ok(Some(name)),
        Some(name) => Err(field(
            "initial_state.preset",
            format!("unknown preset `{name}`; expected one of {}", allowed.join(", ")),
        )),
    }
}

fn raw_state(spec: &SystemSpec, values: &[f64]) -> Result<State, ConfigError> {
    State::new(spec.partition, values.to_vec()).map_err(|_| {
        field(
            "initial_state.values",
            format!("has {} entries, expected {}", values.len(), spec.n()),
        )
    })
}

fn typed_params<T: serde::de::DeserializeOwned>(params: &toml::Table) -> Result<T, ConfigError> {
    T::deserialize(toml::Value::Table(params.clone())).map_err(|e| field("model.params", e.to_string().trim_end()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Zero { dim: usize },
    Constant { value: Vec<f64> },
    /// `amplitude · sin(ω t + phase)`
    Sine {
        amplitude: Vec<f64>,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · (1 − cos ω t)`, which starts at zero with zero slope.
    OneMinusCos { amplitude: Vec<f64>, omega: f64 },
}

impl InputSpec {
    pub fn signal(&self) -> InputSignal {
        match self.clone() {
            InputSpec::Zero { dim } => InputSignal::zero(dim),
            InputSpec::Constant { value } => InputSignal::constant(value),
            InputSpec::Sine { amplitude, omega, phase } => InputSignal::new(amplitude.len(), move |t| {
                let s = (omega * t + phase).sin();
                amplitude.iter().map(|a| a * s).collect()
            }),
            InputSpec::OneMinusCos { amplitude, omega } => InputSignal::new(amplitude.len(), move |t| {
                let s = 1.0 - (omega * t).cos();
                amplitude.iter().map(|a| a * s).collect()
            }),
        }
    }
}

type Rows = Vec<Vec<f64>>;

fn matrix(name: &str, rows: &Rows, cols_if_empty: usize) -> Result<Matrix, ConfigError> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    Matrix::from_rows(rows).map_err(|e| field(&format!("model.params.{name}"), e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoroelasticConfig {
    preset: Option<String>,
    a: Option<Rows>,
    c: Option<Rows>,
    d: Option<Rows>,
    b_flow: Option<Rows>,
    f: Option<InputSpec>,
    g: Option<InputSpec>,
}

fn poroelastic_params(params: &toml::Table) -> Result<PoroelasticParams, ConfigError> {
    let c: PoroelasticConfig = typed_params(params)?;
    let mut p = match c.preset.as_deref() {
        None | Some("default") => PoroelasticParams::default(),
        Some("coupled") => poroelastic::coupled_example(),
        Some(other) => {
            return Err(field(
                "model.params.preset",
                format!("unknown preset `{other}`; expected default or coupled"),
            ))
        }
    };
    if let Some(a) = &c.a {
        p.a = matrix("a", a, 0)?;
    }
    if let Some(m) = &c.c {
        p.c = matrix("c", m, 0)?;
    }
    if let Some(d) = &c.d {
        p.d = matrix("d", d, p.a.rows())?;
    }
    if let Some(b) = &c.b_flow {
        p.b_flow = matrix("b_flow", b, 0)?;
    }
    p.f = c.f.map_or_else(|| InputSignal::zero(p.a.rows()), |s| s.signal());
    p.g = c.g.map_or_else(|| InputSignal::zero(p.c.rows()), |s| s.signal());
    Ok(p)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitConfig {
    preset: Option<String>,
    capacitance: Option<f64>,
    inductance: Option<f64>,
    conductance: Option<f64>,
    a_c: Option<Rows>,
    a_r: Option<Rows>,
    a_l: Option<Rows>,
    a_s: Option<Rows>,
    capacitors: Option<Vec<circuit::CapacitorLaw>>,
    inductances: Option<Vec<f64>>,
    resistors: Option<Vec<circuit::Conductance>>,
    source: Option<InputSpec>,
}

fn circuit_params(params: &toml::Table) -> Result<CircuitParams, ConfigError> {
    let c: CircuitConfig = typed_params(params)?;
    let mut p = match c.preset.as_deref() {
        None | Some("default") => CircuitParams::default(),
        Some("lc_loop") => CircuitParams::lc_loop(c.capacitance.unwrap_or(1.0), c.inductance.unwrap_or(1.0)),
        Some("rc") => CircuitParams::rc(c.capacitance.unwrap_or(1.0), c.conductance.unwrap_or(1.0)),
        Some(other) => {
            return Err(field(
                "model.params.preset",
                format!("unknown preset `{other}`; expected default, lc_loop or rc"),
            ))
        }
    };
    let nodes = c.a_c.as_ref().map_or(p.nodes(), Vec::len);
    let incidence = |name: &str, rows: &Rows| -> Result<Matrix, ConfigError> {
        if rows.iter().all(Vec::is_empty) {
            return Ok(Matrix::zeros(nodes, 0));
        }
        matrix(name, rows, 0)
    };
    if let Some(a) = &c.a_c {
        p.a_c = incidence("a_c", a)?;
    }
    if let Some(a) = &c.a_r {
        p.a_r = incidence("a_r", a)?;
    }
    if let Some(a) = &c.a_l {
        p.a_l = incidence("a_l", a)?;
    }
    if let Some(a) = &c.a_s {
        p.a_s = incidence("a_s", a)?;
    }
    if let Some(v) = c.capacitors {
        p.capacitors = v;
    }
    if let Some(v) = c.inductances {
        p.inductances = v;
    }
    if let Some(v) = c.resistors {
        p.resistors = v;
    }
    if let Some(s) = c.source {
        p.source = s.signal();
    } else if p.source.m() != p.a_s.cols() {
        p.source = InputSignal::zero(p.a_s.cols());
    }
    Ok(p)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MechanicalConfig {
    m: Option<Rows>,
    d: Option<Rows>,
    k: Option<Rows>,
    bc: Option<Rows>,
    f: Option<InputSpec>,
    g: Option<InputSpec>,
}

fn mechanical_params(params: &toml::Table) -> Result<MechanicalParams, ConfigError> {
    let c: MechanicalConfig = typed_params(params)?;
    let mut p = mechanical::MechanicalParams::default();
    if let Some(m) = &c.m {
        p.m = matrix("m", m, 0)?;
    }
    let nx = p.nx();
    if let Some(d) = &c.d {
        p.d = matrix("d", d, nx)?;
    }
    if let Some(k) = &c.k {
        p.k = matrix("k", k, nx)?;
    }
    if let Some(bc) = &c.bc {
        p.bc = matrix("bc", bc, nx)?;
    }
    p.f = c.f.map_or_else(|| InputSignal::zero(nx), |s| s.signal());
    p.g = c.g.map_or_else(|| InputSignal::zero(p.nc()), |s| s.signal());
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OSCILLATOR: &str = r#"
schema = 1
[model]
name = "mechanical"
[model.params]
m = [[1.0]]
k = [[1.0]]
d = [[0.0]]
bc = []
[scheme]
name = "midpoint"
tau = 0.1
[time]
t_end = 1.0
"#;

    #[test]
    fn oscillator_parses_and_builds() {
        let s = Scenario::parse(OSCILLATOR).unwrap();
        let b = s.build(None).unwrap();
        assert_eq!(b.spec.n(), 2);
        assert_eq!(b.initial.as_slice(), &[1.0, 0.0]);
        let flow = b.linear_flow(0.0).unwrap();
        let z = flow(std::f64::consts::FRAC_PI_2);
        assert!((z[0]).abs() < 1e-12 && (z[1] + 1.0).abs() < 1e-12, "{z:?}");
    }

    #[test]
    fn unknown_model_names_the_field() {
        let text = OSCILLATOR.replace("\"mechanical\"", "\"spring\"");
        let e = Scenario::parse(&text).unwrap_err().to_string();
        assert!(e.contains("model.name"), "{e}");
    }

    #[test]
    fn wrong_schema_rejected() {
        let text = OSCILLATOR.replace("schema = 1", "schema = 7");
        assert!(Scenario::parse(&text).unwrap_err().to_string().contains("schema"));
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = OSCILLATOR.replace("t_end = 1.0", "t_end = 1.0\nt_stop = 2.0");
        let e = Scenario::parse(&text).unwrap_err().to_string();
        assert!(e.contains("t_stop") && e.contains("line"), "{e}");
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        let text = format!("{OSCILLATOR}[regularization]\nepsilon = 0.0\n");
        let e = Scenario::parse(&text).unwrap_err().to_string();
        assert!(e.contains("regularization.epsilon"), "{e}");
    }

    #[test]
    fn regularization_lifts_initial_state() {
        let text = r#"
schema = 1
[model]
name = "mechanical"
[scheme]
name = "discrete_gradient_gonzalez"
tau = 0.1
[regularization]
epsilon = 0.5
[time]
t_end = 1.0
[initial_state]
values = [1.0, 0.0, 0.0, 0.0, 4.0]
"#;
        let b = Scenario::parse(text).unwrap().build(None).unwrap();
        assert_eq!(b.spec.partition.n3, 0);
        assert_eq!(b.initial.as_slice()[4], 2.0);
    }

    #[test]
    fn seed_changes_random_state() {
        let text = r#"
schema = 1
[model]
name = "cahn_hilliard_1d"
[model.params]
n = 16
[scheme]
name = "midpoint"
tau = 0.1
[time]
t_end = 1.0
"#;
        let s = Scenario::parse(text).unwrap();
        let a = s.build(Some(1)).unwrap().initial;
        let b = s.build(Some(1)).unwrap().initial;
        let c = s.build(Some(2)).unwrap().initial;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
