//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, complex numbers are written as
//! `a+bi` literals. Matrices are four entries in row-major order separated by
//! commas or whitespace.

use std::path::Path;
use std::str::FromStr;

use steadygrad::numerics::Cx;
use steadygrad::{AdjointBackend, Bath, Density, Matrix, Model, Param};

use crate::CliError;

/// Observable whose steady-state expectation is reported and differentiated.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    SigmaZ,
    SigmaX,
    Custom(Matrix),
}

impl Observable {
    pub fn matrix(&self) -> Matrix {
        match self {
            Observable::SigmaZ => Matrix::pauli_z(),
            Observable::SigmaX => Matrix::pauli_x(),
            Observable::Custom(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: Model,
    pub rho0: Density,
    pub observable: Observable,
    pub tol_ss: f64,
    pub rank_tol: f64,
    /// `None` keeps the default `1e-4 · max(1, |θ|)`.
    pub fd_step: Option<f64>,
    pub include_imag: bool,
    pub grad_method: AdjointBackend,
    /// Parameters to differentiate or optimize; `None` leaves the choice to
    /// the command.
    pub free: Option<Vec<Param>>,
    pub allow_degenerate: bool,
    pub target: Option<f64>,
    pub iters: usize,
    pub lr: f64,
    pub seeds: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let bath = Bath::new(0.01, 3.0, 1.0, 0.1).expect("default bath is valid");
        Self {
            model: Model::new(0.1, 0.0, bath).expect("default model is valid"),
            rho0: Density::tilted_pure_state(),
            observable: Observable::SigmaZ,
            tol_ss: 1e-10,
            rank_tol: 1e-10,
            fd_step: None,
            include_imag: false,
            grad_method: AdjointBackend::Direct,
            free: None,
            allow_degenerate: false,
            target: None,
            iters: 100,
            lr: 0.1,
            seeds: 1,
            seed: 0,
        }
    }
}

impl FromStr for RunConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut rho0 = None;
        let mut observable = None;
        let mut observable_matrix = None;
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Config(format!("line {lineno}: {msg}"));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(at(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            let real = || parse_real(value).map_err(at);
            let model = &mut cfg.model;
            match key {
                "epsilon" => model.epsilon = real()?,
                "delta" => model.delta = real()?,
                "beta" => model.bath.beta = real()?,
                "eta" => model.bath.eta = real()?,
                "omega_c" => model.bath.omega_c = real()?,
                "s_exponent" => model.bath.s_exponent = real()?,
                "rho0" => rho0 = Some((lineno, parse_matrix(value).map_err(at)?)),
                "observable" => {
                    observable = Some(match value {
                        "sigma_z" => Observable::SigmaZ,
                        "sigma_x" => Observable::SigmaX,
                        "custom" => Observable::Custom(Matrix::zeros(2, 2)),
                        other => {
                            return Err(at(format!(
                                "observable must be sigma_z, sigma_x or custom, got `{other}`"
                            )))
                        }
                    })
                }
                "observable_matrix" => observable_matrix = Some((lineno, parse_matrix(value).map_err(at)?)),
                "tol_ss" => cfg.tol_ss = positive(real()?).map_err(at)?,
                "rank_tol" => cfg.rank_tol = positive(real()?).map_err(at)?,
                "fd_step" => cfg.fd_step = Some(positive(real()?).map_err(at)?),
                "include_imag" => cfg.include_imag = parse_bool(value).map_err(at)?,
                "allow_degenerate" => cfg.allow_degenerate = parse_bool(value).map_err(at)?,
                "grad_method" => cfg.grad_method = parse_backend(value).map_err(at)?,
                "free" => cfg.free = Some(parse_free(value).map_err(at)?),
                "target" => cfg.target = Some(real()?),
                "iters" => cfg.iters = parse_count(value).map_err(at)?,
                "lr" => cfg.lr = positive(real()?).map_err(at)?,
                "seeds" => cfg.seeds = parse_count(value).map_err(at)?,
                "seed" => cfg.seed = parse_count(value).map_err(at)? as u64,
                other => return Err(at(format!("unknown key `{other}`"))),
            }
        }
        cfg.model
            .validate()
            .map_err(|e| CliError::Config(format!("model parameters: {e}")))?;
        if let Some((lineno, m)) = rho0 {
            cfg.rho0 = Density::new(m).map_err(|e| CliError::Config(format!("line {lineno}: rho0 {e}")))?;
        }
        cfg.observable = match (observable, observable_matrix) {
            (Some(Observable::Custom(_)), Some((lineno, m))) => {
                m.ensure_hermitian(1e-12)
                    .map_err(|e| CliError::Config(format!("line {lineno}: observable_matrix {e}")))?;
                Observable::Custom(m)
            }
            (Some(Observable::Custom(_)), None) => {
                return Err(CliError::Config("observable = custom needs observable_matrix".into()))
            }
            (_, Some((lineno, _))) => {
                return Err(CliError::Config(format!(
                    "line {lineno}: observable_matrix is only used with observable = custom"
                )))
            }
            (Some(o), None) => o,
            (None, None) => Observable::SigmaZ,
        };
        Ok(cfg)
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a real number, got `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got `{s}`"))
    }
}

fn positive(v: f64) -> Result<f64, String> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {v}"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

pub fn parse_backend(s: &str) -> Result<AdjointBackend, String> {
    match s {
        "direct" => Ok(AdjointBackend::Direct),
        "adjoint-ode" => Ok(AdjointBackend::AdjointOde),
        _ => Err(format!("grad_method must be direct or adjoint-ode, got `{s}`")),
    }
}

/// Comma-separated parameter names; `none` or an empty value freezes all.
pub fn parse_free(s: &str) -> Result<Vec<Param>, String> {
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    let mut out: Vec<Param> = Vec::new();
    for name in s.split(',') {
        let p: Param = name.parse().map_err(|e| format!("{e}"))?;
        if out.contains(&p) {
            return Err(format!("parameter `{p}` listed twice"));
        }
        out.push(p);
    }
    Ok(out)
}

/// Parses `a`, `bi`, `a+bi` or `a-bi` (also `i`, `-i`, `a+i`).
pub fn parse_complex(s: &str) -> Result<Cx<f64>, String> {
    let bad = || format!("expected a complex number like 0.5-0.25i, got `{s}`");
    let t = s.trim();
    let Some(body) = t.strip_suffix('i') else {
        return parse_real(t).map(|r| Cx::new(r, 0.0)).map_err(|_| bad());
    };
    // The sign that separates the parts is the last one not belonging to an
    // exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |part: &str| -> Result<f64, String> {
        match part {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            p => parse_real(p).map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => Ok(Cx::new(parse_real(&body[..k]).map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(Cx::new(0.0, imag(body)?)),
    }
}

fn parse_matrix(s: &str) -> Result<Matrix, String> {
    let entries = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_complex)
        .collect::<Result<Vec<_>, _>>()?;
    if entries.len() != 4 {
        return Err(format!("expected 4 matrix entries in row-major order, got {}", entries.len()));
    }
    Matrix::from_row_major(2, 2, entries).map_err(|e| e.to_string())
}
