//! Line-based `section.key = value` experiment configuration.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diagnostics::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::integrator::{Scheme, StepControl};
use crate::spectral::SpectralGrid;
use crate::state::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    RandomSpectrum,
    SingleMode,
    GaussianBlob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// Density and magnetic perturbations `a = b`, fluid at rest.
    Compressible,
    /// Divergence-free velocity, `a = b = 0`.
    Solenoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Nonlinear,
    LinearOracle,
    /// Every component evolved by the unit-diffusivity heat flow.
    HeatReference,
}

macro_rules! keyword_enum {
    ($ty:ident { $($var:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$var => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($ty::$var),)+
                    _ => Err(format!(
                        "expected one of [{}], got `{s}`",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(InitKind {
    RandomSpectrum => "random_spectrum",
    SingleMode => "single_mode",
    GaussianBlob => "gaussian_blob",
});
keyword_enum!(Polarization {
    Compressible => "compressible",
    Solenoidal => "solenoidal",
});
keyword_enum!(RunMode {
    Nonlinear => "nonlinear",
    LinearOracle => "linear_oracle",
    HeatReference => "heat_reference",
});

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub box_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub kind: InitKind,
    /// `ε`: the `𝒳(0)` norm for random data, the `L²` norm otherwise.
    pub amplitude: f64,
    /// Low-frequency exponent: `|f̂(ξ)| ∝ |ξ|^{σ-1}`.
    pub sigma: f64,
    pub seed: u64,
    /// Gaussian roll-off wavenumber of the random spectrum.
    pub cutoff: f64,
    /// Integer lattice indices of the single mode.
    pub mode: (i64, i64),
    pub polarization: Polarization,
    /// Standard deviation of the Gaussian blob.
    pub width: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            kind: InitKind::RandomSpectrum,
            amplitude: 1e-3,
            sigma: 1.0,
            seed: 0,
            cutoff: 1.0,
            mode: (1, 0),
            polarization: Polarization::Compressible,
            width: 1.0,
            mean_a: 0.0,
            mean_b: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Directory receiving `records.csv`, `config.echo` and `summary.txt`;
    /// `None` keeps everything in memory.
    pub path: Option<PathBuf>,
    pub stride: usize,
    /// Window of the power-law fits reported in the summary.
    pub fit_window: Option<(f64, f64)>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: None,
            stride: 1,
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub params: PhysicalParams,
    pub time: StepControl,
    pub init: InitConfig,
    pub lp: DiagnosticsConfig,
    pub output: OutputConfig,
    pub mode: RunMode,
    /// Carry `δ` through the integrator as an extra transported field.
    pub track_delta: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid: GridConfig {
                n: 64,
                box_length: 2.0 * PI,
            },
            params: PhysicalParams::default(),
            time: StepControl::default(),
            init: InitConfig::default(),
            lp: DiagnosticsConfig::default(),
            output: OutputConfig::default(),
            mode: RunMode::Nonlinear,
            track_delta: false,
        }
    }
}

/// Parses a real number, also accepting multiples of π: `pi`, `2pi`,
/// `16*pi`, `pi/2`, `0.5*pi`.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let bad = || format!("`{s}` is not a number");
    let lower = s.to_ascii_lowercase();
    let Some(pos) = lower.find("pi") else {
        return Err(bad());
    };
    let coef = lower[..pos].trim().trim_end_matches('*').trim();
    let rest = lower[pos + 2..].trim();
    let mut v = if coef.is_empty() {
        PI
    } else {
        coef.parse::<f64>().map_err(|_| bad())? * PI
    };
    if !rest.is_empty() {
        let div = rest.strip_prefix('/').ok_or_else(bad)?;
        v /= div.trim().parse::<f64>().map_err(|_| bad())?;
    }
    Ok(v)
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `t0:t1`, got `{s}`"))?;
    Ok((parse_real(a)?, parse_real(b)?))
}

fn parse_mode(s: &str) -> std::result::Result<(i64, i64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `m1,m2`, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{s}`")),
    }
}

fn parse_with<T, E: fmt::Display>(s: &str, f: impl FnOnce(&str) -> std::result::Result<T, E>) -> std::result::Result<T, String> {
    f(s).map_err(|e| e.to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: line_no, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `section.key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let real = parse_real;
        match key {
            "grid.n" => self.grid.n = parse_with(v, str::parse::<usize>)?,
            "grid.box_length" => self.grid.box_length = real(v)?,
            "params.mu" => self.params.mu = real(v)?,
            "params.lambda" => self.params.lambda = real(v)?,
            "params.A" => self.params.pressure_a = real(v)?,
            "params.gamma" => self.params.gamma = real(v)?,
            "time.t_end" => self.time.t_end = real(v)?,
            "time.cfl" => self.time.cfl = real(v)?,
            "time.dt_max" => self.time.dt_max = real(v)?,
            "time.scheme" => self.time.scheme = parse_with(v, Scheme::from_str)?,
            "init.kind" => self.init.kind = v.parse()?,
            "init.amplitude" => self.init.amplitude = real(v)?,
            "init.sigma" => self.init.sigma = real(v)?,
            "init.seed" => self.init.seed = parse_with(v, str::parse::<u64>)?,
            "init.cutoff" => self.init.cutoff = real(v)?,
            "init.mode" => self.init.mode = parse_mode(v)?,
            "init.polarization" => self.init.polarization = v.parse()?,
            "init.width" => self.init.width = real(v)?,
            "init.mean_a" => self.init.mean_a = real(v)?,
            "init.mean_b" => self.init.mean_b = real(v)?,
            "lp.j0" => self.lp.j0 = parse_with(v, str::parse::<i32>)?,
            "lp.sigma" => self.lp.sigma = real(v)?,
            "lp.gamma1" => self.lp.gamma1 = real(v)?,
            "output.path" => self.output.path = Some(PathBuf::from(v)),
            "output.stride" => self.output.stride = parse_with(v, str::parse::<usize>)?,
            "output.fit_window" => self.output.fit_window = Some(parse_window(v)?),
            "run.mode" => self.mode = v.parse()?,
            "run.track_delta" => self.track_delta = parse_bool(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        SpectralGrid::new(self.grid.n, self.grid.box_length)?;
        self.params.validate()?;
        self.time.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.time.t_end < 0.0 {
            return bad(format!("time.t_end must be >= 0, got {}", self.time.t_end));
        }
        if !(self.lp.sigma > 0.0 && self.lp.sigma <= 1.0) {
            return bad(format!("lp.sigma must lie in (0, 1], got {}", self.lp.sigma));
        }
        if !self.lp.gamma1.is_finite() {
            return bad("lp.gamma1 must be finite".into());
        }
        let init = &self.init;
        if !(init.amplitude >= 0.0 && init.amplitude.is_finite()) {
            return bad(format!("init.amplitude must be finite and >= 0, got {}", init.amplitude));
        }
        if !init.sigma.is_finite() || !(init.cutoff > 0.0) || !(init.width > 0.0) {
            return bad("init.sigma must be finite, init.cutoff and init.width positive".into());
        }
        if !(init.mean_a.is_finite() && init.mean_b.is_finite()) {
            return bad("init.mean_a and init.mean_b must be finite".into());
        }
        if init.kind == InitKind::SingleMode {
            let half = (self.grid.n / 2) as i64;
            let (m1, m2) = init.mode;
            if (m1, m2) == (0, 0) || m1.abs() >= half || m2.abs() >= half {
                return bad(format!(
                    "init.mode ({m1},{m2}) must be nonzero with |m| < {half} (Nyquist excluded)"
                ));
            }
        }
        if self.output.stride == 0 {
            return bad("output.stride must be >= 1".into());
        }
        if let Some((t0, t1)) = self.output.fit_window {
            if !(t1 > t0 && t0 >= 0.0) {
                return bad(format!("output.fit_window {t0}:{t1} must satisfy t1 > t0 >= 0"));
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let r = |x: f64| format!("{x:?}");
        kv("grid.n", self.grid.n.to_string());
        kv("grid.box_length", r(self.grid.box_length));
        kv("params.mu", r(self.params.mu));
        kv("params.lambda", r(self.params.lambda));
        kv("params.A", r(self.params.pressure_a));
        kv("params.gamma", r(self.params.gamma));
        kv("time.t_end", r(self.time.t_end));
        kv("time.cfl", r(self.time.cfl));
        kv("time.dt_max", r(self.time.dt_max));
        kv("time.scheme", self.time.scheme.to_string());
        kv("init.kind", self.init.kind.to_string());
        kv("init.amplitude", r(self.init.amplitude));
        kv("init.sigma", r(self.init.sigma));
        kv("init.seed", self.init.seed.to_string());
        kv("init.cutoff", r(self.init.cutoff));
        kv("init.mode", format!("{},{}", self.init.mode.0, self.init.mode.1));
        kv("init.polarization", self.init.polarization.to_string());
        kv("init.width", r(self.init.width));
        kv("init.mean_a", r(self.init.mean_a));
        kv("init.mean_b", r(self.init.mean_b));
        kv("lp.j0", self.lp.j0.to_string());
        kv("lp.sigma", r(self.lp.sigma));
        kv("lp.gamma1", r(self.lp.gamma1));
        if let Some(p) = &self.output.path {
            kv("output.path", p.display().to_string());
        }
        kv("output.stride", self.output.stride.to_string());
        if let Some((t0, t1)) = self.output.fit_window {
            kv("output.fit_window", format!("{}:{}", r(t0), r(t1)));
        }
        kv("run.mode", self.mode.to_string());
        kv("run.track_delta", self.track_delta.to_string());
        s
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_with_pi() {
        assert_eq!(parse_real("2.5").unwrap(), 2.5);
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("16*pi").unwrap(), 16.0 * PI);
        assert_eq!(parse_real("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_real("inf").unwrap(), f64::INFINITY);
        assert!(parse_real("two").is_err());
        assert!(parse_real("2pi3").is_err());
    }

    #[test]
    fn parses_sections_and_comments() {
        let cfg: ExperimentConfig = "
            # a comment
            grid.n = 32
            grid.box_length = 2pi   # trailing
            time.scheme = if_rk2
            init.kind = single_mode
            init.mode = 8, 0
            output.fit_window = 1:2
            run.mode = linear_oracle
        "
        .parse()
        .unwrap();
        assert_eq!(cfg.grid.n, 32);
        assert_eq!(cfg.grid.box_length, 2.0 * PI);
        assert_eq!(cfg.time.scheme, Scheme::IfRk2);
        assert_eq!(cfg.init.mode, (8, 0));
        assert_eq!(cfg.output.fit_window, Some((1.0, 2.0)));
        assert_eq!(cfg.mode, RunMode::LinearOracle);
    }

    #[test]
    fn unknown_and_malformed_lines_carry_line_numbers() {
        match ExperimentConfig::parse("grid.n = 32\ngrid.nn = 4\n") {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("grid.nn"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::parse("grid.n 32"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("grid.n = 32\ngrid.n = 16"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("init.kind = blob"),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn semantic_validation() {
        for text in [
            "grid.n = 30",
            "time.cfl = 1.5",
            "time.t_end = -1",
            "lp.sigma = 0",
            "init.amplitude = -1",
            "output.stride = 0",
            "params.mu = 0",
            "init.kind = single_mode\ninit.mode = 0,0",
            "grid.n = 16\ninit.kind = single_mode\ninit.mode = 8,0",
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn echo_round_trips() {
        let cfg: ExperimentConfig = "
            grid.n = 64
            grid.box_length = 16*pi
            params.mu = 0.7
            params.gamma = 1.4
            time.t_end = 0.3
            time.dt_max = 1e-3
            init.amplitude = 1e-6
            init.seed = 99
            init.cutoff = 0.1
            lp.j0 = -2
            output.path = /tmp/somewhere
            output.fit_window = 0.5:3
            run.track_delta = true
        "
        .parse()
        .unwrap();
        let echo = cfg.to_config_string();
        let back: ExperimentConfig = echo.parse().unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_config_string(), echo);

        let default = ExperimentConfig::default();
        assert_eq!(default.to_config_string().parse::<ExperimentConfig>().unwrap(), default);
    }
}
