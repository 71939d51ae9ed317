//! Experiment configuration.
//!
//! The file is TOML. Every key is optional except `experiment`:
//!
//! ```toml
//! experiment = "mu_sweep"   # mu_sweep | soft_sweep | epsilon_sweep | uniformity_sweep | emt | bvp_check
//! n = 256                   # nodes per boundary
//! seed = 1
//! out = "mu_sweep.csv"
//!
//! [background]
//! lambda = 0.5
//! mu = 1.0                  # 10.0 for uniformity_sweep
//!
//! [parameters]
//! lambda = 1.0              # inclusion lambda held fixed in mu sweeps
//! mu = [10.0, 100.0]        # inclusion mu values
//! soft = [0.1, 0.01]        # kappa = mu = s inclusions
//! inclusion = [1.0, 2.0]    # (lambda, mu) for single-pair experiments
//!
//! [geometry]
//! omega = { kind = "circle", radius = 3.0 }
//! inclusions = [{ kind = "ellipse", a = 0.5, b = 0.3 }]
//! reference = { kind = "kite", scale = 1.0 }
//! z0 = [0.3, -0.2]
//! epsilon = [0.2, 0.1, 0.05, 0.025]
//! inclusion_n = 128
//!
//! [data]
//! kind = "shear"            # shear | point_source; free-space runs default to shear, BVP runs to point_source
//! source = [4.5, 2.0]
//! force = [1.0, 0.5]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use elastobie_core::{Curve, CurveKind, LameParams, Point};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MuSweep,
    SoftSweep,
    EpsilonSweep,
    UniformitySweep,
    Emt,
    BvpCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MuSweep => "mu_sweep",
            ExperimentKind::SoftSweep => "soft_sweep",
            ExperimentKind::EpsilonSweep => "epsilon_sweep",
            ExperimentKind::UniformitySweep => "uniformity_sweep",
            ExperimentKind::Emt => "emt",
            ExperimentKind::BvpCheck => "bvp_check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Kite {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

fn one() -> f64 {
    1.0
}

impl CurveSpec {
    pub fn curve(&self) -> elastobie_core::Result<Curve> {
        let (kind, center, scale) = match *self {
            CurveSpec::Circle { radius, center } => (CurveKind::Circle { radius }, center, 1.0),
            CurveSpec::Ellipse { a, b, center } => (CurveKind::Ellipse { a, b }, center, 1.0),
            CurveSpec::Kite { scale, center } => (CurveKind::Kite, center, scale),
        };
        Curve::new(kind, Point::new(center[0], center[1]), scale)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub lambda: Option<f64>,
    pub mu: Option<Vec<f64>>,
    pub soft: Option<Vec<f64>>,
    pub inclusion: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub omega: Option<CurveSpec>,
    pub inclusions: Option<Vec<CurveSpec>>,
    pub reference: Option<CurveSpec>,
    pub z0: Option<[f64; 2]>,
    pub epsilon: Option<Vec<f64>>,
    pub inclusion_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Shear,
    PointSource,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Data {
    pub kind: Option<DataKind>,
    pub source: Option<[f64; 2]>,
    pub force: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub background: Option<MaterialSpec>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub data: Data,
}

pub const DEFAULT_N: usize = 256;
pub const DEFAULT_INCLUSION_N: usize = 128;

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            n: None,
            seed: 0,
            out: None,
            background: None,
            parameters: Parameters::default(),
            geometry: Geometry::default(),
            data: Data::default(),
        }
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(DEFAULT_N)
    }

    pub fn inclusion_n(&self) -> usize {
        self.geometry.inclusion_n.unwrap_or(DEFAULT_INCLUSION_N)
    }

    /// `(0.5, 1)`, except for the uniformity sweep whose default mu grid
    /// contains 1: there `mu0 = 10` keeps every member at nonzero contrast.
    pub fn background(&self) -> anyhow::Result<LameParams> {
        let spec = self.background.unwrap_or(match self.experiment {
            ExperimentKind::UniformitySweep => MaterialSpec { lambda: 0.5, mu: 10.0 },
            _ => MaterialSpec { lambda: 0.5, mu: 1.0 },
        });
        LameParams::planar(spec.lambda, spec.mu).context("background")
    }

    /// Inclusion `lambda` held fixed across a mu sweep.
    pub fn sweep_lambda(&self) -> f64 {
        self.parameters.lambda.unwrap_or(1.0)
    }

    pub fn mu_values(&self) -> Vec<f64> {
        self.parameters.mu.clone().unwrap_or_else(|| match self.experiment {
            ExperimentKind::UniformitySweep => vec![1e-2, 1.0, 1e2, 1e4],
            _ => vec![1e1, 1e2, 1e3, 1e4, 1e5],
        })
    }

    pub fn soft_values(&self) -> Vec<f64> {
        self.parameters.soft.clone().unwrap_or_else(|| match self.experiment {
            ExperimentKind::UniformitySweep => vec![1e-3],
            _ => vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        })
    }

    pub fn inclusion(&self) -> anyhow::Result<LameParams> {
        let [l, m] = self.parameters.inclusion.unwrap_or([1.0, 2.0]);
        LameParams::planar(l, m).context("parameters.inclusion")
    }

    pub fn omega(&self) -> anyhow::Result<Curve> {
        let spec = self.geometry.omega.unwrap_or(CurveSpec::Circle {
            radius: 3.0,
            center: [0.0; 2],
        });
        spec.curve().context("geometry.omega")
    }

    pub fn inclusion_curves(&self) -> anyhow::Result<Vec<Curve>> {
        let specs = self.geometry.inclusions.clone().unwrap_or_else(|| {
            vec![CurveSpec::Ellipse {
                a: 0.5,
                b: 0.3,
                center: [0.0; 2],
            }]
        });
        specs
            .iter()
            .enumerate()
            .map(|(k, s)| s.curve().with_context(|| format!("geometry.inclusions[{k}]")))
            .collect()
    }

    pub fn reference(&self) -> anyhow::Result<Curve> {
        let spec = self.geometry.reference.unwrap_or(CurveSpec::Circle {
            radius: 1.0,
            center: [0.0; 2],
        });
        spec.curve().context("geometry.reference")
    }

    pub fn z0(&self) -> Point {
        let z = self.geometry.z0.unwrap_or([0.3, -0.2]);
        Point::new(z[0], z[1])
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.geometry.epsilon.clone().unwrap_or_else(|| match self.experiment {
            ExperimentKind::UniformitySweep => vec![0.05],
            _ => vec![0.2, 0.1, 0.05, 0.025],
        })
    }

    pub fn data_kind(&self) -> DataKind {
        self.data.kind.unwrap_or(match self.experiment {
            ExperimentKind::MuSweep | ExperimentKind::SoftSweep | ExperimentKind::Emt => DataKind::Shear,
            _ => DataKind::PointSource,
        })
    }

    pub fn source(&self) -> (Point, Point) {
        let s = self.data.source.unwrap_or([4.5, 2.0]);
        let f = self.data.force.unwrap_or([1.0, 0.5]);
        (Point::new(s[0], s[1]), Point::new(f[0], f[1]))
    }

    /// Checks every field that the solvers would otherwise reject mid-run.
    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(n) = self.n {
            check_n("n", n)?;
        }
        if let Some(n) = self.geometry.inclusion_n {
            check_n("geometry.inclusion_n", n)?;
        }
        self.background()?;
        let lambda = self.sweep_lambda();
        if !lambda.is_finite() {
            bail!("parameters.lambda: not finite");
        }
        for (k, &mu) in self.mu_values().iter().enumerate() {
            LameParams::planar(lambda, mu).with_context(|| format!("parameters.mu[{k}] = {mu}"))?;
        }
        for (k, &s) in self.soft_values().iter().enumerate() {
            LameParams::from_bulk_shear(s, s).with_context(|| format!("parameters.soft[{k}] = {s}"))?;
        }
        self.inclusion()?;
        self.omega()?;
        self.inclusion_curves()?;
        self.reference()?;
        for (k, &e) in self.epsilons().iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                bail!("geometry.epsilon[{k}] = {e}: must lie in (0, 1)");
            }
        }
        Ok(())
    }
}

fn check_n(field: &str, n: usize) -> anyhow::Result<()> {
    if n < 16 || n % 2 != 0 {
        bail!("{field} = {n}: must be even and at least 16");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse("experiment = \"mu_sweep\"").unwrap();
        assert_eq!(cfg.n(), 256);
        assert_eq!(cfg.mu_values().len(), 5);
        assert_eq!(cfg.inclusion_curves().unwrap().len(), 1);
    }

    #[test]
    fn negative_mu_names_the_field() {
        let text = "experiment = \"mu_sweep\"\n[parameters]\nmu = [10.0, -1.0]\n";
        let err = format!("{:#}", ExperimentConfig::parse(text).unwrap_err());
        assert!(err.contains("parameters.mu[1]"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_curves_are_rejected() {
        let err = format!("{:#}", ExperimentConfig::parse("experiment = \"emt\"\nnodes = 3\n").unwrap_err());
        assert!(err.contains("nodes"), "{err}");
        let text = "experiment = \"emt\"\n[geometry]\nreference = { kind = \"circle\", radius = -1.0 }\n";
        let err = format!("{:#}", ExperimentConfig::parse(text).unwrap_err());
        assert!(err.contains("geometry.reference"), "{err}");
        let err = format!("{:#}", ExperimentConfig::parse("experiment = \"emt\"\nn = 15\n").unwrap_err());
        assert!(err.contains("n = 15"), "{err}");
    }

    #[test]
    fn curve_specs() {
        let text = r#"
experiment = "solve_me"
"#;
        assert!(ExperimentConfig::parse(text).is_err());
        let text = r#"
experiment = "bvp_check"
[geometry]
inclusions = [{ kind = "circle", radius = 0.3, center = [1.0, 0.0] }, { kind = "kite", scale = 0.2 }]
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let c = cfg.inclusion_curves().unwrap();
        assert_eq!(c[0].center(), Point::new(1.0, 0.0));
        assert_eq!(c[1].scale(), 0.2);
    }
}
