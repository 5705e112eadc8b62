use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bhatskeide::{
    bs_check_interpolation, bs_norm, bs_semigroup_residual, CircleGrid, InterpolatedSemigroup,
};
use crate::gallery::{build_model, ModelInstance};
use crate::numkit::{
    format_sig17, matexp, matrix_power, op_norm, real, spectral_abscissa, spectral_radius, Operator,
};
use crate::simcert::{crsim_profile, similarity_constant, CrsimVerdict, SemigroupSpec, Verdict};
use crate::tensorsplit::{split_scaling_discrete, split_scaling_semigroup};

use super::config::{ExperimentConfig, ExperimentKind, InputSource, InputSpec, Role};
use super::report::{Report, ReportHeader, Row, SCHEMA_VERSION};
use super::{LabError, TOOL, VERSION};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

impl ReportPaths {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        ReportPaths {
            csv: cfg.output_dir.join(format!("{}.csv", cfg.name)),
            json: cfg.output_dir.join(format!("{}.json", cfg.name)),
        }
    }
}

enum Resolved {
    Matrix(Operator),
    Model(ModelInstance),
}

struct Input<'a> {
    spec: &'a InputSpec,
    value: Resolved,
}

fn input_err(spec: &InputSpec, message: impl Into<String>) -> LabError {
    LabError::Input {
        label: spec.label.clone(),
        message: message.into(),
    }
}

fn random_matrix(dim: usize, level: f64, role: Role, seed: u64) -> Result<Operator, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Operator::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    Ok(match role {
        Role::Operator => {
            let r = spectral_radius(&m)?;
            if r > 0.0 {
                m * real(level / r)
            } else {
                m
            }
        }
        Role::Generator => {
            let shift = spectral_abscissa(&m)? - level;
            m - Operator::identity(dim, dim) * real(shift)
        }
    })
}

fn resolve<'a>(cfg: &'a ExperimentConfig) -> Result<Vec<Input<'a>>, LabError> {
    cfg.inputs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let value = match &spec.source {
                InputSource::Matrix(m) => Resolved::Matrix(m.clone()),
                InputSource::Random { dim, level } => {
                    let seed = cfg.seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    Resolved::Matrix(random_matrix(*dim, *level, spec.role, seed)?)
                }
                InputSource::Model(m) => {
                    Resolved::Model(build_model(m).map_err(|e| input_err(spec, e.to_string()))?)
                }
            };
            Ok(Input { spec, value })
        })
        .collect()
}

impl Input<'_> {
    fn label(&self) -> &str {
        &self.spec.label
    }

    fn dim(&self) -> usize {
        match &self.value {
            Resolved::Matrix(m) => m.nrows(),
            Resolved::Model(inst) => inst.dim,
        }
    }

    /// `T(t)`: a power for operators, an exponential for generators, the model sample otherwise.
    fn sample(&self, t: f64) -> Result<Operator, LabError> {
        match (&self.value, self.spec.role) {
            (Resolved::Matrix(m), Role::Operator) => {
                if t.fract() != 0.0 {
                    return Err(input_err(
                        self.spec,
                        format!("operator inputs take integer times, got {t}"),
                    ));
                }
                Ok(matrix_power(m, t as u64))
            }
            (Resolved::Matrix(a), Role::Generator) => Ok(matexp(&(a * real(t)))?),
            (Resolved::Model(inst), _) => Ok(inst.sample(t)?),
        }
    }

    fn operator(&self, t: f64) -> Result<Operator, LabError> {
        match (&self.value, self.spec.role) {
            (_, Role::Generator) => Err(input_err(self.spec, "expected an operator")),
            (Resolved::Matrix(m), _) => Ok(m.clone()),
            (Resolved::Model(inst), _) => match inst.operator() {
                Some(op) => Ok(op.clone()),
                None => Ok(inst.sample(t)?),
            },
        }
    }

    fn generator(&self) -> Result<Operator, LabError> {
        match (&self.value, self.spec.role) {
            (Resolved::Matrix(a), Role::Generator) => Ok(a.clone()),
            (Resolved::Model(inst), Role::Generator) => inst
                .generator()
                .ok_or_else(|| input_err(self.spec, "model has no generator")),
            _ => Err(input_err(self.spec, "expected role = generator")),
        }
    }
}

fn header(cfg: &ExperimentConfig) -> ReportHeader {
    ReportHeader {
        tool: TOOL.into(),
        version: VERSION.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        experiment: cfg.kind.to_string(),
        name: cfg.name.clone(),
        schema: format!("{}/{}", cfg.kind, SCHEMA_VERSION),
    }
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn grid_points<'a>(inputs: &'a [Input<'a>], times: &[f64]) -> Vec<(&'a Input<'a>, f64)> {
    inputs
        .iter()
        .flat_map(|i| times.iter().map(move |&t| (i, t)))
        .collect()
}

fn analyze(cfg: &ExperimentConfig, inputs: &[Input]) -> Result<(Vec<String>, Vec<Row>), LabError> {
    let rows = grid_points(inputs, &cfg.grid())
        .into_par_iter()
        .map(|(input, t)| {
            let r = similarity_constant(&input.sample(t)?, cfg.kappa_max, &cfg.tol)?;
            Ok(Row {
                fields: vec![
                    input.label().into(),
                    format_sig17(t),
                    input.dim().to_string(),
                    format_sig17(r.constant),
                    format_sig17(r.lower_bound),
                    format_sig17(r.upper_bound),
                ],
                verdict: r.verdict.to_string(),
                pass: r.is_similar(),
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok((
        columns(&[
            "input",
            "t",
            "dim",
            "constant",
            "lower_bound",
            "upper_bound",
        ]),
        rows,
    ))
}

fn gallery(cfg: &ExperimentConfig, inputs: &[Input]) -> Result<(Vec<String>, Vec<Row>), LabError> {
    let rows = grid_points(inputs, &cfg.grid())
        .into_par_iter()
        .map(|(input, t)| {
            let op = input.sample(t)?;
            let r = similarity_constant(&op, cfg.kappa_max, &cfg.tol)?;
            Ok(Row {
                fields: vec![
                    input.label().into(),
                    format_sig17(t),
                    input.dim().to_string(),
                    format_sig17(op_norm(&op)),
                    format_sig17(spectral_radius(&op)?),
                    format_sig17(r.constant),
                    format_sig17(r.lower_bound),
                ],
                verdict: r.verdict.to_string(),
                pass: r.is_similar(),
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok((
        columns(&[
            "input",
            "t",
            "dim",
            "norm",
            "spectral_radius",
            "constant",
            "lower_bound",
        ]),
        rows,
    ))
}

fn split(cfg: &ExperimentConfig, inputs: &[Input]) -> Result<(Vec<String>, Vec<Row>), LabError> {
    let t0 = cfg.grid()[0];
    let mut labels: Vec<String> = inputs.iter().map(|i| i.label().to_string()).collect();
    let result = if inputs.iter().all(|i| i.spec.role == Role::Generator) {
        let gens = inputs
            .iter()
            .map(|i| i.generator().map(SemigroupSpec::Generator))
            .collect::<Result<Vec<_>, _>>()?;
        split_scaling_semigroup(&gens, cfg.kappa_max, &cfg.tol)?
    } else if inputs.iter().all(|i| i.spec.role == Role::Operator) {
        let factors = match inputs {
            [single @ Input {
                value: Resolved::Model(inst),
                ..
            }] => match inst.factors(t0)? {
                Some(f) => {
                    labels = (1..=f.len())
                        .map(|k| format!("{}[{k}]", single.label()))
                        .collect();
                    f
                }
                None => vec![single.operator(t0)?],
            },
            _ => inputs
                .iter()
                .map(|i| i.operator(t0))
                .collect::<Result<Vec<_>, _>>()?,
        };
        split_scaling_discrete(&factors, cfg.kappa_max, &cfg.tol)?
    } else {
        return Err(input_err(
            inputs[0].spec,
            "split inputs must share one role",
        ));
    };
    let mut rows = Vec::new();
    for (k, (s, cert)) in result
        .scalings
        .iter()
        .zip(&result.factor_certificates)
        .enumerate()
    {
        let (kappa, residual) = cert
            .as_ref()
            .map_or((f64::INFINITY, f64::NAN), |c| (c.kappa, c.residual));
        let verdict = match (cert, result.verdict) {
            (Some(_), _) => "Certified",
            (None, Verdict::SpectralObstruction) => "Obstructed",
            (None, _) => "Failed",
        };
        rows.push(Row {
            fields: vec![
                (k + 1).to_string(),
                labels[k].clone(),
                format_sig17(*s),
                format_sig17(kappa),
                format_sig17(residual),
            ],
            verdict: verdict.into(),
            pass: cert.is_some(),
        });
    }
    let (kappa, residual) = result
        .tensor_certificate
        .as_ref()
        .map_or((f64::INFINITY, f64::NAN), |c| (c.kappa, c.residual));
    let combined = match result.kind {
        crate::tensorsplit::ScalingKind::Multiplicative => result.scalings.iter().product::<f64>(),
        crate::tensorsplit::ScalingKind::Additive => result.scalings.iter().sum::<f64>(),
    };
    rows.push(Row {
        fields: vec![
            "tensor".into(),
            String::new(),
            format_sig17(combined),
            format_sig17(kappa),
            format_sig17(residual),
        ],
        verdict: result.verdict.to_string(),
        pass: result.verdict == Verdict::Similar,
    });
    Ok((
        columns(&["factor", "input", "scaling", "kappa", "residual"]),
        rows,
    ))
}

fn interpolate(
    cfg: &ExperimentConfig,
    inputs: &[Input],
) -> Result<(Vec<String>, Vec<Row>), LabError> {
    let [input] = inputs else {
        return Err(input_err(
            inputs[0].spec,
            "interpolate takes exactly one input",
        ));
    };
    let grid = CircleGrid::new(cfg.arcs)?;
    let s = InterpolatedSemigroup::new(input.operator(1.0)?, grid)?;
    let m = cfg.arcs as u64;
    let rows = cfg
        .grid()
        .into_par_iter()
        .map(|t| {
            let steps = if cfg.snap {
                grid.snap(t)?.steps
            } else {
                grid.steps(t)?
            };
            let used = steps as f64 / m as f64;
            let mut residual = bs_semigroup_residual(&s, used, grid.weight())?;
            if steps % m == 0 {
                residual = residual.max(bs_check_interpolation(&s, steps / m));
            }
            Ok(Row {
                fields: vec![
                    format_sig17(t),
                    format_sig17(used),
                    (steps / m).to_string(),
                    format_sig17((steps % m) as f64 / m as f64),
                    format_sig17(bs_norm(&s, used)?),
                    format_sig17(residual),
                ],
                verdict: if residual == 0.0 { "Exact" } else { "Inexact" }.into(),
                pass: residual == 0.0,
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok((
        columns(&["t", "used_t", "floor_t", "frac_t", "norm", "residual"]),
        rows,
    ))
}

fn crsim(cfg: &ExperimentConfig, inputs: &[Input]) -> Result<(Vec<String>, Vec<Row>), LabError> {
    let times = cfg.grid();
    let profiles = inputs
        .par_iter()
        .map(|input| {
            let a = input.generator()?;
            crsim_profile(&a, &times, cfg.kappa_max, &cfg.tol)
                .map_err(|e| input_err(input.spec, e.to_string()))
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let mut rows = Vec::new();
    for (input, p) in inputs.iter().zip(&profiles) {
        for (t, r) in p.times.iter().zip(&p.samples) {
            rows.push(Row {
                fields: vec![
                    input.label().into(),
                    format_sig17(*t),
                    format_sig17(r.constant),
                    format_sig17(r.lower_bound),
                    format_sig17(p.semigroup.constant),
                ],
                verdict: p.verdict.to_string(),
                pass: p.verdict == CrsimVerdict::Consistent,
            });
        }
    }
    Ok((
        columns(&[
            "input",
            "t",
            "constant",
            "lower_bound",
            "semigroup_constant",
        ]),
        rows,
    ))
}

/// Run the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    cfg.validate()?;
    let inputs = resolve(cfg)?;
    let (columns, rows) = match cfg.kind {
        ExperimentKind::Analyze => analyze(cfg, &inputs)?,
        ExperimentKind::Split => split(cfg, &inputs)?,
        ExperimentKind::Interpolate => interpolate(cfg, &inputs)?,
        ExperimentKind::Gallery => gallery(cfg, &inputs)?,
        ExperimentKind::Crsim => crsim(cfg, &inputs)?,
    };
    Ok(Report {
        header: header(cfg),
        columns,
        rows,
    })
}

/// Run the experiment and write `<name>.csv` and `<name>.json` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let paths = ReportPaths::for_config(cfg);
    if !cfg.overwrite {
        for p in [&paths.csv, &paths.json] {
            if p.exists() {
                return Err(LabError::OutputExists {
                    path: p.display().to_string(),
                });
            }
        }
    }
    let report = execute(cfg)?;
    let io = |p: &PathBuf, e: std::io::Error| LabError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| io(&cfg.output_dir, e))?;
    std::fs::write(&paths.csv, report.to_csv()).map_err(|e| io(&paths.csv, e))?;
    std::fs::write(&paths.json, report.summary_json()).map_err(|e| io(&paths.json, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{ModelName, ModelSpec};
    use crate::numkit::from_real_rows;

    fn diag(v: f64) -> InputSource {
        InputSource::Matrix(from_real_rows(1, 1, &[v]))
    }

    fn number(report: &Report, k: usize, col: &str) -> f64 {
        report.field(k, col).unwrap().parse().unwrap()
    }

    #[test]
    fn analyze_half() {
        let cfg = ExperimentConfig::new(ExperimentKind::Analyze, "a", 1).with_input(
            "half",
            Role::Operator,
            diag(0.5),
        );
        let r = execute(&cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(number(&r, 0, "constant"), 1.0);
        assert_eq!(r.field(0, "verdict"), Some("Similar"));
        assert!(r.passed());
    }

    #[test]
    fn split_half_and_two() {
        let cfg = ExperimentConfig::new(ExperimentKind::Split, "s", 1)
            .with_input("a", Role::Operator, diag(0.5))
            .with_input("b", Role::Operator, diag(2.0));
        let r = execute(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!((number(&r, 0, "scaling") - 2.0).abs() < 1e-12);
        assert!((number(&r, 1, "scaling") - 0.5).abs() < 1e-12);
        assert_eq!(r.field(2, "verdict"), Some("Similar"));
    }

    #[test]
    fn crsim_decay() {
        let times: Vec<f64> = (0..=6).rev().map(|k| 0.5f64.powi(k)).collect();
        let cfg = ExperimentConfig::new(ExperimentKind::Crsim, "c", 1)
            .with_input("decay", Role::Generator, diag(-1.0))
            .with_times(&times);
        let r = execute(&cfg).unwrap();
        assert_eq!(r.rows.len(), 7);
        for k in 0..7 {
            assert_eq!(number(&r, k, "constant"), 1.0);
            assert_eq!(r.field(k, "verdict"), Some("Consistent"));
        }
    }

    #[test]
    fn interpolate_is_exact() {
        let base = from_real_rows(2, 2, &[0.5, 1.0, 0.0, 0.25]);
        let cfg = ExperimentConfig {
            arcs: 4,
            ..ExperimentConfig::new(ExperimentKind::Interpolate, "i", 1)
                .with_input("t", Role::Operator, InputSource::Matrix(base))
                .with_times(&[0.0, 0.25, 1.0, 2.75])
        };
        let r = execute(&cfg).unwrap();
        assert!(r.passed());
        assert_eq!(r.field(3, "floor_t"), Some("2"));
        let off = ExperimentConfig {
            times: vec![0.3],
            ..cfg.clone()
        };
        assert!(matches!(execute(&off), Err(LabError::Interpolation(_))));
        let snapped = execute(&ExperimentConfig { snap: true, ..off }).unwrap();
        assert_eq!(number(&snapped, 0, "used_t"), 0.25);
    }

    #[test]
    fn eckstein_split_uses_factors() {
        let spec = ModelSpec::new(ModelName::Eckstein)
            .with("N", 3usize)
            .with("N_shift", 2usize);
        let cfg = ExperimentConfig::new(ExperimentKind::Split, "e", 1).with_input(
            "eck",
            Role::Operator,
            InputSource::Model(spec),
        );
        let r = execute(&cfg).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.field(0, "input"), Some("eck[1]"));
    }

    #[test]
    fn random_inputs_follow_seed() {
        let mk = |seed| {
            ExperimentConfig::new(ExperimentKind::Analyze, "r", seed).with_input(
                "r",
                Role::Operator,
                InputSource::Random { dim: 3, level: 0.8 },
            )
        };
        let a = execute(&mk(5)).unwrap().to_csv();
        assert_eq!(a, execute(&mk(5)).unwrap().to_csv());
        assert_ne!(a, execute(&mk(6)).unwrap().to_csv());
    }

    #[test]
    fn refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Analyze, "a", 1).with_input(
            "h",
            Role::Operator,
            diag(0.5),
        );
        cfg.output_dir = dir.path().join("out");
        run_experiment(&cfg).unwrap();
        let first = std::fs::read(dir.path().join("out/a.csv")).unwrap();
        assert!(matches!(
            run_experiment(&cfg),
            Err(LabError::OutputExists { .. })
        ));
        cfg.overwrite = true;
        run_experiment(&cfg).unwrap();
        assert_eq!(std::fs::read(dir.path().join("out/a.csv")).unwrap(), first);
        let json: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("out/a.json")).unwrap()).unwrap();
        assert_eq!(json["config_hash"], cfg.hash());
    }
}
