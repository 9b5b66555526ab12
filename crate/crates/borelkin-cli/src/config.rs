//! TOML run configurations and their validation. Every buildable object goes
//! through the library constructors, so a bad config fails with the message
//! of the module that owns the violated precondition.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use borelkin::dynamics::{CurrentScale, DGParams, Probe, ProbeKind};
use borelkin::geometry::{OneForm, TwistScale};
use borelkin::kinematics::{KinematicsParams, VectorFieldSpec};
use borelkin::manifold::{Grid, ManifoldKind, ManifoldSpec};
use borelkin::state::WaveFunction;
use borelkin::trig::{Harmonic, TrigPoly, TrigTerm};

pub const OUTPUT_ROOT_ENV: &str = "BORELKIN_OUTPUT_ROOT";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub manifold: ManifoldConfig,
    pub grid: GridConfig,
    pub kinematics: KinematicsConfig,
    pub dynamics: DynamicsConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub probes: Vec<ProbeConfig>,
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: String,
    pub extents: Vec<f64>,
    pub metric: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicsConfig {
    pub hbar: f64,
    #[serde(default)]
    pub c: f64,
    /// Constant twist per axis.
    pub theta: Option<Vec<f64>>,
    /// Optional exact part of ω given through a potential β (ω = θ + dβ,
    /// closed by construction).
    pub omega_exact: Option<TrigPolySpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dt: f64,
    pub t_final: f64,
    pub d_coeffs: Option<[f64; 5]>,
    /// Absolute density floor; omitted means 1e-12·max ρ₀.
    pub density_floor: Option<f64>,
    pub potential: Option<TrigPolySpec>,
    /// "half" (default) or "full" twist scaling in the kinetic operator.
    pub twist: Option<String>,
    /// "double" (default) or "single" current prefactor in the nonlinear
    /// functionals.
    pub rj_current: Option<String>,
    pub stability_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseStateConfig {
    PlaneWave { modes: Vec<i64> },
    Bump { center: Vec<f64>, kappa: Vec<f64> },
    Gaussian { center: Vec<f64>, sigma: Vec<f64> },
    RandomBandLimited { max_mode: usize },
}

#[derive(Debug, Deserialize)]
pub struct WeightedState {
    /// Complex weight as `[re, im]`.
    pub weight: [f64; 2],
    #[serde(flatten)]
    pub state: BaseStateConfig,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Superposition {
        components: Vec<WeightedState>,
    },
    Base(BaseStateConfig),
}

#[derive(Debug, Deserialize)]
pub struct ProbeConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: ProbeKindConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeKindConfig {
    Position {
        #[serde(flatten)]
        poly: TrigPolySpec,
    },
    Momentum {
        components: Vec<TrigPolySpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub plots: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPolySpec {
    pub constant: Option<f64>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub amp: f64,
    pub factors: Vec<FactorSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub kind: String,
    pub mode: Option<u32>,
}

impl TrigPolySpec {
    pub fn build(&self, extents: &[f64]) -> Result<TrigPoly> {
        let mut poly = match self.constant {
            Some(v) => TrigPoly::constant(extents, v),
            None => TrigPoly::zero(extents),
        };
        let mut terms = Vec::new();
        for term in &self.terms {
            if term.factors.len() != extents.len() {
                bail!(
                    "config: term has {} factors, manifold is {}-dimensional",
                    term.factors.len(),
                    extents.len()
                );
            }
            let mut factors = Vec::new();
            for f in &term.factors {
                factors.push(match f.kind.as_str() {
                    "one" => Harmonic::One,
                    "cos" => Harmonic::Cos(require_mode(f)?),
                    "sin" => Harmonic::Sin(require_mode(f)?),
                    other => bail!("config: unknown factor kind {other:?} (one|cos|sin)"),
                });
            }
            terms.push(TrigTerm { amp: term.amp, factors });
        }
        if !terms.is_empty() {
            poly = poly.plus(&TrigPoly::new(extents, terms));
        }
        Ok(poly)
    }
}

fn require_mode(f: &FactorSpec) -> Result<u32> {
    match f.mode {
        Some(m) if m >= 1 => Ok(m),
        _ => bail!("config: factor kind {:?} needs mode >= 1", f.kind),
    }
}

/// Everything needed to execute a run, built and validated.
pub struct BuiltRun {
    pub params: DGParams,
    pub psi0: WaveFunction,
    pub probes: Vec<Probe>,
    pub t_final: f64,
    pub snapshot_every: usize,
    pub out_dir: PathBuf,
    pub plots: bool,
}

pub fn resolve_output_dir(dir: &PathBuf) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir.clone(),
    }
}

pub fn build_manifold(m: &ManifoldConfig) -> Result<ManifoldSpec> {
    let kind = match m.kind.as_str() {
        "circle" => ManifoldKind::Circle,
        "torus2" => ManifoldKind::Torus2,
        "segment" => ManifoldKind::LineSegment,
        other => bail!("manifold: unknown kind {other:?} (circle|torus2|segment)"),
    };
    let metric = m.metric.clone().unwrap_or_else(|| vec![1.0; kind.ndim()]);
    Ok(ManifoldSpec::new(kind, m.extents.clone(), metric)?)
}

pub fn build_grid(m: &ManifoldConfig, g: &GridConfig) -> Result<Grid> {
    Ok(Grid::new(build_manifold(m)?, g.points.clone())?)
}

pub fn build_kinematics(k: &KinematicsConfig, grid: &Grid) -> Result<KinematicsParams> {
    let theta = k.theta.clone().unwrap_or_else(|| vec![0.0; grid.ndim()]);
    if theta.len() != grid.ndim() {
        bail!(
            "kinematics: theta has {} entries, manifold is {}-dimensional",
            theta.len(),
            grid.ndim()
        );
    }
    let omega = match &k.omega_exact {
        None => OneForm::constant(grid, &theta),
        Some(beta_spec) => {
            let beta = beta_spec.build(grid.spec().extents())?;
            let components = (0..grid.ndim())
                .map(|d| {
                    let db = beta.partial(d);
                    grid.sample(|x| theta[d] + db.eval(x))
                })
                .collect();
            OneForm::from_components(grid, components, 1e-9)?
        }
    };
    Ok(KinematicsParams::new(k.hbar, k.c, omega)?)
}

fn build_base_state(
    spec: &BaseStateConfig,
    grid: &Grid,
    seed: u64,
) -> Result<WaveFunction> {
    Ok(match spec {
        BaseStateConfig::PlaneWave { modes } => {
            if modes.len() != grid.ndim() {
                bail!("initial: plane wave needs one mode per dimension");
            }
            WaveFunction::plane_wave(grid, modes)?
        }
        BaseStateConfig::Bump { center, kappa } => {
            WaveFunction::periodic_bump(grid, center, kappa)?
        }
        BaseStateConfig::Gaussian { center, sigma } => {
            WaveFunction::gaussian(grid, center, sigma)?
        }
        BaseStateConfig::RandomBandLimited { max_mode } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            WaveFunction::random_band_limited(grid, *max_mode, &mut rng)?
        }
    })
}

pub fn build_initial(spec: &InitialConfig, grid: &Grid, seed: u64) -> Result<WaveFunction> {
    match spec {
        InitialConfig::Base(base) => build_base_state(base, grid, seed),
        InitialConfig::Superposition { components } => {
            if components.is_empty() {
                bail!("initial: superposition needs at least one component");
            }
            let mut sum = vec![num_complex::Complex64::default(); grid.len()];
            for (i, comp) in components.iter().enumerate() {
                let state = build_base_state(&comp.state, grid, seed.wrapping_add(i as u64))?;
                let w = num_complex::Complex64::new(comp.weight[0], comp.weight[1]);
                for (s, v) in sum.iter_mut().zip(state.data()) {
                    *s += w * v;
                }
            }
            Ok(WaveFunction::new(grid.clone(), sum)?.normalized())
        }
    }
}

fn degree_bound(grid: &Grid) -> u32 {
    (grid.shape().iter().copied().min().unwrap_or(4) / 4) as u32
}

fn check_degree(what: &str, poly: &TrigPoly, grid: &Grid) -> Result<()> {
    let bound = degree_bound(grid);
    if poly.degree() > bound {
        bail!(
            "{what}: trigonometric degree {} exceeds the aliasing bound N/4 = {bound}",
            poly.degree()
        );
    }
    Ok(())
}

pub fn build_probes(specs: &[ProbeConfig], grid: &Grid) -> Result<Vec<Probe>> {
    let extents = grid.spec().extents();
    let mut probes = Vec::with_capacity(specs.len());
    for spec in specs {
        let kind = match &spec.kind {
            ProbeKindConfig::Position { poly } => {
                let f = poly.build(extents)?;
                check_degree(&format!("probe {:?}", spec.name), &f, grid)?;
                ProbeKind::Position(f)
            }
            ProbeKindConfig::Momentum { components } => {
                if components.len() != grid.ndim() {
                    bail!(
                        "probe {:?}: momentum needs one component per dimension",
                        spec.name
                    );
                }
                let comps = components
                    .iter()
                    .map(|c| c.build(extents))
                    .collect::<Result<Vec<_>>>()?;
                let field = VectorFieldSpec::new(comps);
                if field.degree() > degree_bound(grid) {
                    bail!(
                        "probe {:?}: trigonometric degree {} exceeds the aliasing bound N/4",
                        spec.name,
                        field.degree()
                    );
                }
                ProbeKind::Momentum(field)
            }
        };
        probes.push(Probe { name: spec.name.clone(), kind });
    }
    Ok(probes)
}

impl RunConfig {
    pub fn build(&self) -> Result<BuiltRun> {
        let grid = build_grid(&self.manifold, &self.grid)?;
        let kin = build_kinematics(&self.kinematics, &grid)?;
        let psi0 = build_initial(&self.initial, &grid, self.seed)
            .context("initial state construction failed")?;

        let potential = match &self.dynamics.potential {
            None => vec![0.0; grid.len()],
            Some(spec) => {
                let v = spec.build(grid.spec().extents())?;
                check_degree("dynamics: potential", &v, &grid)?;
                grid.sample(|x| v.eval(x))
            }
        };
        let d_coeffs = self.dynamics.d_coeffs.unwrap_or([0.0; 5]);
        let mut params = DGParams::new(kin, potential, d_coeffs, self.dynamics.dt)?;
        let floor = self
            .dynamics
            .density_floor
            .unwrap_or_else(|| DGParams::default_floor_for(&psi0));
        params = params.with_density_floor(floor);
        if let Some(twist) = &self.dynamics.twist {
            params = params.with_twist(match twist.as_str() {
                "half" => TwistScale::Half,
                "full" => TwistScale::Full,
                other => bail!("dynamics: unknown twist {other:?} (half|full)"),
            });
        }
        if let Some(scale) = &self.dynamics.rj_current {
            params = params.with_rj_current(match scale.as_str() {
                "double" => CurrentScale::Double,
                "single" => CurrentScale::Single,
                other => bail!("dynamics: unknown rj_current {other:?} (double|single)"),
            });
        }
        if let Some(factor) = self.dynamics.stability_factor {
            params = params.with_stability_factor(factor);
        }
        // Surfaces the dt ≤ factor·h²·g/ħ precondition at parse time.
        params.check_stability()?;
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(self.dynamics.t_final >= 0.0) {
            bail!("dynamics: t_final must be nonnegative, got {}", self.dynamics.t_final);
        }

        let probes = build_probes(&self.probes, &grid)?;
        Ok(BuiltRun {
            params,
            psi0,
            probes,
            t_final: self.dynamics.t_final,
            snapshot_every: self.output.snapshot_every.unwrap_or(100).max(1),
            out_dir: resolve_output_dir(&self.output.dir),
            plots: self.output.plots,
        })
    }
}

// ---------------------------------------------------------------------------
// gauge-fit configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeFitConfig {
    pub manifold: ManifoldConfig,
    pub grid: GridConfig,
    pub hbar: f64,
    pub dt: f64,
    /// Number of snapshots in the fitted window (≥ 5).
    pub snapshots: usize,
    /// Start time of the window along the exactly propagated linear flow.
    #[serde(default)]
    pub t_start: f64,
    pub lambda: f64,
    pub gammas: Vec<f64>,
    /// Also run the current-squared–blind control basis.
    #[serde(default)]
    pub ablation: bool,
    pub initial: InitialConfig,
    pub output: OutputConfig,
}

impl GaugeFitConfig {
    pub fn build(&self) -> Result<(DGParams, WaveFunction, PathBuf)> {
        let grid = build_grid(&self.manifold, &self.grid)?;
        let kin = KinematicsParams::untwisted(&grid, self.hbar, 0.0)?;
        let psi0 = build_initial(&self.initial, &grid, 0)?;
        if self.snapshots < 5 {
            bail!("gauge: fit needs at least 5 snapshots, got {}", self.snapshots);
        }
        let params = DGParams::free(kin, self.dt)?
            .with_density_floor(DGParams::default_floor_for(&psi0));
        Ok((params, psi0, resolve_output_dir(&self.output.dir)))
    }
}
