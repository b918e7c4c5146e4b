//! Experiment configuration. Every setting has a per-experiment default and
//! can be overridden in the JSON file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use reconn_core::losses::LossKind;
use reconn_core::{Activation, ProblemKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "1d-h1-tanh")]
    H1Tanh1d,
    #[serde(rename = "1d-h1-relu")]
    H1Relu1d,
    #[serde(rename = "1d-h1-reconn")]
    H1Reconn1d,
    #[serde(rename = "1d-pinns")]
    Pinns1d,
    #[serde(rename = "interface-2d")]
    Interface2d,
    #[serde(rename = "lshape-reconn")]
    LShapeReconn,
    #[serde(rename = "lshape-classical")]
    LShapeClassical,
    #[serde(rename = "material-pinns")]
    MaterialPinns,
    #[serde(rename = "material-h1-reconn")]
    MaterialH1Reconn,
    #[serde(rename = "material-h1-classical")]
    MaterialH1Classical,
}

/// How the field is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Classical,
    Interface,
    Corner,
    MaterialVertex,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::H1Tanh1d,
        Experiment::H1Relu1d,
        Experiment::H1Reconn1d,
        Experiment::Pinns1d,
        Experiment::Interface2d,
        Experiment::LShapeReconn,
        Experiment::LShapeClassical,
        Experiment::MaterialPinns,
        Experiment::MaterialH1Reconn,
        Experiment::MaterialH1Classical,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::H1Tanh1d => "1d-h1-tanh",
            Experiment::H1Relu1d => "1d-h1-relu",
            Experiment::H1Reconn1d => "1d-h1-reconn",
            Experiment::Pinns1d => "1d-pinns",
            Experiment::Interface2d => "interface-2d",
            Experiment::LShapeReconn => "lshape-reconn",
            Experiment::LShapeClassical => "lshape-classical",
            Experiment::MaterialPinns => "material-pinns",
            Experiment::MaterialH1Reconn => "material-h1-reconn",
            Experiment::MaterialH1Classical => "material-h1-classical",
        }
    }

    pub fn problem(self) -> ProblemKind {
        use Experiment::*;
        match self {
            H1Tanh1d | H1Relu1d | H1Reconn1d | Pinns1d => ProblemKind::Transmission1d,
            Interface2d => ProblemKind::Interface,
            LShapeReconn | LShapeClassical => ProblemKind::LShape,
            MaterialPinns | MaterialH1Reconn | MaterialH1Classical => ProblemKind::MaterialVertex,
        }
    }

    pub fn loss(self) -> LossKind {
        use Experiment::*;
        match self {
            H1Tanh1d | H1Relu1d | H1Reconn1d | MaterialH1Reconn | MaterialH1Classical => LossKind::H1Fit,
            _ => LossKind::Pinns,
        }
    }

    pub fn architecture(self) -> Architecture {
        use Experiment::*;
        match self {
            H1Tanh1d | H1Relu1d | LShapeClassical | MaterialH1Classical => Architecture::Classical,
            H1Reconn1d | Pinns1d | Interface2d => Architecture::Interface,
            LShapeReconn => Architecture::Corner,
            MaterialPinns | MaterialH1Reconn => Architecture::MaterialVertex,
        }
    }

    pub fn defaults(self) -> Settings {
        use Experiment::*;
        let one_d = matches!(self, H1Tanh1d | H1Relu1d | H1Reconn1d | Pinns1d);
        let layers = match self {
            H1Tanh1d | H1Relu1d => vec![1, 20, 20, 20, 1],
            H1Reconn1d | Pinns1d => vec![1, 20, 20, 20, 2],
            Interface2d | LShapeReconn => vec![2, 30, 30, 30, 2],
            LShapeClassical => vec![2, 35, 35, 35, 1],
            MaterialPinns | MaterialH1Reconn => vec![2, 30, 30, 30, 6],
            MaterialH1Classical => vec![2, 36, 36, 36, 1],
        };
        let angular_layers = match self {
            LShapeReconn => Some(vec![2, 15, 15, 15, 1]),
            MaterialPinns | MaterialH1Reconn => Some(vec![2, 15, 15, 15, 3]),
            _ => None,
        };
        let batch = match self {
            _ if one_d => [2500, 1, 2],
            MaterialH1Reconn | MaterialH1Classical => [2500, 0, 0],
            LShapeReconn | LShapeClassical => [1000, 0, 1000],
            _ => [1000, 1000, 1000],
        };
        Settings {
            experiment: self,
            seed: 0,
            iterations: if one_d { 5000 } else { 50_000 },
            batch,
            weights: None,
            layers,
            angular_layers,
            activation: if self == H1Relu1d { Activation::Relu } else { Activation::Tanh },
            cutoff: [0.5, 0.9],
            lr0: 1e-3,
            lr_decay: 1e-3,
            stratified: self == MaterialPinns,
            grid: if one_d { 10_000 } else { 256 },
            output_dir: PathBuf::from("out").join(self.id()),
        }
    }
}

/// Fully resolved settings of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub experiment: Experiment,
    pub seed: u64,
    pub iterations: usize,
    /// Interior, interface and boundary points per iteration.
    pub batch: [usize; 3],
    /// Loss weights; `None` uses the problem's defaults.
    pub weights: Option<Vec<f64>>,
    pub layers: Vec<usize>,
    pub angular_layers: Option<Vec<usize>>,
    pub activation: Activation,
    /// Cutoff radii `[delta1, delta2]`.
    pub cutoff: [f64; 2],
    pub lr0: f64,
    /// Ratio between the final and the initial learning rate.
    pub lr_decay: f64,
    pub stratified: bool,
    /// Cells per direction of the evaluation grid.
    pub grid: usize,
    pub output_dir: PathBuf,
}

/// The JSON file: an experiment id plus optional overrides.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub batch: Option<[usize; 3]>,
    pub weights: Option<Vec<f64>>,
    pub layers: Option<Vec<usize>>,
    pub angular_layers: Option<Vec<usize>>,
    pub activation: Option<Activation>,
    pub cutoff: Option<[f64; 2]>,
    pub lr0: Option<f64>,
    pub lr_decay: Option<f64>,
    pub stratified: Option<bool>,
    pub grid: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn resolve(self) -> Result<Settings> {
        let Some(experiment) = self.experiment else {
            bail!("config is missing the \"experiment\" field");
        };
        let d = experiment.defaults();
        let s = Settings {
            experiment,
            seed: self.seed.unwrap_or(d.seed),
            iterations: self.iterations.unwrap_or(d.iterations),
            batch: self.batch.unwrap_or(d.batch),
            weights: self.weights.or(d.weights),
            layers: self.layers.unwrap_or(d.layers),
            angular_layers: self.angular_layers.or(d.angular_layers),
            activation: self.activation.unwrap_or(d.activation),
            cutoff: self.cutoff.unwrap_or(d.cutoff),
            lr0: self.lr0.unwrap_or(d.lr0),
            lr_decay: self.lr_decay.unwrap_or(d.lr_decay),
            stratified: self.stratified.unwrap_or(d.stratified),
            grid: self.grid.unwrap_or(d.grid),
            output_dir: self.output_dir.unwrap_or(d.output_dir),
        };
        s.validate()?;
        Ok(s)
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            bail!("iterations must be positive");
        }
        if self.grid == 0 {
            bail!("grid must be positive");
        }
        if self.batch[0] == 0 {
            bail!("the interior batch must be positive");
        }
        if self.experiment.loss() == LossKind::Pinns {
            let needs_interface = matches!(self.experiment.problem(), ProblemKind::Interface | ProblemKind::MaterialVertex);
            if self.batch[2] == 0 || (needs_interface && self.batch[1] == 0) {
                bail!("batch sizes {:?} must be positive for a PINNs run", self.batch);
            }
        }
        let [d1, d2] = self.cutoff;
        if !(d1 > 0.0 && d2 > d1) {
            bail!("cutoff radii must satisfy 0 < delta1 < delta2, got {:?}", self.cutoff);
        }
        if !(self.lr0 > 0.0 && self.lr_decay > 0.0) {
            bail!("learning rates must be positive");
        }
        let needs_angular = matches!(
            self.experiment.architecture(),
            Architecture::Corner | Architecture::MaterialVertex
        );
        if needs_angular && self.angular_layers.is_none() {
            bail!("{} needs angular_layers", self.experiment.id());
        }
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ConfigFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.resolve()
}
