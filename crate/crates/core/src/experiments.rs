//! End-to-end experiment drivers behind the `qks` binary: linear baselines,
//! single QKS runs, σ × E sweeps and implied-kernel checks.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ansatz::Ansatz;
use crate::datasets::{
    gen_picture_frames, load_mnist_pair, make_tilemap, standardize, DataError, LabeledDataset, Split, TileMap,
};
use crate::encoding::{EncodingStructure, MachineConfig, MachineError, QksMachine, StructureError};
use crate::features::{featurize, FeatureFileError, FeatureMatrix, FeaturizeError, StructureSummary};
use crate::kernels::{closed_form_cnot2_for, closed_form_rxcz2, mc_kernel, CZ2_KERNEL};
use crate::linear::{evaluate, train, Design, TrainError, TrainOptions};
use crate::rng::{substream, Purpose};
use crate::statevector::SimError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Simulator(#[from] SimError),
    #[error(transparent)]
    FeatureFile(#[from] FeatureFileError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl ExperimentError {
    /// 2 for bad invocations, 1 for everything that went wrong with data.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

pub(crate) fn io_error(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where a train/test pair comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Frames {
        train_per_class: usize,
        test_per_class: usize,
        seed: u64,
    },
    Mnist {
        dir: PathBuf,
        digits: (u8, u8),
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
    },
}

impl DatasetSource {
    pub fn frames(seed: u64) -> Self {
        DatasetSource::Frames {
            train_per_class: 800,
            test_per_class: 200,
            seed,
        }
    }

    pub fn load(&self) -> Result<PreparedData> {
        match self {
            DatasetSource::Frames {
                train_per_class,
                test_per_class,
                seed,
            } => {
                if *train_per_class == 0 || *test_per_class == 0 {
                    return Err(ExperimentError::Usage("picture-frame counts must be positive".into()));
                }
                let (train, test) = gen_picture_frames(*train_per_class, *test_per_class, *seed);
                Ok(PreparedData::raw(format!("frames(seed={seed})"), train, test))
            }
            DatasetSource::Mnist { dir, digits } => {
                let (a, b) = *digits;
                let train = load_mnist_pair(
                    &find_idx(dir, "train-images-idx3-ubyte")?,
                    &find_idx(dir, "train-labels-idx1-ubyte")?,
                    a,
                    b,
                    Split::Train,
                )?;
                let test = load_mnist_pair(
                    &find_idx(dir, "t10k-images-idx3-ubyte")?,
                    &find_idx(dir, "t10k-labels-idx1-ubyte")?,
                    a,
                    b,
                    Split::Test,
                )?;
                let side = (train.dim() as f64).sqrt() as usize;
                let mut data = PreparedData::standardized(format!("mnist({a},{b})"), train, test);
                if side * side == data.train.dim() {
                    data.image = Some((side, side));
                }
                Ok(data)
            }
            DatasetSource::Csv { train, test } => {
                let tr = LabeledDataset::read_csv(train, Split::Train)?;
                let te = LabeledDataset::read_csv(test, Split::Test)?;
                if tr.dim() != te.dim() {
                    return Err(DataError::Mismatch(format!(
                        "train has {} columns but test has {}",
                        tr.dim(),
                        te.dim()
                    ))
                    .into());
                }
                Ok(PreparedData::raw(format!("csv({})", train.display()), tr, te))
            }
        }
    }
}

/// Accepts `name` or `name.gz` inside `dir`.
fn find_idx(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(ExperimentError::Io {
        path: plain.display().to_string(),
        source: io::Error::new(io::ErrorKind::NotFound, "no such file (also tried .gz)"),
    })
}

/// Dataset ready for the pipeline. Checksums refer to the inputs as loaded,
/// before any standardisation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub standardized: bool,
    /// Image shape for inputs that are column-major stacked images.
    pub image: Option<(usize, usize)>,
    pub info: DatasetInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub dim: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub standardized: bool,
    pub train_checksum: String,
    pub test_checksum: String,
}

impl PreparedData {
    pub fn raw(name: String, train: LabeledDataset, test: LabeledDataset) -> Self {
        Self::build(name, train, test, false)
    }

    /// Standardises both splits with train statistics.
    pub fn standardized(name: String, train: LabeledDataset, test: LabeledDataset) -> Self {
        Self::build(name, train, test, true)
    }

    fn build(name: String, train: LabeledDataset, test: LabeledDataset, standardized: bool) -> Self {
        let info = DatasetInfo {
            name: name.clone(),
            dim: train.dim(),
            train_rows: train.len(),
            test_rows: test.len(),
            standardized,
            train_checksum: train.checksum(),
            test_checksum: test.checksum(),
        };
        let (train, test) = if standardized {
            let (tr, te, _) = standardize(&train, &test);
            (tr, te)
        } else {
            (train, test)
        };
        PreparedData {
            name,
            train,
            test,
            standardized,
            image: None,
            info,
        }
    }

    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    pub fn tilemap(&self, q: usize) -> Option<std::result::Result<TileMap, String>> {
        self.image.map(|(rows, cols)| make_tilemap(rows, cols, q))
    }
}

/// Encoding structure for `q` parameters over this dataset: dense for q = 1,
/// one component per parameter for q = p, image tiles for stacked images, and
/// equal contiguous blocks otherwise.
pub fn choose_structure(data: &PreparedData, q: usize) -> Result<EncodingStructure> {
    let p = data.dim();
    if q == 0 {
        return Ok(EncodingStructure::empty(p)?);
    }
    if q == 1 {
        return Ok(EncodingStructure::dense(p)?);
    }
    if q == p {
        return Ok(EncodingStructure::split(p)?);
    }
    if let Some(tiles) = data.tilemap(q) {
        let tiles = tiles.map_err(ExperimentError::Usage)?;
        return Ok(EncodingStructure::from_tiles(p, tiles.tiles)?);
    }
    Ok(EncodingStructure::tiled(p, q)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub dataset: DatasetInfo,
    pub lambda: f64,
    pub train_error: f64,
    pub test_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

/// Logistic regression directly on the (possibly standardised) inputs.
pub fn run_baseline(data: &PreparedData, lambda: Option<f64>) -> Result<BaselineReport> {
    let start = Instant::now();
    let opts = TrainOptions {
        lambda,
        ..TrainOptions::default()
    };
    let (model, report) = train(&data.train.inputs, &data.train.labels, &opts)?;
    Ok(BaselineReport {
        dataset: data.info.clone(),
        lambda: model.lambda,
        train_error: evaluate(&model, &data.train.inputs, &data.train.labels),
        test_error: evaluate(&model, &data.test.inputs, &data.test.labels),
        iterations: report.iterations,
        converged: report.converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub ansatz: Ansatz,
    pub layers: usize,
    pub sigma: f64,
    pub episodes: usize,
    pub seed: u64,
    pub lambda: Option<f64>,
}

impl RunConfig {
    pub fn new(ansatz: Ansatz, sigma: f64, episodes: usize, seed: u64) -> Self {
        RunConfig {
            ansatz,
            layers: 1,
            sigma,
            episodes,
            seed,
            lambda: None,
        }
    }

    fn machine_config(&self) -> MachineConfig {
        MachineConfig::new(self.sigma, self.episodes, self.seed).with_layers(self.layers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub dataset: DatasetInfo,
    pub config: RunConfig,
    pub lambda: f64,
    pub structure: StructureSummary,
    pub num_qubits: usize,
    pub feature_cols: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub featurize_seconds: f64,
    pub train_seconds: f64,
    pub seconds: f64,
}

/// Samples a machine for `config` sized to `data`.
pub fn build_machine(data: &PreparedData, config: &RunConfig) -> Result<QksMachine> {
    let template = config.ansatz.template();
    let structure = choose_structure(data, template.num_params())?;
    Ok(QksMachine::sample(&template, structure, config.machine_config())?)
}

/// Train and test features for one machine.
pub fn featurize_pair(machine: &QksMachine, data: &PreparedData) -> Result<(FeatureMatrix, FeatureMatrix)> {
    Ok((
        featurize(machine, &data.train.inputs, Split::Train)?,
        featurize(machine, &data.test.inputs, Split::Test)?,
    ))
}

struct Fit {
    lambda: f64,
    train_error: f64,
    test_error: f64,
    iterations: usize,
    converged: bool,
}

fn fit<D: Design>(train_x: &D, test_x: &D, data: &PreparedData, lambda: Option<f64>) -> Result<Fit> {
    let opts = TrainOptions {
        lambda,
        ..TrainOptions::default()
    };
    let (model, report) = train(train_x, &data.train.labels, &opts)?;
    Ok(Fit {
        lambda: model.lambda,
        train_error: evaluate(&model, train_x, &data.train.labels),
        test_error: evaluate(&model, test_x, &data.test.labels),
        iterations: report.iterations,
        converged: report.converged,
    })
}

/// Sample, featurise both splits, train on train features, evaluate on both.
pub fn run_qks(data: &PreparedData, config: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    let machine = build_machine(data, config)?;
    let (train_x, test_x) = featurize_pair(&machine, data)?;
    let featurize_seconds = start.elapsed().as_secs_f64();
    let t = Instant::now();
    let f = fit(&train_x, &test_x, data, config.lambda)?;
    let train_seconds = t.elapsed().as_secs_f64();
    Ok(RunReport {
        dataset: data.info.clone(),
        config: *config,
        lambda: f.lambda,
        structure: machine.structure().into(),
        num_qubits: machine.num_qubits(),
        feature_cols: train_x.cols(),
        train_error: f.train_error,
        test_error: f.test_error,
        iterations: f.iterations,
        converged: f.converged,
        featurize_seconds,
        train_seconds,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRequest {
    pub ansatz: Ansatz,
    pub layers: usize,
    pub sigmas: Vec<f64>,
    pub episodes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lambda: Option<f64>,
}

/// One grid cell, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub sigma: f64,
    pub episodes: usize,
    pub train_error: f64,
    pub test_error: f64,
    /// Mean wall time of training and evaluating the cell.
    pub seconds: f64,
    pub per_seed_test_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub request: SweepRequest,
    pub dataset: DatasetInfo,
    pub cells: Vec<SweepCell>,
    /// Featurisation time per σ at the largest E, summed over seeds.
    pub featurize_seconds: Vec<f64>,
}

impl SweepResult {
    pub fn cell(&self, sigma: f64, episodes: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.sigma == sigma && c.episodes == episodes)
    }

    /// Cell with the lowest mean test error; ties go to the earlier cell.
    pub fn best(&self) -> Option<&SweepCell> {
        self.cells.iter().fold(None, |best: Option<&SweepCell>, c| match best {
            Some(b) if b.test_error <= c.test_error => Some(b),
            _ => Some(c),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |e: csv::Error| ExperimentError::Io {
            path: path.display().to_string(),
            source: io::Error::other(e),
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["sigma", "episodes", "train_error", "test_error", "seconds"])
            .map_err(csv_err)?;
        for c in &self.cells {
            w.write_record([
                c.sigma.to_string(),
                c.episodes.to_string(),
                c.train_error.to_string(),
                c.test_error.to_string(),
                format!("{:.3}", c.seconds),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(io_error(path))
    }
}

/// Evaluates every (σ, E) cell. Each σ and seed is featurised once at the
/// largest E; smaller E reuse the leading columns, which is exactly what a
/// fresh run with fewer episodes would produce.
pub fn run_sweep(data: &PreparedData, request: &SweepRequest) -> Result<SweepResult> {
    if request.sigmas.is_empty() {
        return Err(ExperimentError::Usage("sweep needs at least one sigma".into()));
    }
    if request.episodes.is_empty() {
        return Err(ExperimentError::Usage("sweep needs at least one episode count".into()));
    }
    if request.seeds.is_empty() {
        return Err(ExperimentError::Usage("sweep needs at least one seed".into()));
    }
    if request.episodes.contains(&0) {
        return Err(ExperimentError::Usage("episode counts must be positive".into()));
    }
    let e_max = *request.episodes.iter().max().expect("non-empty");
    let n_seeds = request.seeds.len() as f64;

    let mut cells = Vec::new();
    let mut featurize_seconds = Vec::new();
    for &sigma in &request.sigmas {
        let mut per_seed: Vec<Vec<(Fit, f64)>> = Vec::new();
        let mut feat_time = 0.0;
        for &seed in &request.seeds {
            let config = RunConfig {
                ansatz: request.ansatz,
                layers: request.layers,
                sigma,
                episodes: e_max,
                seed,
                lambda: request.lambda,
            };
            let t = Instant::now();
            let machine = build_machine(data, &config)?;
            let (train_x, test_x) = featurize_pair(&machine, data)?;
            feat_time += t.elapsed().as_secs_f64();
            let q = machine.num_qubits();
            let mut fits = Vec::new();
            for &e in &request.episodes {
                let t = Instant::now();
                let f = if e == e_max {
                    fit(&train_x, &test_x, data, request.lambda)?
                } else {
                    fit(
                        &train_x.truncate_cols(e * q),
                        &test_x.truncate_cols(e * q),
                        data,
                        request.lambda,
                    )?
                };
                fits.push((f, t.elapsed().as_secs_f64()));
            }
            per_seed.push(fits);
        }
        featurize_seconds.push(feat_time);
        for (k, &episodes) in request.episodes.iter().enumerate() {
            let runs: Vec<&(Fit, f64)> = per_seed.iter().map(|fits| &fits[k]).collect();
            cells.push(SweepCell {
                sigma,
                episodes,
                train_error: runs.iter().map(|(f, _)| f.train_error).sum::<f64>() / n_seeds,
                test_error: runs.iter().map(|(f, _)| f.test_error).sum::<f64>() / n_seeds,
                seconds: runs.iter().map(|(_, s)| s).sum::<f64>() / n_seeds,
                per_seed_test_error: runs.iter().map(|(f, _)| f.test_error).collect(),
            });
        }
    }
    Ok(SweepResult {
        request: request.clone(),
        dataset: data.info.clone(),
        cells,
        featurize_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub mc: f64,
    pub stderr: f64,
    /// Absent for ansätze without a known closed form.
    pub closed_form: Option<f64>,
}

/// `n` pairs of points with coordinates uniform in [-1, 1].
pub fn random_pairs(n: usize, p: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = substream(seed, Purpose::Scratch, 0, 0);
    let point = |rng: &mut rand_chacha::ChaCha8Rng| (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect::<Vec<f64>>();
    (0..n).map(|_| (point(&mut rng), point(&mut rng))).collect()
}

/// Monte Carlo kernel against the closed form for each pair. Inputs have one
/// component per parameter when the dimension equals the parameter count;
/// otherwise the dense/tiled rule of [`choose_structure`] applies.
pub fn kernel_check(
    ansatz: Ansatz,
    sigma: f64,
    episodes: usize,
    seed: u64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<KernelRow>> {
    let Some(p) = pairs.first().map(|(u, _)| u.len()) else {
        return Ok(Vec::new());
    };
    if pairs.iter().any(|(u, v)| u.len() != p || v.len() != p) {
        return Err(ExperimentError::Usage(
            "all kernel points must share a dimension".into(),
        ));
    }
    let template = ansatz.template();
    let q = template.num_params();
    let structure = match q {
        1 => EncodingStructure::dense(p)?,
        q if q == p => EncodingStructure::split(p)?,
        q => EncodingStructure::tiled(p, q)?,
    };
    let machine = QksMachine::sample(&template, structure, MachineConfig::new(sigma, episodes, seed))?;
    pairs
        .iter()
        .map(|(u, v)| {
            let est = mc_kernel(&machine, u, v)?;
            let closed_form = match ansatz {
                Ansatz::Cnot2 => Some(closed_form_cnot2_for(machine.structure(), u, v, sigma)),
                Ansatz::Cz2 => Some(CZ2_KERNEL),
                Ansatz::Rxcz2 => Some(closed_form_rxcz2(machine.structure(), u, v, sigma)),
                _ => None,
            };
            Ok(KernelRow {
                u: u.clone(),
                v: v.clone(),
                mc: est.value,
                stderr: est.stderr,
                closed_form,
            })
        })
        .collect()
}

/// Header `u,v,mc,stderr,closed_form`; points are `;`-joined coordinates.
pub fn write_kernel_csv(path: &Path, rows: &[KernelRow]) -> Result<()> {
    let csv_err = |e: csv::Error| ExperimentError::Io {
        path: path.display().to_string(),
        source: io::Error::other(e),
    };
    let join = |x: &[f64]| x.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(";");
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["u", "v", "mc", "stderr", "closed_form"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            join(&r.u),
            join(&r.v),
            format!("{:?}", r.mc),
            format!("{:?}", r.stderr),
            r.closed_form.map_or(String::new(), |c| format!("{c:?}")),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_error(path))
}
