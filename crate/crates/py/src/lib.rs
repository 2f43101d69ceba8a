//! Python bindings over the core: landscape loading and generation,
//! structural profiles, tail-risk metrics, rank statistics, and single
//! paired campaigns. Build with `cargo build -p bobench-py` and import the
//! produced cdylib as module `bobench` (see python/smoke_test.py).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bobench_core::acquisition::{AcquisitionKind, AcquisitionSpec};
use bobench_core::analysis;
use bobench_core::campaign::{
    run_campaign as campaign_run, run_random_baseline, CampaignConfig, ModelSpec,
};
use bobench_core::encoding::{encode_one_hot, EncodingKind};
use bobench_core::landscape::{self, make_split, SyntheticModel, SyntheticSpec};
use bobench_core::metrics::{self, TailOrientation};
use bobench_core::stats;
use bobench_core::surrogate::{SurrogateKind, SurrogateSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A finite pool of sequence variants with measured fitness.
#[pyclass(frozen)]
struct Landscape {
    inner: landscape::Landscape,
}

#[pymethods]
impl Landscape {
    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn length(&self) -> usize {
        self.inner.length
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet_size
    }

    #[getter]
    fn wild_type(&self) -> Option<String> {
        self.inner.wild_type.clone()
    }

    /// Content digest; renaming a landscape does not change it.
    #[getter]
    fn digest(&self) -> String {
        self.inner.digest().to_string()
    }

    fn sequences(&self) -> Vec<String> {
        self.inner.sequences.clone()
    }

    fn fitness(&self) -> Vec<f64> {
        self.inner.raw_fitness.clone()
    }

    /// Min-max normalized fitness in [0, 1]; campaign payoffs use this scale.
    fn normalized_fitness(&self) -> Vec<f64> {
        self.inner.norm_fitness.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Landscape(name='{}', n={}, length={})",
            self.inner.name,
            self.inner.len(),
            self.inner.length
        )
    }
}

/// Load a landscape from a `sequence,fitness` CSV.
#[pyfunction]
fn load_landscape(path: &str) -> PyResult<Landscape> {
    Ok(Landscape {
        inner: landscape::load_landscape(path).map_err(err)?,
    })
}

/// Enumerate a synthetic landscape: `model` is "additive", "nk" (with
/// interaction order `k`), or "random".
#[pyfunction]
#[pyo3(signature = (name, model, length, alphabet_size, seed=0, k=0))]
fn synthetic_landscape(
    name: &str,
    model: &str,
    length: usize,
    alphabet_size: usize,
    seed: u64,
    k: usize,
) -> PyResult<Landscape> {
    let model = match model {
        "additive" => SyntheticModel::Additive,
        "nk" => SyntheticModel::Nk { k },
        "random" => SyntheticModel::Random,
        other => return Err(err(format!("unknown synthetic model '{other}'"))),
    };
    let spec = SyntheticSpec {
        name: name.to_string(),
        model,
        length,
        alphabet_size,
        seed,
    };
    Ok(Landscape {
        inner: landscape::generate_synthetic(&spec).map_err(err)?,
    })
}

/// Structural property profile as a dict (thresholds, ruggedness, peak
/// counts, epistasis fractions).
#[pyfunction]
fn profile<'py>(py: Python<'py>, landscape: &Landscape) -> PyResult<Bound<'py, PyDict>> {
    let p = analysis::profile(&landscape.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("dataset", &p.dataset)?;
    d.set_item("n", p.n)?;
    d.set_item("active_pct", p.active_pct)?;
    d.set_item("otsu_threshold", p.otsu_threshold)?;
    d.set_item("ruggedness", p.ruggedness)?;
    d.set_item("cauchy_peak", p.cauchy_peak)?;
    d.set_item("kurtosis", p.kurtosis)?;
    d.set_item("skewness", p.skewness)?;
    d.set_item("kde_peaks", p.kde_peaks)?;
    d.set_item("local_optima", p.local_optima)?;
    d.set_item("magnitude_epistasis_pct", p.magnitude_epistasis_pct)?;
    d.set_item("non_magnitude_epistasis_pct", p.non_magnitude_epistasis_pct)?;
    Ok(d)
}

/// Lower-tail value at risk: the ceil(n*alpha)-th smallest value.
#[pyfunction]
fn var(values: Vec<f64>, alpha: f64) -> PyResult<f64> {
    metrics::var(&values, alpha).map_err(err)
}

/// Conditional value at risk: the mean of the tail at or beyond the VaR
/// cut, lower tail by default.
#[pyfunction]
#[pyo3(signature = (values, alpha, upper=false))]
fn cvar(values: Vec<f64>, alpha: f64, upper: bool) -> PyResult<f64> {
    let orientation = if upper {
        TailOrientation::UpperTail
    } else {
        TailOrientation::LowerTail
    };
    metrics::cvar(&values, alpha, orientation).map_err(err)
}

/// Tie-adjusted rank correlation; returns (tau, two-sided p).
#[pyfunction]
fn kendall_tau(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    stats::kendall_tau(&a, &b).map_err(err)
}

/// Trapezoidal area under a per-iteration gain curve.
#[pyfunction]
fn delta_g_auc(curve: Vec<f64>) -> f64 {
    metrics::delta_g_auc(&curve)
}

/// Non-dominated subset of `(id, performance, risk)` points, as ids.
/// Duplicated coordinates survive together; each axis direction is set by
/// `higher_better`.
#[pyfunction]
#[pyo3(signature = (points, higher_better=(true, true)))]
fn pareto_front(points: Vec<(String, f64, f64)>, higher_better: (bool, bool)) -> Vec<String> {
    let points: Vec<stats::ParetoPoint> = points
        .into_iter()
        .map(|(model_id, performance, risk)| stats::ParetoPoint {
            model_id,
            performance,
            risk,
        })
        .collect();
    stats::pareto_front(&points, higher_better)
        .into_iter()
        .map(|p| p.model_id)
        .collect()
}

/// Run one campaign and its paired random baseline on a one-hot encoding,
/// with default hyperparameters for the chosen surrogate. Returns payoff
/// and gain curves plus the acquired pool indices per iteration.
#[pyfunction]
#[pyo3(signature = (
    landscape, surrogate="gp", acquisition="ei",
    n_init=16, batch_size=8, n_cycles=5, seed=0, split_seed=0
))]
#[allow(clippy::too_many_arguments)]
fn run_campaign<'py>(
    py: Python<'py>,
    landscape: &Landscape,
    surrogate: &str,
    acquisition: &str,
    n_init: usize,
    batch_size: usize,
    n_cycles: usize,
    seed: u64,
    split_seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = SurrogateKind::ALL
        .into_iter()
        .find(|k| k.as_str() == surrogate)
        .ok_or_else(|| err(format!("unknown surrogate '{surrogate}'")))?;
    let acq: AcquisitionKind = acquisition.parse().map_err(err)?;
    let split = make_split(&landscape.inner, split_seed).map_err(err)?;
    let encoding = encode_one_hot(&landscape.inner).map_err(err)?;
    let model = ModelSpec {
        surrogate: SurrogateSpec::defaults(kind),
        acquisition: AcquisitionSpec::new(acq),
        encoding: EncodingKind::OneHot,
    };
    let mut config = CampaignConfig::new(model);
    config.n_init = n_init;
    config.batch_size = batch_size;
    config.n_cycles = n_cycles;
    config.seeds = vec![seed];
    let record = campaign_run(&config, &landscape.inner, &split, &encoding, seed).map_err(err)?;
    let baseline = run_random_baseline(&config, &landscape.inner, &split, seed).map_err(err)?;
    let gain = metrics::delta_g_curve(&record, &baseline).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("model_id", record.model_id.clone())?;
    d.set_item("payoff_curve", record.payoff_curve.clone())?;
    d.set_item("baseline_curve", baseline.payoff_curve.clone())?;
    d.set_item("gain_auc", metrics::delta_g_auc(&gain))?;
    d.set_item("gain_curve", gain)?;
    d.set_item("acquired", record.acquired.clone())?;
    Ok(d)
}

#[pymodule]
fn bobench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Landscape>()?;
    m.add_function(wrap_pyfunction!(load_landscape, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_landscape, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(var, m)?)?;
    m.add_function(wrap_pyfunction!(cvar, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(delta_g_auc, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_front, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    Ok(())
}
