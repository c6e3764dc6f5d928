"""Maximum-likelihood estimation of the separation and the Monte Carlo harness.

The event distribution depends on the separation only through
``cos(dk * dx)``, so only ``|dx|`` is identifiable; every search runs over a
non-negative interval.

The likelihood oscillates in ``dx`` with frequencies set by the observed
``|dk|``. The maximiser therefore scans a grid fine enough to see every
oscillation (step ``pi / (8 max|dk|)``) before refining the best grid point
with a golden-section search.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .detection import BUCKET, SINGLE_CAMERA, DetectorModel, SceneParams, beat_integrals
from .errors import InvalidParameterError, NoDataError, OutOfModelError
from .information import fisher_partial, fisher_nonresolving, fisher_resolving
from .quadrature import integrate
from .sampler import SampleSet, derive_seed, sample_batch

SEARCH_CAP = 50.0          # hi * sigma_k must not exceed this
DEFAULT_SEARCH = 20.0      # default hi, in units of 1 / sigma_k
REFINE_TOL = 1e-6          # golden-section bracket width, units of 1 / sigma_k
MULTIMODAL_GAP = 2.0       # log-units
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_CHUNK = 1 << 21


@dataclass(frozen=True)
class EstimationResult:
    delta_x_hat: float
    log_likelihood_at_max: float
    search_interval: tuple[float, float]
    n_used: int
    grid_points: int
    refinement_width: float
    multimodal_flag: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["search_interval"] = list(self.search_interval)
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class TrialStatistics:
    n_per_trial: int
    n_trials: int
    mean_estimate: float
    variance: float
    bias_relative: float | None
    crb_saturation: float | None
    crb_reference: float
    estimates: np.ndarray = field(repr=False, compare=False)
    log_likelihoods: np.ndarray = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n_per_trial", "n_trials", "mean_estimate", "variance",
            "bias_relative", "crb_saturation", "crb_reference")}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def write_trials_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n_per_trial={self.n_per_trial}\n")
            fh.write("trial_index,estimate,loglik\n")
            for i, (e, ll) in enumerate(zip(self.estimates.tolist(),
                                            self.log_likelihoods.tolist())):
                fh.write(f"{i},{e!r},{ll!r}\n")


# -- likelihood -------------------------------------------------------------

def _used(samples: SampleSet):
    keep = ~samples.lost
    if not np.any(keep):
        raise NoDataError("no non-lost events to estimate from")
    a = np.where(samples.x[keep] == "B", 1.0, -1.0)
    return samples.dk[keep], a


def _range_cos_integral(dx: np.ndarray, scene: SceneParams, det: DetectorModel):
    """int over the detector range of C(dk) cos(dk dx), and the range mass."""
    env = scene.envelope
    w = env.half_width()
    lo, hi = max(det.k_range[0], -w), min(det.k_range[1], w)
    if lo <= -w and hi >= w:
        ic = np.array([beat_integrals(scene.with_delta_x(d))[0] for d in dx])
        return ic, 1.0
    mass = integrate(env, lo, hi, max_width=0.5 * scene.sigma_k)
    ic = np.array([
        integrate(lambda k: env(k) * np.cos(k * d), lo, hi,
                  max_width=min(0.5 * scene.sigma_k, math.pi / (8 * abs(d)) if d else math.inf))
        for d in dx])
    return ic, mass


def log_likelihood(delta_x, samples: SampleSet, nu: float | None = None):
    """Log-likelihood of ``samples`` at separation(s) ``delta_x``.

    Continuous data use ``sum log(1 + alpha nu cos(dk dx))``: the factor
    C(dk)/2 of every event does not depend on ``dx`` and is dropped. Pixel
    snapped data use the exact bin probabilities. Single-camera data are
    conditioned on the event being observed at all.
    """
    dx = np.atleast_1d(np.asarray(delta_x, dtype=float))
    nu = samples.scene.nu if nu is None else float(nu)
    scene = SceneParams(0.0, nu, samples.scene.envelope)
    det = samples.detector

    if det.mode == BUCKET:
        n_a, n_b = samples.counts()
        if n_a + n_b == 0:
            raise NoDataError("no events")
        p_a = np.array([0.5 * ((1.0 - nu) + nu * beat_integrals(scene.with_delta_x(d))[2])
                        for d in dx])
        with np.errstate(divide="ignore"):
            ll = (n_a * np.log(p_a) if n_a else 0.0) + (n_b * np.log1p(-p_a) if n_b else 0.0)
        return _shape(ll, delta_x)

    dk, a = _used(samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        if det.snap:
            ll = _binned(dx, dk, a, scene, det)
        else:
            ll = np.zeros(dx.size)
            step = max(1, _CHUNK // dx.size)
            for s in range(0, dk.size, step):
                phase = np.cos(np.outer(dx, dk[s:s + step]))
                ll += np.log1p(nu * a[s:s + step] * phase).sum(axis=1)
        if det.mode == SINGLE_CAMERA:
            ic, mass = _range_cos_integral(dx, scene, det)
            ll -= dk.size * np.log(mass + nu * ic)
    return _shape(ll, delta_x)


def _binned(dx, dk, a, scene: SceneParams, det: DetectorModel):
    edges = det.pixel_edges()
    idx = np.clip(np.searchsorted(edges, dk, side="right") - 1, 0, edges.size - 2)
    keys, counts = np.unique(np.stack([idx, a]), axis=1, return_counts=True)
    lo, hi = edges[keys[0].astype(int)], edges[keys[0].astype(int) + 1]
    half = 0.5 * (hi - lo)
    nodes = 0.5 * (lo + hi)[:, None] + half[:, None] * _GL_NODES
    weights = half[:, None] * _GL_WEIGHTS * scene.envelope(nodes)
    base = weights.sum(axis=1)
    ll = np.empty(dx.size)
    for i, d in enumerate(dx):
        beat = (weights * np.cos(nodes * d)).sum(axis=1)
        ll[i] = np.sum(counts * np.log(0.5 * (base + keys[1] * scene.nu * beat)))
    return ll


def _shape(ll, delta_x):
    return float(ll[0]) if np.ndim(delta_x) == 0 else ll


# -- maximisation -------------------------------------------------------------

def golden_section_max(f, a: float, b: float, tol: float):
    """Maximise ``f`` on ``[a, b]``; returns ``(x, f(x), final_width)``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc, b - a) if fc >= fd else (d, fd, b - a)


def _search(samples: SampleSet, search) -> tuple[float, float]:
    sigma = samples.scene.sigma_k
    lo, hi = (0.0, DEFAULT_SEARCH / sigma) if search is None else map(float, search)
    if not (0.0 <= lo < hi):
        raise InvalidParameterError(f"search interval must satisfy 0 <= lo < hi, got {(lo, hi)}")
    if hi * sigma > SEARCH_CAP * (1 + 1e-12):
        raise InvalidParameterError(f"search upper bound exceeds {SEARCH_CAP}/sigma_k")
    return lo, hi


def _max_frequency(samples: SampleSet) -> float:
    sigma = samples.scene.sigma_k
    det = samples.detector
    if det.mode == BUCKET:
        return 4.0 * sigma
    dk, _ = _used(samples)
    kmax = float(np.max(np.abs(dk)))
    if det.snap:
        kmax += 0.5 * det.pixel_dk
    return kmax if kmax > 0 else sigma


def mle(samples: SampleSet, search=None, nu: float | None = None) -> EstimationResult:
    """Maximum-likelihood estimate of ``|dx|`` within ``search``.

    Grid ties go to the smallest separation.
    """
    lo, hi = _search(samples, search)
    sigma = samples.scene.sigma_k
    step = math.pi / (8.0 * _max_frequency(samples))
    n_grid = int(math.ceil((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n_grid)
    ll = log_likelihood(grid, samples, nu)

    i = int(np.argmax(ll))
    best_x, best_ll = float(grid[i]), float(ll[i])
    a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, n_grid - 1)])
    x, fx, width = golden_section_max(lambda t: log_likelihood(t, samples, nu),
                                      a, b, REFINE_TOL / sigma)
    if fx > best_ll:
        best_x, best_ll = float(x), float(fx)

    return EstimationResult(
        delta_x_hat=best_x,
        log_likelihood_at_max=best_ll,
        search_interval=(lo, hi),
        n_used=samples.n_used,
        grid_points=n_grid,
        refinement_width=float(width),
        multimodal_flag=_multimodal(ll, i),
    )


def _multimodal(ll: np.ndarray, best: int) -> bool:
    if ll.size < 2:
        return False
    padded = np.concatenate([[-np.inf], ll, [-np.inf]])
    peaks = np.nonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:]))[0]
    # Drop the plateau/peak that contains the global maximum itself.
    peaks = peaks[np.abs(peaks - best) > 1]
    return bool(np.any(ll[peaks] >= ll[best] - MULTIMODAL_GAP))


def mle_bucket(n_a: int, n_b: int, nu: float, sigma_k: float) -> EstimationResult:
    """Closed-form inversion of the Gaussian HOM dip from bucket counts."""
    n = n_a + n_b
    if n_a < 0 or n_b < 0 or n < 1:
        raise InvalidParameterError("need non-negative counts with n_a + n_b >= 1")
    if not (0.0 < nu <= 1.0) or not sigma_k > 0:
        raise InvalidParameterError("need 0 < nu <= 1 and sigma_k > 0")
    p_a = n_a / n
    visibility = 1.0 - 2.0 * p_a
    if visibility <= 0.0:
        raise OutOfModelError(f"p_A = {p_a:.6g} >= 1/2: separation is unbounded")
    if visibility > nu:
        raise OutOfModelError(
            f"observed visibility {visibility:.6g} exceeds nu = {nu}: estimate clamps to 0")
    dx = math.sqrt(-math.log(visibility / nu)) / sigma_k
    p_a_model = 0.5 * (1.0 - nu * math.exp(-(sigma_k * dx) ** 2))
    ll = sum(c * math.log(p) for c, p in ((n_a, p_a_model), (n_b, 1.0 - p_a_model)) if c)
    return EstimationResult(dx, ll, (0.0, math.inf), n, 0, 0.0, False)


def nu_sensitivity(samples: SampleSet, nus, search=None) -> list[tuple[float, float]]:
    """Estimates obtained when the likelihood assumes each ``nu`` in ``nus``.

    A diagnostic for mis-calibrated distinguishability, not an estimator of it.
    """
    return [(float(v), mle(samples, search, nu=v).delta_x_hat) for v in nus]


# -- Monte Carlo trials --------------------------------------------------------

@dataclass(frozen=True)
class TrialConfig:
    scene: SceneParams
    detector: DetectorModel
    n_per_trial: int
    n_trials: int
    master_seed: int
    search: tuple[float, float] | None = None


def fisher_for(scene: SceneParams, detector: DetectorModel) -> float:
    """Per-pair Fisher information of the given detector variant."""
    if detector.mode == BUCKET:
        return fisher_nonresolving(scene)
    if detector.mode == SINGLE_CAMERA:
        return 0.5 * fisher_partial("B", scene)
    return fisher_resolving(scene)


def _one_trial(config: TrialConfig, t: int) -> tuple[float, float]:
    samples = sample_batch(config.n_per_trial, derive_seed(config.master_seed, t),
                           config.scene, config.detector)
    res = mle(samples, config.search)
    return res.delta_x_hat, res.log_likelihood_at_max


def _trial_range(config: TrialConfig, start: int, stop: int):
    return [_one_trial(config, t) for t in range(start, stop)]


def run_trials(config: TrialConfig, workers: int = 1) -> TrialStatistics:
    """Repeated sample-and-estimate cycles with per-trial derived seeds.

    Results do not depend on ``workers``: each trial owns its RNG stream and
    statistics are reduced in trial order.
    """
    if config.n_trials < 2:
        raise InvalidParameterError("need at least two trials")
    if config.n_per_trial < 1:
        raise InvalidParameterError("n_per_trial must be >= 1")
    if workers > 1:
        bounds = np.linspace(0, config.n_trials, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_trial_range, [config] * workers, bounds[:-1], bounds[1:])
            rows = [r for part in parts for r in part]
    else:
        rows = _trial_range(config, 0, config.n_trials)
    est = np.array([r[0] for r in rows])
    lls = np.array([r[1] for r in rows])

    mean = float(np.mean(est))
    var = float(np.var(est, ddof=1))
    true_dx = abs(config.scene.delta_x)
    bias = mean / true_dx - 1.0 if true_dx > 0 else None
    f = fisher_for(config.scene, config.detector)
    crb_ref = 1.0 / (config.n_per_trial * f) if f > 0 else math.inf
    saturation = crb_ref / var if (var > 0 and math.isfinite(crb_ref)) else None
    return TrialStatistics(config.n_per_trial, config.n_trials, mean, var, bias,
                           saturation, crb_ref, est, lls)
