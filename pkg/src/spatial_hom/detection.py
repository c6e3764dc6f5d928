"""Detection probabilities for momentum-resolved and bucket measurements.

Outcome labels: ``"A"`` means the photons left through different beam-splitter
ports (two cameras fire), ``"B"`` means they bunched into the same port. The
joint density of the momentum difference and the outcome is

    P(dk, X) = C(dk) * (1 + alpha(X) * nu * cos(dk * dx)) / 2,

with alpha(A) = -1 and alpha(B) = +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .quadrature import integrate
from .wavepacket import BeatEnvelope, MomentumDistribution

OUTCOMES = ("A", "B")

RESOLVING = "resolving"
BUCKET = "bucket"
SINGLE_CAMERA = "single-camera"
MODES = (RESOLVING, BUCKET, SINGLE_CAMERA)

# check_resolution passes when both margins reach this factor.
RESOLUTION_MARGIN = 10.0
DEFAULT_RANGE_SIGMAS = 6.0 * math.sqrt(2.0)


def alpha(x) -> int:
    if x == "A":
        return -1
    if x == "B":
        return 1
    raise InvalidParameterError(f"outcome must be 'A' or 'B', got {x!r}")


@dataclass(frozen=True)
class SceneParams:
    delta_x: float
    nu: float
    envelope: BeatEnvelope

    def __post_init__(self):
        if not math.isfinite(self.delta_x):
            raise InvalidParameterError("delta_x must be finite")
        if not 0.0 <= self.nu <= 1.0:
            raise InvalidParameterError(f"nu must lie in [0, 1], got {self.nu}")

    @property
    def sigma_k(self) -> float:
        return self.envelope.sigma_k

    def with_delta_x(self, delta_x: float) -> "SceneParams":
        return SceneParams(float(delta_x), self.nu, self.envelope)


@dataclass(frozen=True)
class DetectorModel:
    """Camera model; ``k_range`` bounds the momentum difference ``dk``.

    ``snap`` rounds resolved ``dk`` values to pixel centres (pixels start at
    ``k_range[0]``); the estimator then uses the binned likelihood.
    """

    mode: str = RESOLVING
    pixel_dk: float | None = None
    k_range: tuple[float, float] = (-math.inf, math.inf)
    physical: tuple[float, float, float] | None = None
    snap: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"unknown detector mode {self.mode!r}")
        lo, hi = self.k_range
        if not lo < hi:
            raise InvalidParameterError("detector range needs k_lo < k_hi")
        if self.mode != BUCKET and self.pixel_dk is not None and not self.pixel_dk > 0:
            raise InvalidParameterError("pixel_dk must be positive")
        if self.snap:
            if self.mode == BUCKET or self.pixel_dk is None:
                raise InvalidParameterError("pixel snapping needs a resolving detector with pixel_dk")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise InvalidParameterError("pixel snapping needs a finite range")

    @classmethod
    def default(cls, sigma_k: float, mode: str = RESOLVING, pixel_dk: float | None = None,
                snap: bool = False) -> "DetectorModel":
        half = DEFAULT_RANGE_SIGMAS * sigma_k
        return cls(mode, pixel_dk, (-half, half), None, snap)

    @classmethod
    def from_physical(cls, pixel_y: float, distance: float, k0: float, k_range,
                      mode: str = RESOLVING, snap: bool = False) -> "DetectorModel":
        """Far-field camera: a pixel of size ``pixel_y`` at distance ``distance``
        resolves momenta in steps of ``pixel_y * k0 / distance``."""
        return cls(mode, pixel_y * k0 / distance, tuple(k_range),
                   (pixel_y, distance, k0), snap)

    def pixel_edges(self) -> np.ndarray:
        lo, hi = self.k_range
        n = int(math.ceil((hi - lo) / self.pixel_dk - 1e-9))
        return lo + self.pixel_dk * np.arange(n + 1)


def joint_density(dk, x, scene: SceneParams):
    """P(dk, X). Keeps the input dtype (e.g. ``np.longdouble``)."""
    dk = np.asarray(dk)
    beat = np.cos(dk * scene.delta_x)
    return 0.5 * scene.envelope(dk) * (1 + alpha(x) * scene.nu * beat)


def joint_density_derivative(dk, x, scene: SceneParams):
    """Analytic derivative of P(dk, X) with respect to the separation."""
    dk = np.asarray(dk)
    return -0.5 * alpha(x) * scene.nu * scene.envelope(dk) * dk * np.sin(dk * scene.delta_x)


def joint_density_kk(k, kp, x, scene: SceneParams, dist: MomentumDistribution):
    """Density of the individual momenta (k, k') and outcome X."""
    k = np.asarray(k)
    kp = np.asarray(kp)
    beat = np.cos((k - kp) * scene.delta_x)
    return 0.5 * dist.density(k) * dist.density(kp) * (1 + alpha(x) * scene.nu * beat)


def _panel(scene: SceneParams) -> float:
    width = 0.5 * scene.sigma_k
    if scene.delta_x != 0:
        width = min(width, math.pi / (8.0 * abs(scene.delta_x)))
    return width


def beat_integrals(scene: SceneParams, closed_form: bool | None = None):
    """Return ``(I_c, I_s, J)`` for the envelope at ``scene.delta_x``.

    I_c = int C cos(dk dx),  I_s = int C dk sin(dk dx),
    J = 1 - I_c = int 2 C sin^2(dk dx / 2)   (computed directly, no cancellation).
    """
    env, dx = scene.envelope, scene.delta_x
    if closed_form is None:
        closed_form = env.is_gaussian
    if closed_form:
        if not env.is_gaussian:
            raise InvalidParameterError("closed form needs a Gaussian envelope")
        u = (env.sigma_k * dx) ** 2
        i_c = math.exp(-u)
        return i_c, 2.0 * env.sigma_k ** 2 * dx * i_c, -math.expm1(-u)
    if dx == 0:
        return 1.0, 0.0, 0.0
    w = env.half_width()
    panel = _panel(scene)
    # Integrands are even in dk: integrate [0, w] and double.
    i_s = 2.0 * integrate(lambda k: env(k) * k * np.sin(k * dx), 0.0, w,
                          max_width=panel, abstol=1e-15, reltol=1e-13)
    j = 2.0 * integrate(lambda k: 2.0 * env(k) * np.sin(0.5 * k * dx) ** 2, 0.0, w,
                        max_width=panel, abstol=1e-15, reltol=1e-13)
    return 1.0 - j, i_s, j


def bucket_probs(scene: SceneParams) -> tuple[float, float]:
    """(p_A, p_B) for non-resolving detectors: the HOM dip."""
    _, _, j = beat_integrals(scene)
    # p_A = (1 - nu I_c)/2 = ((1 - nu) + nu J)/2, exact at the dip bottom.
    p_a = 0.5 * ((1.0 - scene.nu) + scene.nu * j)
    return p_a, 1.0 - p_a


def bin_probability(lo: float, hi: float, x, scene: SceneParams) -> float:
    """Probability that dk falls in ``[lo, hi]`` with outcome ``x``."""
    if not lo < hi:
        raise InvalidParameterError("bin needs lo < hi")
    w = scene.envelope.half_width()
    a, b = max(lo, -w), min(hi, w)
    if a >= b:
        return 0.0
    return integrate(lambda k: joint_density(k, x, scene), a, b,
                     max_width=_panel(scene), abstol=1e-10, reltol=1e-13)


@dataclass(frozen=True)
class ResolutionReport:
    margin_envelope: float
    margin_beats: float
    passed: bool

    def to_dict(self) -> dict:
        return {"margin_envelope": self.margin_envelope,
                "margin_beats": self.margin_beats, "pass": self.passed}


def check_resolution(det: DetectorModel, scene: SceneParams,
                     threshold: float = RESOLUTION_MARGIN) -> ResolutionReport:
    """Pixel margins against the envelope width and the beat period."""
    if det.pixel_dk is None:
        raise InvalidParameterError("detector has no pixel pitch")
    m_env = scene.sigma_k / det.pixel_dk
    if scene.delta_x == 0:
        m_beat = math.inf
    else:
        m_beat = (2.0 * math.pi / abs(scene.delta_x)) / det.pixel_dk
    return ResolutionReport(m_env, m_beat, m_env >= threshold and m_beat >= threshold)
