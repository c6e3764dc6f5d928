"""Fisher information of the separation for every detector variant.

All integrands below are even in ``dk``, so integrals run over ``[0, w]`` and
are doubled, where ``w`` is the envelope truncation half-width.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .detection import SceneParams, _panel, alpha, beat_integrals, joint_density, \
    joint_density_derivative
from .errors import InvalidParameterError
from .quadrature import integrate
from .wavepacket import qfi

# Target absolute accuracy on F / H.
RATIO_TOL = 1e-10


def _beat_weight(dk, scene: SceneParams):
    """nu^2 sin^2 / (1 - nu^2 cos^2), with the nu = 1 limit taken exactly."""
    nu = scene.nu
    if nu == 1.0:
        return np.ones_like(np.asarray(dk, dtype=float))
    s2 = np.sin(np.asarray(dk) * scene.delta_x) ** 2
    # 1 - nu^2 cos^2 written as (1 - nu^2) + nu^2 sin^2 to keep it accurate near nu = 1.
    return nu * nu * s2 / ((1.0 - nu * nu) + nu * nu * s2)


def fi_contribution(dk, scene: SceneParams):
    """Per-outcome contribution to F / H at momentum difference ``dk``.

    Sums the information of outcomes (dk, A) and (dk, B) and divides by H.
    """
    dk = np.asarray(dk, dtype=float)
    s2 = scene.sigma_k ** 2
    return scene.envelope(dk) * dk ** 2 / (2.0 * s2) * _beat_weight(dk, scene)


def _even_integral(f, scene: SceneParams, abstol: float) -> float:
    w = scene.envelope.half_width()
    return 2.0 * integrate(f, 0.0, w, max_width=_panel(scene), abstol=abstol, reltol=1e-13)


def fisher_resolving(scene: SceneParams) -> float:
    """FI of momentum-resolved sampling with both outcome classes recorded."""
    h = qfi(scene.sigma_k)
    if scene.nu == 1.0:
        return h
    if scene.nu == 0.0:
        return 0.0
    env = scene.envelope
    return _even_integral(lambda k: env(k) * k * k * _beat_weight(k, scene),
                          scene, RATIO_TOL * h)


def fisher_asymptote(nu: float, sigma_k: float) -> float:
    """Large-separation value (1 - sqrt(1 - nu^2)) * H."""
    if not 0.0 <= nu <= 1.0:
        raise InvalidParameterError(f"nu must lie in [0, 1], got {nu}")
    return (1.0 - math.sqrt(1.0 - nu * nu)) * qfi(sigma_k)


def fisher_nonresolving(scene: SceneParams, closed_form: bool | None = None) -> float:
    """FI of bucket detectors that only report A or B.

    ``closed_form=False`` forces quadrature even for Gaussian envelopes.
    """
    nu = scene.nu
    if nu == 0.0:
        return 0.0
    _, i_s, j = beat_integrals(scene, closed_form)
    # 1 - nu^2 I_c^2 with I_c = 1 - J.
    den = (1.0 - nu * nu) + nu * nu * j * (2.0 - j)
    if den == 0.0:
        # nu = 1 at zero separation: the limit is the envelope's second moment.
        return scene.envelope.second_moment()
    return nu * nu * i_s * i_s / den


def fisher_partial(x, scene: SceneParams, closed_form: bool | None = None) -> float:
    """FI when only outcome class ``x`` is observed (the other is discarded).

    The resolved information of class ``x`` minus what is lost by not
    observing how often ``x`` occurs.
    """
    a = alpha(x)
    nu = scene.nu
    if nu == 0.0:
        return 0.0
    env = scene.envelope
    h = qfi(scene.sigma_k)
    _, i_s, j = beat_integrals(scene, closed_form)
    class_prob2 = (1.0 + nu * (1.0 - j)) if a > 0 else ((1.0 - nu) + nu * j)
    if class_prob2 == 0.0:
        # A at nu = 1, zero separation: never observed, no information.
        return 0.0

    dx = scene.delta_x
    if nu == 1.0:
        def integrand(k):
            return env(k) * k * k * (1.0 - a * np.cos(k * dx))
    else:
        def integrand(k):
            return env(k) * k * k * np.sin(k * dx) ** 2 / (1.0 + a * nu * np.cos(k * dx))
    resolved = 0.5 * nu * nu * _even_integral(integrand, scene, RATIO_TOL * h)
    lost = nu * nu * i_s * i_s / (2.0 * class_prob2)
    return resolved - lost


def fisher_single_camera(scene: SceneParams) -> float:
    """One camera on one output port sees half of the bunching events."""
    return 0.5 * fisher_partial("B", scene)


def score(dk, x, scene: SceneParams):
    """d/d(dx) log P(dk, X)."""
    return joint_density_derivative(dk, x, scene) / joint_density(dk, x, scene)


def crb(f: float, n: int) -> float:
    """Cramer-Rao variance bound 1 / (n f)."""
    if not f > 0:
        raise InvalidParameterError(f"Fisher information must be positive, got {f}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return 1.0 / (n * f)


@dataclass(frozen=True)
class FisherReport:
    f_resolving: float
    h_qfi: float
    ratio: float
    f_partial_a: float
    f_partial_b: float
    f_nonresolving: float
    f_single_camera: float
    asymptote: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def fisher_report(scene: SceneParams) -> FisherReport:
    f = fisher_resolving(scene)
    h = qfi(scene.sigma_k)
    f_b = fisher_partial("B", scene)
    return FisherReport(
        f_resolving=f,
        h_qfi=h,
        ratio=f / h,
        f_partial_a=fisher_partial("A", scene),
        f_partial_b=f_b,
        f_nonresolving=fisher_nonresolving(scene),
        f_single_camera=0.5 * f_b,
        asymptote=fisher_asymptote(scene.nu, scene.sigma_k),
    )
