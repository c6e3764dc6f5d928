"""Conversion between physical lengths and the dimensionless sigma_k scale.

The numerical core works with ``sigma_k = 1``: separations are measured in
units of ``1 / sigma_k`` and momenta in units of ``sigma_k``. A Gaussian
wavepacket of position spread ``sigma_x`` is taken at the Fourier limit,
``sigma_k = 1 / (2 sigma_x)``. Far-field cameras map a pixel position ``y``
to momentum ``k = y k0 / d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError
from .wavepacket import FOURIER_LIMIT_FACTOR


def sigma_k_from_sigma_x(sigma_x: float) -> float:
    if not sigma_x > 0:
        raise InvalidParameterError("sigma_x must be positive")
    return 1.0 / (2.0 * sigma_x)


def diffraction_limited_sigma_x(k0: float) -> float:
    """Approximate position spread of a diffraction-limited spot, ~2.2 / k0."""
    return FOURIER_LIMIT_FACTOR / k0


def momentum_pitch(pixel_y: float, distance: float, k0: float) -> float:
    return pixel_y * k0 / distance


@dataclass(frozen=True)
class PhysicalSetup:
    """Physical parameters in one consistent length unit (e.g. nm)."""

    sigma_x: float
    k0: float | None = None
    distance: float | None = None
    pixel_y: float | None = None

    @property
    def sigma_k(self) -> float:
        return sigma_k_from_sigma_x(self.sigma_x)

    def length_to_units(self, length: float) -> float:
        """Physical length -> multiples of 1 / sigma_k."""
        return length * self.sigma_k

    def length_from_units(self, value: float) -> float:
        return value / self.sigma_k

    def variance_from_units(self, value: float) -> float:
        return value / self.sigma_k ** 2

    def information_from_units(self, value: float) -> float:
        return value * self.sigma_k ** 2

    def pixel_dk_units(self) -> float | None:
        """Camera momentum pitch in units of sigma_k, if the camera is specified."""
        if None in (self.k0, self.distance, self.pixel_y):
            return None
        return momentum_pitch(self.pixel_y, self.distance, self.k0) / self.sigma_k

    def crb_std(self, n: int) -> float:
        """sqrt(1 / (n H)) in physical units, with H = 2 sigma_k^2."""
        return math.sqrt(1.0 / (n * 2.0 * self.sigma_k ** 2))
