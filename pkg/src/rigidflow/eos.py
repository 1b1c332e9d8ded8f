"""Ideal-gas equation of state in pressure/entropy variables.

The solver works with (p, s) as the thermodynamic unknowns, so the state
law is exposed as density rho(p, s) and sound speed c(p, s).  Both are
positive on the configured hyperbolicity box, which every evolved state
must stay inside.  The symmetrizer weights used throughout are
alpha = rho * c**2 and eta = rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RegionError


@dataclass(frozen=True)
class EosParams:
    """Ideal-gas law p = kappa * exp(s / c_v) * rho**gamma."""

    gamma: float = 1.4
    kappa: float = 1.0
    c_v: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must be > 1, got {self.gamma}")
        if not self.kappa > 0.0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")
        if not self.c_v > 0.0:
            raise DomainError(f"c_v must be > 0, got {self.c_v}")


@dataclass(frozen=True)
class ThermoPair:
    """A single (pressure, entropy) state."""

    p: float
    s: float

    def __post_init__(self):
        if not (np.isfinite(self.p) and np.isfinite(self.s)):
            raise DomainError(f"non-finite thermodynamic state ({self.p}, {self.s})")


@dataclass(frozen=True)
class HyperbolicityBox:
    """Axis-aligned (p, s) rectangle on which rho > 0 and c > 0."""

    p_min: float = 0.25
    p_max: float = 4.0
    s_min: float = -1.0
    s_max: float = 1.0

    def __post_init__(self):
        if not self.p_min > 0.0:
            raise DomainError(f"p_min must be > 0, got {self.p_min}")
        if not self.p_min < self.p_max:
            raise DomainError(f"need p_min < p_max, got [{self.p_min}, {self.p_max}]")
        if not self.s_min < self.s_max:
            raise DomainError(f"need s_min < s_max, got [{self.s_min}, {self.s_max}]")

    def contains(self, p, s):
        """Elementwise membership test; True where (p, s) is inside."""
        p = np.asarray(p)
        s = np.asarray(s)
        return (
            (p >= self.p_min)
            & (p <= self.p_max)
            & (s >= self.s_min)
            & (s <= self.s_max)
        )


def density(p, s, params: EosParams):
    """Mass density rho(p, s) obtained by inverting the pressure law.

    Raises DomainError if any pressure is non-positive.
    """
    p = np.asarray(p, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(p <= 0.0):
        bad = float(np.min(p))
        raise DomainError(f"density undefined for non-positive pressure {bad}")
    return (p * np.exp(-s / params.c_v) / params.kappa) ** (1.0 / params.gamma)


def sound_speed(p, s, params: EosParams):
    """c = sqrt(gamma * p / rho); positive wherever pressure is."""
    rho = density(p, s, params)
    return np.sqrt(params.gamma * np.asarray(p, dtype=float) / rho)


def symmetrizer_coefficients(p, s, params: EosParams, box: HyperbolicityBox):
    """(alpha, eta) = (rho c^2, rho), validated against the hyperbolicity box.

    For the ideal law alpha reduces to gamma * p.  States outside the box
    abort with a RegionError instead of being clamped; clamping would
    silently destroy hyperbolicity.
    """
    p = np.asarray(p, dtype=float)
    s = np.asarray(s, dtype=float)
    inside = box.contains(p, s)
    if not np.all(inside):
        idx = np.unravel_index(np.argmin(inside), np.shape(inside)) if inside.ndim else ()
        point = (float(np.asarray(p)[idx]) if idx else float(p), float(np.asarray(s)[idx]) if idx else float(s))
        raise RegionError(
            f"state (p, s) = {point} outside hyperbolicity box "
            f"p in [{box.p_min}, {box.p_max}], s in [{box.s_min}, {box.s_max}]",
            point=point,
            box=box,
            location=idx or None,
        )
    eta = density(p, s, params)
    alpha = eta * sound_speed(p, s, params) ** 2
    return alpha, eta
