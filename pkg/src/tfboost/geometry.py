"""Unit-norm projection directions and their spherical-angle parametrization.

A direction ``c`` in R^d with ``||c|| = 1`` is written with angles
``theta_1 .. theta_{d-1}``::

    c_1 = cos(theta_1)
    c_l = cos(theta_l) * prod_{k<l} sin(theta_k),   l = 2 .. d-1
    c_d = prod_{k<d} sin(theta_k)

with ``theta_1`` in [-pi/2, pi/2) and the remaining angles in [0, pi].
Since only ``sin(theta_1)`` can be negative, its sign carries the sign of
the whole tail ``c_2 .. c_d``, and the box covers exactly the half-sphere
``c_1 >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, DomainError

_BOX_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class Direction:
    """Canonical unit vector of basis coefficients (first nonzero entry positive)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64, copy=True).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.size

    @property
    def angles(self) -> np.ndarray:
        return to_angles(self)


def angle_box(d: int):
    """Lower and upper bounds for the ``d - 1`` angles of a ``d``-vector."""
    lower = np.zeros(d - 1)
    upper = np.full(d - 1, np.pi)
    if d > 1:
        lower[0] = -np.pi / 2
        upper[0] = np.pi / 2
    return lower, upper


def coeffs_from_angles(theta: np.ndarray) -> np.ndarray:
    """Unchecked angle -> coefficient map (hot path of the Type A objective)."""
    s = np.concatenate(([1.0], np.cumprod(np.sin(theta))))
    c = s.copy()
    c[:-1] *= np.cos(theta)
    return c


def from_angles(angles) -> Direction:
    theta = np.asarray(angles, dtype=np.float64).ravel()
    lower, upper = angle_box(theta.size + 1)
    if np.any(theta < lower - _BOX_SLACK) or np.any(theta > upper + _BOX_SLACK):
        raise ConstraintError(f"angles {theta} outside the box [{lower}, {upper}]")
    return Direction(coeffs_from_angles(theta))


def to_angles(direction) -> np.ndarray:
    """Invert :func:`from_angles`.

    Where all remaining coordinates are zero the angle is arbitrary and 0 is
    returned.  Input is normalized first; a negative first coordinate is
    rejected because it has no representation in the box.
    """
    c = np.asarray(getattr(direction, "coeffs", direction), dtype=np.float64).ravel()
    nrm = np.linalg.norm(c)
    if not np.isfinite(nrm) or nrm == 0:
        raise DomainError("cannot take angles of a zero vector")
    c = c / nrm
    if c[0] < 0:
        raise DomainError("direction is not canonical (first coordinate negative)")
    if c.size == 1:
        return np.zeros(0)
    sign = -1.0 if c[-1] < 0 else 1.0
    cr = c.copy()
    cr[1:] *= sign
    # tail[l] = ||cr[l:]||
    tail = np.sqrt(np.cumsum((cr * cr)[::-1])[::-1])
    theta = np.arctan2(tail[1:], cr[:-1])
    theta[-1] = np.arctan2(cr[-1], cr[-2])
    theta[0] *= sign
    return theta


def canonicalize(coeffs) -> Direction:
    """Normalize and flip so the first nonzero coordinate is positive."""
    c = np.asarray(coeffs, dtype=np.float64).ravel()
    nrm = np.linalg.norm(c)
    if not np.isfinite(nrm) or nrm == 0:
        raise DomainError("cannot canonicalize a zero vector")
    c = c / nrm
    nz = np.flatnonzero(c)
    if c[nz[0]] < 0:
        c = -c
    return Direction(c)


def sample_direction(d: int, rng: np.random.Generator) -> Direction:
    """Uniform draw from the half-sphere with nonnegative first coordinate."""
    return Direction(sample_directions(d, 1, rng)[0])


def sample_directions(d: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent canonical directions, as rows of a matrix."""
    if d < 1:
        raise DomainError("dimension must be positive")
    g = rng.standard_normal((size, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g[g[:, 0] < 0] *= -1.0
    return g
