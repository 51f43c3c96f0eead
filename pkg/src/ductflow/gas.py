"""Polytropic-gas thermodynamic primitives shared by all solver modules.

The gas model is the polytropic equation of state p = A(s) * rho**gamma with
adiabatic exponent gamma > 1.  Entropy enters only through the entropy
function A(s), so states are parameterized by (p, A, E, v): pressure, entropy
function, total enthalpy, and tangential velocity.  Density, sound speed,
axial velocity, and Mach number are always derived from those four — never
stored independently — which keeps redundant fields from drifting apart.

All functions accept scalars or numpy arrays and broadcast in the usual way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .errors import StateError, ValidationError

# === Guard constants ===

SONIC_GUARD = 1e-6  # refuse states with 1 - M^2 < SONIC_GUARD (near-sonic)
RHO_FLOOR = 1e-10  # refuse states with rho < RHO_FLOOR (near-vacuum)


# === Mass-addition profiles ===


@dataclass(frozen=True)
class MassProfile:
    """Axial mass-addition profile m_b(x), positive and bounded below.

    Bundles the profile with its exact derivative and antiderivative so that
    downstream coefficient tables never have to difference sampled values.
    """

    value: Callable  # m_b(x), vectorized
    deriv: Callable  # dm_b/dx, vectorized
    antideriv: Callable  # integral of m_b from 0 to x, vectorized

    @staticmethod
    def constant(c: float) -> "MassProfile":
        """Constant profile m_b(x) = c > 0."""
        if c <= 0.0:
            raise ValidationError(f"mass profile must be positive, got {c}")
        return MassProfile.polynomial([c])

    @staticmethod
    def polynomial(coeffs: Sequence[float]) -> "MassProfile":
        """Polynomial profile with coefficients in increasing-degree order."""
        poly = Polynomial(list(coeffs))
        dpoly = poly.deriv()
        ipoly = poly.integ(lbnd=0.0)
        return MassProfile(
            value=lambda x, _p=poly: _p(np.asarray(x, dtype=float)),
            deriv=lambda x, _p=dpoly: _p(np.asarray(x, dtype=float)),
            antideriv=lambda x, _p=ipoly: _p(np.asarray(x, dtype=float)),
        )

    @staticmethod
    def from_table(x: Sequence[float], m: Sequence[float]) -> "MassProfile":
        """Cubic-spline profile through sampled (x, m_b) values."""
        m_arr = np.asarray(m, dtype=float)
        if np.any(m_arr <= 0.0):
            raise ValidationError("sampled mass profile must be positive")
        spl = CubicSpline(np.asarray(x, dtype=float), m_arr)
        return MassProfile(
            value=lambda xq, _s=spl: _s(np.asarray(xq, dtype=float)),
            deriv=lambda xq, _s=spl.derivative(): _s(np.asarray(xq, dtype=float)),
            antideriv=lambda xq, _s=spl.antiderivative(): _s(
                np.asarray(xq, dtype=float)
            ),
        )

    def validate_on(self, l: float, n_check: int = 257) -> float:
        """Check positivity on a sample of [0, l]; return the sampled minimum."""
        xs = np.linspace(0.0, max(l, 0.0), n_check)
        vals = np.asarray(self.value(xs), dtype=float)
        if np.any(vals <= 0.0) or not np.all(np.isfinite(vals)):
            raise ValidationError("mass profile must stay positive on the duct")
        return float(vals.min())


@dataclass(frozen=True)
class MassField:
    """Perturbed 2D mass-addition field m(x, y) on the duct.

    The perturbation is a cosine series in y with polynomial-in-x amplitudes:
    m(x, y) = m_b(x) + sum_k P_k(x) * cos(k*y).  Cosine modes make every odd
    y-derivative vanish at the walls y = 0 and y = pi, which is exactly the
    wall-symmetry class the solver requires of its data.
    """

    base: MassProfile  # axial mean profile m_b(x)
    modes: Tuple[Tuple[int, Polynomial], ...] = ()  # (k, P_k(x)) pairs, k >= 1

    def value(self, x, y):
        """m(x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self.base.value(x) * np.ones(np.broadcast(x, y).shape)
        for k, poly in self.modes:
            out = out + poly(x) * np.cos(k * y)
        return out

    def dx(self, x, y):
        """partial m / partial x."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self.base.deriv(x) * np.ones(np.broadcast(x, y).shape)
        for k, poly in self.modes:
            out = out + poly.deriv()(x) * np.cos(k * y)
        return out

    def dy(self, x, y):
        """partial m / partial y (vanishes at the walls by construction)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for k, poly in self.modes:
            out = out - k * poly(x) * np.sin(k * y)
        return out

    def perturbation_sup(self, l: float, n_check: int = 129) -> float:
        """sup |m(x,y) - m_b(x)| over a sample grid on the closed duct."""
        xs = np.linspace(0.0, l, n_check)
        sup = 0.0
        for k, poly in self.modes:
            sup += float(np.max(np.abs(poly(xs))))
        return sup


@dataclass(frozen=True)
class GasParams:
    """Gas and source parameters that govern every coefficient downstream."""

    gamma: float  # adiabatic exponent, > 1
    lam: float  # mass-addition rate (sign-carrying)
    mass_profile: MassProfile  # axial profile m_b(x)
    mass_field: Optional[MassField] = None  # perturbed field m(x, y), if any

    def __post_init__(self):
        if not (self.gamma > 1.0):
            raise ValidationError(f"gamma must exceed 1, got {self.gamma}")
        if not np.isfinite(self.lam):
            raise ValidationError("lambda must be finite")
        if self.mass_field is not None and self.mass_field.base is not self.mass_profile:
            raise ValidationError(
                "mass_field must be built on the same axial profile as mass_profile"
            )

    def mass_at(self, x, y):
        """m(x, y): the perturbed field when present, else the axial profile."""
        if self.mass_field is not None:
            return self.mass_field.value(x, y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.mass_profile.value(x) * np.ones(np.broadcast(x, y).shape)


# === Thermodynamic relations ===


def sound_speed_sq(p, rho, gamma: float):
    """Squared sound speed c^2 = gamma * p / rho.

    Parameters
    ----------
    p, rho : positive scalars or arrays.
    gamma : adiabatic exponent.
    """
    p = np.asarray(p, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(p <= 0.0) or np.any(rho <= 0.0):
        raise StateError("sound speed needs positive pressure and density")
    return gamma * p / rho


def density_from_pA(p, A, gamma: float):
    """Density from the equation of state: rho = (p / A)**(1/gamma)."""
    p = np.asarray(p, dtype=float)
    A = np.asarray(A, dtype=float)
    if np.any(p <= 0.0) or np.any(A <= 0.0):
        raise StateError("density needs positive pressure and entropy function")
    rho = (p / A) ** (1.0 / gamma)
    if np.any(rho < RHO_FLOOR):
        raise StateError("near-vacuum state: density below floor")
    return rho


def axial_velocity(E, v, p, A, gamma: float):
    """Positive axial velocity u from total enthalpy.

    Solves E = (u^2 + v^2)/2 + c^2/(gamma-1) for u, using
    c^2 = gamma * p^(1-1/gamma) * A^(1/gamma):

        u = sqrt(2E - v^2 - (2*gamma/(gamma-1)) * p^(1-1/gamma) * A^(1/gamma))

    Raises a stagnation/vacuum error when the radicand is not positive.
    """
    E = np.asarray(E, dtype=float)
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    A = np.asarray(A, dtype=float)
    if np.any(p <= 0.0) or np.any(A <= 0.0):
        raise StateError("axial velocity needs positive pressure and entropy function")
    c2 = gamma * p ** (1.0 - 1.0 / gamma) * A ** (1.0 / gamma)
    rad = 2.0 * E - v * v - 2.0 * c2 / (gamma - 1.0)
    if np.any(rad <= 0.0):
        raise StateError("stagnation: total enthalpy leaves no room for axial flow")
    return np.sqrt(rad)


@dataclass(frozen=True)
class ThermoState:
    """Complete local gas state; fields may be scalars or broadcast arrays.

    Invariants (enforced at construction):
      p = A * rho**gamma, c2 = gamma*p/rho, E = (u^2+v^2)/2 + c2/(gamma-1),
      0 < M < 1 with the near-sonic and near-vacuum guards applied.
    """

    p: np.ndarray  # pressure > 0
    A: np.ndarray  # entropy function A(s) > 0
    rho: np.ndarray  # density
    c2: np.ndarray  # squared sound speed
    E: np.ndarray  # total enthalpy
    u: np.ndarray  # axial velocity > 0
    v: np.ndarray  # tangential velocity
    M: np.ndarray  # Mach number in (0, 1)

    @staticmethod
    def from_paev(p, A, E, v, gamma: float) -> "ThermoState":
        """Build and validate the full state from (p, A, E, v)."""
        rho = density_from_pA(p, A, gamma)
        c2 = sound_speed_sq(p, rho, gamma)
        u = axial_velocity(E, v, p, A, gamma)
        M2 = (u * u + v * v) / c2
        if np.any(1.0 - M2 < SONIC_GUARD):
            raise StateError("near-sonic state: 1 - M^2 below guard")
        return ThermoState(
            p=np.asarray(p, dtype=float),
            A=np.asarray(A, dtype=float),
            rho=rho,
            c2=c2,
            E=np.asarray(E, dtype=float),
            u=u,
            v=np.asarray(v, dtype=float),
            M=np.sqrt(M2),
        )

    def max_invariant_defect(self, gamma: float) -> float:
        """Largest relative defect among the four state invariants."""
        d1 = np.max(np.abs(self.p / (self.A * self.rho**gamma) - 1.0))
        d2 = np.max(np.abs(self.c2 * self.rho / (gamma * self.p) - 1.0))
        e = 0.5 * (self.u**2 + self.v**2) + self.c2 / (gamma - 1.0)
        d3 = np.max(np.abs(e / self.E - 1.0))
        m = np.sqrt(self.u**2 + self.v**2) / np.sqrt(self.c2)
        d4 = np.max(np.abs(m - self.M))
        return float(max(d1, d2, d3, d4))
