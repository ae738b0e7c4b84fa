"""Realism constraints on Lorentz-invariant two-point current correlators.

The invariant tensor G^{mu nu} = p^mu p^nu xi + g^{mu nu} eta admits a
positive-probability (realist) description only for 0 > eta > -(p.p) xi at
timelike p.p and eta = 0, xi > 0 at spacelike p.p; imposing current
conservation (transversality p_mu G^{mu nu} = 0) on the spacelike branch
forces xi = 0, i.e. the correlator vanishes identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])
STRICT_TOL = 1e-12  # strict inequalities; boundary values are not admissible

ADMISSIBLE = "admissible"
VIOLATES_TIMELIKE = "violates_timelike"
VIOLATES_SPACELIKE = "violates_spacelike"
LIGHTLIKE_UNCLASSIFIED = "lightlike_unclassified"


@dataclass(frozen=True)
class FourVector:
    components: tuple[float, float, float, float]

    def __post_init__(self):
        comps = tuple(float(x) for x in self.components)
        if len(comps) != 4 or not all(math.isfinite(x) for x in comps):
            raise ValueError("a four-vector needs 4 finite components")
        object.__setattr__(self, "components", comps)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.components)


@dataclass(frozen=True)
class InvariantCorrelator:
    """Coefficients of G = xi p(x)p + eta g."""

    xi: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.eta)):
            raise ValueError("xi and eta must be finite")


@dataclass(frozen=True)
class AdmissibilityResult:
    status: str
    on_boundary: bool = False


@dataclass(frozen=True)
class ConservationCheck:
    forced_zero: bool
    transverse: bool
    correlator_zero: bool
    witness: tuple[float, float, float, float]  # residual p_mu G^{mu nu}


def minkowski_dot(a: FourVector, b: FourVector) -> float:
    """Signature (+,-,-,-) contraction a0 b0 - a.b."""
    av, bv = a.as_array(), b.as_array()
    return float(av[0] * bv[0] - av[1:] @ bv[1:])


def correlator_tensor(c: InvariantCorrelator, p: FourVector) -> np.ndarray:
    """Componentwise G^{mu nu} = p^mu p^nu xi + g^{mu nu} eta."""
    pv = p.as_array()
    return c.xi * np.outer(pv, pv) + c.eta * METRIC


def _lightlike_band(p: FourVector) -> float:
    pv = p.as_array()
    return STRICT_TOL * max(float(pv @ pv), 1.0)


def realism_admissible(c: InvariantCorrelator, p: FourVector,
                       tol: float = STRICT_TOL) -> AdmissibilityResult:
    """Classify (xi, eta) against the realism constraint chain at this p."""
    pp = minkowski_dot(p, p)
    if abs(pp) <= _lightlike_band(p):
        return AdmissibilityResult(LIGHTLIKE_UNCLASSIFIED)
    if pp > 0:
        # need 0 > eta > -(p.p) xi, both strictly
        slack = min(-c.eta, c.eta + pp * c.xi)
        if slack > tol:
            return AdmissibilityResult(ADMISSIBLE)
        return AdmissibilityResult(VIOLATES_TIMELIKE, on_boundary=abs(slack) <= tol)
    # spacelike: eta = 0 and xi > 0 strictly
    if abs(c.eta) > tol:
        return AdmissibilityResult(VIOLATES_SPACELIKE)
    if c.xi > tol:
        return AdmissibilityResult(ADMISSIBLE)
    return AdmissibilityResult(VIOLATES_SPACELIKE, on_boundary=abs(c.xi) <= tol)


def conservation_residual(c: InvariantCorrelator, p: FourVector) -> np.ndarray:
    """Transversality residual p_mu G^{mu nu} = (p.p) xi p^nu + eta p^nu."""
    p_lower = METRIC @ p.as_array()
    return p_lower @ correlator_tensor(c, p)


def conservation_forces_zero(c: InvariantCorrelator, p: FourVector,
                             tol: float = STRICT_TOL) -> ConservationCheck:
    """At spacelike p, is the only transverse choice the vanishing correlator?

    Returns forced_zero=True exactly when G is transverse *and* identically
    zero (xi = eta = 0): charge conservation kills the whole spacelike branch.
    The residual vector is returned as a witness when transversality fails.
    """
    pp = minkowski_dot(p, p)
    if pp >= -_lightlike_band(p):
        raise ValueError(f"p must be spacelike (p.p < 0), got p.p = {pp}")
    residual = conservation_residual(c, p)
    scale = max(float(np.max(np.abs(p.as_array()))) ** 3, 1.0)
    transverse = bool(np.max(np.abs(residual)) <= tol * scale)
    zero = abs(c.xi) <= tol and abs(c.eta) <= tol
    return ConservationCheck(
        forced_zero=transverse and zero,
        transverse=transverse,
        correlator_zero=zero,
        witness=tuple(float(x) for x in residual),
    )
