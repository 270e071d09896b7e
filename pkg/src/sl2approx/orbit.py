"""Sweep drivers: expand, construct gamma for every admissible index, retry on precision loss."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

from .cf import CFConstants, CFExpansion, constants, expand
from .exponents import OrbitRecord
from .field import RingSpec
from .matrices import (
    DEFAULT_OMEGA, IRRATIONAL, ORIGIN, RATIONAL, GammaResult, TargetSpec, gamma_irrational, gamma_origin,
    gamma_rational, normalize_slope, select_indices,
)
from .pcomplex import PComplex, PrecisionPolicy, with_retry


@dataclass(frozen=True)
class SlopeSource:
    """z1/z2 (or -z2/z1 after J) of two refinable sources."""

    z1: object
    z2: object
    flipped: bool = False

    def at(self, prec: int) -> PComplex:
        a, b = self.z1.at(prec + 16), self.z2.at(prec + 16)
        return -b / a if self.flipped else a / b


def slope_source(z1, z2, flipped: bool = False) -> SlopeSource:
    return SlopeSource(z1, z2, flipped)


@dataclass(frozen=True)
class Sweep:
    cls: str
    results: tuple[GammaResult, ...]
    exp_z: CFExpansion
    exp_y: CFExpansion | None
    prec: int

    def records(self) -> list[OrbitRecord]:
        return [OrbitRecord.from_gamma(g) for g in self.results]

    @property
    def all_checks_pass(self) -> bool:
        return all(all(g.checks.values()) for g in self.results)


def _expand_normalized(z1, z2, R, depth, prec, cap):
    """Decide the J-normalisation at ``prec`` and expand the normalised slope."""
    flip = normalize_slope(z1.at(prec), z2.at(prec))[1]
    exp = expand(slope_source(z1, z2, flip), R, depth, PrecisionPolicy(prec, max(cap, prec)))
    return exp, flip, (z1.at(exp.prec), z2.at(exp.prec))


def sweep_origin(z, R: RingSpec, depth: int, policy: PrecisionPolicy | None = None,
                 consts: CFConstants | None = None) -> Sweep:
    """gamma = M_k (J-adjusted) for k = 1 .. depth-1."""
    policy = policy or PrecisionPolicy()
    c = consts or constants(R)

    def run(prec):
        exp, flip, zv = _expand_normalized(*z, R, depth, prec, policy.cap)
        res = tuple(gamma_origin(exp, k, zv, flip, c) for k in range(1, exp.depth))
        return Sweep(ORIGIN, res, exp, None, exp.prec)

    return with_retry(run, policy)


def sweep_rational(z, target: TargetSpec, R: RingSpec, depth: int, omega: float = DEFAULT_OMEGA,
                   policy: PrecisionPolicy | None = None, consts: CFConstants | None = None) -> Sweep:
    """The rational-slope construction for every k >= 1 with eps_{k-1} nonzero."""
    policy = policy or PrecisionPolicy()
    c = consts or constants(R)

    def run(prec):
        exp, flip, zv = _expand_normalized(*z, R, depth, prec, policy.cap)
        last = exp.depth - 1 if exp.terminated else exp.depth
        res = tuple(gamma_rational(exp, target, k, zv, omega, flip, c) for k in range(1, last))
        return Sweep(RATIONAL, res, exp, None, exp.prec)

    return with_retry(run, policy)


def sweep_irrational(z, y, R: RingSpec, depth_z: int, depth_y: int, omega: float = DEFAULT_OMEGA,
                     policy: PrecisionPolicy | None = None, consts: CFConstants | None = None) -> Sweep:
    """The irrational-slope construction over the pairs (j, k) from select_indices, j >= 1."""
    policy = policy or PrecisionPolicy()
    c = consts or constants(R)

    def run(prec):
        exp_z, fz, zv = _expand_normalized(*z, R, depth_z, prec, policy.cap)
        exp_y, fy, yv = _expand_normalized(*y, R, depth_y, exp_z.prec, policy.cap)
        if exp_y.terminated:
            raise ValueError("target slope lies in K; use the rational construction")
        if exp_y.prec != exp_z.prec:  # re-expand z to match
            exp_z, fz, zv = _expand_normalized(*z, R, depth_z, exp_y.prec, policy.cap)
        pairs = [(j, k) for j, k in select_indices(exp_z, exp_y)
                 if j >= 1 and j + 1 < exp_y.depth and k < exp_z.depth]
        if not pairs:
            warnings.warn("no admissible (j, k) pairs", stacklevel=3)
        res = tuple(gamma_irrational(exp_z, exp_y, jk, zv, yv, omega, (fz, fy), c) for jk in pairs)
        return Sweep(IRRATIONAL, res, exp_z, exp_y, exp_z.prec)

    return with_retry(run, policy)
