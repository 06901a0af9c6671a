"""Fiberwise polynomial maps over a mapping schema and their external rays."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial import cKDTree

from .. import circle
from ..circle import fmt
from ..lamination import FiniteLamination, ValidationReport, verify_lamination
from ..schema import MappingSchema, SchemaError, schema_from_doc, schema_to_doc, single
from . import kernels


class DynamicsError(ValueError):
    pass


@dataclass(frozen=True)
class SchemaPolynomial:
    """Monic centered polynomials f_v of degree delta(v), one per vertex."""

    schema: MappingSchema
    coefficients: Mapping[str, tuple[complex, ...]]

    def __post_init__(self):
        for v in self.schema.vertices:
            cs = self.coefficients.get(v)
            if cs is None:
                raise DynamicsError(f"no coefficients for vertex {v!r}")
            if len(cs) != self.schema.delta[v] - 1:
                raise DynamicsError(
                    f"vertex {v!r} needs {self.schema.delta[v] - 1} coefficients, got {len(cs)}")
            if not all(np.isfinite(complex(c)) for c in cs):
                raise DynamicsError(f"non-finite coefficient at {v!r}")

    @classmethod
    def single(cls, *coeffs) -> "SchemaPolynomial":
        """z^d + coeffs[0] z^(d-2) + ... + coeffs[-1]; d = len(coeffs) + 1."""
        cs = tuple(complex(c) for c in coeffs)
        return cls(single(len(cs) + 1), {"v0": cs})

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.schema.vertices

    def index(self, v: str) -> int:
        try:
            return self.schema.vertices.index(v)
        except ValueError:
            raise DynamicsError(f"unknown vertex {v!r}") from None

    def full_coefficients(self, v: str) -> list[complex]:
        """Coefficients of f_v from z^delta down to z^0."""
        return [1 + 0j, 0j] + [complex(c) for c in self.coefficients[v]]

    @cached_property
    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        vs = self.schema.vertices
        width = max(self.schema.delta[v] for v in vs) + 1
        C = np.zeros((len(vs), width), dtype=np.complex128)
        deg = np.zeros(len(vs), dtype=np.int64)
        sig = np.zeros(len(vs), dtype=np.int64)
        for i, v in enumerate(vs):
            row = self.full_coefficients(v)
            C[i, : len(row)] = row
            deg[i] = self.schema.delta[v]
            sig[i] = vs.index(self.schema.sigma[v])
        return C, deg, sig

    @cached_property
    def escape_radius(self) -> float:
        return max(max(2.0, 1.0 + sum(abs(complex(c)) for c in self.coefficients[v]))
                   for v in self.schema.vertices)

    def apply(self, v: str, z: complex) -> complex:
        acc = 0j
        for c in self.full_coefficients(v):
            acc = acc * z + c
        return acc


def monic_centered(coeffs: Sequence[complex]) -> tuple[list[complex], complex, complex]:
    """Affine conjugate of a polynomial (leading coefficient first) that is monic and centered.

    Returns (coefficients of h from z^d down, k, s) with h(w) = (p(k w + s) - s) / k.
    """
    cs = [complex(c) for c in coeffs]
    d = len(cs) - 1
    if d < 2 or cs[0] == 0:
        raise DynamicsError("need a polynomial of degree >= 2")
    k = cs[0] ** (-1.0 / (d - 1))
    s = -cs[1] / (d * cs[0])
    p = np.poly1d(cs)
    h = (p(np.poly1d([k, s])) - np.poly1d([s])) / k
    out = [complex(c) for c in h.coeffs]
    out = [c / out[0] for c in out]
    out[1] = 0j
    # drop rounding noise left by the affine change of variables
    scale = max(1.0, max(abs(c) for c in out))
    out = [complex(0.0 if abs(c.real) < 1e-14 * scale else c.real,
                   0.0 if abs(c.imag) < 1e-14 * scale else c.imag) for c in out]
    return out, k, s


def from_full(coeffs: Sequence[complex], schema: MappingSchema | None = None) -> SchemaPolynomial:
    """Single-vertex map from the coefficients of a monic centered polynomial."""
    cs = [complex(c) for c in coeffs]
    if abs(cs[0] - 1) > 1e-12 or abs(cs[1]) > 1e-12:
        raise DynamicsError("polynomial is not monic centered; use monic_centered first")
    d = len(cs) - 1
    return SchemaPolynomial(schema or single(d), {"v0": tuple(cs[2:])})


def evaluate(f: SchemaPolynomial, point: tuple[str, complex]) -> tuple[str, complex]:
    v, z = point
    z = complex(z)
    if not cmath.isfinite(z):
        raise DynamicsError(f"non-finite input point {z!r}")
    f.index(v)
    return f.schema.sigma[v], f.apply(v, z)


# ---------------------------------------------------------------- potential

DEFAULT_BAILOUT = 1e60


def potential(f: SchemaPolynomial, point: tuple[str, complex], max_iter: int = 4000,
              escape_radius: float | None = None) -> float:
    v, z = point
    return float(potential_grid(f, v, np.array([complex(z)]), max_iter, escape_radius)[0])


def potential_grid(f: SchemaPolynomial, v: str, zs, max_iter: int = 4000,
                   escape_radius: float | None = None, use_numba=None) -> np.ndarray:
    """Green potential at each of ``zs`` in fiber v (0 where the orbit stays bounded)."""
    bail = DEFAULT_BAILOUT if escape_radius is None else float(escape_radius)
    # leave the loop before one more step could overflow a double
    bail = min(bail, 10.0 ** (300 / max(f.schema.delta.values())))
    if bail < f.escape_radius:
        raise DynamicsError(f"escape radius {bail} is below the safe bound {f.escape_radius}")
    C, deg, sig = f.packed
    zs = np.asarray(zs, dtype=np.complex128)
    out = kernels.green(C, deg, sig, f.index(v), zs.ravel(), max_iter, bail, use_numba=use_numba)
    return out.reshape(zs.shape)


# ---------------------------------------------------------------- rays


@dataclass(frozen=True)
class RayParams:
    R0: float = 1e6
    steps_per_level: int = 4
    levels: int = 400
    newton_tol: float = 1e-11
    newton_iter: int = 60


@dataclass
class RayTrace:
    vertex: str
    angle: Fraction
    points: np.ndarray
    potentials: np.ndarray
    landing: complex | None
    status: str

    def to_csv(self) -> str:
        rows = ["potential,re,im"]
        for g, z in zip(self.potentials, self.points):
            rows.append(f"{g!r},{z.real!r},{z.imag!r}")
        return "\n".join(rows) + "\n"

    def overlay(self) -> dict:
        return {"kind": "ray", "vertex": self.vertex, "angle": fmt(self.angle),
                "points": [[float(z.real), float(z.imag)] for z in self.points]}


STATUSES = ("landed", "max-iter", "escaped-tolerance", "suspected-parabolic")


def _fiber_path(f: SchemaPolynomial, v: str, n: int) -> list[str]:
    path = [v]
    for _ in range(n):
        path.append(f.schema.sigma[path[-1]])
    return path


_USABLE = (kernels.NEWTON_OK, kernels.NEWTON_STALLED)


def _march(f: SchemaPolynomial, v: str, theta: Fraction, params: RayParams,
           stop_potential: float | None = None, use_numba=None):
    """Follow the ray inward level by level; yields (potential, point, newton status)."""
    if params.R0 <= f.escape_radius or params.steps_per_level < 1 or params.levels < 1:
        raise DynamicsError("ray parameters must be positive with R0 above the escape radius")
    C, deg, sig = f.packed
    v0 = f.index(v)
    r0 = math.log(params.R0)
    blowup = 1e3 * params.R0 ** 2
    z = cmath.exp(complex(r0, 2 * math.pi * float(theta)))
    yield r0, z, kernels.NEWTON_OK
    path_deg = [1]
    path = _fiber_path(f, v, 0)
    total = params.levels * params.steps_per_level
    q = 2.0 ** (-1.0 / params.steps_per_level)
    for m in range(1, total + 1):
        r = r0 * q**m
        last = False
        if stop_potential is not None and r <= stop_potential:
            r, last = stop_potential, True
        while path_deg[-1] * r < r0:
            path.append(f.schema.sigma[path[-1]])
            path_deg.append(path_deg[-1] * f.schema.delta[path[-2]])
        n = len(path_deg) - 1
        D = path_deg[-1]
        arg = theta * D
        arg -= arg.numerator // arg.denominator
        w = cmath.exp(complex(D * r, 2 * math.pi * float(arg)))
        z, st, _ = kernels.newton(C, deg, sig, v0, z, n, w, params.newton_tol * 1e-3,
                                  params.newton_iter, blowup, use_numba=use_numba)
        yield r, z, st
        if st not in _USABLE or last:
            return


def trace_ray(f: SchemaPolynomial, vertex: str, theta, params: RayParams | None = None,
              use_numba=None) -> RayTrace:
    params = params or RayParams()
    theta = circle.angle(theta)
    S = params.steps_per_level
    pts: list[complex] = []
    pots: list[float] = []
    diffs: list[float] = []
    status, landing = None, None
    for r, z, st in _march(f, vertex, theta, params, use_numba=use_numba):
        if st == kernels.NEWTON_BLOWUP:
            status = "escaped-tolerance"
            break
        if st != kernels.NEWTON_OK:
            # a stall means f^n is too ill-conditioned here to certify a landing
            status = "max-iter"
            break
        pts.append(z)
        pots.append(r)
        if len(pts) > S and (len(pts) - 1) % S == 0:
            diff = abs(pts[-1] - pts[-1 - S])
            diffs.append(diff)
            if diff < params.newton_tol:
                status, landing = "landed", pts[-1]
                break
    if status is None:
        status = "max-iter"
        tail = diffs[-8:]
        if len(tail) == 8 and all(b < a for a, b in zip(tail, tail[1:])):
            if tail[-1] / tail[-2] > 0.9:
                status = "suspected-parabolic"
    return RayTrace(vertex, theta, np.array(pts, dtype=np.complex128), np.array(pots), landing, status)


def equipotential(f: SchemaPolynomial, vertex: str, r: float, samples: int = 256,
                  params: RayParams | None = None, use_numba=None) -> np.ndarray:
    """Closed polyline of points of potential r at equally spaced external angles."""
    if not r > 0:
        raise DynamicsError("equipotential level must be positive")
    if samples < 3:
        raise DynamicsError("need at least 3 samples")
    params = params or RayParams()
    out = []
    for k in range(samples):
        z = None
        for g, z, st in _march(f, vertex, Fraction(k, samples), params, stop_potential=r,
                               use_numba=use_numba):
            if st not in _USABLE:
                raise DynamicsError(f"equipotential continuation failed at angle {k}/{samples}")
        if g != r:
            raise DynamicsError(f"potential {r} not reached within {params.levels} levels")
        out.append(z)
    out.append(out[0])
    return np.array(out, dtype=np.complex128)


# ---------------------------------------------------------------- sampled laminations


@dataclass
class SampledLamination:
    lamination: FiniteLamination
    unresolved: list[tuple[Fraction, str]]
    traces: dict[Fraction, RayTrace]
    report: ValidationReport = field(default_factory=ValidationReport)


def sample_lamination(f: SchemaPolynomial, angles: Iterable, eps: float = 1e-4,
                      vertex: str | None = None, params: RayParams | None = None,
                      use_numba=None) -> SampledLamination:
    """Cluster ray landing points; co-landing angles become one class."""
    v = vertex or f.vertices[0]
    E = circle.sort_angles(angles)
    traces = {t: trace_ray(f, v, t, params, use_numba=use_numba) for t in E}
    landed = [t for t in E if traces[t].status == "landed"]
    unresolved = [(t, traces[t].status) for t in E if traces[t].status != "landed"]
    ds = DisjointSet(landed)
    if landed:
        xy = np.array([[traces[t].landing.real, traces[t].landing.imag] for t in landed])
        for i, j in sorted(cKDTree(xy).query_pairs(eps)):
            ds.merge(landed[i], landed[j])
    lam = FiniteLamination.build(f.schema.delta[v], [sorted(s) for s in ds.subsets()])
    return SampledLamination(lam, unresolved, traces, verify_lamination(lam))


# ---------------------------------------------------------------- critical points


@dataclass
class CriticalRecord:
    vertex: str
    point: complex
    orbit: list[tuple[str, complex]]
    classification: str
    residual: float

    def describe(self) -> str:
        z = self.point
        return (f"{self.vertex}: c = {z.real:+.12g}{z.imag:+.12g}i  {self.classification}"
                f"  (residual {self.residual:.1e})")


def critical_data(f: SchemaPolynomial, steps: int = 2000, prefix: int = 8,
                  tol: float = 1e-9, residual_tol: float = 1e-8) -> list[CriticalRecord]:
    out = []
    R = f.escape_radius
    for v in f.vertices:
        full = f.full_coefficients(v)
        d = len(full) - 1
        deriv = [c * (d - i) for i, c in enumerate(full[:-1])]
        roots = np.roots(deriv) if d > 1 else np.array([])
        for c in sorted(roots, key=lambda z: (round(z.real, 9), round(z.imag, 9))):
            c = complex(c)
            res = abs(np.polyval(deriv, c)) / max(1.0, abs(c)) ** (d - 1)
            if res > residual_tol:
                raise DynamicsError(f"critical point solve residual {res:.2e} at {v} exceeds tolerance")
            orbit = [(v, c)]
            cls = "bounded"
            w, z = v, c
            recent: list[tuple[str, complex]] = [(v, c)]
            for _ in range(steps):
                w, z = evaluate(f, (w, z))
                if len(orbit) < prefix:
                    orbit.append((w, z))
                if abs(z) > R:
                    cls = "escaping"
                    break
                if any(u == w and abs(y - z) < tol for u, y in recent):
                    cls = "cycle-detected"
                    break
                recent.append((w, z))
                if len(recent) > 64:
                    recent.pop(0)
            out.append(CriticalRecord(v, c, orbit, cls, float(res)))
    return out


# ---------------------------------------------------------------- documents


def polynomial_to_doc(f: SchemaPolynomial) -> dict:
    return {
        "schema": schema_to_doc(f.schema),
        "coefficients": {v: [[repr(complex(c).real), repr(complex(c).imag)] for c in f.coefficients[v]]
                         for v in f.vertices},
    }


def polynomial_from_doc(doc: dict) -> SchemaPolynomial:
    try:
        schema = schema_from_doc(doc["schema"])
        coeffs = {}
        for v in schema.vertices:
            coeffs[v] = tuple(complex(float(re), float(im)) for re, im in doc["coefficients"][v])
    except (KeyError, TypeError, ValueError, SchemaError) as exc:
        raise DynamicsError(f"malformed polynomial document: {exc}") from exc
    return SchemaPolynomial(schema, coeffs)
