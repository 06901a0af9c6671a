"""Mapping schemata: validation, reduction from towers, cubic types, markings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from . import circle
from .circle import fmt
from .lamination import GapChain, PuzzleTower, separation_depth, track_gaps


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class MappingSchema:
    vertices: tuple[str, ...]
    sigma: Mapping[str, str]
    delta: Mapping[str, int]
    return_times: Mapping[str, int] | None = None

    def __post_init__(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices) or not vs:
            raise SchemaError("vertex list must be non-empty and duplicate-free")
        for v in self.vertices:
            if v not in self.sigma or self.sigma[v] not in vs:
                raise SchemaError(f"sigma undefined or leaves the schema at {v!r}")
            dv = self.delta.get(v)
            if not isinstance(dv, int) or dv < 1:
                raise SchemaError(f"delta({v!r}) must be an integer >= 1")
        if self.return_times is not None:
            for v in self.vertices:
                if self.return_times.get(v, 0) < 1:
                    raise SchemaError(f"return time of {v!r} must be >= 1")

    @property
    def reduced(self) -> bool:
        return all(self.delta[v] >= 2 for v in self.vertices)

    def orbit_shape(self, v: str) -> tuple[int, int]:
        """(preperiod, period) of v under sigma."""
        seen: dict[str, int] = {}
        x, n = v, 0
        while x not in seen:
            seen[x] = n
            x = self.sigma[x]
            n += 1
        return seen[x], n - seen[x]

    def cycles(self) -> list[tuple[str, ...]]:
        out, done = [], set()
        for v in self.vertices:
            pre, per = self.orbit_shape(v)
            x = v
            for _ in range(pre):
                x = self.sigma[x]
            if x in done:
                continue
            cyc = [x]
            y = self.sigma[x]
            while y != x:
                cyc.append(y)
                y = self.sigma[y]
            done.update(cyc)
            out.append(tuple(cyc))
        return out

    def canonical(self) -> "MappingSchema":
        order = sorted(self.vertices, key=lambda v: (*self.orbit_shape(v), self.delta[v], v))
        return MappingSchema(tuple(order), dict(self.sigma), dict(self.delta),
                             None if self.return_times is None else dict(self.return_times))

    def relabel(self, names: Mapping[str, str]) -> "MappingSchema":
        rt = None
        if self.return_times is not None:
            rt = {names[v]: t for v, t in self.return_times.items()}
        return MappingSchema(tuple(names[v] for v in self.vertices),
                             {names[v]: names[w] for v, w in self.sigma.items()},
                             {names[v]: d for v, d in self.delta.items()}, rt)


def model_dimension(schema: MappingSchema) -> int:
    return sum(schema.delta[v] - 1 for v in schema.vertices)


# ---------------------------------------------------------------- from towers


@dataclass
class ReducedSchema:
    schema: MappingSchema
    gaps: dict[str, GapChain] = field(default_factory=dict)
    separation_depth: int = 0


def reduce_with_gaps(tower: PuzzleTower) -> ReducedSchema:
    sep = separation_depth(tower)
    ga = track_gaps(tower)
    if sep is None:
        why = "; ".join(f"depth {k} piece {i}: {msg}" for k, i, msg in ga.unresolved)
        raise SchemaError("no separation depth within the tower" + (f" ({why})" if why else ""))
    temp = {g.ident: f"t{g.ident}" for g in ga.gaps}
    raw = MappingSchema(
        tuple(temp.values()),
        {temp[g.ident]: temp[g.sigma] for g in ga.gaps},
        {temp[g.ident]: g.degree for g in ga.gaps},
        {temp[g.ident]: g.return_time for g in ga.gaps},
    )
    keys = {temp[g.ident]: g.key for g in ga.gaps}
    order = sorted(raw.vertices, key=lambda v: (*raw.orbit_shape(v), raw.delta[v], keys[v]))
    names = {v: f"v{i}" for i, v in enumerate(order)}
    schema = raw.relabel(names).canonical()
    gaps = {names[temp[g.ident]]: g for g in ga.gaps}
    return ReducedSchema(schema, gaps, sep)


def reduce_from_tower(tower: PuzzleTower) -> MappingSchema:
    return reduce_with_gaps(tower).schema


# ---------------------------------------------------------------- cubic types


def classify_cubic(schema: MappingSchema) -> str:
    if not schema.reduced or model_dimension(schema) != 2:
        raise SchemaError("classify_cubic needs a reduced schema with sum(delta-1) = 2")
    vs = schema.vertices
    if len(vs) == 1:
        return "adjacent"
    a, b = vs
    sa, sb = schema.sigma[a], schema.sigma[b]
    if sa == b and sb == a:
        return "bitransitive"
    if sa == a and sb == b:
        return "disjoint"
    return "capture"


# ---------------------------------------------------------------- markings


@dataclass(frozen=True)
class Marking:
    angles: tuple[tuple[str, Fraction], ...]

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.angles)

    def describe(self) -> str:
        return ", ".join(f"{v}: {fmt(t)}" for v, t in self.angles)


def _cycle_product(schema: MappingSchema, cyc: Iterable[str]) -> int:
    out = 1
    for v in cyc:
        out *= schema.delta[v]
    return out


def enumerate_markings(schema: MappingSchema) -> list[Marking]:
    """All solutions of delta(v) * theta_v = theta_{sigma(v)} in R/Z."""
    if not schema.reduced:
        raise SchemaError("markings are enumerated on reduced schemata only")
    partial: list[dict[str, Fraction]] = [{}]
    for cyc in schema.cycles():
        D = _cycle_product(schema, cyc)
        options = []
        for k in range(D - 1):
            theta = Fraction(k, D - 1)
            sol = {cyc[0]: theta}
            for i in range(1, len(cyc)):
                prev = cyc[i - 1]
                sol[cyc[i]] = circle.map_d(sol[prev], schema.delta[prev])
            options.append(sol)
        partial = [{**p, **o} for p in partial for o in options]
    pending = [v for v in schema.vertices if v not in partial[0]]
    while pending:
        ready = [v for v in pending if schema.sigma[v] not in pending]
        for v in ready:
            nxt = []
            for p in partial:
                for x in circle.preimages(p[schema.sigma[v]], schema.delta[v]):
                    nxt.append({**p, v: x})
            partial = nxt
        pending = [v for v in pending if v not in ready]
    return _sorted_markings(schema, partial)


def _sorted_markings(schema: MappingSchema, sols: list[dict[str, Fraction]]) -> list[Marking]:
    out = {Marking(tuple((v, s[v]) for v in schema.vertices)) for s in sols}
    return sorted(out, key=lambda m: tuple(t for _, t in m.angles))


def brute_force_markings(schema: MappingSchema) -> list[Marking]:
    """Independent oracle: scan a common denominator grid vertex by vertex.

    Periodic solutions have denominators dividing D - 1 for their cycle, and every
    strictly preperiodic vertex multiplies the denominator by at most its degree.
    """
    M = 1
    periodic = set()
    for cyc in schema.cycles():
        M = math.lcm(M, _cycle_product(schema, cyc) - 1)
        periodic.update(cyc)
    for v in schema.vertices:
        if v not in periodic:
            M *= schema.delta[v]
    order: list[str] = []
    for cyc in schema.cycles():
        order.extend(cyc)
    rest = [v for v in schema.vertices if v not in order]
    while rest:
        ready = [v for v in rest if schema.sigma[v] in order]
        order.extend(ready)
        rest = [v for v in rest if v not in ready]
    grid = np.arange(M, dtype=np.int64)
    col: dict[str, int] = {}
    sols = np.zeros((1, 0), dtype=np.int64)
    for v in order:
        dv, sv = schema.delta[v], schema.sigma[v]
        ok = np.ones((len(sols), M), dtype=bool)
        if sv in col:
            ok &= (dv * grid[None, :] - sols[:, col[sv], None]) % M == 0
        elif sv == v:
            ok &= ((dv - 1) * grid % M == 0)[None, :]
        # assigned predecessors of v close a cycle through v
        for u in schema.vertices:
            if schema.sigma[u] == v and u != v and u in col:
                ok &= (schema.delta[u] * sols[:, col[u], None] - grid[None, :]) % M == 0
        rows, ks = np.nonzero(ok)
        sols = np.column_stack([sols[rows], ks])
        col[v] = len(col)
    sols = [{v: int(row[col[v]]) for v in schema.vertices} for row in sols]
    return _sorted_markings(schema, [{v: Fraction(k, M) for v, k in s.items()} for s in sols])


# ---------------------------------------------------------------- named schemata and documents


def single(delta: int) -> MappingSchema:
    return MappingSchema(("v0",), {"v0": "v0"}, {"v0": delta})


T_ADJ = MappingSchema(("v0",), {"v0": "v0"}, {"v0": 3})
T_BIT = MappingSchema(("v0", "v1"), {"v0": "v1", "v1": "v0"}, {"v0": 2, "v1": 2})
T_CAP = MappingSchema(("v0", "v1"), {"v0": "v0", "v1": "v0"}, {"v0": 2, "v1": 2})
T_DIS = MappingSchema(("v0", "v1"), {"v0": "v0", "v1": "v1"}, {"v0": 2, "v1": 2})


def schema_to_doc(schema: MappingSchema) -> dict:
    doc = {
        "vertices": list(schema.vertices),
        "sigma": {v: schema.sigma[v] for v in schema.vertices},
        "delta": {v: schema.delta[v] for v in schema.vertices},
    }
    if schema.return_times is not None:
        doc["return_times"] = {v: schema.return_times[v] for v in schema.vertices}
    return doc


def schema_from_doc(doc: dict) -> MappingSchema:
    try:
        vs = tuple(str(v) for v in doc["vertices"])
        sigma = {str(k): str(v) for k, v in doc["sigma"].items()}
        delta = {str(k): int(v) for k, v in doc["delta"].items()}
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise SchemaError(f"malformed schema document: {exc}") from exc
    rt = doc.get("return_times")
    if rt is not None:
        rt = {str(k): int(v) for k, v in rt.items()}
    return MappingSchema(vs, sigma, delta, rt)
