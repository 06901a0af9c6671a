"""Internal angles on critical gap boundaries, combinatorial tuning and straightening.

Every vertex of the reduced schema of a tower is a critical gap ``v`` whose
first return to the next critical gap is ``m_d^l``.  On the boundary of ``v``
this return is coded by sectors: the ``delta(v)`` boundary classes sent to the
root of ``sigma(v)`` cut the boundary into arcs labelled ``0..delta-1``
counterclockwise from the root of ``v``.  The internal angle is the
``delta``-adic number whose digits are the sector labels along the orbit.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from scipy.cluster.hierarchy import DisjointSet

from . import circle
from .circle import fmt, in_open_arc, iterate, map_d
from .lamination import (
    FiniteLamination,
    LaminationError,
    Piece,
    Portrait,
    PuzzleTower,
    ValidationReport,
    generated_classes,
    lamination_from_doc,
    lamination_to_doc,
    verify_lamination,
    verify_tower,
)
from .schema import MappingSchema, ReducedSchema, reduce_with_gaps, schema_from_doc, schema_to_doc


class InsufficientDepth(LaminationError):
    """The boundary data of the tower is too shallow; ``needed`` is a depth that may suffice."""

    def __init__(self, message: str, needed: int):
        super().__init__(f"insufficient depth: {message} (try depth {needed})")
        self.needed = needed


class NotOnBoundary(LaminationError):
    pass


Cls = tuple  # a class of angles, sorted


class _ArcSet:
    """Closed arcs of a piece with logarithmic lookup."""

    def __init__(self, arcs: Sequence[tuple[Fraction, Fraction]]):
        self.arcs = sorted(arcs)
        self.starts = [a for a, _ in self.arcs]
        self.full = len(self.arcs) == 1 and self.arcs[0][0] == self.arcs[0][1]

    def _near(self, x: Fraction):
        i = bisect_right(self.starts, x) - 1
        n = len(self.arcs)
        return (self.arcs[i % n], self.arcs[(i - 1) % n])

    def contains(self, x: Fraction) -> bool:
        return any(in_open_arc(x, a, b) for a, b in self._near(x))

    def touches(self, x: Fraction) -> bool:
        if self.full:
            return True
        return any(x == a or x == b or in_open_arc(x, a, b) for a, b in self._near(x))

    def meets_interval(self, lo: Fraction, hi: Fraction) -> bool:
        """Does the closed interval [lo, hi] (0 <= lo < hi <= 1) meet the arcs?"""
        if self.full or self.touches(lo):
            return True
        j = bisect_left(self.starts, lo)
        return j < len(self.starts) and self.starts[j] <= hi


def _closed_arc_meets(lo: Fraction, hi: Fraction, a: Fraction, b: Fraction) -> bool:
    """Closed interval [lo, hi] in [0, 1] against the closed ccw arc [a, b]."""
    if a == b:
        return True
    top = circle.angle(hi) if hi < 1 else Fraction(0)
    if circle.in_closed_arc(lo, a, b) or circle.in_closed_arc(top, a, b):
        return True
    return lo <= a <= hi


# ---------------------------------------------------------------- codings


@dataclass
class GapCoding:
    """Sector coding of one critical gap boundary."""

    vertex: str
    sigma: str
    return_time: int
    degree: int
    depth: int
    piece: Piece
    root: Cls
    sectors: tuple[Cls, ...]
    bounds: tuple[tuple[Fraction, Fraction], ...]
    periodic: bool
    system: "AngleSystem | None" = field(default=None, repr=False, compare=False)

    @property
    def gap(self):
        return self.system.reduced.gaps[self.vertex]

    def hull(self, s: int) -> tuple[Fraction, Fraction]:
        """Closed arc spanned by sector ``s`` together with its co-root."""
        nxt = (s + 1) % self.degree
        return self.bounds[s][1], self.bounds[nxt][1]

    def to_doc(self) -> dict:
        return {"gap": self.vertex, "root": [fmt(x) for x in self.root]}


class AngleSystem:
    """Codings for every vertex of the reduced schema of ``tower``."""

    def __init__(self, tower: PuzzleTower, reduced: ReducedSchema, codings: dict[str, GapCoding]):
        self.tower = tower
        self.reduced = reduced
        self.codings = codings
        self.degree = tower.degree
        self.depth = tower.depth
        self._lam = tower.levels[-1]
        self._arcsets = {v: _ArcSet(c.piece.arcs) for v, c in codings.items()}
        for c in codings.values():
            c.system = self

    @property
    def schema(self) -> MappingSchema:
        return self.reduced.schema

    # -------------------------------------------------------------- construction

    @classmethod
    def build(cls, tower: PuzzleTower, roots: Mapping[str, Iterable] | None = None) -> "AngleSystem":
        roots = {v: [circle.angle(x) for x in xs] for v, xs in (roots or {}).items()}
        reduced = reduce_with_gaps(tower)
        schema = reduced.schema
        an = tower.analysis
        K = tower.depth
        lam = tower.levels[-1]
        d = tower.degree
        classof = lam.class_of
        piece = {v: an.pieces(K)[g.piece] for v, g in reduced.gaps.items()}
        arcsets = {v: _ArcSet(p.arcs) for v, p in piece.items()}
        ell = {v: reduced.gaps[v].return_time for v in schema.vertices}

        def cls_of(x: Fraction) -> Cls:
            return classof.get(x, (x,))

        def touches(v: str, c: Cls) -> bool:
            return any(arcsets[v].touches(x) for x in c)

        def pick(v: str, cands: list[Cls], what: str) -> Cls:
            want = roots.get(v)
            if want:
                for c in cands:
                    if set(want) <= set(c):
                        return c
                raise LaminationError(f"requested root {[fmt(x) for x in want]} for {v} is not a {what}")
            return min(cands, key=lambda c: c[0])

        root: dict[str, Cls] = {}
        for cyc in schema.cycles():
            v0 = cyc[0]
            P = sum(ell[v] for v in cyc)
            D = 1
            for v in cyc:
                D *= schema.delta[v]
            cands = [c for c in piece[v0].boundary_classes
                     if {iterate(x, d, P) for x in c} == set(c)]
            n = d**P - 1
            for k in range(n):
                x = Fraction(k, n)
                if x not in classof and arcsets[v0].contains(x):
                    cands.append((x,))
            if len(cands) != D - 1:
                raise InsufficientDepth(
                    f"{len(cands)} boundary classes of {v0} are fixed by the return map, expected {D - 1}",
                    K + P)
            root[v0] = pick(v0, cands, "fixed boundary class")
            for a, b in zip(cyc, cyc[1:]):
                img = cls_of(iterate(root[a][0], d, ell[a]))
                if not touches(b, img):
                    raise InsufficientDepth(f"root image misses the boundary of {b}", K + ell[a])
                root[b] = img

        def coroots(v: str) -> list[Cls]:
            target = root[schema.sigma[v]]
            L = ell[v]
            out = []
            if target[0] in classof:
                tset = set(target)
                for c in piece[v].boundary_classes:
                    if any(iterate(x, d, L) in tset for x in c):
                        out.append(c)
            else:
                y = target[0]
                for j in range(d**L):
                    x = (y + j) / d**L
                    if arcsets[v].contains(x):
                        out.append((x,))
            if len(out) != schema.delta[v]:
                raise InsufficientDepth(
                    f"{len(out)} co-roots on the boundary of {v}, expected {schema.delta[v]}", K + L)
            return out

        pending = [v for v in schema.vertices if v not in root]
        co: dict[str, list[Cls]] = {}
        while pending:
            ready = [v for v in pending if schema.sigma[v] in root]
            if not ready:
                raise LaminationError("schema has a vertex that never reaches a cycle")
            for v in ready:
                co[v] = coroots(v)
                root[v] = pick(v, co[v], "co-root")
            pending = [v for v in pending if v not in ready]

        codings = {}
        for v in schema.vertices:
            cs = co.get(v) or coroots(v)
            if root[v] not in cs:
                raise LaminationError(f"root of {v} is not sent to the root of {schema.sigma[v]}")
            ref = an.levels[K].inner_point(piece[v].index)
            bounds = {}
            for c in cs:
                if len(c) == 1:
                    bounds[c] = (c[0], c[0])
                else:
                    bounds[c] = circle.component_containing(list(c), ref)
            a0 = bounds[root[v]][0]
            cs = sorted(cs, key=lambda c: circle.angle(bounds[c][0] - a0))
            pre, _ = schema.orbit_shape(v)
            codings[v] = GapCoding(v, schema.sigma[v], ell[v], schema.delta[v], K, piece[v],
                                   root[v], tuple(cs), tuple(bounds[c] for c in cs), pre == 0)
        return cls(tower, reduced, codings)

    # -------------------------------------------------------------- primitives

    def class_of(self, x: Fraction) -> Cls:
        return self._lam.class_of.get(x, (x,))

    def on_closure(self, v: str, x: Fraction) -> bool:
        """Whether the class of x meets the closure of the gap's piece."""
        return any(self._arcsets[v].touches(y) for y in self.class_of(x))

    def sector(self, v: str, x: Fraction) -> int | None:
        cod = self.codings[v]
        c = self.class_of(x)
        for s, cs in enumerate(cod.sectors):
            if c == cs:
                return s
        for s in range(cod.degree):
            a = cod.bounds[s][0]
            b = cod.bounds[(s + 1) % cod.degree][1]
            if in_open_arc(x, a, b):
                return s
        return None

    def _step(self, v: str, x: Fraction) -> Fraction:
        return iterate(x, self.degree, self.codings[v].return_time)

    # -------------------------------------------------------------- alpha

    def alpha(self, v: str, theta) -> Fraction:
        theta = circle.angle(theta)
        states: dict[tuple[str, Fraction], int] = {}
        digits: list[int] = []
        degs: list[int] = []
        x, w = theta, v
        while (w, x) not in states:
            if not self.on_closure(w, x):
                raise NotOnBoundary(f"{fmt(theta)}: orbit point {fmt(x)} is off the closure of {w}")
            s = self.sector(w, x)
            if s is None:
                raise NotOnBoundary(f"{fmt(theta)}: orbit point {fmt(x)} lies behind a co-root of {w}")
            states[(w, x)] = len(digits)
            digits.append(s)
            degs.append(self.codings[w].degree)
            x, w = self._step(w, x), self.codings[w].sigma
        M = states[(w, x)]
        acc, scale = Fraction(0), Fraction(1)
        for s, dd in zip(digits[M:], degs[M:]):
            scale /= dd
            acc += s * scale
        value = acc / (1 - scale)
        for s, dd in zip(reversed(digits[:M]), reversed(degs[:M])):
            value = (s + value) / dd
        return circle.angle(value)

    # -------------------------------------------------------------- inverse

    def alpha_inverse(self, v: str, t) -> Cls:
        t = circle.angle(t)
        states: dict[tuple[str, Fraction], int] = {}
        seq: list[tuple[str, int]] = []
        w, u = v, t
        while (w, u) not in states:
            states[(w, u)] = len(seq)
            dd = self.codings[w].degree
            y = u * dd
            s = y.numerator // y.denominator
            seq.append((w, s))
            u, w = y - s, self.codings[w].sigma
        M = states[(w, u)]
        current = self._solve_cycle(seq[M:], t)
        for n in range(M - 1, -1, -1):
            current = self._pull_back(seq[n], current, t)
        return current

    def _solve_cycle(self, cyc: list[tuple[str, int]], t: Fraction) -> Cls:
        offsets, o = [], 0
        for w, _ in cyc:
            offsets.append(o)
            o += self.codings[w].return_time
        P = o
        biggest = max((len(c) for c in self._lam.nontrivial), default=1)
        for rep in range(1, biggest + 1):
            cons = [(offsets[i] + j * P, w, s) for j in range(rep) for i, (w, s) in enumerate(cyc)]
            found = self._dfs(cons, P * rep)
            if found:
                break
        else:
            raise InsufficientDepth(f"no periodic boundary class carries internal angle {fmt(t)}",
                                    self.depth + P)
        if len(found) > 1:
            raise InsufficientDepth(
                f"internal angle {fmt(t)} matches {len(found)} classes: "
                + ", ".join("{" + ",".join(fmt(x) for x in c) + "}" for c in sorted(found)),
                self.depth + P)
        return found.pop()

    def _dfs(self, cons: list[tuple[int, str, int]], n: int) -> set[Cls]:
        d = self.degree
        hulls = [self.codings[w].hull(s) for _, w, s in cons]
        arcsets = [self._arcsets[w] for _, w, _ in cons]
        found: set[Cls] = set()
        digits: list[int] = []
        denom = d**n - 1

        def ok_prefix(j: int) -> bool:
            for (o, _, _), (a, b), arcs in zip(cons, hulls, arcsets):
                if o >= j:
                    continue
                val = 0
                for dig in digits[o:j]:
                    val = val * d + dig
                lo = Fraction(val, d ** (j - o))
                hi = Fraction(val + 1, d ** (j - o))
                if not _closed_arc_meets(lo, hi, a, b):
                    return False
                if not arcs.meets_interval(lo, hi):
                    return False
            return True

        def leaf() -> None:
            val = 0
            for dig in digits:
                val = val * d + dig
            theta = circle.angle(Fraction(val, denom))
            for o, w, s in cons:
                y = iterate(theta, d, o)
                if not self.on_closure(w, y) or self.sector(w, y) != s:
                    return
            found.add(self.class_of(theta))

        def rec(j: int) -> None:
            if j == n:
                leaf()
                return
            for dig in range(d):
                digits.append(dig)
                if ok_prefix(j + 1):
                    rec(j + 1)
                digits.pop()

        rec(0)
        return found

    def _pull_back(self, state: tuple[str, int], image: Cls, t: Fraction) -> Cls:
        w, s = state
        L = self.codings[w].return_time
        q = self.degree**L
        found: set[Cls] = set()
        for y in image:
            for j in range(q):
                x = (y + j) / q
                if self.on_closure(w, x) and self.sector(w, x) == s:
                    found.add(self.class_of(x))
        if len(found) != 1:
            raise InsufficientDepth(
                f"internal angle {fmt(t)} pulls back to {len(found)} classes on the boundary of {w}",
                self.depth + L)
        return found.pop()

    def codings_doc(self) -> list[dict]:
        return [self.codings[v].to_doc() for v in self.schema.vertices]


def build_codings(tower: PuzzleTower, roots: Mapping[str, Iterable] | None = None) -> AngleSystem:
    return AngleSystem.build(tower, roots)


def alpha(coding: GapCoding, theta) -> Fraction:
    return coding.system.alpha(coding.vertex, theta)


def alpha_inverse(coding: GapCoding, t) -> Cls:
    return coding.system.alpha_inverse(coding.vertex, t)


# ---------------------------------------------------------------- laminations over schemata


@dataclass
class SchemaLamination:
    """Per-vertex finite laminations, optionally carrying the towers they came from."""

    schema: MappingSchema
    laminations: dict[str, FiniteLamination]
    towers: dict[str, PuzzleTower] = field(default_factory=dict)

    @classmethod
    def trivial(cls, schema: MappingSchema) -> "SchemaLamination":
        return cls(schema, {v: FiniteLamination.build(schema.delta[v], []) for v in schema.vertices})

    @classmethod
    def from_towers(cls, schema: MappingSchema, towers: Mapping[str, PuzzleTower]) -> "SchemaLamination":
        lams = {}
        for v in schema.vertices:
            if v in towers:
                t = towers[v]
                if t.degree != schema.delta[v]:
                    raise LaminationError(f"tower at {v} has degree {t.degree}, vertex degree is {schema.delta[v]}")
                lams[v] = generated_classes(t, t.levels[-1].support)
            else:
                lams[v] = FiniteLamination.build(schema.delta[v], [])
        return cls(schema, lams, dict(towers))

    def restrict(self, supports: Mapping[str, Iterable]) -> "SchemaLamination":
        return SchemaLamination(self.schema, {v: self.laminations[v].restrict(supports.get(v, ()))
                                              for v in self.schema.vertices})


def verify_schema_lamination(sl: SchemaLamination) -> ValidationReport:
    """Each lamination is unlinked and its images sit inside classes of the next one."""
    rep = ValidationReport()
    for v in sl.schema.vertices:
        lam = sl.laminations[v]
        rep.extend(verify_lamination(lam))
        dv = sl.schema.delta[v]
        nxt = sl.laminations[sl.schema.sigma[v]]
        where = nxt.class_of
        for c in lam.nontrivial:
            img = {map_d(x, dv) for x in c}
            hit = {where[y] for y in img if y in where}
            if len(hit) > 1:
                rep.add("image of class splits across classes", None, c, f"vertex {v}")
            if not circle.consecutive_preserving(c, dv):
                rep.add("not consecutive preserving", None, c, f"vertex {v}")
    return rep


def schema_lamination_to_doc(sl: SchemaLamination) -> dict:
    return {
        "schema": schema_to_doc(sl.schema),
        "laminations": {v: lamination_to_doc(sl.laminations[v], include_singletons=True)
                        for v in sl.schema.vertices},
    }


def schema_lamination_from_doc(doc: dict) -> SchemaLamination:
    schema = schema_from_doc(doc["schema"])
    lams = {}
    for v in schema.vertices:
        raw = doc.get("laminations", {}).get(v)
        if raw is None:
            lams[v] = FiniteLamination.build(schema.delta[v], [])
        else:
            lams[v] = lamination_from_doc(raw)
    return SchemaLamination(schema, lams)


# ---------------------------------------------------------------- tuning


@dataclass
class TuneResult:
    tower: PuzzleTower
    system: AngleSystem
    depth: int
    generators: list[Cls]
    transported: dict[str, dict[Fraction, Cls]]

    @property
    def lamination(self) -> FiniteLamination:
        return generated_classes(self.tower, self.tower.levels[-1].support)


def _periodic_orbit_sets(group: set[Fraction], d: int) -> list[set[Fraction]]:
    out = [set(group)]
    cur = set(group)
    while True:
        cur = {map_d(x, d) for x in cur}
        if any(cur == g for g in out):
            return out
        out.append(cur)


def _trivial_portrait(system: AngleSystem, v: str, avoid: set[Fraction]) -> list[Fraction]:
    """A critical set for the model map at v whose transport avoids every known support."""
    delta = system.codings[v].degree
    d = system.degree
    for n in range(3, 200):
        for k in range(1, n):
            w = Fraction(k, n)
            if w.denominator != n:
                continue
            pts = [circle.angle(w / delta + Fraction(j, delta)) for j in range(delta)]
            try:
                moved = [system.alpha_inverse(v, x) for x in pts]
            except InsufficientDepth:
                continue
            if any(len(c) != 1 for c in moved):
                continue
            flat = [c[0] for c in moved]
            clean = True
            for x in flat:
                _, _, traj = circle.orbit(x, d)
                if avoid & set(traj):
                    clean = False
                    break
            if clean:
                return flat
    raise LaminationError(f"no admissible trivial portrait found at {v}")


def tune(lam0: PuzzleTower, target: SchemaLamination, depth_budget: int | None = None,
         roots: Mapping[str, Iterable] | None = None) -> TuneResult:
    """Insert the target laminations into the critical gaps of ``lam0``.

    Target vertices with a nontrivial lamination must carry a tower with a
    portrait and be fixed by sigma.  The output tower is deep enough to contain
    the transported support of every target level.
    """
    if lam0.portrait is None:
        raise LaminationError("tuning needs a tower with a critical portrait")
    base = reduce_with_gaps(lam0)
    schema = base.schema
    if (tuple(target.schema.vertices) != tuple(schema.vertices)
            or any(target.schema.delta[v] != schema.delta[v] or target.schema.sigma[v] != schema.sigma[v]
                   for v in schema.vertices)):
        raise LaminationError("target schema does not match the reduced schema of the base tower")
    needed = lam0.depth
    for v in schema.vertices:
        if target.laminations[v].nontrivial or v in target.towers:
            if v not in target.towers or target.towers[v].portrait is None:
                raise LaminationError(f"target at {v} needs a tower with a portrait")
            if schema.sigma[v] != v:
                raise LaminationError(f"nontrivial targets are supported on sigma-fixed vertices only ({v})")
            needed = max(needed, base.gaps[v].return_time * target.towers[v].depth)
    cycle_periods = [sum(base.gaps[v].return_time for v in cyc) for cyc in schema.cycles()]
    budget = depth_budget if depth_budget is not None else 3 * max(cycle_periods + [needed])
    if needed > budget:
        raise InsufficientDepth(f"target supports need depth {needed}, budget is {budget}", needed)

    step = max(g.return_time for g in base.gaps.values())
    K0 = max(lam0.depth, 2 * step + 1)
    while True:
        try:
            tower0 = lam0 if K0 <= lam0.depth else lam0.extend(K0)
            system = AngleSystem.build(tower0, roots)
            return _tune_with(system, lam0, target, needed)
        except InsufficientDepth as exc:
            if K0 >= budget:
                raise InsufficientDepth(str(exc), max(exc.needed, budget + 1)) from exc
            K0 = min(budget, max(K0 + step, exc.needed))


def _tune_with(system: AngleSystem, lam0: PuzzleTower, target: SchemaLamination, depth: int) -> TuneResult:
    d = lam0.degree
    schema = system.schema
    lev0 = lam0.levels[0]
    groups: list[set[Fraction]] = [set(c) for c in lev0.classes]
    transported: dict[str, dict[Fraction, Cls]] = {}
    for v in schema.vertices:
        tw = target.towers.get(v)
        if tw is None:
            continue
        table = transported.setdefault(v, {})
        for c in tw.levels[0].classes:
            g: set[Fraction] = set()
            for t in c:
                table[t] = system.alpha_inverse(v, t)
                g.update(table[t])
            groups.extend(_periodic_orbit_sets(g, d))
    everything = sorted({x for g in groups for x in g})
    ds = DisjointSet(everything)
    for g in groups:
        g = sorted(g)
        for x in g[1:]:
            ds.merge(g[0], x)
    level0 = FiniteLamination.build(d, [sorted(s) for s in ds.subsets()])
    avoid = set(level0.support)

    sets: list[list[Fraction]] = []
    replaced = set()
    for v in schema.vertices:
        for i, ps in enumerate(lam0.portrait):
            if all(system._arcsets[v].contains(x) for x in ps):
                replaced.add(i)
        tw = target.towers.get(v)
        if tw is not None:
            for ps in tw.portrait:
                moved: list[Fraction] = []
                for x in ps:
                    moved.extend(system.alpha_inverse(v, x))
                sets.append(moved)
        else:
            sets.append(_trivial_portrait(system, v, avoid))
    sets.extend(list(ps) for i, ps in enumerate(lam0.portrait) if i not in replaced)
    portrait = Portrait(d, sets)
    name = f"{lam0.name}*tuned" if lam0.name else "tuned"
    out = PuzzleTower.build(d, [level0.classes], portrait=portrait.sets, name=name).extend(depth)
    rep = verify_tower(out)
    if not rep.ok:
        raise LaminationError("tuned tower fails verification: " + "; ".join(rep.lines()[:3]))
    gens = [tuple(sorted(g)) for g in groups if len(g) > 1]
    return TuneResult(out, system, depth, gens, transported)


# ---------------------------------------------------------------- straightening


def straighten_combinatorial(lam: PuzzleTower, system: AngleSystem) -> SchemaLamination:
    """Push the classes of ``lam`` meeting each gap closure forward through alpha."""
    _check_admissible(lam, system.tower)
    schema = system.schema
    support = sorted({x for lv in lam.levels for x in lv.support})
    ds_all = DisjointSet(support)
    for lv in lam.levels:
        for c in lv.nontrivial:
            for x in c[1:]:
                ds_all.merge(c[0], x)
    out = {}
    for v in schema.vertices:
        values: dict[Fraction, Fraction] = {}
        for x in support:
            if not system.on_closure(v, x):
                continue
            try:
                values[x] = system.alpha(v, x)
            except NotOnBoundary:
                continue
        ds = DisjointSet(sorted(set(values.values())))
        by_root: dict[Fraction, Fraction] = {}
        for x, a in values.items():
            r = ds_all[x]
            if r in by_root:
                ds.merge(by_root[r], a)
            else:
                by_root[r] = a
        out[v] = FiniteLamination.build(schema.delta[v], [sorted(s) for s in ds.subsets()])
    return SchemaLamination(schema, out)


def _check_admissible(lam: PuzzleTower, base: PuzzleTower) -> None:
    if lam.degree != base.degree:
        raise LaminationError("towers have different degrees")
    k = min(lam.depth, base.depth)
    mine = lam.levels[k]
    for c in base.levels[k].nontrivial:
        owners = {mine.class_of.get(x) for x in c}
        if None in owners or len(owners) != 1:
            raise LaminationError(
                "tower does not contain the base lamination: class {"
                + ",".join(fmt(x) for x in c) + f"}} is split at depth {k}")
