"""Finite laminations, puzzle towers, combinatorial pieces and their predicates.

A tower ``levels[k]`` is a finite lamination on ``E_k = m_d^{-k}(E_0)``.  Pieces
are the faces of the chord diagram of a level; faces are found by walking
elementary arcs: an arc ending at ``p`` continues from the cyclic predecessor of
``p`` inside its class.  Consecutive arcs joined through a singleton class are
merged.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

from scipy.cluster.hierarchy import DisjointSet

from . import circle
from .circle import arc_length, fmt, in_open_arc, map_d


class LaminationError(ValueError):
    pass


class ExtensionRefused(LaminationError):
    pass


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class Violation:
    condition: str
    depth: int | None
    witness: tuple
    detail: str = ""

    def describe(self) -> str:
        wit = "; ".join(_fmt_item(w) for w in self.witness)
        at = f"depth {self.depth}: " if self.depth is not None else ""
        extra = f" ({self.detail})" if self.detail else ""
        return f"{at}{self.condition}: {wit}{extra}"


def _fmt_item(item) -> str:
    if isinstance(item, Fraction):
        return fmt(item)
    if isinstance(item, (tuple, list, frozenset, set)):
        return "{" + ",".join(fmt(x) for x in sorted(item)) + "}"
    return str(item)


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, *args, **kwargs) -> None:
        self.violations.append(Violation(*args, **kwargs))

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def lines(self) -> list[str]:
        return [v.describe() for v in self.violations]


# ---------------------------------------------------------------- laminations


def _canon_classes(classes: Iterable[Iterable]) -> tuple[tuple[Fraction, ...], ...]:
    out = []
    for c in classes:
        pts = tuple(sorted({circle.angle(x) for x in c}))
        if pts:
            out.append(pts)
    out.sort()
    return tuple(out)


@dataclass(frozen=True)
class FiniteLamination:
    """An equivalence relation on a finite angle set, stored as its classes."""

    degree: int
    classes: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def build(cls, degree: int, classes: Iterable[Iterable], support: Iterable = ()) -> "FiniteLamination":
        circle.check_degree(degree)
        cl = list(_canon_classes(classes))
        seen = {x for c in cl for x in c}
        for x in support:
            x = circle.angle(x)
            if x not in seen:
                cl.append((x,))
                seen.add(x)
        cl.sort()
        return cls(degree, tuple(cl))

    @cached_property
    def support(self) -> tuple[Fraction, ...]:
        return tuple(sorted(x for c in self.classes for x in c))

    @cached_property
    def nontrivial(self) -> tuple[tuple[Fraction, ...], ...]:
        return tuple(c for c in self.classes if len(c) > 1)

    @cached_property
    def class_of(self) -> dict[Fraction, tuple[Fraction, ...]]:
        return {x: c for c in self.classes for x in c}

    def partition(self) -> frozenset[frozenset[Fraction]]:
        return frozenset(frozenset(c) for c in self.classes)

    def restrict(self, targets: Iterable) -> "FiniteLamination":
        keep = {circle.angle(t) for t in targets}
        return FiniteLamination.build(
            self.degree, [[x for x in c if x in keep] for c in self.classes]
        )

    def __len__(self) -> int:
        return len(self.classes)


def verify_lamination(lam: FiniteLamination, depth: int | None = None) -> ValidationReport:
    rep = ValidationReport()
    count: dict[Fraction, tuple] = {}
    for c in lam.classes:
        for x in c:
            if x in count:
                rep.add("classes overlap", depth, (count[x], c), f"shared angle {fmt(x)}")
            else:
                count[x] = c
    linked = _linked_pairs(lam.nontrivial)
    for a, b in linked:
        rep.add("linked classes", depth, (a, b))
    return rep


def _linked_pairs(classes: Sequence[tuple[Fraction, ...]]) -> list[tuple]:
    """Linked pairs among pairwise disjoint classes.

    A stack sweep detects whether any crossing exists in linear time; the
    quadratic scan that names every pair only runs when one does.
    """
    owner = {}
    for i, c in enumerate(classes):
        for x in c:
            owner.setdefault(x, i)
    pts = sorted(owner)
    last = {}
    for x in pts:
        last[owner[x]] = x
    stack: list[int] = []
    started: set[int] = set()
    crossing = False
    for x in pts:
        i = owner[x]
        if i not in started:
            started.add(i)
            if last[i] != x:
                stack.append(i)
            continue
        if not stack or stack[-1] != i:
            crossing = True
            break
        if last[i] == x:
            stack.pop()
    if not crossing:
        return []
    return [(a, b) for a, b in combinations(classes, 2)
            if not set(a) & set(b) and not circle.unlinked(a, b)]


# ---------------------------------------------------------------- towers


@dataclass(frozen=True)
class PuzzleTower:
    degree: int
    levels: tuple[FiniteLamination, ...]
    portrait: tuple[tuple[Fraction, ...], ...] | None = None
    name: str = ""

    @classmethod
    def build(cls, degree: int, levels: Sequence[Iterable[Iterable]], portrait=None,
              name: str = "", infer_support: bool = True) -> "PuzzleTower":
        """Assemble a tower from class lists; deeper supports default to full preimages."""
        circle.check_degree(degree)
        built: list[FiniteLamination] = []
        for k, classes in enumerate(levels):
            if isinstance(classes, FiniteLamination):
                lam = classes
            else:
                support: Iterable = ()
                if k > 0 and infer_support:
                    support = _preimage_set(built[-1].support, degree)
                lam = FiniteLamination.build(degree, classes, support)
            built.append(lam)
        if not built:
            built.append(FiniteLamination.build(degree, []))
        port = None if portrait is None else _canon_classes(portrait)
        return cls(degree, tuple(built), port, name)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def truncate(self, depth: int) -> "PuzzleTower":
        if not 0 <= depth <= self.depth:
            raise LaminationError(f"depth {depth} outside 0..{self.depth}")
        return PuzzleTower(self.degree, self.levels[: depth + 1], self.portrait, self.name)

    def extend(self, depth: int, portrait=None) -> "PuzzleTower":
        """Pull levels back to ``depth`` using an explicit critical portrait."""
        port = self.portrait if portrait is None else _canon_classes(portrait)
        if depth <= self.depth:
            return self.truncate(depth)
        if port is None:
            raise ExtensionRefused(
                "extension needs an explicit critical portrait; none was supplied")
        sectors = Portrait(self.degree, port)
        levels = list(self.levels)
        while len(levels) <= depth:
            levels.append(sectors.pullback(levels[-1]))
        return PuzzleTower(self.degree, tuple(levels), port, self.name)

    @cached_property
    def analysis(self) -> "TowerAnalysis":
        return TowerAnalysis(self)


def _preimage_set(points: Iterable[Fraction], d: int) -> list[Fraction]:
    return sorted({y for x in points for y in circle.preimages(x, d)})


def verify_tower(tower: PuzzleTower) -> ValidationReport:
    d = tower.degree
    rep = ValidationReport()
    for k, lam in enumerate(tower.levels):
        if lam.degree != d:
            rep.add("degree mismatch", k, (), f"level degree {lam.degree} != {d}")
        rep.extend(verify_lamination(lam, k))
    lam0 = tower.levels[0]
    for x in lam0.support:
        if not circle.is_periodic(x, d):
            rep.add("depth-0 support not periodic", 0, (x,))
    _check_images(rep, d, lam0, lam0, 0, require_nontrivial=False)
    for k in range(tower.depth):
        upper, lower = tower.levels[k + 1], tower.levels[k]
        want = set(_preimage_set(lower.support, d))
        have = set(upper.support)
        for x in sorted(want - have):
            rep.add("support is not the full preimage", k + 1, (x,), "missing preimage")
        for x in sorted(have - want):
            rep.add("support is not the full preimage", k + 1, (x,), "extra angle")
        _check_images(rep, d, upper, lower, k + 1, require_nontrivial=True)
    return rep


def _check_images(rep: ValidationReport, d: int, src: FiniteLamination, dst: FiniteLamination,
                  depth: int, require_nontrivial: bool) -> None:
    cls = dst.class_of
    for c in src.classes:
        img = sorted({map_d(x, d) for x in c})
        target = cls.get(img[0])
        if target is None or tuple(img) != target:
            rep.add("image of class is not a class", depth, (c, tuple(img)))
            continue
        if len(c) > 1 and not circle.consecutive_preserving(c, d):
            rep.add("not consecutive preserving", depth, (c, target))
        if require_nontrivial and len(c) > 1 and len(target) == 1:
            rep.add("non-trivial class maps to a trivial class", depth, (c, target))


# ---------------------------------------------------------------- portraits


class Portrait:
    """A critical portrait: unlinked angle sets, each collapsing to one point.

    Its faces are the ``d`` sectors used to pull classes back one level.
    """

    def __init__(self, degree: int, sets: Iterable[Iterable]):
        self.degree = d = circle.check_degree(degree)
        self.sets = _canon_classes(sets)
        crit = sum(len(s) - 1 for s in self.sets)
        if crit != d - 1:
            raise LaminationError(f"portrait criticality {crit} != d-1 = {d - 1}")
        for s in self.sets:
            if len({map_d(x, d) for x in s}) != 1:
                raise LaminationError(f"portrait set {_fmt_item(s)} does not collapse")
        lam = FiniteLamination.build(d, self.sets)
        bad = verify_lamination(lam)
        if not bad.ok:
            raise LaminationError("portrait sets are linked: " + "; ".join(bad.lines()))
        self.points = lam.support
        self.faces = _faces(lam)
        if len(self.faces) != d:
            raise LaminationError(f"portrait has {len(self.faces)} faces, expected {d}")
        for f in self.faces:
            if f.measure != Fraction(1, d):
                raise LaminationError("portrait face does not have measure 1/d")
        n = len(self.points)
        self._arc_face = [None] * n
        for fi, f in enumerate(self.faces):
            for i in f.elementary:
                self._arc_face[i] = fi
        self._point_faces: dict[Fraction, frozenset[int]] = {}
        for i, p in enumerate(self.points):
            self._point_faces[p] = frozenset({self._arc_face[i], self._arc_face[(i - 1) % n]})

    def sectors_of(self, x: Fraction) -> frozenset[int]:
        if not self.points:
            return frozenset({0})
        hit = self._point_faces.get(x)
        if hit is not None:
            return hit
        return frozenset({self._arc_face[circle.arc_index(self.points, x)]})

    def sector(self, x: Fraction) -> int:
        s = self.sectors_of(x)
        if len(s) != 1:
            raise LaminationError(f"{fmt(x)} lies on the portrait")
        return next(iter(s))

    def pullback(self, lam: FiniteLamination) -> FiniteLamination:
        d = self.degree
        pre: dict[Fraction, list[Fraction]] = {}
        for x in lam.support:
            pre[x] = circle.preimages(x, d)
        ds = DisjointSet([y for ys in pre.values() for y in ys])
        for c in lam.classes:
            groups: dict[int, list[Fraction]] = {}
            for x in c:
                for y in pre[x]:
                    for s in self.sectors_of(y):
                        groups.setdefault(s, []).append(y)
            for g in groups.values():
                for y in g[1:]:
                    ds.merge(g[0], y)
        out = FiniteLamination.build(d, [list(s) for s in ds.subsets()])
        bad = verify_lamination(out)
        if not bad.ok:
            raise LaminationError("portrait pullback produced linked classes: "
                                  + "; ".join(bad.lines()[:3]))
        return out

    def itinerary(self, x: Fraction, n: int) -> tuple[int, ...]:
        out = []
        for _ in range(n):
            out.append(self.sector(x))
            x = map_d(x, self.degree)
        return tuple(out)


# ---------------------------------------------------------------- pieces


@dataclass
class Piece:
    depth: int
    index: int
    key: Fraction
    arcs: tuple[tuple[Fraction, Fraction], ...]
    elementary: tuple[int, ...]
    boundary_classes: tuple[tuple[Fraction, ...], ...]
    measure: Fraction
    degree: int = 0
    parent: int | None = None
    image: int | None = None

    def contains(self, x: Fraction) -> bool:
        return any(in_open_arc(x, a, b) for a, b in self.arcs)

    def touches(self, x: Fraction) -> bool:
        return any(x == a or x == b or in_open_arc(x, a, b) for a, b in self.arcs)

    def label(self) -> str:
        return "+".join(f"({fmt(a)},{fmt(b)})" for a, b in self.arcs)


def _faces(lam: FiniteLamination) -> list[Piece]:
    pts = list(lam.support)
    n = len(pts)
    if n == 0:
        return [Piece(0, 0, Fraction(0), ((Fraction(0), Fraction(0)),), (), (), Fraction(1))]
    index = {x: i for i, x in enumerate(pts)}
    prev_in_class: dict[Fraction, Fraction] = {}
    for c in lam.classes:
        for i, x in enumerate(c):
            prev_in_class[x] = c[i - 1]
    nxt = [index[prev_in_class[pts[(i + 1) % n]]] for i in range(n)]
    seen = [False] * n
    faces: list[Piece] = []
    for start in range(n):
        if seen[start]:
            continue
        cycle = []
        i = start
        while not seen[i]:
            seen[i] = True
            cycle.append(i)
            i = nxt[i]
        arcs = _merge_cycle(cycle, pts, lam)
        measure = sum((arc_length(pts[i], pts[(i + 1) % n]) for i in cycle), Fraction(0))
        ends = {e for a, b in arcs for e in (a, b)}
        bclasses = tuple(sorted({lam.class_of[e] for e in ends}))
        arcs = tuple(sorted(arcs))
        faces.append(Piece(0, 0, arcs[0][0], arcs, tuple(sorted(cycle)), bclasses, measure))
    faces.sort(key=lambda p: p.arcs)
    for i, f in enumerate(faces):
        f.index = i
    return faces


def _merge_cycle(cycle: list[int], pts: list[Fraction], lam: FiniteLamination):
    n = len(pts)
    singleton = [len(lam.class_of[pts[(i + 1) % n]]) == 1 for i in cycle]
    if all(singleton):
        p = pts[cycle[0]]
        return [(p, p)]
    # rotate so that the cycle starts right after a genuine class endpoint
    r = next(j for j in range(len(cycle)) if singleton[j - 1] is False)
    cycle = cycle[r:] + cycle[:r]
    singleton = singleton[r:] + singleton[:r]
    arcs = []
    start = None
    for i, single in zip(cycle, singleton):
        if start is None:
            start = pts[i]
        if not single:
            arcs.append((start, pts[(i + 1) % n]))
            start = None
    return arcs


@dataclass
class CriticalInventory:
    depth: int
    fatou_candidates: list[Piece]
    julia_classes: list[tuple[tuple[Fraction, ...], int]]

    def total(self) -> int:
        return (sum(p.degree - 1 for p in self.fatou_candidates)
                + sum(deg - 1 for _, deg in self.julia_classes))


class DegreeMismatch(LaminationError):
    pass


class PieceLevel:
    """Pieces of one level, with lookup from elementary arcs to faces."""

    def __init__(self, depth: int, lam: FiniteLamination):
        self.depth = depth
        self.lam = lam
        self.points = list(lam.support)
        self.pieces = _faces(lam)
        for p in self.pieces:
            p.depth = depth
        self.arc_piece = [0] * max(1, len(self.points))
        for p in self.pieces:
            for i in p.elementary:
                self.arc_piece[i] = p.index
        self.index = {x: i for i, x in enumerate(self.points)}

    def piece_at(self, x: Fraction) -> int:
        """Piece containing a non-support angle x."""
        if not self.points:
            return 0
        return self.arc_piece[circle.arc_index(self.points, x)]

    def elementary_arc(self, i: int) -> tuple[Fraction, Fraction]:
        n = len(self.points)
        return self.points[i], self.points[(i + 1) % n]

    def inner_point(self, piece: int) -> Fraction:
        p = self.pieces[piece]
        if not self.points:
            return Fraction(1, 2)
        a, b = self.elementary_arc(p.elementary[0])
        return circle.midpoint(a, b)


class TowerAnalysis:
    """Pieces at every depth with parents, images and degrees."""

    def __init__(self, tower: PuzzleTower):
        self.tower = tower
        self.degree = tower.degree
        self.levels = [PieceLevel(k, lam) for k, lam in enumerate(tower.levels)]
        self.mismatches: list[str] = []
        for k in range(1, len(self.levels)):
            self._link(k)
        self._depth_zero_degrees()
        self._crit_classes = [self._critical_classes(lam) for lam in tower.levels]
        self._image0_cache: dict[int, int | None] = {}

    # depth >= 1: images are pieces, degree by measure
    def _link(self, k: int) -> None:
        d = self.degree
        up, down = self.levels[k], self.levels[k - 1]
        for p in up.pieces:
            x = up.inner_point(p.index)
            p.parent = down.piece_at(x) if down.points else 0
        for p in up.pieces:
            if not down.points:
                p.image = 0
                p.degree = int(d * p.measure / down.pieces[0].measure) if up.points else d
                continue
            counts: dict[int, int] = {}
            images = set()
            for i in p.elementary:
                a, _ = up.elementary_arc(i)
                j = down.index[map_d(a, d)]
                counts[j] = counts.get(j, 0) + 1
                images.add(down.arc_piece[j])
            if len(images) != 1:
                self.mismatches.append(f"depth {k}: piece {p.label()} maps to several pieces")
            img = min(images)
            p.image = img
            ratio = d * p.measure / down.pieces[img].measure
            if ratio.denominator != 1:
                self.mismatches.append(f"depth {k}: non-integral degree for {p.label()}")
            p.degree = int(ratio)
            expected = set(down.pieces[img].elementary)
            if set(counts) != expected or set(counts.values()) != {p.degree}:
                self.mismatches.append(f"depth {k}: arc count disagrees with degree for {p.label()}")

    # depth 0: pieces need not map onto pieces; count preimage arcs of E_1
    def _depth_zero_degrees(self) -> None:
        d = self.degree
        lv = self.levels[0]
        if not lv.points:
            lv.pieces[0].degree = d
            return
        e1 = _preimage_set(lv.points, d)
        counts: dict[tuple[int, int], int] = {}
        for i, a in enumerate(e1):
            b = e1[(i + 1) % len(e1)]
            mid = circle.midpoint(a, b)
            piece = lv.piece_at(mid)
            j = lv.index[map_d(a, d)]
            counts[(piece, j)] = counts.get((piece, j), 0) + 1
        for p in lv.pieces:
            p.degree = max(v for (q, _), v in counts.items() if q == p.index)

    def _critical_classes(self, lam: FiniteLamination):
        out = []
        for c in lam.nontrivial:
            img = {map_d(x, self.degree) for x in c}
            if len(img) < len(c):
                out.append((c, len(c) // len(img)))
        return out

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def pieces(self, k: int) -> list[Piece]:
        return self.levels[k].pieces

    def inventory(self, k: int) -> CriticalInventory:
        fat = [p for p in self.levels[k].pieces if p.degree > 1]
        return CriticalInventory(k, fat, list(self._crit_classes[k]))

    def julia_classes(self, k: int):
        return self._crit_classes[k]

    def ancestor(self, k: int, idx: int, target: int) -> int:
        while k > target:
            idx = self.levels[k].pieces[idx].parent
            k -= 1
        return idx

    def image(self, k: int, idx: int) -> tuple[int, int] | None:
        """Image piece, or None when a depth-0 piece is not mapped onto a single piece."""
        if k > 0:
            return k - 1, self.levels[k].pieces[idx].image
        if idx not in self._image0_cache:
            self._image0_cache[idx] = self._image_depth_zero(idx)
        img = self._image0_cache[idx]
        return None if img is None else (0, img)

    def _image_depth_zero(self, idx: int) -> int | None:
        d = self.degree
        lv = self.levels[0]
        if not lv.points:
            return 0
        n = len(lv.points)
        touched: set[int] = set()
        for i in lv.pieces[idx].elementary:
            a, b = lv.elementary_arc(i)
            if arc_length(a, b) * d >= 1:
                return None if len(lv.pieces) > 1 else 0
            j = lv.index[map_d(a, d)]
            end = lv.index[map_d(b, d)]
            while True:
                touched.add(lv.arc_piece[j])
                j = (j + 1) % n
                if j == end:
                    break
        return touched.pop() if len(touched) == 1 else None


def pieces(tower: PuzzleTower, k: int) -> list[Piece]:
    if not 0 <= k <= tower.depth:
        raise LaminationError(f"depth {k} outside 0..{tower.depth}")
    return tower.analysis.pieces(k)


def containment(tower: PuzzleTower, k: int) -> dict[int, int]:
    """Map from depth-(k+1) piece index to the depth-k piece containing it."""
    return {p.index: p.parent for p in tower.analysis.pieces(k + 1)}


def total_degree_check(tower: PuzzleTower, k: int) -> tuple[bool, CriticalInventory]:
    an = tower.analysis
    inv = an.inventory(k)
    ok = inv.total() == tower.degree - 1
    prefix = f"depth {k}:"
    if any(m.startswith(prefix) for m in an.mismatches):
        ok = False
    return ok, inv


# ---------------------------------------------------------------- generated laminations


def generated_classes(tower: PuzzleTower, targets: Iterable, report_shallow: bool = False):
    """Restriction of the lamination generated by all levels to ``targets``."""
    targ = sorted({circle.angle(t) for t in targets})
    everything = set(targ)
    for lam in tower.levels:
        everything.update(lam.support)
    ds = DisjointSet(sorted(everything))
    for lam in tower.levels:
        for c in lam.nontrivial:
            for x in c[1:]:
                ds.merge(c[0], x)
    shallow = tuple(t for t in targ if not any(t in lam.class_of for lam in tower.levels))
    groups: dict[Fraction, list[Fraction]] = {}
    for t in targ:
        groups.setdefault(ds[t], []).append(t)
    lam = FiniteLamination.build(tower.degree, groups.values())
    if report_shallow:
        return lam, shallow
    return lam


# ---------------------------------------------------------------- gap chains


@dataclass
class GapChain:
    """A critical-orbit gap followed through its piece representatives.

    ``members`` lists (depth, piece) for the gap itself and the images before
    the next critical gap is reached.
    """

    ident: int
    piece: int
    depth: int
    degree: int
    sigma: int | None = None
    return_time: int | None = None
    members: list[tuple[int, int]] = field(default_factory=list)
    key: Fraction = Fraction(0)


@dataclass
class GapAnalysis:
    depth: int
    gaps: list[GapChain]
    unresolved: list[tuple[int, int, str]]

    @property
    def resolved(self) -> bool:
        return not self.unresolved and bool(self.gaps)

    def tracked(self) -> list[tuple[int, int, int, int]]:
        """(gap id, member position, depth, piece) for every tracked gap."""
        out = []
        for g in self.gaps:
            for j, (k, idx) in enumerate(g.members):
                out.append((g.ident, j, k, idx))
        return out


def track_gaps(tower: PuzzleTower) -> GapAnalysis:
    """Follow every critical depth-K piece forward until it meets a critical piece."""
    an = tower.analysis
    K = an.depth
    crit = [p.index for p in an.pieces(K) if p.degree > 1]
    orbits: dict[int, list[tuple[int, int]]] = {}
    for c in crit:
        seq = [(K, c)]
        seen = set()
        while True:
            k, idx = seq[-1]
            if k == 0:
                if idx in seen:
                    break
                seen.add(idx)
            nxt = an.image(k, idx)
            if nxt is None:
                break
            seq.append(nxt)
        orbits[c] = seq
    gaps: list[GapChain] = []
    unresolved: list[tuple[int, int, str]] = []
    by_piece: dict[int, GapChain] = {}
    for i, c in enumerate(crit):
        p = an.pieces(K)[c]
        g = GapChain(i, c, K, p.degree)
        g.key = p.key
        by_piece[c] = g
    for c in crit:
        g = by_piece[c]
        seq = orbits[c]
        hit = None
        for j in range(1, len(seq)):
            k, idx = seq[j]
            cands = [c2 for c2 in crit if an.ancestor(K, c2, k) == idx]
            if len(cands) == 1:
                hit = (j, cands[0])
                break
            if len(cands) > 1:
                unresolved.append((K, c, f"image after {j} steps meets {len(cands)} critical pieces"))
                break
        if hit is None:
            if not any(u[1] == c for u in unresolved):
                unresolved.append((K, c, "orbit leaves the available depth before returning"))
            continue
        g.return_time, target = hit
        g.sigma = by_piece[target].ident
        g.members = seq[: g.return_time]
    gaps = [by_piece[c] for c in crit if by_piece[c].sigma is not None]
    ids = {g.ident for g in gaps}
    for g in gaps:
        if g.sigma not in ids:
            unresolved.append((K, g.piece, "maps to an unresolved critical piece"))
    return GapAnalysis(K, gaps, unresolved)


def separation_depth(tower: PuzzleTower, schema_hint=None) -> int | None:
    """Smallest depth at which every tracked gap sits in a piece of its own degree."""
    ga = track_gaps(tower)
    if not ga.resolved:
        return None
    if schema_hint is not None and not _matches_hint(ga, schema_hint):
        return None
    an = tower.analysis
    tracked = []
    for g in ga.gaps:
        for j, (k, idx) in enumerate(g.members):
            tracked.append((k, idx, g.degree if j == 0 else 1))
    for depth in range(0, an.depth + 1):
        good = True
        for k, idx, deg in tracked:
            if k < depth:
                continue
            if an.pieces(depth)[an.ancestor(k, idx, depth)].degree != deg:
                good = False
                break
        if good:
            return depth
    return None


def _matches_hint(ga: GapAnalysis, hint) -> bool:
    degs = sorted(g.degree for g in ga.gaps)
    return degs == sorted(hint.delta[v] for v in hint.vertices)


@dataclass
class PrimitivityResult:
    primitive: bool
    depth: int
    witness: tuple | None = None

    def describe(self) -> str:
        if self.primitive:
            return f"primitive_to_depth {self.depth} (finite-depth certificate only)"
        cls, g1, g2 = self.witness
        return f"not primitive: class {_fmt_item(cls)} touches gaps {g1} and {g2}"


def _tracked_pieces(ga: GapAnalysis):
    out = []
    for g in ga.gaps:
        for j, (k, idx) in enumerate(g.members):
            out.append((f"g{g.ident}.{j}", k, idx))
    return out


def primitivity_check(tower: PuzzleTower, K: int | None = None) -> PrimitivityResult:
    if K is not None:
        tower = tower.truncate(K)
    ga = track_gaps(tower)
    an = tower.analysis
    tracked = _tracked_pieces(ga)
    for (n1, k1, i1), (n2, k2, i2) in combinations(tracked, 2):
        k = min(k1, k2)
        a1 = an.ancestor(k1, i1, k)
        a2 = an.ancestor(k2, i2, k)
        if a1 == a2:
            continue
        p1, p2 = an.pieces(k)[a1], an.pieces(k)[a2]
        shared = sorted(set(p1.boundary_classes) & set(p2.boundary_classes))
        shared = [c for c in shared if len(c) > 1]
        if shared:
            return PrimitivityResult(False, tower.depth, (shared[0], p1.label(), p2.label()))
    return PrimitivityResult(True, tower.depth)


@dataclass
class ObstructionResult:
    clear: bool
    witness: tuple | None = None

    def describe(self) -> str:
        if self.clear:
            return "clear"
        cls, depth, gap, siblings = self.witness
        text = f"critical class {_fmt_item(cls)} (depth {depth}) lies on the boundary of gap {gap}"
        if siblings:
            text += " and of the sibling preimage " + ", ".join(siblings)
        return text


def renormalizability_obstruction(tower: PuzzleTower) -> ObstructionResult:
    """Look for a Julia critical class on the boundary of a critical-orbit gap.

    Siblings are the other pieces with the same image as the gap whose
    closures also meet the class; a hit there means the first return has
    larger degree than the gap accounts for.
    """
    an = tower.analysis
    ga = track_gaps(tower)
    tracked = _tracked_pieces(ga)
    for k in range(an.depth + 1):
        for c, _deg in an.julia_classes(k):
            for name, kt, it in tracked:
                if kt < k:
                    continue
                lv = an.levels[kt]
                piece = lv.pieces[it]
                big = lv.lam.class_of.get(c[0])
                if big is None or big not in piece.boundary_classes:
                    continue
                sib = []
                if kt > 0:
                    sib = [q.label() for q in lv.pieces
                           if q.index != it and q.image == piece.image and big in q.boundary_classes]
                return ObstructionResult(False, (c, k, f"{name} {piece.label()}", tuple(sib)))
    return ObstructionResult(True)


# ---------------------------------------------------------------- random towers


def random_portrait(rng: random.Random, d: int, prime: int = 10007) -> Portrait:
    """Random critical portrait made of d-1 chords with generic endpoints."""
    sets: list[list[Fraction]] = []
    for _ in range(d - 1):
        lam = FiniteLamination.build(d, sets)
        faces = [f for f in _faces(lam) if f.measure >= Fraction(2, d)]
        face = rng.choice(faces)
        steps = int(face.measure * d)
        j = rng.randrange(1, steps)
        a, b = rng.choice(face.arcs)
        span = arc_length(a, b)
        x = circle.angle(a + span * Fraction(rng.randrange(1, prime), prime))
        y = _walk_face(face, x, Fraction(j, d))
        sets.append([x, y])
    return Portrait(d, sets)


def _walk_face(face: Piece, x: Fraction, dist: Fraction) -> Fraction:
    arcs = sorted(face.arcs, key=lambda ab: 0 if in_open_arc(x, *ab) else 1)
    a, b = arcs[0]
    i = face.arcs.index((a, b))
    order = list(face.arcs[i:]) + list(face.arcs[:i])
    left = arc_length(x, b)
    if dist < left:
        return circle.angle(x + dist)
    dist -= left
    for a2, b2 in order[1:] + order[:1]:
        ln = arc_length(a2, b2)
        if dist < ln:
            return circle.angle(a2 + dist)
        dist -= ln
    raise LaminationError("walk left the face")


def itinerary_lamination(portrait: Portrait, points: Iterable[Fraction]) -> FiniteLamination:
    """Group periodic angles by their sector itineraries."""
    d = portrait.degree
    groups: dict[tuple, list[Fraction]] = {}
    for x in points:
        _, per, _ = circle.orbit(x, d)
        groups.setdefault(portrait.itinerary(x, per * 4), []).append(x)
    return FiniteLamination.build(d, groups.values())


def random_tower(rng: random.Random, d: int, depth: int, max_period: int = 4,
                 tries: int = 50) -> PuzzleTower:
    """A valid random tower: periodic orbits grouped by itinerary, then pulled back."""
    for _ in range(tries):
        port = random_portrait(rng, d)
        pts: set[Fraction] = set()
        for _ in range(rng.randint(1, 2)):
            per = rng.randint(1, max_period)
            den = d**per - 1
            x = Fraction(rng.randrange(0, den), den)
            _, _, traj = circle.orbit(x, d)
            pts.update(traj)
        lam0 = itinerary_lamination(port, sorted(pts))
        tower = PuzzleTower(d, (lam0,), port.sets)
        if not verify_tower(tower).ok:
            continue
        try:
            tower = tower.extend(depth)
        except LaminationError:
            continue
        if verify_tower(tower).ok:
            return tower
    raise LaminationError("could not draw a valid random tower")


# ---------------------------------------------------------------- documents


def lamination_to_doc(lam: FiniteLamination, include_singletons: bool = False) -> dict:
    cl = lam.classes if include_singletons else lam.nontrivial
    return {"degree": lam.degree, "levels": [{"classes": [[fmt(x) for x in c] for c in cl]}]}


def tower_to_doc(tower: PuzzleTower, include_singletons: bool = False) -> dict:
    levels = []
    for k, lam in enumerate(tower.levels):
        keep_all = include_singletons or k == 0
        cl = lam.classes if keep_all else lam.nontrivial
        levels.append({"classes": [[fmt(x) for x in c] for c in cl]})
    doc = {"degree": tower.degree, "levels": levels}
    if tower.portrait is not None:
        doc["portrait"] = [[fmt(x) for x in s] for s in tower.portrait]
    if tower.name:
        doc["name"] = tower.name
    return doc


def tower_from_doc(doc: dict) -> PuzzleTower:
    try:
        d = int(doc["degree"])
        levels = [[list(c) for c in lv.get("classes", [])] for lv in doc["levels"]]
    except (KeyError, TypeError) as exc:
        raise LaminationError(f"malformed lamination document: {exc}") from exc
    portrait = doc.get("portrait")
    return PuzzleTower.build(d, levels, portrait=portrait, name=doc.get("name", ""))


def lamination_from_doc(doc: dict) -> FiniteLamination:
    tower = tower_from_doc(doc)
    return tower.levels[-1]
