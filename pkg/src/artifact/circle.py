"""Exact arithmetic on rational angles of R/Z and the angle map m_d.

Angles are plain ``fractions.Fraction`` values normalized into [0, 1).
Arcs are ordered pairs ``(start, end)`` read counterclockwise; ``start == end``
denotes the full circle minus that point.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from fractions import Fraction
from typing import Iterable, Sequence

Angle = Fraction
ZERO = Fraction(0)


class AngleError(ValueError):
    pass


_PQ = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def angle(value) -> Fraction:
    """Coerce ``value`` (Fraction, int, "p/q" string, or (p, q) pair) into [0, 1)."""
    if isinstance(value, Fraction):
        x = value
    elif isinstance(value, str):
        m = _PQ.match(value)
        if m is None or int(m.group(2) or 1) == 0:
            raise AngleError(f"not an exact p/q angle: {value!r}")
        x = Fraction(int(m.group(1)), int(m.group(2) or 1))
    elif isinstance(value, tuple) and len(value) == 2:
        x = Fraction(int(value[0]), int(value[1]))
    elif isinstance(value, int):
        x = Fraction(value)
    else:
        raise AngleError(f"unsupported angle value {value!r}; use exact rationals")
    return x - (x.numerator // x.denominator)


def fmt(theta: Fraction) -> str:
    theta = angle(theta)
    if theta == 0:
        return "0"
    return f"{theta.numerator}/{theta.denominator}"


def check_degree(d: int) -> int:
    if not isinstance(d, int) or isinstance(d, bool) or d < 2:
        raise AngleError(f"invalid degree {d!r}: need an integer d >= 2")
    return d


def map_d(theta: Fraction, d: int) -> Fraction:
    check_degree(d)
    x = theta * d
    return x - (x.numerator // x.denominator)


def iterate(theta: Fraction, d: int, n: int) -> Fraction:
    check_degree(d)
    x = theta * d**n
    return x - (x.numerator // x.denominator)


def preimages(theta: Fraction, d: int) -> list[Fraction]:
    check_degree(d)
    theta = angle(theta)
    return [(theta + k) / d for k in range(d)]


def orbit(theta: Fraction, d: int) -> tuple[int, int, list[Fraction]]:
    """Return (preperiod, period, trajectory up to the first repetition)."""
    check_degree(d)
    seen: dict[Fraction, int] = {}
    traj: list[Fraction] = []
    x = angle(theta)
    while x not in seen:
        seen[x] = len(traj)
        traj.append(x)
        x = map_d(x, d)
    pre = seen[x]
    return pre, len(traj) - pre, traj


def orbit_bound(theta: Fraction, d: int) -> int:
    """Denominator of theta with all prime factors shared with d removed."""
    q = angle(theta).denominator
    g = _gcd(q, d)
    while g > 1:
        q //= g
        g = _gcd(q, d)
    return q


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def is_periodic(theta: Fraction, d: int) -> bool:
    return orbit(theta, d)[0] == 0


def arc_length(a: Fraction, b: Fraction) -> Fraction:
    """Counterclockwise length of (a, b); a full turn when a == b."""
    x = b - a
    x -= x.numerator // x.denominator
    return x if x else Fraction(1)


def in_open_arc(x: Fraction, a: Fraction, b: Fraction) -> bool:
    """True iff x lies strictly inside the counterclockwise arc (a, b)."""
    if x == a or x == b:
        return False
    if a == b:
        return True
    if a < b:
        return a < x < b
    return x > a or x < b


def in_closed_arc(x: Fraction, a: Fraction, b: Fraction) -> bool:
    return x == a or x == b or in_open_arc(x, a, b)


def sort_angles(values: Iterable) -> list[Fraction]:
    return sorted({angle(v) for v in values})


def arc_index(points: Sequence[Fraction], x: Fraction) -> int:
    """Index i of the component (points[i], points[i+1]) containing x.

    ``points`` must be sorted; x must not be one of them.
    """
    i = bisect_right(points, x) - 1
    return i % len(points)


def unlinked(a: Iterable, b: Iterable) -> bool:
    """Disjoint and b inside one open component of the circle minus a."""
    sa = sort_angles(a)
    sb = sort_angles(b)
    if not sa or not sb:
        raise AngleError("unlinked needs two non-empty sets")
    if set(sa) & set(sb):
        return False
    first = arc_index(sa, sb[0])
    return all(arc_index(sa, x) == first for x in sb[1:])


def component_containing(points: Sequence[Fraction], x: Fraction) -> tuple[Fraction, Fraction]:
    """The component (a, b) of circle minus ``points`` that contains x."""
    i = arc_index(points, x)
    return points[i], points[(i + 1) % len(points)]


def consecutive_preserving(src: Sequence[Fraction], d: int) -> bool:
    """Check that m_d sends each component of circle minus ``src`` onto a component."""
    pts = sorted(src)
    img = sorted({map_d(x, d) for x in pts})
    if len(img) == 1:
        return True
    pos = {x: i for i, x in enumerate(img)}
    n = len(pts)
    for i in range(n):
        u = map_d(pts[i], d)
        v = map_d(pts[(i + 1) % n], d)
        if u == v or img[(pos[u] + 1) % len(img)] != v:
            return False
    return True


def midpoint(a: Fraction, b: Fraction) -> Fraction:
    return angle(a + arc_length(a, b) / 2)
