"""Named examples: combinatorial towers, schema polynomials and schema documents.

Every fixture is addressable by name and serializes to the same JSON documents
the command line reads, so ``emit`` followed by a parse reproduces the value.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

from .dynamics import SchemaPolynomial, monic_centered, polynomial_to_doc
from .lamination import PuzzleTower, tower_to_doc
from .schema import T_ADJ, T_BIT, T_CAP, T_DIS, MappingSchema, schema_to_doc, single


class FixtureError(KeyError):
    pass


@dataclass(frozen=True)
class Fixture:
    name: str
    kind: str  # "tower", "polynomial", "schema" or "lamination"
    summary: str
    make: Callable[[], object]

    def build(self):
        return self.make()

    def document(self) -> dict:
        obj = self.make()
        if self.kind == "tower":
            return tower_to_doc(obj)
        if self.kind == "polynomial":
            doc = polynomial_to_doc(obj)
            doc["name"] = self.name
            return doc
        if self.kind == "schema":
            return schema_to_doc(obj)
        return obj


# ---------------------------------------------------------------- towers

TOWER_DEPTH = 4


def _tower(name, d, level0, portrait, depth=TOWER_DEPTH):
    return PuzzleTower.build(d, [level0], portrait=portrait, name=name).extend(depth)


def basilica(depth: int = TOWER_DEPTH) -> PuzzleTower:
    return _tower("basilica", 2, [["1/3", "2/3"]], [["1/5", "7/10"]], depth)


def rabbit(depth: int = TOWER_DEPTH) -> PuzzleTower:
    return _tower("rabbit", 2, [["1/7", "2/7", "4/7"]], [["5/63", "73/126"]], depth)


def airplane(depth: int = TOWER_DEPTH) -> PuzzleTower:
    # the whole period-3 orbit of the characteristic chord {3/7, 4/7}
    return _tower("airplane", 2, [["3/7", "4/7"], ["1/7", "6/7"], ["2/7", "5/7"]],
                  [["2/9", "13/18"]], depth)


def z4_minus_1(depth: int = TOWER_DEPTH) -> PuzzleTower:
    return _tower("z4-1", 4, [["2/5", "3/5"]], [["7/60", "11/30", "37/60", "13/15"]], depth)


def cubic_adjacent(depth: int = TOWER_DEPTH) -> PuzzleTower:
    """z^3 + 3z/2: two superattracting fixed basins touching along {0, 1/2}."""
    return _tower("z3+3z/2", 3, [["0", "1/2"]], [["1/24", "3/8"], ["13/24", "7/8"]], depth)


def capture_clear(depth: int = TOWER_DEPTH) -> PuzzleTower:
    """P_a at a = -1/4: the free critical point is captured by the 2-cycle basin."""
    return _tower("capture-a0", 3, [["1/8", "3/8"]],
                  [["1/20", "23/60"], ["29/60", "49/60"]], depth)


def capture_obstructed(depth: int = TOWER_DEPTH) -> PuzzleTower:
    """P_a at a = (11 - 3 sqrt 17)/4: a critical class touches two sibling pieces."""
    return _tower("capture-a1", 3, [["1/8", "3/8"]],
                  [["1/20", "23/60"], ["11/24", "19/24"]], depth)


def linked_chords() -> dict:
    """Deliberately invalid document: two crossing diameters."""
    return {"degree": 2, "levels": [{"classes": [["0", "1/2"], ["1/4", "3/4"]]}],
            "name": "linked-chords"}


GENERATOR_TOWERS = {
    "basilica": basilica,
    "rabbit": rabbit,
    "airplane": airplane,
    "z4-1": z4_minus_1,
    "z3+3z/2": cubic_adjacent,
    "capture-a0": capture_clear,
    "capture-a1": capture_obstructed,
}


# ---------------------------------------------------------------- polynomials

RABBIT_C = complex(-0.12256116687665362, 0.7448617666197442)
AIRPLANE_C = -1.7548776662466927


def quadratic(c: complex) -> SchemaPolynomial:
    return SchemaPolynomial.single(c)


def capture_family(a: float) -> SchemaPolynomial:
    """Monic centered conjugate of a z^3 - (a+1) z^2 + 1."""
    cs, _, _ = monic_centered([a, -(a + 1), 0, 1])
    return SchemaPolynomial.single(*cs[2:])


CAPTURE_A0 = -0.25
CAPTURE_A1 = (11 - 3 * math.sqrt(17)) / 4


def f_mu_raw(mu: complex) -> tuple[list[complex], complex]:
    """Uncentered coefficients z^3 - b z^2 + c z (leading first) and the fixed point alpha.

    alpha has multiplier mu; mu = 1 is excluded.
    """
    mu = complex(mu)
    zeta, xi = mu.real, mu.imag
    if abs(mu - 1) < 1e-14:
        raise ValueError("mu = 1 is excluded")
    root = cmath.sqrt(2 * (1 - zeta))
    b = 2 * xi / root
    c = -0.25 * (2 * zeta - 6 + 2 * xi * xi / (zeta - 1))
    alpha = xi / root + 1j * cmath.sqrt((1 - zeta) / 2)
    return [1, -b, c, 0], alpha


def f_mu(mu: complex) -> SchemaPolynomial:
    """Centered shift of the f_mu cubic."""
    cs, _, _ = monic_centered(f_mu_raw(mu)[0])
    return SchemaPolynomial.single(*cs[2:])


# odd degree-7 pair, coefficients of z^7, z^5, z^3, z^1
DEG7_G0 = (0.45903708864875686, 2.4180741772975134, 2.9590370886487567, 0.0)
DEG7_G1 = (0.08182176524267837, 0.40478926901827333, 0.06411324230851184, -1.2588542614670832)


def odd_septic(coeffs: tuple[float, float, float, float]) -> SchemaPolynomial:
    a7, a5, a3, a1 = coeffs
    full = [a7, 0, a5, 0, a3, 0, a1, 0]
    cs, _, _ = monic_centered(full)
    return SchemaPolynomial.single(*cs[2:])


def capture_pair(c0: complex, c1: complex) -> SchemaPolynomial:
    """Quadratic pair over the capture schema: v1 feeds into the fixed vertex v0."""
    return SchemaPolynomial(T_CAP, {"v0": (complex(c0),), "v1": (complex(c1),)})


def disjoint_pair(c0: complex, c1: complex) -> SchemaPolynomial:
    return SchemaPolynomial(T_DIS, {"v0": (complex(c0),), "v1": (complex(c1),)})


POLYNOMIALS: dict[str, Callable[[], SchemaPolynomial]] = {
    "z2": lambda: quadratic(0),
    "chebyshev": lambda: quadratic(-2),
    "basilica-poly": lambda: quadratic(-1),
    "rabbit-poly": lambda: quadratic(RABBIT_C),
    "airplane-poly": lambda: quadratic(AIRPLANE_C),
    "z4-1-poly": lambda: SchemaPolynomial.single(0, 0, -1),
    "z3+3z/2-poly": lambda: SchemaPolynomial.single(1.5, 0),
    "capture-a0-poly": lambda: capture_family(CAPTURE_A0),
    "capture-a1-poly": lambda: capture_family(CAPTURE_A1),
    "f-mu-0": lambda: f_mu(0),
    "deg7-g0": lambda: odd_septic(DEG7_G0),
    "deg7-g1": lambda: odd_septic(DEG7_G1),
    "capture-pair": lambda: capture_pair(-1, 0.25),
    "disjoint-pair": lambda: disjoint_pair(-1, 0),
}


SCHEMATA: dict[str, MappingSchema] = {
    "z4-1-schema": single(4),
    "t-adj": T_ADJ,
    "t-bit": T_BIT,
    "t-cap": T_CAP,
    "t-dis": T_DIS,
}


# ---------------------------------------------------------------- registry


def _registry() -> dict[str, Fixture]:
    reg: dict[str, Fixture] = {}
    for name, fn in GENERATOR_TOWERS.items():
        reg[name] = Fixture(name, "tower", (fn.__doc__ or f"{name} tower").strip().splitlines()[0], fn)
    reg["linked-chords"] = Fixture("linked-chords", "lamination", "invalid: crossing diameters",
                                   linked_chords)
    notes = {
        "z2": "z^2", "chebyshev": "z^2 - 2", "basilica-poly": "z^2 - 1",
        "rabbit-poly": "Douady rabbit", "airplane-poly": "airplane, real period 3",
        "z4-1-poly": "z^4 - 1", "z3+3z/2-poly": "z^3 + 3z/2",
        "capture-a0-poly": "capture family at a = -1/4",
        "capture-a1-poly": "capture family at a = (11 - 3 sqrt 17)/4",
        "f-mu-0": "f_mu at mu = 0", "deg7-g0": "odd degree 7, first of pair",
        "deg7-g1": "odd degree 7, second of pair",
        "capture-pair": "quadratic pair over the capture schema",
        "disjoint-pair": "quadratic pair over the disjoint schema",
    }
    for name, fn in POLYNOMIALS.items():
        reg[name] = Fixture(name, "polynomial", notes[name], fn)
    for name, sch in SCHEMATA.items():
        reg[name] = Fixture(name, "schema", f"schema {name}", lambda s=sch: s)
    return reg


REGISTRY = _registry()


def names() -> list[str]:
    return list(REGISTRY)


def get(name: str) -> Fixture:
    try:
        return REGISTRY[name]
    except KeyError:
        raise FixtureError(f"unknown fixture {name!r}") from None


def emit(name: str) -> dict:
    return get(name).document()
