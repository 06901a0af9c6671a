from fractions import Fraction

import pytest

from artifact import fixtures
from artifact.angle_system import (
    AngleSystem,
    InsufficientDepth,
    NotOnBoundary,
    SchemaLamination,
    alpha,
    alpha_inverse,
    schema_lamination_from_doc,
    schema_lamination_to_doc,
    straighten_combinatorial,
    tune,
    verify_schema_lamination,
)
from artifact.circle import angle, iterate
from artifact.lamination import LaminationError, PuzzleTower, generated_classes, verify_tower
from artifact.schema import reduce_from_tower


def cls(*xs):
    return tuple(angle(x) for x in xs)


@pytest.fixture(scope="module")
def basilica_system():
    return AngleSystem.build(fixtures.basilica(6))


@pytest.fixture(scope="module")
def rabbit_system():
    return AngleSystem.build(fixtures.rabbit(6))


def test_coding_layout(basilica_system):
    cod = basilica_system.codings["v0"]
    assert cod.root == cls("1/3", "2/3")
    assert cod.sectors == (cls("1/3", "2/3"), cls("1/6", "5/6"))
    assert cod.degree == 2 and cod.return_time == 2 and cod.periodic


def test_root_class_has_angle_zero(basilica_system, rabbit_system):
    assert basilica_system.alpha("v0", "1/3") == 0
    assert basilica_system.alpha("v0", "2/3") == 0
    assert rabbit_system.alpha("v0", "4/7") == 0


def test_coroot_is_one_half(basilica_system, rabbit_system):
    assert basilica_system.alpha("v0", "1/6") == Fraction(1, 2)
    assert basilica_system.alpha_inverse("v0", "1/2") == cls("1/6", "5/6")
    assert rabbit_system.alpha_inverse("v0", "1/2") == cls("1/14", "9/14", "11/14")
    assert rabbit_system.alpha("v0", "9/14") == Fraction(1, 2)


def test_period_two_internal_angle(basilica_system):
    c = basilica_system.alpha_inverse("v0", "1/3")
    assert c == cls("4/5")
    # two returns bring it back
    assert iterate(c[0], 2, 4) == c[0]
    assert basilica_system.alpha("v0", iterate(c[0], 2, 2)) == Fraction(2, 3)


@pytest.mark.parametrize("t", ["0", "1/2", "1/4", "3/4", "1/3", "1/6", "5/7", "3/10"])
def test_round_trips(basilica_system, rabbit_system, t):
    for system in (basilica_system, rabbit_system):
        c = system.alpha_inverse("v0", t)
        assert all(system.alpha("v0", x) == angle(t) for x in c)


def test_equivariance(rabbit_system):
    for t in ["1/5", "2/9", "7/12"]:
        (x, *_) = rabbit_system.alpha_inverse("v0", t)
        back = iterate(x, 2, 3)
        assert rabbit_system.alpha("v0", back) == angle(t) * 2 % 1


def test_module_level_helpers(basilica_system):
    cod = basilica_system.codings["v0"]
    assert alpha(cod, "1/6") == Fraction(1, 2)
    assert alpha_inverse(cod, "1/2") == cls("1/6", "5/6")


def test_off_boundary(basilica_system):
    with pytest.raises(NotOnBoundary):
        basilica_system.alpha("v0", "0")


def test_shallow_tower_refuses():
    system = AngleSystem.build(fixtures.rabbit(2))
    with pytest.raises(InsufficientDepth) as info:
        system.alpha_inverse("v0", "1/4")
    assert info.value.needed > 2
    deep = AngleSystem.build(fixtures.rabbit(info.value.needed))
    (x, *_) = deep.alpha_inverse("v0", "1/4")
    assert deep.alpha("v0", x) == Fraction(1, 4)


def test_explicit_root():
    sys_default = AngleSystem.build(fixtures.z4_minus_1(4))
    assert sys_default.codings["v0"].root == cls("2/15")
    # the fixed boundary classes of the quartic gap: one per external marking
    for root in (["2/5", "3/5"], ["2/15"], ["13/15"]):
        other = AngleSystem.build(fixtures.z4_minus_1(4), roots={"v0": root})
        assert other.codings["v0"].root == cls(*root)
        assert other.alpha("v0", root[0]) == 0
    with pytest.raises(LaminationError):
        AngleSystem.build(fixtures.z4_minus_1(4), roots={"v0": ["23/60"]})


def test_two_vertex_codings():
    system = AngleSystem.build(fixtures.cubic_adjacent(6))
    assert set(system.codings) == {"v0", "v1"}
    for v in ("v0", "v1"):
        assert system.alpha("v0" if v == "v0" else "v1", system.codings[v].root[0]) == 0
    assert system.alpha_inverse("v1", "1/3") == cls("5/8")


# ---------------------------------------------------------------- tuning


def _target(base: PuzzleTower, towers=None) -> SchemaLamination:
    return SchemaLamination.from_towers(reduce_from_tower(base), towers or {})


def test_trivial_tuning_keeps_base():
    base = fixtures.basilica(2)
    res = tune(base, _target(base))
    support = base.levels[-1].support
    got = generated_classes(res.tower, support)
    want = generated_classes(base, support)
    assert got.partition() == want.partition()


def _closure(groups):
    """Plain transitive closure of overlapping sets."""
    out: list[set] = []
    for g in groups:
        g = set(g)
        hits = [h for h in out if h & g]
        for h in hits:
            g |= h
            out.remove(h)
        out.append(g)
    return {frozenset(g) for g in out}


def test_basilica_rabbit_tuning_contains_transported_triangle():
    base = fixtures.basilica(2)
    target = _target(base, {"v0": fixtures.rabbit(2)})
    res = tune(base, target, depth_budget=12)
    system = res.system
    triangle = set()
    for t in ("1/7", "2/7", "4/7"):
        triangle.update(system.alpha_inverse("v0", t))
    assert triangle == set(cls("11/63", "44/63", "50/63"))
    lam = res.lamination
    assert any(triangle <= set(c) for c in lam.nontrivial)
    assert verify_tower(res.tower).ok

    # every generator and base class sits inside one output class
    gens = [set(c) for lv in base.levels for c in lv.nontrivial]
    for k in range(3):
        for c in fixtures.rabbit(2).levels[k].nontrivial:
            moved = set()
            for t in c:
                moved.update(system.alpha_inverse("v0", t))
            gens.append(moved)
    owners = res.tower.levels[-1].class_of
    for g in _closure(gens):
        assert len({owners[x] for x in g}) == 1


def test_tuning_refuses_beyond_budget():
    base = fixtures.basilica(2)
    target = _target(base, {"v0": fixtures.rabbit(4)})
    with pytest.raises(InsufficientDepth) as info:
        tune(base, target, depth_budget=4)
    assert info.value.needed == 8


def test_tuning_needs_portrait():
    base = PuzzleTower.build(2, [[["1/3", "2/3"]]])
    with pytest.raises(LaminationError):
        tune(base, SchemaLamination.trivial(reduce_from_tower(fixtures.basilica())))


def test_tuning_checks_schema():
    with pytest.raises(LaminationError):
        tune(fixtures.basilica(), _target(fixtures.cubic_adjacent()))


# ---------------------------------------------------------------- straightening


def test_straighten_base_is_trivial(basilica_system):
    sl = straighten_combinatorial(fixtures.basilica(6), basilica_system)
    assert all(not lam.nontrivial for lam in sl.laminations.values())


def test_straighten_recovers_rabbit():
    base = fixtures.basilica(2)
    res = tune(base, _target(base, {"v0": fixtures.rabbit(1)}), depth_budget=12)
    sl = straighten_combinatorial(res.tower, res.system)
    got = {frozenset(c) for c in sl.laminations["v0"].nontrivial}
    assert frozenset(cls("1/7", "2/7", "4/7")) in got
    assert verify_schema_lamination(sl).ok


def test_straighten_rejects_unrelated_tower(basilica_system):
    with pytest.raises(LaminationError):
        straighten_combinatorial(fixtures.airplane(6), basilica_system)


def test_schema_lamination_document_round_trip():
    base = fixtures.basilica(2)
    sl = _target(base, {"v0": fixtures.rabbit(2)})
    back = schema_lamination_from_doc(schema_lamination_to_doc(sl))
    assert back.schema == sl.schema
    assert back.laminations["v0"].partition() == sl.laminations["v0"].partition()
