from fractions import Fraction

import pytest

from artifact import fixtures
from artifact.schema import (
    T_ADJ,
    T_BIT,
    T_CAP,
    T_DIS,
    MappingSchema,
    SchemaError,
    brute_force_markings,
    classify_cubic,
    enumerate_markings,
    model_dimension,
    reduce_from_tower,
    reduce_with_gaps,
    schema_from_doc,
    schema_to_doc,
    single,
)


def test_reduce_basilica():
    red = reduce_with_gaps(fixtures.basilica())
    s = red.schema
    assert s.vertices == ("v0",) and s.sigma == {"v0": "v0"} and s.delta == {"v0": 2}
    assert s.return_times == {"v0": 2}


def test_reduce_capture():
    s = reduce_from_tower(fixtures.capture_clear())
    assert s.sigma == {"v0": "v0", "v1": "v0"} and s.delta == {"v0": 2, "v1": 2}
    assert s.return_times == {"v0": 2, "v1": 1}
    assert classify_cubic(s) == "capture"


def test_reduce_quartic():
    s = reduce_from_tower(fixtures.z4_minus_1())
    assert s.sigma == {"v0": "v0"} and s.delta == {"v0": 4}


def test_reduce_cubic_pair_of_fixed_gaps():
    s = reduce_from_tower(fixtures.cubic_adjacent())
    assert classify_cubic(s) == "disjoint"


def test_reduce_refuses_without_separation():
    with pytest.raises(SchemaError, match="separation"):
        reduce_from_tower(fixtures.capture_clear(0))


@pytest.mark.parametrize("schema,kind", [(T_ADJ, "adjacent"), (T_BIT, "bitransitive"),
                                         (T_CAP, "capture"), (T_DIS, "disjoint")])
def test_classify_cubic(schema, kind):
    assert classify_cubic(schema) == kind
    swapped = schema.relabel({v: f"w{len(schema.vertices) - i}" for i, v in enumerate(schema.vertices)})
    assert classify_cubic(swapped) == kind


def test_classify_rejects_non_cubic():
    with pytest.raises(SchemaError):
        classify_cubic(single(2))
    with pytest.raises(SchemaError):
        classify_cubic(single(4))


@pytest.mark.parametrize("schema,count", [(single(4), 3), (T_ADJ, 2), (T_BIT, 3), (T_CAP, 2), (T_DIS, 1)])
def test_marking_counts(schema, count):
    ms = enumerate_markings(schema)
    assert len(ms) == count
    assert ms == brute_force_markings(schema)
    for m in ms:
        th = m.as_dict()
        for v in schema.vertices:
            assert (schema.delta[v] * th[v] - th[schema.sigma[v]]).denominator == 1


def test_quartic_markings_are_thirds():
    got = [m.as_dict()["v0"] for m in enumerate_markings(single(4))]
    assert got == [Fraction(0), Fraction(1, 3), Fraction(2, 3)]


def test_markings_need_reduced():
    s = MappingSchema(("a", "b"), {"a": "b", "b": "b"}, {"a": 1, "b": 2})
    assert not s.reduced
    with pytest.raises(SchemaError):
        enumerate_markings(s)


@pytest.mark.parametrize("schema,dim", [(T_ADJ, 2), (T_DIS, 2), (single(2), 1), (single(4), 3)])
def test_model_dimension(schema, dim):
    assert model_dimension(schema) == dim


def test_schema_validation():
    with pytest.raises(SchemaError):
        MappingSchema(("a",), {"a": "b"}, {"a": 2})
    with pytest.raises(SchemaError):
        MappingSchema(("a",), {"a": "a"}, {"a": 0})
    with pytest.raises(SchemaError):
        MappingSchema((), {}, {})


def test_orbit_shape_and_cycles():
    assert T_CAP.orbit_shape("v1") == (1, 1)
    assert T_BIT.cycles() == [("v0", "v1")]
    assert T_DIS.cycles() == [("v0",), ("v1",)]


@pytest.mark.parametrize("schema", [T_ADJ, T_BIT, T_CAP, T_DIS, reduce_from_tower(fixtures.basilica())])
def test_document_round_trip(schema):
    assert schema_from_doc(schema_to_doc(schema)) == schema


def test_malformed_document():
    with pytest.raises(SchemaError):
        schema_from_doc({"vertices": ["a"], "sigma": {"a": "a"}})
