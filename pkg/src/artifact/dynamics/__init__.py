"""Numerical polynomial dynamics over mapping schemata."""

from .core import (
    CriticalRecord,
    DynamicsError,
    RayParams,
    RayTrace,
    SampledLamination,
    SchemaPolynomial,
    critical_data,
    equipotential,
    evaluate,
    from_full,
    monic_centered,
    polynomial_from_doc,
    polynomial_to_doc,
    potential,
    potential_grid,
    sample_lamination,
    trace_ray,
)
from .kernels import HAVE_NUMBA

__all__ = [
    "CriticalRecord", "DynamicsError", "HAVE_NUMBA", "RayParams", "RayTrace", "SampledLamination",
    "SchemaPolynomial", "critical_data", "equipotential", "evaluate", "from_full", "monic_centered", "polynomial_from_doc",
    "polynomial_to_doc", "potential", "potential_grid", "sample_lamination", "trace_ray",
]
