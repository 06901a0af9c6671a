"""Command line front end.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
non-convergence.  Document arguments accept a JSON file path or the name of a
shipped fixture.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import fixtures
from .angle_system import (
    AngleSystem,
    InsufficientDepth,
    SchemaLamination,
    schema_lamination_to_doc,
    straighten_combinatorial,
    tune,
)
from .circle import AngleError, angle, fmt
from .dynamics import (
    DynamicsError,
    RayParams,
    polynomial_from_doc,
    sample_lamination,
    trace_ray,
)
from .lamination import (
    LaminationError,
    PuzzleTower,
    lamination_to_doc,
    pieces,
    primitivity_check,
    renormalizability_obstruction,
    total_degree_check,
    tower_from_doc,
    tower_to_doc,
    verify_tower,
)
from .render import RasterSpec, RenderError, julia_raster, lamination_svg, puzzle_overlays
from .schema import (
    SchemaError,
    brute_force_markings,
    classify_cubic,
    enumerate_markings,
    model_dimension,
    reduce_with_gaps,
    schema_from_doc,
    schema_to_doc,
)

OK, INVALID, USAGE, NONCONVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class CommandResult:
    code: int
    report: list[str] = field(default_factory=list)
    document: dict | None = None
    json: bool = False
    out: str | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- inputs


def load_document(ref: str) -> dict:
    """JSON from a file, or the document of a shipped fixture."""
    path = Path(ref)
    if path.is_file():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{ref}: not valid JSON ({exc})") from None
    if ref in fixtures.REGISTRY:
        return fixtures.emit(ref)
    raise UsageError(f"{ref}: no such file or fixture")


def _tower(ref: str) -> PuzzleTower:
    try:
        return tower_from_doc(load_document(ref))
    except LaminationError as exc:
        raise UsageError(f"{ref}: {exc}") from None


def _poly(ref: str):
    try:
        return polynomial_from_doc(load_document(ref))
    except DynamicsError as exc:
        raise UsageError(f"{ref}: {exc}") from None


def _schema(ref: str):
    doc = load_document(ref)
    if "vertices" in doc:
        return schema_from_doc(doc), None
    if "schema" in doc:
        return schema_from_doc(doc["schema"]), None
    tower = tower_from_doc(doc)
    return reduce_with_gaps(tower).schema, tower


def _angle(text: str) -> Fraction:
    try:
        return angle(text)
    except AngleError as exc:
        raise UsageError(f"bad angle {text!r}: {exc}") from None


def _read_angles(ref: str) -> list[Fraction]:
    path = Path(ref)
    if not path.is_file():
        raise UsageError(f"{ref}: no such file")
    text = path.read_text().strip()
    if text.startswith("["):
        items = json.loads(text)
    else:
        items = [tok for line in text.splitlines() for tok in line.split("#")[0].replace(",", " ").split()]
    return [_angle(str(t)) for t in items]


def _complex(text: str) -> complex:
    try:
        if "," in text:
            re, im = text.split(",", 1)
            return complex(float(re), float(im))
        return complex(text.replace(" ", ""))
    except ValueError:
        raise UsageError(f"bad complex number {text!r}") from None


def _params(ns) -> RayParams:
    return RayParams(R0=ns.r0, steps_per_level=ns.steps, levels=ns.levels,
                     newton_tol=ns.tol, newton_iter=ns.newton_iter)


# ---------------------------------------------------------------- commands


def cmd_verify(ns) -> CommandResult:
    doc = load_document(ns.doc)
    tower = tower_from_doc(doc)
    rep = verify_tower(tower)
    name = tower.name or ns.doc
    if not rep.ok:
        return CommandResult(INVALID, [f"{name}: invalid"] + rep.lines(),
                             {"valid": False, "violations": rep.lines()})
    lines = [f"{name}: valid, degree {tower.degree}, depth {tower.depth}"]
    bad = []
    for k in range(tower.depth + 1):
        good, inv = total_degree_check(tower, k)
        lines.append(f"  depth {k}: critical total {inv.total()} (d-1 = {tower.degree - 1})"
                     + ("" if good else "  MISMATCH"))
        if not good:
            bad.append(k)
    code = INVALID if bad else OK
    return CommandResult(code, lines, {"valid": not bad, "degree_mismatch_depths": bad})


def cmd_pieces(ns) -> CommandResult:
    tower = _tower(ns.doc)
    if ns.depth > tower.depth:
        if tower.portrait is None:
            raise UsageError(f"depth {ns.depth} exceeds tower depth {tower.depth} and there is no portrait")
        tower = tower.extend(ns.depth)
    ps = pieces(tower, ns.depth)
    lines = [f"depth {ns.depth}: {len(ps)} pieces"]
    out = []
    for p in ps:
        lines.append(f"  [{p.index}] {p.label()}  degree {p.degree}  measure {fmt(p.measure)}")
        out.append({"index": p.index, "arcs": [[fmt(a), fmt(b)] for a, b in p.arcs],
                    "boundary_classes": [[fmt(x) for x in c] for c in p.boundary_classes],
                    "degree": p.degree, "measure": fmt(p.measure),
                    "parent": p.parent, "image": p.image})
    return CommandResult(OK, lines, {"depth": ns.depth, "pieces": out})


def cmd_schema(ns) -> CommandResult:
    tower = _tower(ns.doc)
    red = reduce_with_gaps(tower)
    sch = red.schema
    lines = [f"separation depth {red.separation_depth}"]
    for v in sch.vertices:
        g = red.gaps[v]
        lines.append(f"  {v} -> {sch.sigma[v]}  degree {sch.delta[v]}  return time {g.return_time}")
    doc = {"schema": schema_to_doc(sch), "separation_depth": red.separation_depth}
    if model_dimension(sch) == 2 and sch.reduced:
        kind = classify_cubic(sch)
        lines.append(f"cubic type: {kind}")
        doc["cubic_type"] = kind
    prim = primitivity_check(tower)
    lines.append(prim.describe())
    doc["primitive"] = prim.primitive
    if prim.witness:
        doc["primitivity_witness"] = [fmt(x) for x in prim.witness[0]]
    obs = renormalizability_obstruction(tower)
    lines.append("obstruction: " + obs.describe())
    doc["obstruction"] = None if obs.clear else {
        "class": [fmt(x) for x in obs.witness[0]], "depth": obs.witness[1],
        "gap": obs.witness[2], "siblings": list(obs.witness[3])}
    return CommandResult(OK, lines, doc)


def cmd_markings(ns) -> CommandResult:
    sch, _ = _schema(ns.doc)
    ms = enumerate_markings(sch)
    lines = [f"{len(ms)} markings"] + [f"  {m.describe()}" for m in ms]
    code = OK
    if ns.check:
        oracle = brute_force_markings(sch)
        agree = oracle == ms
        lines.append("brute-force oracle: " + ("agrees" if agree else f"DISAGREES ({len(oracle)})"))
        code = OK if agree else INVALID
    doc = {"count": len(ms), "markings": [{v: fmt(t) for v, t in m.angles} for m in ms]}
    return CommandResult(code, lines, doc)


def _target(base: PuzzleTower, inserts: list[str]) -> SchemaLamination:
    sch = reduce_with_gaps(base).schema
    towers = {}
    for item in inserts:
        if "=" not in item:
            raise UsageError(f"--insert expects VERTEX=DOC, got {item!r}")
        v, ref = item.split("=", 1)
        if v not in sch.vertices:
            raise UsageError(f"unknown vertex {v!r}; schema has {', '.join(sch.vertices)}")
        towers[v] = _tower(ref)
    return SchemaLamination.from_towers(sch, towers)


def cmd_tune(ns) -> CommandResult:
    base = _tower(ns.base)
    target = _target(base, ns.insert)
    try:
        res = tune(base, target, depth_budget=ns.budget)
    except InsufficientDepth as exc:
        return CommandResult(NONCONVERGENCE, [f"insufficient depth: {exc} (needs {exc.needed})"])
    rep = verify_tower(res.tower)
    lines = [f"tuned tower depth {res.tower.depth}, {len(res.generators)} generating classes"]
    lines += [f"  {'{' + ','.join(fmt(x) for x in g) + '}'}" for g in res.generators]
    if not rep.ok:
        return CommandResult(INVALID, lines + rep.lines())
    doc = tower_to_doc(res.tower)
    return CommandResult(OK, lines, doc)


def cmd_straighten(ns) -> CommandResult:
    lam = _tower(ns.doc)
    base = _tower(ns.base)
    system = AngleSystem.build(base.extend(max(base.depth, ns.coding_depth)) if base.portrait else base)
    sl = straighten_combinatorial(lam, system)
    lines = []
    for v in sl.schema.vertices:
        cl = sl.laminations[v].nontrivial
        lines.append(f"{v}: " + (" ".join("{" + ",".join(fmt(x) for x in c) + "}" for c in cl) or "trivial"))
    return CommandResult(OK, lines, schema_lamination_to_doc(sl))


def cmd_trace(ns) -> CommandResult:
    f = _poly(ns.doc)
    theta = _angle(ns.angle)
    v = ns.vertex or f.vertices[0]
    tr = trace_ray(f, v, theta, _params(ns))
    if ns.csv:
        Path(ns.csv).write_text(tr.to_csv())
    doc = {"vertex": v, "angle": fmt(theta), "status": tr.status, "points": len(tr.points)}
    if tr.landing is not None:
        z = tr.landing
        doc["landing"] = [z.real, z.imag]
        lines = [f"ray {fmt(theta)} at {v}: landed at {z.real:+.10f}{z.imag:+.10f}i"]
        return CommandResult(OK, lines, doc)
    lines = [f"ray {fmt(theta)} at {v}: {tr.status} after {len(tr.points)} points"]
    return CommandResult(NONCONVERGENCE, lines, doc)


def cmd_sample(ns) -> CommandResult:
    f = _poly(ns.doc)
    angles = _read_angles(ns.angles)
    v = ns.vertex or f.vertices[0]
    s = sample_lamination(f, angles, eps=ns.eps, vertex=v, params=_params(ns))
    lam = s.lamination
    lines = [f"{len(lam.nontrivial)} nontrivial classes from {len(angles)} angles"]
    lines += ["  {" + ",".join(fmt(x) for x in c) + "}" for c in lam.nontrivial]
    for t, st in s.unresolved:
        lines.append(f"  unresolved {fmt(t)}: {st}")
    doc = lamination_to_doc(lam)
    doc["unresolved"] = [[fmt(t), st] for t, st in s.unresolved]
    if not s.report.ok:
        return CommandResult(INVALID, lines + s.report.lines(), doc)
    if s.unresolved and not ns.allow_unresolved:
        return CommandResult(NONCONVERGENCE, lines, doc)
    return CommandResult(OK, lines, doc)


def cmd_render_lam(ns) -> CommandResult:
    tower = _tower(ns.doc)
    rep = verify_tower(tower)
    if not rep.ok:
        return CommandResult(INVALID, ["refusing to draw an invalid lamination"] + rep.lines())
    svg = lamination_svg(tower)
    Path(ns.out).write_text(svg)
    return CommandResult(OK, [f"wrote {ns.out}"], {"out": ns.out})


def cmd_render_julia(ns) -> CommandResult:
    f = _poly(ns.doc)
    try:
        w, h = (int(x) for x in ns.size.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size expects WxH, got {ns.size!r}") from None
    spec = RasterSpec(center=_complex(ns.center), width=ns.width, resolution=(w, h),
                      max_iter=ns.max_iter, coloring=ns.coloring, palette=ns.palette)
    if ns.rays:
        v = ns.vertex or f.vertices[0]
        spec.overlays = puzzle_overlays(f, v, [_angle(t) for t in ns.rays.split(",")], ns.level)
    img = julia_raster(f, spec, workers=ns.workers)
    img.save(ns.out, format="PNG")
    return CommandResult(OK, [f"wrote {ns.out} ({img.width}x{img.height})"], {"out": ns.out})


def cmd_fixtures(ns) -> CommandResult:
    if ns.action == "list":
        lines = [f"{fx.name:<16} {fx.kind:<11} {fx.summary}" for fx in fixtures.REGISTRY.values()]
        return CommandResult(OK, lines, {"fixtures": [{"name": fx.name, "kind": fx.kind}
                                                      for fx in fixtures.REGISTRY.values()]})
    if not ns.name:
        raise UsageError("fixtures emit needs a fixture name")
    try:
        doc = fixtures.emit(ns.name)
    except fixtures.FixtureError as exc:
        raise UsageError(str(exc.args[0])) from None
    return CommandResult(OK, [json.dumps(doc, indent=2, sort_keys=True)], doc)


# ---------------------------------------------------------------- parser


def _ray_options(p):
    g = p.add_argument_group("ray continuation")
    g.add_argument("--vertex", help="vertex to work in (default: first)")
    g.add_argument("--r0", type=float, default=RayParams.R0, help="starting radius")
    g.add_argument("--steps", type=int, default=RayParams.steps_per_level, help="substeps per level")
    g.add_argument("--levels", type=int, default=RayParams.levels, help="maximum levels")
    g.add_argument("--tol", type=float, default=RayParams.newton_tol, help="landing tolerance")
    g.add_argument("--newton-iter", type=int, default=RayParams.newton_iter)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the machine-readable document")
    common.add_argument("--out", help="write output to this path")

    p = _Parser(prog="artifact", description="Laminations, puzzles, schemata and polynomial dynamics.",
                parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("verify", parents=[common], help="validate a lamination or tower document")
    s.add_argument("doc")
    s.set_defaults(run=cmd_verify)

    s = sub.add_parser("pieces", parents=[common], help="list puzzle pieces at a depth")
    s.add_argument("doc")
    s.add_argument("--depth", type=int, required=True)
    s.set_defaults(run=cmd_pieces)

    s = sub.add_parser("schema", parents=[common], help="reduced schema, cubic type, primitivity")
    s.add_argument("doc")
    s.set_defaults(run=cmd_schema)

    s = sub.add_parser("markings", parents=[common], help="enumerate external markings")
    s.add_argument("doc", help="schema document or tower")
    s.add_argument("--check", action="store_true", help="compare with the brute-force oracle")
    s.set_defaults(run=cmd_markings)

    s = sub.add_parser("tune", parents=[common], help="insert laminations into the critical gaps")
    s.add_argument("base")
    s.add_argument("--insert", action="append", default=[], metavar="VERTEX=DOC")
    s.add_argument("--budget", type=int, help="maximum depth")
    s.set_defaults(run=cmd_tune)

    s = sub.add_parser("straighten", parents=[common], help="push a tuned tower back through alpha")
    s.add_argument("doc")
    s.add_argument("--base", required=True)
    s.add_argument("--coding-depth", type=int, default=0, help="extend the base tower for coding")
    s.set_defaults(run=cmd_straighten)

    s = sub.add_parser("trace", parents=[common], help="trace one external ray")
    s.add_argument("doc")
    s.add_argument("--angle", required=True, help="exact p/q")
    s.add_argument("--csv", help="write the ray polyline as CSV")
    _ray_options(s)
    s.set_defaults(run=cmd_trace)

    s = sub.add_parser("sample", parents=[common], help="lamination from co-landing rays")
    s.add_argument("doc")
    s.add_argument("--angles", required=True, help="file of p/q angles")
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--allow-unresolved", action="store_true")
    _ray_options(s)
    s.set_defaults(run=cmd_sample)

    s = sub.add_parser("render-lam", parents=[common], help="chord diagram as SVG")
    s.add_argument("doc")
    s.set_defaults(run=cmd_render_lam)

    s = sub.add_parser("render-julia", parents=[common], help="filled Julia set raster as PNG")
    s.add_argument("doc")
    s.add_argument("--center", default="0,0", help="re,im")
    s.add_argument("--width", type=float, default=4.0)
    s.add_argument("--size", default="512x512")
    s.add_argument("--max-iter", type=int, default=256)
    s.add_argument("--coloring", default="smooth", choices=["smooth", "binary"])
    s.add_argument("--palette", default="ember")
    s.add_argument("--rays", help="comma separated p/q angles to overlay")
    s.add_argument("--level", type=float, default=0.05, help="equipotential level for overlays")
    s.add_argument("--vertex")
    s.add_argument("--workers", type=int, help="render threads (default: THREADS or 1)")
    s.set_defaults(run=cmd_render_julia)

    s = sub.add_parser("fixtures", parents=[common], help="list or emit shipped examples")
    s.add_argument("action", choices=["list", "emit"])
    s.add_argument("name", nargs="?")
    s.set_defaults(run=cmd_fixtures)
    return p


def run(argv: list[str] | None = None) -> CommandResult:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        return CommandResult(USAGE, [f"usage error: {exc}"])
    if ns.command in ("render-lam", "render-julia") and not ns.out:
        return CommandResult(USAGE, [f"usage error: {ns.command} needs --out"])
    try:
        res = ns.run(ns)
    except UsageError as exc:
        return CommandResult(USAGE, [f"usage error: {exc}"])
    except (SchemaError, LaminationError, AngleError) as exc:
        return CommandResult(INVALID, [f"invalid: {exc}"])
    except (DynamicsError, RenderError) as exc:
        return CommandResult(USAGE, [f"bad parameters: {exc}"])
    res.json = ns.json
    res.out = ns.out if ns.command not in ("render-lam", "render-julia") else None
    return res


def main(argv: list[str] | None = None) -> int:
    res = run(argv)
    if res.json and res.document is not None:
        text = json.dumps(res.document, indent=2, sort_keys=True) + "\n"
    else:
        text = "\n".join(res.report) + ("\n" if res.report else "")
    if res.out:
        Path(res.out).write_text(text)
    else:
        stream = sys.stdout if res.code in (OK, INVALID, NONCONVERGENCE) else sys.stderr
        stream.write(text)
    return res.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
