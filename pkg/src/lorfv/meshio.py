"""Reader and writer for the line-oriented ``lorfv-mesh 1`` format.

::

    lorfv-mesh 1
    metric minkowski            # optional: metric name and key=value params
    period 1.0                  # optional: spatial period L
    vertex <id> <t> <x>
    face <id> <kind> <v0> <v1>  # kind in {inflow, outflow, lateral}
    element <id> <inflow> <outflow> <lat0> [<lat1> ...]
    slice <n> <elem ids...>

Blank lines and ``#`` comments are ignored.  Ids are arbitrary integers;
faces and elements refer to vertices and faces by id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import MeshParseError
from .geometry import make_metric
from .mesh import KINDS, Mesh

HEADER = "lorfv-mesh 1"


@dataclass
class MeshFile:
    """Parsed, not yet assembled, contents of a mesh file."""

    vertices: dict = field(default_factory=dict)     # id -> (t, x)
    faces: dict = field(default_factory=dict)        # id -> (kind, v0, v1)
    elements: dict = field(default_factory=dict)     # id -> (in, out, [lats])
    slices: dict = field(default_factory=dict)       # n -> [elem ids]
    metric: Optional[str] = None
    metric_params: dict = field(default_factory=dict)
    period: Optional[float] = None


def _ints(tokens, where):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MeshParseError(f"{where}: expected integer ids, got {' '.join(tokens)!r}") from None


def parse_mesh(text: str, source: str = "<string>") -> MeshFile:
    lines = text.splitlines()
    body = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(lines)]
    body = [(i, ln) for i, ln in body if ln]
    if not body or body[0][1].split() != HEADER.split():
        raise MeshParseError(f"{source}: missing header {HEADER!r}")
    mf = MeshFile()
    for lineno, line in body[1:]:
        where = f"{source}:{lineno}"
        tok = line.split()
        key, args = tok[0], tok[1:]
        if key == "vertex":
            if len(args) != 3:
                raise MeshParseError(f"{where}: vertex needs <id> <t> <x>")
            vid = _ints(args[:1], where)[0]
            try:
                mf.vertices[vid] = (float(args[1]), float(args[2]))
            except ValueError:
                raise MeshParseError(f"{where}: bad vertex coordinates") from None
            if not np.all(np.isfinite(mf.vertices[vid])):
                raise MeshParseError(f"{where}: non-finite vertex coordinates")
        elif key == "face":
            if len(args) != 4:
                raise MeshParseError(f"{where}: face needs <id> <kind> <v0> <v1>")
            if args[1] not in KINDS:
                raise MeshParseError(f"{where}: unknown face kind {args[1]!r}")
            fid, a, b = _ints([args[0], args[2], args[3]], where)
            mf.faces[fid] = (args[1], a, b)
        elif key == "element":
            if len(args) < 4:
                raise MeshParseError(f"{where}: element needs <id> <in> <out> <lat0> ...")
            ids = _ints(args, where)
            mf.elements[ids[0]] = (ids[1], ids[2], ids[3:])
        elif key == "slice":
            if len(args) < 2:
                raise MeshParseError(f"{where}: slice needs <n> and element ids")
            ids = _ints(args, where)
            mf.slices.setdefault(ids[0], []).extend(ids[1:])
        elif key == "metric":
            if not args:
                raise MeshParseError(f"{where}: metric needs a name")
            mf.metric = args[0]
            for item in args[1:]:
                if "=" not in item:
                    raise MeshParseError(f"{where}: metric parameter {item!r} is not key=value")
                k, v = item.split("=", 1)
                try:
                    mf.metric_params[k] = float(v)
                except ValueError:
                    raise MeshParseError(f"{where}: bad metric parameter {item!r}") from None
        elif key == "period":
            try:
                mf.period = float(args[0])
            except (IndexError, ValueError):
                raise MeshParseError(f"{where}: period needs a number") from None
        else:
            raise MeshParseError(f"{where}: unknown record {key!r}")
    if not mf.vertices or not mf.faces or not mf.elements or not mf.slices:
        raise MeshParseError(f"{source}: needs vertices, faces, elements and slices")
    return mf


def assemble(mf: MeshFile, metric=None, quad=None) -> Mesh:
    """Turn a :class:`MeshFile` into a :class:`Mesh`.

    Dangling id references are reported as :class:`MeshParseError`;
    geometric or topological violations as :class:`MeshStructureError`.
    """
    if metric is None:
        params = dict(mf.metric_params)
        if mf.period is not None:
            params["L"] = mf.period
        metric = make_metric(mf.metric or "minkowski", **params)
    vids = sorted(mf.vertices)
    vpos = {v: i for i, v in enumerate(vids)}
    fids = sorted(mf.faces)
    fpos = {f: i for i, f in enumerate(fids)}
    eids = sorted(mf.elements)
    epos = {e: i for i, e in enumerate(eids)}

    def look(table, key, what):
        try:
            return table[key]
        except KeyError:
            raise MeshParseError(f"{what} {key} is not defined") from None

    vertices = np.array([mf.vertices[v] for v in vids])
    faces = [(k, look(vpos, a, "vertex"), look(vpos, b, "vertex"))
             for k, a, b in (mf.faces[f] for f in fids)]
    elements = [(look(fpos, i, "face"), look(fpos, o, "face"), [look(fpos, l, "face") for l in lats])
                for i, o, lats in (mf.elements[e] for e in eids)]
    ns = sorted(mf.slices)
    if ns != list(range(len(ns))):
        raise MeshParseError(f"slices must be numbered 0..{len(ns) - 1}, got {ns}")
    slices = [np.array([look(epos, e, "element") for e in mf.slices[n]], dtype=int) for n in ns]
    return Mesh.from_tables(metric, vertices, faces, elements, slices, quad,
                            vertex_ids=np.array(vids), face_ids=np.array(fids),
                            element_ids=np.array(eids))


def read_mesh(path, metric=None, quad=None) -> Mesh:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise MeshParseError(f"cannot read mesh {path}: {exc.strerror}") from None
    return assemble(parse_mesh(text, str(p)), metric, quad)


def format_mesh(mesh: Mesh) -> str:
    m = mesh
    F = m.faces
    out = [HEADER, f"metric {m.metric.name}"
           + "".join(f" {k}={float(v)!r}" for k, v in m.metric.params.items() if k != "L"),
           f"period {float(m.period)!r}"]
    for vid, (t, x) in zip(m.vertex_ids, m.vertices):
        out.append(f"vertex {vid} {float(t)!r} {float(x)!r}")
    for i, fid in enumerate(F.ids):
        out.append(f"face {fid} {F.declared_kind[i]} {m.vertex_ids[F.v0[i]]} {m.vertex_ids[F.v1[i]]}")
    for k, eid in enumerate(m.element_ids):
        lats = " ".join(str(F.ids[f]) for f in m.lat_face[m.lat_ptr[k]:m.lat_ptr[k + 1]])
        out.append(f"element {eid} {F.ids[m.in_face[k]]} {F.ids[m.out_face[k]]} {lats}")
    for n, s in enumerate(m.slices):
        out.append(f"slice {n} " + " ".join(str(m.element_ids[k]) for k in s))
    return "\n".join(out) + "\n"


def write_mesh(mesh: Mesh, path) -> None:
    Path(path).write_text(format_mesh(mesh))


@dataclass
class CausalMismatch:
    face_id: int
    declared: str
    computed: str


def causal_mismatches(mesh: Mesh) -> list:
    """Faces whose declared kind disagrees with the computed causal class
    (inflow/outflow faces must be space-like, lateral faces time-like)."""
    F = mesh.faces
    bad = []
    for i, kind in enumerate(F.declared_kind):
        want = "timelike" if kind == "lateral" else "spacelike"
        got = F.causal[i]
        got = getattr(got, "value", str(got)).lower()
        if got != want:
            bad.append(CausalMismatch(int(F.ids[i]), kind, got))
    return bad

