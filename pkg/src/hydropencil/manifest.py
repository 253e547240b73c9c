"""Problem manifests: JSON documents naming the objects a command works on.

Structural validation uses the JSON schema in :data:`SCHEMA`; semantic
checks (names resolve, matrix shapes, expressions parse, eta constant,
symmetric and nondegenerate) follow and report the offending field path,
e.g. ``metrics.g1[0][1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import jsonschema

from .errors import InputError, ManifestError
from .expr import Context, Expr
from .geometry import ContraMetric, CoordinateMap, VectorField, determinant
from .operators import DNOperator, from_h, from_metric

_expr = {"type": ["string", "integer", "number"]}
_row = {"type": "array", "items": _expr, "minItems": 1}
_matrix = {"type": "array", "items": _row, "minItems": 1}
_vector = {"type": "array", "items": _expr, "minItems": 1}
_flow = {
    "type": "object",
    "properties": {
        "hierarchy": {"type": "integer", "minimum": 1},
        "matrix": _matrix,
        "translation": {"const": True},
    },
    "minProperties": 1,
    "maxProperties": 1,
    "additionalProperties": False,
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hydropencil problem manifest",
    "type": "object",
    "required": ["dimension"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "coordinates": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "eta": _matrix,
        "h": _vector,
        "metrics": {
            "type": "object",
            "additionalProperties": {
                "oneOf": [
                    _matrix,
                    {"type": "object", "required": ["covariant"], "additionalProperties": False,
                     "properties": {"covariant": _matrix}},
                ]
            },
        },
        "operators": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "oneOf": [{"required": ["g", "b"]}, {"required": ["metric"]}],
                "properties": {
                    "g": _matrix,
                    "b": {"type": "array", "items": _matrix, "minItems": 1},
                    "metric": {"type": "string"},
                },
            },
        },
        "vector_fields": {"type": "object", "additionalProperties": _vector},
        "tau": _expr,
        "degree": _expr,
        "c": _expr,
        "coordinate_maps": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["new_coordinates", "forward", "inverse"],
                "additionalProperties": False,
                "properties": {
                    "new_coordinates": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "forward": _vector,
                    "inverse": _vector,
                },
            },
        },
        "select": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "string"} for k in
                           ("operator", "metric", "g1", "g2", "vector_field", "map")},
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "required": ["m", "initial"],
            "properties": {
                "m": {"type": "integer", "minimum": 16},
                "L": {"type": "number", "exclusiveMinimum": 0},
                "initial": {
                    "type": "array",
                    "items": {"type": "array", "items": {
                        "type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
                },
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "minimum": 0},
                "scheme": {"enum": ["spectral", "central4"]},
                "stride": {"type": "integer", "minimum": 1},
                "precision": {"enum": ["double", "extended"]},
                "flow": _flow,
                "flows": {"type": "array", "items": _flow, "minItems": 2, "maxItems": 2},
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "substeps": {"type": "integer", "minimum": 1},
            },
        },
    },
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{_path(e.absolute_path)}: {e.message}" for e in errors[:10]]
        raise ManifestError("manifest does not match the schema:\n  " + "\n  ".join(lines))


@dataclass
class Manifest:
    doc: dict
    ctx: Context

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "Manifest":
        validate(doc)
        n = doc["dimension"]
        coords = doc.get("coordinates") or [f"v{i + 1}" for i in range(n)]
        if len(coords) != n:
            raise ManifestError(f"coordinates: expected {n} names, got {len(coords)}")
        try:
            ctx = Context(tuple(coords))
        except ValueError as exc:
            raise ManifestError(f"coordinates: {exc}") from None
        m = cls(doc, ctx)
        m._check()
        return m

    @property
    def dim(self) -> int:
        return self.ctx.dim

    # --- field readers -----------------------------------------------------

    def expr(self, value, where: str, ctx: Context | None = None) -> Expr:
        ctx = ctx or self.ctx
        if isinstance(value, bool):
            raise ManifestError(f"{where}: expected an expression, got a boolean")
        if isinstance(value, int):
            return ctx.const(value)
        if isinstance(value, float):
            return ctx.const(Fraction(repr(value)))
        try:
            return ctx.parse(value)
        except InputError as exc:
            raise ManifestError(f"{where}: {exc}") from None

    def matrix(self, rows, where: str):
        n = self.dim
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ManifestError(f"{where}: expected a {n}x{n} matrix")
        return tuple(tuple(self.expr(x, f"{where}[{i}][{j}]") for j, x in enumerate(r))
                     for i, r in enumerate(rows))

    def vector(self, items, where: str, ctx: Context | None = None) -> VectorField:
        if len(items) != self.dim:
            raise ManifestError(f"{where}: expected {self.dim} components, got {len(items)}")
        return VectorField(tuple(self.expr(x, f"{where}[{i}]", ctx) for i, x in enumerate(items)))

    def constant(self, value, where: str) -> Fraction:
        e = self.expr(value, where)
        if not e.is_constant():
            raise ManifestError(f"{where}: expected a rational constant, got {e}")
        return e.constant_value()

    # --- objects -----------------------------------------------------------

    def has(self, key: str) -> bool:
        return key in self.doc

    def eta(self) -> ContraMetric:
        if "eta" not in self.doc:
            raise ManifestError("eta: required by this command")
        return ContraMetric(self.matrix(self.doc["eta"], "eta"))

    def h(self) -> VectorField:
        if "h" not in self.doc:
            raise ManifestError("h: required by this command")
        return self.vector(self.doc["h"], "h")

    def metric(self, name: str) -> ContraMetric:
        metrics = self.doc.get("metrics", {})
        if name == "eta" and "eta" in self.doc and name not in metrics:
            return self.eta()
        if name not in metrics:
            raise ManifestError(f"metrics: no metric named {name!r}")
        entry = metrics[name]
        if isinstance(entry, dict):
            low = self.matrix(entry["covariant"], f"metrics.{name}.covariant")
            if determinant(low).is_zero():
                raise ManifestError(f"metrics.{name}.covariant: degenerate matrix")
            return ContraMetric.from_covariant(low, self.ctx)
        return ContraMetric(self.matrix(entry, f"metrics.{name}"))

    def operator(self, name: str) -> DNOperator:
        ops = self.doc.get("operators", {})
        if name in ops:
            entry = ops[name]
            where = f"operators.{name}"
            if "metric" in entry:
                return from_metric(self.metric(entry["metric"]))
            g = self.matrix(entry["g"], f"{where}.g")
            b = entry["b"]
            if len(b) != self.dim:
                raise ManifestError(f"{where}.b: expected {self.dim} slices b[i][j][k]")
            return DNOperator(g, tuple(self.matrix(bi, f"{where}.b[{i}]") for i, bi in enumerate(b)))
        if name in self.doc.get("metrics", {}):
            return from_metric(self.metric(name))
        raise ManifestError(f"operators: no operator or metric named {name!r}")

    def vector_field(self, name: str) -> VectorField:
        fields = self.doc.get("vector_fields", {})
        if name not in fields:
            raise ManifestError(f"vector_fields: no vector field named {name!r}")
        return self.vector(fields[name], f"vector_fields.{name}")

    def coordinate_map(self, name: str) -> CoordinateMap:
        maps = self.doc.get("coordinate_maps", {})
        if name not in maps:
            raise ManifestError(f"coordinate_maps: no map named {name!r}")
        entry = maps[name]
        where = f"coordinate_maps.{name}"
        try:
            new = Context(tuple(entry["new_coordinates"]))
        except ValueError as exc:
            raise ManifestError(f"{where}.new_coordinates: {exc}") from None
        if new.dim != self.dim:
            raise ManifestError(f"{where}.new_coordinates: expected {self.dim} names")
        fwd = self.vector(entry["forward"], f"{where}.forward")
        inv = self.vector(entry["inverse"], f"{where}.inverse", new)
        return CoordinateMap(self.ctx, new, tuple(fwd), tuple(inv))

    def selected(self, role: str, default: str | None = None, pool: str | None = None) -> str:
        """Name chosen for a role via ``select``, else the default, else the only entry of ``pool``."""
        sel = self.doc.get("select", {})
        if role in sel:
            return sel[role]
        if default is not None:
            return default
        if pool is not None:
            names = sorted(self.doc.get(pool, {}))
            if len(names) == 1:
                return names[0]
            if names:
                raise ManifestError(f"select.{role}: several {pool} present ({', '.join(names)}); choose one")
        raise ManifestError(f"select.{role}: nothing to select")

    def default_operator(self) -> DNOperator:
        sel = self.doc.get("select", {})
        if "operator" in sel:
            return self.operator(sel["operator"])
        ops = sorted(self.doc.get("operators", {}))
        if len(ops) == 1:
            return self.operator(ops[0])
        if ops:
            raise ManifestError(f"select.operator: several operators present ({', '.join(ops)}); choose one")
        if "eta" in self.doc and "h" in self.doc:
            return from_h(self.eta(), self.h())
        mets = sorted(self.doc.get("metrics", {}))
        if len(mets) == 1:
            return from_metric(self.metric(mets[0]))
        raise ManifestError("select.operator: no operator given (need operators, metrics or eta with h)")

    # --- semantic checks ---------------------------------------------------

    def _check(self):
        if "eta" in self.doc:
            eta = self.eta()
            for i, row in enumerate(eta.g):
                for j, x in enumerate(row):
                    if not x.is_constant():
                        raise ManifestError(f"eta[{i}][{j}]: must be a rational constant, got {x}")
            if not eta.is_symmetric():
                raise ManifestError("eta: must be symmetric")
            if eta.det().is_zero():
                raise ManifestError("eta: must be nondegenerate")
        if "h" in self.doc:
            self.h()
        for name in self.doc.get("metrics", {}):
            self.metric(name)
        for name in self.doc.get("operators", {}):
            self.operator(name)
        for name in self.doc.get("vector_fields", {}):
            self.vector_field(name)
        for name in self.doc.get("coordinate_maps", {}):
            try:
                self.coordinate_map(name)
            except ManifestError:
                raise
            except InputError as exc:
                raise ManifestError(f"coordinate_maps.{name}: {exc}") from None
        for key in ("tau",):
            if key in self.doc:
                self.expr(self.doc[key], key)
        for key in ("degree", "c"):
            if key in self.doc:
                self.constant(self.doc[key], key)
        sel = self.doc.get("select", {})
        for role, name in sel.items():
            if role == "operator":
                self.operator(name)
            elif role in ("metric", "g1", "g2"):
                self.metric(name)
            elif role == "vector_field":
                self.vector_field(name)
            elif role == "map":
                self.coordinate_map(name)
        sim = self.doc.get("sim")
        if sim is not None:
            if len(sim["initial"]) != self.dim:
                raise ManifestError(f"sim.initial: expected Fourier data for {self.dim} fields")
            specs = ([sim["flow"]] if "flow" in sim else []) + list(sim.get("flows", []))
            for k, entry in enumerate(specs):
                if "matrix" in entry:
                    self.matrix(entry["matrix"], f"sim.flows[{k}].matrix" if "flows" in sim else "sim.flow.matrix")
                if "hierarchy" in entry and not ("eta" in self.doc and "h" in self.doc):
                    raise ManifestError("sim: hierarchy flows need eta and h")
