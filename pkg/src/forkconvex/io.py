"""JSON instance files, deflator files and closure-sample dumps.

Every rational is written as an exact string ("p/q" or an integer), so a dump
re-parses to identical values.  An instance file looks like::

    {
      "horizon": 1,
      "nodes": [{"id": "r", "time": 0},
                {"id": "u", "time": 1, "parent": "r", "prob": "1/2"},
                {"id": "d", "time": 1, "parent": "r", "prob": "1/2"}],
      "generators": {"stock": {"r": "1", "u": "2", "d": "1/2"}},
      "rays": {"v": {"A": {...}, "B": {...}}},
      "xhat": "stock",
      "raw": {"Z": {"u": ["1", "2"], "d": ["1", "0"]}}
    }

``rays``, ``xhat`` (the dominating process: a single's name or a node map) and
``raw`` (non-adapted processes, leaf -> value list) are optional.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .deflator import MODES, Deflator
from .ext import fmt, parse_rational
from .gsm import RawProcess
from .process_sets import GeneratorSet
from .tree import AdaptedProcess, EventTree, TreeError, build_tree


class InstanceError(ValueError):
    """Malformed instance data; the message names the offending field."""


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    gens: GeneratorSet
    xhat: AdaptedProcess | None = None
    xhat_name: str | None = None
    raw: Mapping[str, RawProcess] = field(default_factory=dict)

    @property
    def tree(self) -> EventTree:
        return self.gens.tree


def _process(tree: EventTree, rec, where: str) -> AdaptedProcess:
    if not isinstance(rec, Mapping):
        raise InstanceError(f"{where}: expected a node -> value map")
    unknown = set(rec) - set(tree.ids)
    if unknown:
        raise InstanceError(f"{where}: unknown node {sorted(unknown)[0]!r}")
    vals = {}
    for n in tree.ids:
        if n not in rec:
            raise InstanceError(f"{where}: missing value at node {n!r}")
        try:
            vals[n] = parse_rational(rec[n])
        except (ValueError, TypeError) as exc:
            raise InstanceError(f"{where}.{n}: {exc}") from None
        if vals[n] < 0:
            raise InstanceError(f"{where}.{n}: negative value {fmt(vals[n])}")
    return AdaptedProcess(tree, vals)


def instance_from_record(rec: Mapping, name: str = "instance") -> Instance:
    if not isinstance(rec, Mapping):
        raise InstanceError("instance must be a JSON object")
    try:
        tree = build_tree(rec)
    except TreeError as exc:
        raise InstanceError(f"nodes: {exc}") from None
    gens_rec = rec.get("generators", {})
    rays_rec = rec.get("rays", {})
    singles = {str(k): _process(tree, v, f"generators.{k}") for k, v in gens_rec.items()}
    rays = {}
    for k, v in rays_rec.items():
        if not isinstance(v, Mapping) or "A" not in v or "B" not in v:
            raise InstanceError(f"rays.{k}: needs 'A' and 'B'")
        rays[str(k)] = (_process(tree, v["A"], f"rays.{k}.A"), _process(tree, v["B"], f"rays.{k}.B"))
    if not singles and not rays:
        singles = {"1": AdaptedProcess(tree, {n: parse_rational(1) for n in tree.ids})}
    try:
        gens = GeneratorSet(tree, singles, rays)
    except TreeError as exc:
        raise InstanceError(f"generators: {exc}") from None
    xhat, xhat_name = rec.get("xhat"), None
    if isinstance(xhat, str):
        if xhat not in singles:
            raise InstanceError(f"xhat: {xhat!r} is not a single generator")
        xhat, xhat_name = singles[xhat], xhat
    elif xhat is not None:
        xhat = _process(tree, xhat, "xhat")
    raw = {}
    for k, v in rec.get("raw", {}).items():
        try:
            raw[str(k)] = RawProcess(tree, {leaf: tuple(parse_rational(x) for x in seq)
                                            for leaf, seq in v.items()})
        except (TreeError, ValueError, TypeError, AttributeError) as exc:
            raise InstanceError(f"raw.{k}: {exc}") from None
    return Instance(str(rec.get("name", name)), gens, xhat, xhat_name, raw)


def _values(p: AdaptedProcess) -> dict:
    return {n: fmt(p[n]) for n in p.tree.ids}


def instance_to_record(inst: Instance) -> dict:
    rec = {"name": inst.name, **inst.tree.to_spec(),
           "generators": {k: _values(g) for k, g in inst.gens.singles.items()}}
    if inst.gens.rays:
        rec["rays"] = {k: {"A": _values(a), "B": _values(b)} for k, (a, b) in inst.gens.rays.items()}
    if inst.xhat_name is not None:
        rec["xhat"] = inst.xhat_name
    elif inst.xhat is not None:
        rec["xhat"] = _values(inst.xhat)
    if inst.raw:
        rec["raw"] = {k: z.to_record() for k, z in inst.raw.items()}
    return rec


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InstanceError(f"{path}: {exc.strerror}") from None
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return instance_from_record(rec, name=path.stem)


def dumps(rec) -> str:
    return json.dumps(rec, indent=2, sort_keys=False, ensure_ascii=False)


def digest(inst: Instance) -> str:
    """Stable short hash of the instance content."""
    blob = json.dumps(instance_to_record(inst), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def deflator_to_record(defl: Deflator) -> dict:
    return {"mode": defl.support_mode, "delta": fmt(defl.delta), "Y": _values(defl.Y)}


def deflator_from_record(tree: EventTree, rec: Mapping) -> Deflator:
    if rec.get("mode") not in MODES:
        raise InstanceError(f"mode: expected one of {', '.join(MODES)}")
    try:
        delta = parse_rational(rec["delta"])
    except (KeyError, ValueError, TypeError) as exc:
        raise InstanceError(f"delta: {exc}") from None
    return Deflator(_process(tree, rec.get("Y"), "Y"), delta, rec["mode"])
