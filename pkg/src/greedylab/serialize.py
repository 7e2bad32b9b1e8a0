"""Space-spec JSON: {"variant": ..., payload...}, numbers as JSON numbers or rational strings."""

from __future__ import annotations

import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fundfn
from .families import SetFamily, all_subsets, initial_segments, schreier_family
from .spaces import (
    AugmentedPolyhedral,
    DisjointFamilySum,
    HaarLp,
    Lp,
    MaxOf,
    Polyhedral,
    ScaledSum,
    Space,
    TopKWeighted,
    Tsirelson,
    UnconditionalHull,
    _AtomsOnly,
    build_prop33_space,
)

__all__ = ["SpecError", "parse_number", "space_from_dict", "space_to_dict", "load_space", "dump_json", "write_atomic"]


class SpecError(ValueError):
    pass


def parse_number(v) -> float:
    """Accepts numbers, "inf", decimal strings and rationals such as "1/2"."""
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity"):
            return float("inf")
        try:
            return float(Fraction(s))
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"not a number: {v!r}") from exc
    raise SpecError(f"not a number: {v!r}")


def _matrix(rows, dim) -> np.ndarray:
    A = np.array([[parse_number(v) for v in r] for r in rows], dtype=float).reshape(-1, dim)
    return A


def _family(d, n) -> SetFamily:
    if d in ("full", "all"):
        return all_subsets(n)
    if d == "schreier":
        return schreier_family(n)
    if d == "initial_segments":
        return initial_segments(n)
    if isinstance(d, list):
        return SetFamily.from_lists(n, d)
    raise SpecError(f"unknown family {d!r}")


_NEEDS_DIM = {"lp", "polyhedral", "tsirelson", "atoms_only", "topk_weighted", "disjoint_family_sum", "family_weighted"}


def space_from_dict(d: dict, dim: int | None = None) -> Space:
    """Build a space; ``dim`` fills in (or overrides) the dimension of leaf variants."""
    if not isinstance(d, dict) or "variant" not in d:
        raise SpecError("space spec must be an object with a 'variant' key")
    v = d["variant"]
    n = dim if dim is not None else d.get("dim")
    if n is None and v in _NEEDS_DIM:
        raise SpecError(f"variant {v!r} needs a dimension (a 'dim' field or --dim)")
    if n is not None and int(n) < 1:
        raise SpecError("dimension must be positive")
    try:
        if v == "lp":
            return Lp(parse_number(d["p"]), int(n))
        if v == "polyhedral":
            return Polyhedral(_matrix(d.get("atoms", []), int(n)), int(n))
        if v == "tsirelson":
            return Tsirelson(int(n))
        if v == "haar_lp":
            return HaarLp(parse_number(d["p"]), int(d["level"]))
        if v == "unconditional_hull":
            return UnconditionalHull(space_from_dict(d["base"], dim))
        if v == "max_of":
            return MaxOf(tuple(space_from_dict(p, dim) for p in d["parts"]))
        if v == "scaled_sum":
            return ScaledSum(tuple((parse_number(w), space_from_dict(p, dim)) for w, p in d["parts"]))
        if v == "augmented_polyhedral":
            base = space_from_dict(d["base"], dim)
            return AugmentedPolyhedral(base, _matrix(d["atoms"], base.dim))
        if v == "atoms_only":
            return _AtomsOnly(_matrix(d["atoms"], int(n)), int(n))
        if v == "topk_weighted":
            return TopKWeighted(np.array([parse_number(w) for w in d["weights"]]), int(n))
        if v == "disjoint_family_sum":
            fam = _family(d["family"], int(n))
            return DisjointFamilySum(fam, np.array([parse_number(w) for w in d["size_weights"]]), int(d["m"]))
        if v == "family_weighted":
            phi = fundfn.from_dict(d["phi"])
            c = float(phi(1.0))
            return build_prop33_space(lambda x: np.asarray(phi(x)) / c, _family(d.get("family", "full"), int(n)),
                                      strict=bool(d.get("strict", True)))
    except KeyError as exc:
        raise SpecError(f"variant {v!r} is missing field {exc.args[0]!r}") from exc
    except TypeError as exc:
        raise SpecError(f"variant {v!r}: {exc}") from exc
    raise SpecError(f"unknown variant {v!r}")


def space_to_dict(space: Space) -> dict:
    d = space.to_dict()
    prov = getattr(space, "provenance", None)
    if prov is not None:
        d = {**d, "provenance": _plain(prov)}
    return d


def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return o


def load_space(path, dim: int | None = None) -> Space:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read space spec {path}: {exc}") from exc
    return space_from_dict(d, dim)


def dump_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text: str) -> None:
    """Write to a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
