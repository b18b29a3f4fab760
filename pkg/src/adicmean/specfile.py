"""JSON construction files: parsing, validation and canonical echo.

The schema is documented in docs/construction-files.md. Rationals are written
as "num/den" strings (integers are accepted too); floats are rejected so that
every run is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from .constructors import (
    BlockPlan,
    BlockSource,
    EpsilonBlockSource,
    EpsilonBlockSpec,
    ExplicitLengths,
    ExplicitRearrangement,
    IdentityRearrangement,
    LinearLengths,
    LiteralBits,
    PeriodicBits,
    PermutedSource,
    ReverseRearrangement,
    SeededBits,
    ShuffleRearrangement,
    StochasticVector,
    theta2_source,
    theta3_source,
)
from .digitcore import DigitSource, PeriodicSource, RationalSource, as_fraction
from .errors import DomainError, SpecError

CONSTRUCTIONS = ("block", "theta2", "theta3", "eps-block-theta2", "eps-block-theta3", "rational", "periodic")


@dataclass(frozen=True)
class Construction:
    source: DigitSource
    document: dict
    seed: int


def _rat(doc: dict, key: str, default=None) -> Fraction:
    if key not in doc:
        if default is None:
            raise SpecError(f"missing field {key!r}")
        return default
    try:
        return as_fraction(doc[key])
    except (DomainError, ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"field {key!r}: {exc}") from None


def _vector(doc: dict, key: str) -> StochasticVector:
    raw = doc.get(key)
    if not isinstance(raw, list):
        raise SpecError(f"field {key!r} must be a list of rationals")
    try:
        entries = tuple(as_fraction(v) for v in raw)
    except (DomainError, ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"field {key!r}: {exc}") from None
    try:
        return StochasticVector(entries)
    except SpecError as exc:
        raise SpecError(f"{key}: {exc}") from None


def _int(doc: dict, key: str, default=None) -> int:
    v = doc.get(key, default)
    if v is None:
        raise SpecError(f"missing field {key!r}")
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(f"field {key!r} must be an integer")
    return v


def _lengths(doc: dict):
    spec = doc.get("lengths", {"kind": "linear"})
    if not isinstance(spec, dict):
        raise SpecError("lengths must be an object")
    kind = spec.get("kind")
    if kind == "linear":
        return LinearLengths(_int(spec, "scale", 1))
    if kind == "explicit":
        values = spec.get("values")
        if not isinstance(values, list) or not values:
            raise SpecError("explicit lengths need a non-empty 'values' list")
        return ExplicitLengths(tuple(values))
    raise SpecError(f"unknown lengths kind {kind!r}")


def _bits(doc: dict, seed: int):
    spec = doc.get("eps_bits", {"kind": "literal", "bits": ""})
    if isinstance(spec, str):
        return LiteralBits(spec)
    if not isinstance(spec, dict):
        raise SpecError("eps_bits must be a 0/1 string or an object")
    kind = spec.get("kind")
    if kind == "literal":
        return LiteralBits(str(spec.get("bits", "")))
    if kind == "periodic":
        return PeriodicBits(str(spec.get("pattern", "")))
    if kind == "seeded":
        return SeededBits(_int(spec, "seed", seed), _rat(spec, "p", Fraction(1, 2)))
    raise SpecError(f"unknown eps_bits kind {kind!r}")


def _rearrangement(spec: dict, seed: int):
    kind = spec.get("kind")
    if kind == "identity":
        return IdentityRearrangement()
    if kind == "reverse":
        blocks = spec.get("blocks")
        return ReverseRearrangement(None if blocks is None else frozenset(int(b) for b in blocks))
    if kind == "shuffle":
        return ShuffleRearrangement(_int(spec, "seed", seed), _rat(spec, "fraction", Fraction(1)))
    if kind == "explicit":
        blocks = spec.get("blocks")
        if not isinstance(blocks, dict):
            raise SpecError("explicit permutation needs a 'blocks' object")
        return ExplicitRearrangement.of({int(j): [int(d) for d in v] for j, v in blocks.items()})
    raise SpecError(f"unknown permutation kind {kind!r}")


def _eps_block(doc: dict, mode: str, seed: int) -> EpsilonBlockSource:
    spec = EpsilonBlockSpec(
        theta=_rat(doc, "theta"),
        vector_a=_vector(doc, "vector_a"),
        vector_b=_vector(doc, "vector_b") if "vector_b" in doc else None,
        eps_bits=_bits(doc, seed),
        mode=mode,
        k=doc.get("k"),
        delta=_rat(doc, "delta") if "delta" in doc else None,
        k_min=_int(doc, "k_min", 64),
        k_max=_int(doc, "k_max", 4096),
    )
    return EpsilonBlockSource(spec)


def _base(doc: dict, seed: int) -> DigitSource:
    kind = doc.get("construction")
    if kind == "block":
        cols = doc.get("columns")
        if not isinstance(cols, list) or not cols:
            raise SpecError("block construction needs a non-empty 'columns' list")
        vectors = [_vector({"column": c}, "column") for c in cols]
        plan = BlockPlan.cyclic(vectors, _lengths(doc))
        return BlockSource(plan, allow_empty=bool(doc.get("allow_empty", False)))
    if kind == "theta2":
        eps = _rat(doc, "epsilon") if "epsilon" in doc else None
        return theta2_source(_rat(doc, "theta"), _vector(doc, "p"), _vector(doc, "q"), _lengths(doc), eps)
    if kind == "theta3":
        eps = _rat(doc, "epsilon") if "epsilon" in doc else None
        args = [_rat(doc, key) for key in ("theta", "p0", "q0", "p1", "q1")]
        return theta3_source(*args, lengths=_lengths(doc), epsilon=eps)
    if kind == "eps-block-theta2":
        return _eps_block(doc, "theta2", seed)
    if kind == "eps-block-theta3":
        return _eps_block(doc, "theta3", seed)
    if kind == "rational":
        value = _rat(doc, "value")
        return RationalSource(value.numerator, value.denominator, _int(doc, "radix", 4))
    if kind == "periodic":
        pattern = doc.get("pattern")
        if not isinstance(pattern, list):
            raise SpecError("periodic construction needs a 'pattern' list")
        try:
            return PeriodicSource(tuple(pattern), _int(doc, "radix", 4), tuple(doc.get("head", ())))
        except DomainError as exc:
            raise SpecError(str(exc)) from None
    raise SpecError(f"unknown construction {kind!r}; expected one of {', '.join(CONSTRUCTIONS)}")


def build(doc: Any, seed: int = 0) -> Construction:
    """Validate a parsed construction document and build its digit source.

    ``seed`` fills in any seeded component that does not name its own seed.
    """
    if not isinstance(doc, dict):
        raise SpecError("construction file must hold a JSON object")
    source = _base(doc, seed)
    perm = doc.get("permutation")
    if perm is not None:
        if not isinstance(perm, dict):
            raise SpecError("permutation must be an object")
        if not source.block_structured:
            raise SpecError(f"{doc['construction']} streams have no blocks to permute")
        keep = isinstance(source, EpsilonBlockSource)
        source = PermutedSource(source, _rearrangement(perm, seed), keep)
    return Construction(source, doc, seed)


def load(path: str | Path, seed: int = 0) -> Construction:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read construction file {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return build(doc, seed)
