"""Question embeddings: unit-norm vectors, cosine similarity, corpus ingestion.

Embeddings arrive pre-computed (the engine never runs a model). Every vector
is re-normalized on construction so that inner products downstream are true
cosine similarities.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimMismatchError,
    DuplicateIdError,
    NonFiniteError,
    ParseError,
    ZeroVectorError,
)

UNIT_NORM_TOL = 1e-6
_ZERO_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A point on the unit sphere representing one question."""

    dim: int
    components: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.components, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dim:
            raise DimMismatchError(
                f"expected {self.dim} components, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("embedding has NaN or infinite components")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ZeroVectorError(
                f"embedding norm {norm} is not unit within {UNIT_NORM_TOL}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "components", arr)


@dataclass(frozen=True)
class QuestionRecord:
    """One corpus entry: id, unit-norm vector, optional text and solvability."""

    id: str
    vector: EmbeddingVector
    text: str | None = None
    solvability: float | None = None


def normalize(v: Sequence[float] | np.ndarray) -> EmbeddingVector:
    """Scale ``v`` to unit L2 norm, preserving direction.

    Raises ``NonFiniteError`` for NaN/Inf components and ``ZeroVectorError``
    when the norm is below 1e-12 (direction undefined).
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DimMismatchError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("vector has NaN or infinite components")
    norm = float(np.linalg.norm(arr))
    if norm < _ZERO_NORM:
        raise ZeroVectorError(f"vector norm {norm} below {_ZERO_NORM}")
    return EmbeddingVector(dim=arr.shape[0], components=arr / norm)


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Inner product of two unit vectors, clamped to [-1, 1]."""
    if u.dim != v.dim:
        raise DimMismatchError(f"dims differ: {u.dim} vs {v.dim}")
    return float(np.clip(np.dot(u.components, v.components), -1.0, 1.0))


def load_corpus(lines: Iterable[str]) -> list[QuestionRecord]:
    """Parse line-delimited JSON records into normalized question records.

    Each line holds one object with fields ``id`` (string), ``vector``
    (array of numbers), optional ``text`` and ``solvability``. The first
    record fixes the embedding dimension for the whole corpus. Blank lines
    are skipped; ids must be unique.
    """
    records: list[QuestionRecord] = []
    seen: set[str] = set()
    dim: int | None = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(lineno, "record is not a JSON object")
        qid = obj.get("id")
        if not isinstance(qid, str) or not qid:
            raise ParseError(lineno, "missing or empty 'id'")
        raw = obj.get("vector")
        if not isinstance(raw, list) or not raw:
            raise ParseError(lineno, "missing or empty 'vector'")
        if qid in seen:
            raise DuplicateIdError(f"duplicate id {qid!r} at line {lineno}")
        if dim is not None and len(raw) != dim:
            raise DimMismatchError(
                f"line {lineno}: vector has dim {len(raw)}, corpus dim is {dim}"
            )
        try:
            vec = normalize(raw)
        except (ZeroVectorError, NonFiniteError) as exc:
            raise ParseError(lineno, str(exc)) from exc
        text = obj.get("text")
        if text is not None and not isinstance(text, str):
            raise ParseError(lineno, "'text' must be a string")
        solv = obj.get("solvability")
        if solv is not None:
            if not isinstance(solv, (int, float)) or isinstance(solv, bool):
                raise ParseError(lineno, "'solvability' must be a number")
            solv = float(solv)
            if math.isnan(solv) or not 0.0 <= solv <= 1.0:
                raise ParseError(lineno, f"'solvability' {solv} outside [0, 1]")
        if dim is None:
            dim = vec.dim
        seen.add(qid)
        records.append(QuestionRecord(id=qid, vector=vec, text=text, solvability=solv))
    return records
