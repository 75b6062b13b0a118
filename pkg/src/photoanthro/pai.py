"""Iris-ratio normalization and the 208 photo-anthropometric indexes (PAIs).

Every PAI is an inter-landmark Euclidean distance divided by the iris ratio,
the mean of the two iris diameters. Bilateral instances of one definition
are averaged, so the vector is unchanged by a left/right mirror.

Index order: midline-midline, midline-bilateral, bilateral same-side,
bilateral cross-side, bilateral left-right; within a block, lexicographic by
landmark number.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateGeometryError
from .ingest import (
    BILATERAL,
    MIDLINE,
    N_PAIS,
    Dataset,
    Landmark,
    LandmarkSet,
    PaiTable,
    Side,
    landmark_index,
)


class PaiKind(enum.Enum):
    MIDLINE_MIDLINE = "midline-midline"
    MIDLINE_BILATERAL = "midline-bilateral"
    SAME_SIDE = "bilateral-same-side"
    CROSS_SIDE = "bilateral-cross-side"
    LEFT_RIGHT = "bilateral-left-right"


@dataclass(frozen=True)
class PaiDefinition:
    index: int
    kind: PaiKind
    endpoints: tuple[Landmark, Landmark]
    # Landmark-array row pairs averaged to form the distance.
    instances: tuple[tuple[int, int], ...]

    @property
    def description(self) -> str:
        a, b = self.endpoints
        if self.kind is PaiKind.LEFT_RIGHT:
            return f"{a.label} left - right"
        suffix = {
            PaiKind.SAME_SIDE: ", same side",
            PaiKind.CROSS_SIDE: ", opposite sides",
        }.get(self.kind, "")
        return f"{a.label} - {b.label}{suffix}"

    @property
    def name(self) -> str:
        return f"PAI-{self.index:03d}"


L, R, MID = Side.LEFT, Side.RIGHT, Side.MIDLINE


@lru_cache(maxsize=1)
def enumerate_pais() -> tuple[PaiDefinition, ...]:
    defs: list[tuple[PaiKind, tuple[Landmark, Landmark], tuple[tuple[int, int], ...]]] = []
    for a, b in itertools.combinations(MIDLINE, 2):
        defs.append((PaiKind.MIDLINE_MIDLINE, (a, b),
                     ((landmark_index(a), landmark_index(b)),)))
    for a in MIDLINE:
        for b in BILATERAL:
            defs.append((PaiKind.MIDLINE_BILATERAL, (a, b), (
                (landmark_index(a), landmark_index(b, L)),
                (landmark_index(a), landmark_index(b, R)),
            )))
    for a, b in itertools.combinations(BILATERAL, 2):
        defs.append((PaiKind.SAME_SIDE, (a, b), (
            (landmark_index(a, L), landmark_index(b, L)),
            (landmark_index(a, R), landmark_index(b, R)),
        )))
    for a, b in itertools.combinations(BILATERAL, 2):
        defs.append((PaiKind.CROSS_SIDE, (a, b), (
            (landmark_index(a, L), landmark_index(b, R)),
            (landmark_index(a, R), landmark_index(b, L)),
        )))
    for a in BILATERAL:
        defs.append((PaiKind.LEFT_RIGHT, (a, a),
                     ((landmark_index(a, L), landmark_index(a, R)),)))
    assert len(defs) == N_PAIS
    return tuple(PaiDefinition(i + 1, kind, ends, inst) for i, (kind, ends, inst) in enumerate(defs))


def find_pai(a: Landmark, b: Landmark, kind: PaiKind | None = None) -> PaiDefinition:
    """Look up a definition by its endpoint names (order-insensitive)."""
    hits = [
        d for d in enumerate_pais()
        if set(d.endpoints) == {a, b} and (kind is None or d.kind is kind)
    ]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} PAI definitions match {a.abbr}-{b.abbr} ({kind})")
    return hits[0]


@lru_cache(maxsize=1)
def _instance_index() -> tuple[np.ndarray, np.ndarray]:
    # Single-instance definitions repeat their pair so every row averages two
    # distances; (d + d) / 2 == d exactly in floating point.
    first, second = [], []
    for d in enumerate_pais():
        pairs = d.instances if len(d.instances) == 2 else d.instances * 2
        first.append([p[0] for p in pairs])
        second.append([p[1] for p in pairs])
    return np.array(first), np.array(second)


_IRIS = (
    (landmark_index(Landmark.IRIDION_MEDIALE, L), landmark_index(Landmark.IRIDION_LATERALE, L)),
    (landmark_index(Landmark.IRIDION_MEDIALE, R), landmark_index(Landmark.IRIDION_LATERALE, R)),
)


def _coords(landmarks) -> np.ndarray:
    if isinstance(landmarks, LandmarkSet):
        return landmarks.coords
    return np.asarray(landmarks, dtype=float)


def _dist(coords: np.ndarray, i, j) -> np.ndarray:
    diff = coords[..., i, :] - coords[..., j, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def _iris_diameters(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    (li, lj), (ri, rj) = _IRIS
    return _dist(coords, li, lj), _dist(coords, ri, rj)


def iris_ratio(landmarks) -> float:
    """Mean of the left and right iris diameters, in pixels."""
    d_left, d_right = _iris_diameters(_coords(landmarks))
    if d_left == 0 or d_right == 0:
        raise DegenerateGeometryError(
            f"zero iris diameter (left={float(d_left)}, right={float(d_right)})"
        )
    return float((d_left + d_right) / 2)


def _pai_values(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """PAIs for a (..., 28, 2) stack, plus a mask of degenerate faces."""
    first, second = _instance_index()
    d = _dist(coords, first, second)  # (..., 208, 2)
    # Summation order (left + right) is shared with the iris ratio so the
    # within-eye iridion PAI comes out as exactly 1.0.
    dist = (d[..., 0] + d[..., 1]) / 2
    d_left, d_right = _iris_diameters(coords)
    bad = (d_left == 0) | (d_right == 0)
    iris = np.where(bad, 1.0, (d_left + d_right) / 2)
    return dist / iris[..., None], bad


def compute_pai_vector(landmarks) -> np.ndarray:
    """The 208 PAI values of one face, ordered by definition index."""
    coords = _coords(landmarks)
    iris_ratio(coords)
    values, _ = _pai_values(coords)
    return values


def compute_dataset_pais(dataset: Dataset) -> PaiTable:
    """PAI table for a whole dataset.

    Faces with a zero iris diameter are left out of the table and listed in
    ``table.rejects`` as ``(subject_id, reason)``.
    """
    values, bad = _pai_values(dataset.coords())
    keep = ~bad
    recs = dataset.records
    table = PaiTable(
        [r.subject_id for r, k in zip(recs, keep) if k],
        [r.sex for r, k in zip(recs, keep) if k],
        [r.age for r, k in zip(recs, keep) if k],
        values[keep],
    )
    table.rejects = [(r.subject_id, "zero iris diameter") for r, b in zip(recs, bad) if b]
    return table


def pai_listing() -> str:
    """Tab-separated index/kind/endpoints/description table, one line per PAI."""
    lines = ["index\tkind\tendpoint_a\tendpoint_b\tdescription"]
    for d in enumerate_pais():
        a, b = d.endpoints
        lines.append(f"{d.index}\t{d.kind.value}\t{a.abbr}\t{b.abbr}\t{d.description}")
    return "\n".join(lines) + "\n"
