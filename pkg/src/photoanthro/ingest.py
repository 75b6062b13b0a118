"""Landmark taxonomy, face records, and the two CSV formats.

Landmark CSV (one face per row)::

    subject_id,sex,age,g_x,g_y,...,m_x,m_y,en_l_x,en_l_y,en_r_x,en_r_y,...

The 8 midline landmarks come first in canonical order, then every bilateral
landmark as left-x, left-y, right-x, right-y. Coordinates are image pixels
(x rightward, y downward, origin top-left). Sex tokens are ``F``/``M``
(case-insensitive on input, upper-case on output).

PAI CSV::

    subject_id,sex,age,pai_001,...,pai_208

Feature values are written with 9 significant digits.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

MIN_AGE = 5
MAX_AGE = 22
SEXES = ("F", "M")
N_PAIS = 208
FLOAT_FORMAT = "{:.9g}"


class Side(enum.Enum):
    MIDLINE = "midline"
    LEFT = "left"
    RIGHT = "right"


class Landmark(enum.Enum):
    """The 18 anatomical landmark names, numbered as in the standard chart."""

    GLABELLA = (1, "g", "glabella")
    NASION = (2, "n", "nasion")
    SUBNASALE = (3, "sn", "subnasale")
    LABIALE_SUPERIUS = (4, "ls", "labiale superius")
    STOMION = (5, "sto", "stomion")
    LABIALE_INFERIUS = (6, "li", "labiale inferius")
    GNATHION = (7, "gn", "gnathion")
    MIDNASAL = (8, "m", "midnasal")
    ENTOCANTHION = (9, "en", "entocanthion")
    EXOCANTHION = (10, "ex", "exocanthion")
    IRIDION_LATERALE = (11, "il", "iridion laterale")
    IRIDION_MEDIALE = (12, "im", "iridion mediale")
    PUPIL = (13, "pu", "pupil")
    ZYGION = (14, "zy", "zygion")
    ALARE = (15, "al", "alare")
    GONION = (16, "go", "gonion")
    CHEILION = (17, "ch", "cheilion")
    CRISTA_PHILTRI = (18, "cph", "crista philtri")

    @property
    def number(self) -> int:
        return self.value[0]

    @property
    def abbr(self) -> str:
        return self.value[1]

    @property
    def label(self) -> str:
        return self.value[2]

    @property
    def bilateral(self) -> bool:
        return self.number > 8


MIDLINE = tuple(lm for lm in Landmark if not lm.bilateral)
BILATERAL = tuple(lm for lm in Landmark if lm.bilateral)


@dataclass(frozen=True)
class LandmarkId:
    name: Landmark
    side: Side

    def __post_init__(self):
        if self.name.bilateral == (self.side is Side.MIDLINE):
            raise ValidationError(
                f"{self.name.label} cannot have side {self.side.value}"
            )

    @property
    def column_prefix(self) -> str:
        if self.side is Side.MIDLINE:
            return self.name.abbr
        return f"{self.name.abbr}_{self.side.value[0]}"


def _canonical_ids() -> tuple[LandmarkId, ...]:
    ids = [LandmarkId(lm, Side.MIDLINE) for lm in MIDLINE]
    for lm in BILATERAL:
        ids.append(LandmarkId(lm, Side.LEFT))
        ids.append(LandmarkId(lm, Side.RIGHT))
    return tuple(ids)


LANDMARK_IDS = _canonical_ids()
LANDMARK_INDEX = {lid: i for i, lid in enumerate(LANDMARK_IDS)}
N_LANDMARKS = len(LANDMARK_IDS)

LABEL_COLUMNS = ("subject_id", "sex", "age")
COORD_COLUMNS = tuple(
    f"{lid.column_prefix}_{axis}" for lid in LANDMARK_IDS for axis in ("x", "y")
)
LANDMARK_COLUMNS = LABEL_COLUMNS + COORD_COLUMNS
PAI_COLUMNS = LABEL_COLUMNS + tuple(f"pai_{i:03d}" for i in range(1, N_PAIS + 1))


def landmark_index(name: Landmark, side: Side = Side.MIDLINE) -> int:
    """Row of ``(name, side)`` in the canonical (28, 2) coordinate array."""
    return LANDMARK_INDEX[LandmarkId(name, side)]


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """All 28 landmark coordinates of one face, canonical order, shape (28, 2)."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float)
        if arr.shape != (N_LANDMARKS, 2):
            raise ValidationError(
                f"expected {N_LANDMARKS}x2 coordinates, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("landmark coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_mapping(cls, points: Mapping[LandmarkId, Sequence[float]]) -> LandmarkSet:
        missing = [lid for lid in LANDMARK_IDS if lid not in points]
        if missing:
            names = ", ".join(lid.column_prefix for lid in missing)
            raise ValidationError(f"missing landmarks: {names}")
        extra = set(points) - set(LANDMARK_IDS)
        if extra:
            raise ValidationError(f"unknown landmark ids: {extra}")
        return cls(np.array([points[lid] for lid in LANDMARK_IDS], dtype=float))

    def point(self, name: Landmark, side: Side = Side.MIDLINE) -> np.ndarray:
        return self.coords[landmark_index(name, side)]

    def as_mapping(self) -> dict[LandmarkId, tuple[float, float]]:
        return {lid: (float(x), float(y)) for lid, (x, y) in zip(LANDMARK_IDS, self.coords)}

    def __eq__(self, other):
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)


def parse_sex(token: str) -> str:
    tok = str(token).strip().upper()
    if tok not in SEXES:
        raise ValidationError(f"unknown sex token {token!r} (expected F or M)")
    return tok


def check_age(age: int) -> int:
    if not MIN_AGE <= age <= MAX_AGE:
        raise ValidationError(f"age {age} outside [{MIN_AGE}, {MAX_AGE}]")
    return age


@dataclass(frozen=True)
class FaceRecord:
    subject_id: str
    sex: str
    age: int
    landmarks: LandmarkSet

    def __post_init__(self):
        object.__setattr__(self, "sex", parse_sex(self.sex))
        if isinstance(self.age, bool) or int(self.age) != self.age:
            raise ValidationError(f"age must be an integer, got {self.age!r}")
        object.__setattr__(self, "age", check_age(int(self.age)))
        if not isinstance(self.landmarks, LandmarkSet):
            raise ValidationError("landmarks must be a LandmarkSet")


@dataclass(frozen=True)
class Dataset:
    records: tuple[FaceRecord, ...]
    source: str = "<memory>"
    checksum: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for i, rec in enumerate(self.records):
            if rec.subject_id in seen:
                raise ValidationError(f"record {i}: duplicate subject_id {rec.subject_id!r}")
            seen.add(rec.subject_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def coords(self) -> np.ndarray:
        """Stacked landmark coordinates, shape (N, 28, 2)."""
        if not self.records:
            return np.zeros((0, N_LANDMARKS, 2))
        return np.stack([r.landmarks.coords for r in self.records])


@dataclass(eq=False)
class PaiTable:
    """Labeled feature table: one row per face, 208 PAI columns."""

    subject_ids: list[str]
    sex: np.ndarray
    age: np.ndarray
    features: np.ndarray
    rejects: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.subject_ids = [str(s) for s in self.subject_ids]
        self.sex = np.asarray(self.sex, dtype="<U1")
        self.age = np.asarray(self.age, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=float).reshape(-1, N_PAIS)
        n = len(self.subject_ids)
        if not (len(self.sex) == len(self.age) == self.features.shape[0] == n):
            raise SchemaError("label and feature row counts differ")

    def __len__(self):
        return len(self.subject_ids)

    def subset(self, mask_or_index) -> PaiTable:
        idx = np.arange(len(self))[mask_or_index]
        return PaiTable(
            [self.subject_ids[i] for i in idx],
            self.sex[idx],
            self.age[idx],
            self.features[idx],
        )

    def equals(self, other: PaiTable) -> bool:
        return (
            self.subject_ids == other.subject_ids
            and np.array_equal(self.sex, other.sex)
            and np.array_equal(self.age, other.age)
            and np.array_equal(self.features, other.features)
        )


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from None
    if "\x00" in text:
        raise ParseError(f"{path}: contains NUL bytes")
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = []
    try:
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((reader.line_num, [c.strip() for c in row]))
    except csv.Error as exc:
        raise ParseError(f"{path}: line {reader.line_num}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: empty file, header row required")
    return rows[0][1], rows[1:]


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"line {line}: column {column}: non-numeric value {text!r}") from None


def _parse_age(text: str, line: int) -> int:
    try:
        age = int(text)
    except ValueError:
        raise ParseError(f"line {line}: column age: non-integer value {text!r}") from None
    try:
        return check_age(age)
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None


def _parse_row_sex(text: str, line: int) -> str:
    try:
        return parse_sex(text)
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None


def parse_landmark_csv(path, column_map: Mapping[str, str] | None = None) -> Dataset:
    """Read a landmark CSV into a validated :class:`Dataset`.

    ``column_map`` maps canonical column names to the names used in the file,
    for exports whose headers differ from ours. Columns are located by header
    name, so their order in the file is free.
    """
    header, rows = _read_rows(path)
    column_map = dict(column_map or {})
    wanted = [column_map.get(c, c) for c in LANDMARK_COLUMNS]
    if len(header) != len(LANDMARK_COLUMNS):
        raise SchemaError(
            f"{path}: header has {len(header)} columns, expected {len(LANDMARK_COLUMNS)} "
            f"(3 labels + {2 * N_LANDMARKS} coordinates)"
        )
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    missing = [w for w in wanted if w not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns: {', '.join(missing)}")
    pos = [header.index(w) for w in wanted]

    records = []
    seen: dict[str, int] = {}
    for line, row in rows:
        if len(row) != len(header):
            raise ParseError(
                f"line {line}: expected {len(header)} columns, got {len(row)}"
            )
        vals = [row[p] for p in pos]
        sid = vals[0]
        if not sid:
            raise ValidationError(f"line {line}: empty subject_id")
        sex = _parse_row_sex(vals[1], line)
        age = _parse_age(vals[2], line)
        coords = np.array(
            [_parse_float(v, line, c) for v, c in zip(vals[3:], COORD_COLUMNS)]
        ).reshape(N_LANDMARKS, 2)
        if not np.all(np.isfinite(coords)):
            raise ValidationError(f"line {line}: non-finite coordinate")
        if sid in seen:
            raise ValidationError(
                f"line {line}: duplicate subject_id {sid!r} (first seen on line {seen[sid]})"
            )
        seen[sid] = line
        records.append(FaceRecord(sid, sex, age, LandmarkSet(coords)))
    return Dataset(tuple(records), source=str(path), checksum=file_checksum(path))


def _write_csv(path, header: Iterable[str], rows: Iterable[Iterable[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def _fmt(x: float) -> str:
    return FLOAT_FORMAT.format(float(x))


def write_landmark_csv(dataset: Dataset | Iterable[FaceRecord], path) -> None:
    rows = (
        [rec.subject_id, rec.sex, str(rec.age)] + [_fmt(v) for v in rec.landmarks.coords.ravel()]
        for rec in dataset
    )
    _write_csv(path, LANDMARK_COLUMNS, rows)


def parse_pai_csv(path) -> PaiTable:
    header, rows = _read_rows(path)
    expected = len(PAI_COLUMNS)
    if len(header) != expected:
        raise SchemaError(
            f"{path}: header has {len(header)} columns, expected {expected} "
            f"({N_PAIS} PAI features + {len(LABEL_COLUMNS)} label columns)"
        )
    if tuple(header) != PAI_COLUMNS:
        bad = next(h for h, c in zip(header, PAI_COLUMNS) if h != c)
        raise SchemaError(f"{path}: unexpected column {bad!r}; PAI columns must be in canonical order")
    ids, sexes, ages = [], [], []
    feats = np.empty((len(rows), N_PAIS))
    for r, (line, row) in enumerate(rows):
        if len(row) != expected:
            raise SchemaError(
                f"line {line}: {len(row)} columns, expected {expected} "
                f"({N_PAIS} PAI features + {len(LABEL_COLUMNS)} label columns)"
            )
        if not row[0]:
            raise ValidationError(f"line {line}: empty subject_id")
        ids.append(row[0])
        sexes.append(_parse_row_sex(row[1], line))
        ages.append(_parse_age(row[2], line))
        for j, text in enumerate(row[3:]):
            v = _parse_float(text, line, PAI_COLUMNS[j + 3])
            if not math.isfinite(v):
                raise ValidationError(f"line {line}: column {PAI_COLUMNS[j + 3]}: non-finite value")
            feats[r, j] = v
    return PaiTable(ids, sexes, ages, feats)


def write_pai_csv(table: PaiTable, path) -> None:
    if table.features.shape[1] != N_PAIS:
        raise SchemaError(f"table has {table.features.shape[1]} feature columns, expected {N_PAIS}")
    rows = (
        [sid, sex, str(int(age))] + [_fmt(v) for v in feats]
        for sid, sex, age, feats in zip(table.subject_ids, table.sex, table.age, table.features)
    )
    _write_csv(path, PAI_COLUMNS, rows)
