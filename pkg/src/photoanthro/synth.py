"""Seeded synthetic landmark datasets with age growth and sexual dimorphism.

Each landmark coordinate follows

    base + age_slope * a + male * (sex_offset + interaction * a) + noise

where ``a`` is the subject's developmental age (chronological age plus a
per-subject Gaussian maturity offset) and ``noise`` is isotropic Gaussian
with a per-landmark standard deviation. The iridion points move with the
pupil, so the iris diameter does not grow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .ingest import (
    BILATERAL,
    LANDMARK_IDS,
    MAX_AGE,
    MIN_AGE,
    MIDLINE,
    N_LANDMARKS,
    SEXES,
    Dataset,
    FaceRecord,
    Landmark,
    LandmarkSet,
    Side,
    landmark_index,
)

FRAME = (480, 640)  # width, height in pixels
ALL_AGES = tuple(range(MIN_AGE, MAX_AGE + 1))


@dataclass(frozen=True, eq=False)
class GrowthModel:
    base: np.ndarray  # (28, 2) px
    age_slope: np.ndarray  # (28, 2) px / year
    sex_offset: np.ndarray  # (28, 2) px, added for males
    interaction: np.ndarray  # (28, 2) px / year, males only
    noise_std: np.ndarray  # (28,) px
    maturity_std: float = 0.0  # years
    seed: int = 0

    def __post_init__(self):
        for name in ("base", "age_slope", "sex_offset", "interaction"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (N_LANDMARKS, 2):
                raise ConfigError(f"{name} must have shape ({N_LANDMARKS}, 2)")
            object.__setattr__(self, name, arr)
        noise = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (N_LANDMARKS,)).copy()
        if np.any(noise < 0) or self.maturity_std < 0:
            raise ConfigError("noise standard deviations must be non-negative")
        object.__setattr__(self, "noise_std", noise)

    def mean_position(self, age: float, male: bool) -> np.ndarray:
        m = float(male)
        return self.base + self.age_slope * age + m * (self.sex_offset + self.interaction * age)

    def scaled(self, gain: float, pivot_age: float = 13.5) -> GrowthModel:
        """Multiply every age and sex effect by ``gain``.

        Positions at ``pivot_age`` for females stay put, so faces remain in
        frame.
        """
        return replace(
            self,
            base=self.base + (1.0 - gain) * self.age_slope * pivot_age,
            age_slope=self.age_slope * gain,
            sex_offset=self.sex_offset * gain,
            interaction=self.interaction * gain,
        )

    def with_seed(self, seed: int) -> GrowthModel:
        return replace(self, seed=seed)


_IRIS_PAIRS = [
    (landmark_index(Landmark.IRIDION_MEDIALE, s), landmark_index(Landmark.IRIDION_LATERALE, s))
    for s in (Side.LEFT, Side.RIGHT)
]


def _check_iris(model: GrowthModel, ages) -> None:
    lo, hi = min(ages) - 4 * model.maturity_std, max(ages) + 4 * model.maturity_std
    for age in (lo, hi):
        for male in (False, True):
            pos = model.mean_position(age, male)
            for i, j in _IRIS_PAIRS:
                diam = float(np.hypot(*(pos[i] - pos[j])))
                margin = 6.0 * float(np.hypot(model.noise_std[i], model.noise_std[j]))
                if diam <= max(margin, 1e-9):
                    raise ConfigError(
                        f"iris diameter {diam:.3g}px at age {age:.3g} is not bounded away from zero"
                    )


def generate(model: GrowthModel, n_per_cell: int, ages=ALL_AGES, sexes=SEXES) -> Dataset:
    """Balanced dataset with ``n_per_cell`` faces for every (sex, age) cell.

    Cells are drawn from independent generators keyed on (seed, sex, age), so
    a cell's faces do not depend on which other cells are requested.
    """
    if n_per_cell < 1:
        raise ConfigError("n_per_cell must be at least 1")
    ages = sorted(set(int(a) for a in ages))
    sexes = [s for s in SEXES if s in set(sexes)]
    if not ages or not sexes:
        raise ConfigError("need at least one age and one sex")
    _check_iris(model, ages)
    records = []
    for sex in sexes:
        male = sex == "M"
        for age in ages:
            rng = np.random.default_rng([model.seed, int(male), age])
            dev_age = age + model.maturity_std * rng.standard_normal(n_per_cell)
            noise = rng.standard_normal((n_per_cell, N_LANDMARKS, 2)) * model.noise_std[:, None]
            for k in range(n_per_cell):
                coords = model.mean_position(dev_age[k], male) + noise[k]
                records.append(FaceRecord(f"{sex}{age:02d}-{k:05d}", sex, age, LandmarkSet(coords)))
    return Dataset(tuple(records), source=f"synth(seed={model.seed})")


# Adult (22-year-old female) face in iris-diameter units, relative to the
# midpoint between the pupils: (lateral offset, vertical offset), y down.
_TEMPLATE = {
    Landmark.GLABELLA: (0.0, -1.9),
    Landmark.NASION: (0.0, -0.5),
    Landmark.SUBNASALE: (0.0, 3.5),
    Landmark.LABIALE_SUPERIUS: (0.0, 4.3),
    Landmark.STOMION: (0.0, 4.9),
    Landmark.LABIALE_INFERIUS: (0.0, 5.5),
    Landmark.GNATHION: (0.0, 8.0),
    Landmark.MIDNASAL: (0.0, 1.3),
    Landmark.ENTOCANTHION: (1.2, 0.05),
    Landmark.EXOCANTHION: (3.9, -0.1),
    Landmark.PUPIL: (2.5, 0.0),
    Landmark.ZYGION: (5.4, 0.9),
    Landmark.ALARE: (1.35, 3.0),
    Landmark.GONION: (4.5, 6.2),
    Landmark.CHEILION: (1.9, 4.9),
    Landmark.CRISTA_PHILTRI: (0.3, 4.2),
}

# Fraction of the adult coordinate still to be grown at age 5: (x, y).
_GROWTH = {
    Landmark.GLABELLA: (0.0, 0.15),
    Landmark.NASION: (0.0, 0.12),
    Landmark.SUBNASALE: (0.0, 0.26),
    Landmark.LABIALE_SUPERIUS: (0.0, 0.28),
    Landmark.STOMION: (0.0, 0.29),
    Landmark.LABIALE_INFERIUS: (0.0, 0.30),
    Landmark.GNATHION: (0.0, 0.33),
    Landmark.MIDNASAL: (0.0, 0.22),
    Landmark.ENTOCANTHION: (0.08, 0.1),
    Landmark.EXOCANTHION: (0.10, 0.1),
    Landmark.PUPIL: (0.10, 0.0),
    Landmark.ZYGION: (0.18, 0.2),
    Landmark.ALARE: (0.20, 0.27),
    Landmark.GONION: (0.22, 0.33),
    Landmark.CHEILION: (0.20, 0.29),
    Landmark.CRISTA_PHILTRI: (0.15, 0.28),
}

# Extra male size fraction at 22 (at 5 it is 1/10 of this): (x, y).
_DIMORPHISM = {
    Landmark.GLABELLA: (0.0, 0.06),
    Landmark.NASION: (0.0, 0.03),
    Landmark.SUBNASALE: (0.0, 0.04),
    Landmark.LABIALE_SUPERIUS: (0.0, 0.045),
    Landmark.STOMION: (0.0, 0.05),
    Landmark.LABIALE_INFERIUS: (0.0, 0.055),
    Landmark.GNATHION: (0.0, 0.08),
    Landmark.MIDNASAL: (0.0, 0.03),
    Landmark.ENTOCANTHION: (0.0, 0.0),
    Landmark.EXOCANTHION: (0.01, 0.0),
    Landmark.PUPIL: (0.01, 0.0),
    Landmark.ZYGION: (0.05, 0.03),
    Landmark.ALARE: (0.09, 0.03),
    Landmark.GONION: (0.10, 0.06),
    Landmark.CHEILION: (0.07, 0.05),
    Landmark.CRISTA_PHILTRI: (0.05, 0.045),
}

_IRIS_PX = 26.0
_CENTRE = (240.0, 270.0)


def default_growth_model(seed: int = 0, noise_px: float = 1.0, iris_noise_px: float = 0.25,
                         maturity_std: float = 1.0) -> GrowthModel:
    """Documented default parameterization.

    Faces fit a 480x640 frame (about 260 px glabella to gnathion at 22).
    The lower face lengthens fastest with age, males diverge from females
    mostly in lower-face height and jaw, nose and mouth width, and the gap
    grows tenfold between 5 and 22. The iris diameter is 26 px at every age.
    """
    base = np.zeros((N_LANDMARKS, 2))
    slope = np.zeros((N_LANDMARKS, 2))
    offset = np.zeros((N_LANDMARKS, 2))
    inter = np.zeros((N_LANDMARKS, 2))
    noise = np.full(N_LANDMARKS, float(noise_px))
    span = MAX_AGE - MIN_AGE
    cx, cy = _CENTRE

    def place(idx, sign, template, growth, dimorph):
        adult = np.array([sign * template[0], template[1]]) * _IRIS_PX
        g = np.array(growth)
        d = np.array(dimorph)
        # female position is adult * (1 - g * (22 - a) / 17): linear in a
        slope[idx] = adult * g / span
        base[idx] = np.array([cx, cy]) + adult * (1 - g) - slope[idx] * MIN_AGE
        # male extra: adult * d * (0.1 + 0.9 * (a - 5) / 17)
        inter[idx] = adult * d * 0.9 / span
        offset[idx] = adult * d * 0.1 - inter[idx] * MIN_AGE

    for lm in MIDLINE:
        place(landmark_index(lm), 1.0, _TEMPLATE[lm], _GROWTH[lm], _DIMORPHISM[lm])
    for lm in BILATERAL:
        if lm in (Landmark.IRIDION_LATERALE, Landmark.IRIDION_MEDIALE):
            continue
        for side, sign in ((Side.LEFT, 1.0), (Side.RIGHT, -1.0)):
            place(landmark_index(lm, side), sign, _TEMPLATE[lm], _GROWTH[lm], _DIMORPHISM[lm])
    for side, sign in ((Side.LEFT, 1.0), (Side.RIGHT, -1.0)):
        pu = landmark_index(Landmark.PUPIL, side)
        for lm, dx in ((Landmark.IRIDION_LATERALE, 0.5), (Landmark.IRIDION_MEDIALE, -0.5)):
            i = landmark_index(lm, side)
            base[i] = base[pu] + np.array([sign * dx * _IRIS_PX, 0.0])
            slope[i] = slope[pu]
            offset[i] = offset[pu]
            inter[i] = inter[pu]
            noise[i] = iris_noise_px
        noise[pu] = iris_noise_px
    return GrowthModel(base, slope, offset, inter, noise, maturity_std=maturity_std, seed=seed)


__all__ = ["GrowthModel", "generate", "default_growth_model", "ALL_AGES", "LANDMARK_IDS"]
