"""Model hypotheses: one point of the swept (count, dipole length, orientation) space."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateLayer, ValidationError
from .geometry import LayerBox, OrientationClass

NM2_TO_CM2 = 1e-14


@dataclass(frozen=True)
class ModelHypothesis:
    """A model: ``n_tls`` dipoles of moment ``dipole_length`` e*nm, common orientation class.

    ``layer`` is a single :class:`LayerBox` or a tuple of boxes; see
    :func:`tlsnoise.geometry.sample_positions` for how unions are sampled.
    """

    n_tls: int
    dipole_length: float  # nm; moment = |e| * dipole_length
    orientation: OrientationClass
    layer: LayerBox | tuple[LayerBox, ...]
    rate_interval: tuple[float, float] = (1e-5, 1.0)
    prior_weight: float = 1.0
    epsilon_r: float = 11.0

    def __post_init__(self):
        if int(self.n_tls) != self.n_tls or self.n_tls < 1:
            raise ValidationError(f"n_tls must be a positive integer, got {self.n_tls!r}")
        object.__setattr__(self, "n_tls", int(self.n_tls))
        if not (self.dipole_length > 0 and math.isfinite(self.dipole_length)):
            raise ValidationError(f"dipole_length must be positive, got {self.dipole_length!r}")
        object.__setattr__(self, "orientation", OrientationClass.parse(self.orientation))
        lo, hi = (float(v) for v in self.rate_interval)
        if not (0 < lo <= hi < math.inf):
            raise ValidationError(f"rate interval must be positive and ordered, got {(lo, hi)}")
        object.__setattr__(self, "rate_interval", (lo, hi))
        if not (0.0 <= self.prior_weight <= 1.0):
            raise ValidationError(f"prior_weight must lie in [0, 1], got {self.prior_weight!r}")
        if self.epsilon_r <= 0:
            raise ValidationError("epsilon_r must be positive")

    @property
    def boxes(self) -> tuple[LayerBox, ...]:
        return self.layer if isinstance(self.layer, tuple) else (self.layer,)

    @property
    def moment(self) -> float:
        return float(self.dipole_length)

    def area_nm2(self) -> float:
        area = sum(b.area_nm2 for b in self.boxes)
        if area <= 0:
            raise DegenerateLayer("layer has zero area; areal density undefined")
        return area

    def areal_density_cm2(self) -> float:
        return self.n_tls / (self.area_nm2() * NM2_TO_CM2)

    def with_(self, **changes) -> "ModelHypothesis":
        return replace(self, **changes)

    def label(self) -> str:
        return f"N={self.n_tls} l={self.dipole_length:.4g}nm {self.orientation.value}"

    def to_dict(self) -> dict:
        return {
            "n_tls": self.n_tls,
            "ell_nm": self.dipole_length,
            "orientation": self.orientation.value,
            "layer": [b.to_dict() for b in self.boxes],
            "rate_interval_hz": list(self.rate_interval),
            "prior_weight": self.prior_weight,
            "epsilon_r": self.epsilon_r,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelHypothesis":
        boxes = tuple(LayerBox.from_dict(b) for b in doc["layer"])
        return cls(
            n_tls=doc["n_tls"],
            dipole_length=doc["ell_nm"],
            orientation=OrientationClass.parse(doc["orientation"]),
            layer=boxes[0] if len(boxes) == 1 else boxes,
            rate_interval=tuple(doc.get("rate_interval_hz", (1e-5, 1.0))),
            prior_weight=doc.get("prior_weight", 1.0),
            epsilon_r=doc.get("epsilon_r", 11.0),
        )


def geometric_counts(first: int = 1, last: int = 177, members: int = 13) -> list[int]:
    """Integer counts on a geometric series, rounded, duplicates dropped."""
    raw = np.geomspace(first, last, members)
    out: list[int] = []
    for v in raw:
        n = int(round(float(v)))
        if not out or n != out[-1]:
            out.append(n)
    return out


def log_lengths(center: float, decades: float = 2.0, members: int = 13) -> list[float]:
    half = decades / 2.0
    return [float(v) for v in np.logspace(math.log10(center) - half, math.log10(center) + half, members)]


def hypothesis_grid(
    counts: Sequence[int],
    lengths: Sequence[float],
    orientations: Sequence[OrientationClass],
    layer: LayerBox | tuple[LayerBox, ...],
    rate_interval: tuple[float, float] = (1e-5, 1.0),
    epsilon_r: float = 11.0,
) -> list[ModelHypothesis]:
    """Full factorial sweep with a uniform prior, ordered orientation-major then count then length."""
    total = len(counts) * len(lengths) * len(orientations)
    return [
        ModelHypothesis(n, ell, o, layer, rate_interval, 1.0 / total, epsilon_r)
        for o in orientations
        for n in counts
        for ell in lengths
    ]
