"""Physical types and geometric kernels for two-level-system (TLS) dipoles.

Lengths are in nanometres and dipole moments in e*nm throughout; conversion
to SI happens only inside the voltage and field kernels.  A TLS flipping as a
Poisson process at rate ``switch_rate`` (per direction) has telegraph
autocorrelation ``exp(-2 * switch_rate * |t|)``, so its relaxation time is
``tau = 1 / (2 * switch_rate)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import constants

from .errors import DegenerateLayer, ValidationError, ZeroDistance

if TYPE_CHECKING:
    from .hypothesis import ModelHypothesis

E_CHARGE = constants.e
EPSILON_0 = constants.epsilon_0
NM = 1e-9
ZERO_DISTANCE_NM = 1e-9
# 1 e*nm in Debye (1 D = 1e-21 / c  C*m)
E_NM_IN_DEBYE = E_CHARGE * NM / (1e-21 / constants.c)


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def _vec(values: Iterable[float], name: str) -> Vec3:
    v = Vec3(*(float(c) for c in values))
    if not all(math.isfinite(c) for c in v):
        raise ValidationError(f"{name} has non-finite components: {v}")
    return v


class OrientationClass(str, enum.Enum):
    FULLY_RANDOM = "FullyRandom"
    HORIZONTAL_RANDOM = "HorizontalRandom"
    HORIZONTAL_X = "HorizontalX"
    HORIZONTAL_Y = "HorizontalY"
    VERTICAL_Z = "VerticalZ"

    @classmethod
    def parse(cls, value: "str | OrientationClass") -> "OrientationClass":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "fullyrandom": cls.FULLY_RANDOM, "fully-random": cls.FULLY_RANDOM,
            "horizontalrandom": cls.HORIZONTAL_RANDOM, "hor-random": cls.HORIZONTAL_RANDOM,
            "horizontalx": cls.HORIZONTAL_X, "hor-x": cls.HORIZONTAL_X,
            "horizontaly": cls.HORIZONTAL_Y, "hor-y": cls.HORIZONTAL_Y,
            "verticalz": cls.VERTICAL_Z, "ver-z": cls.VERTICAL_Z,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValidationError(f"unknown orientation class {value!r}") from None

    @property
    def cli_name(self) -> str:
        return {
            OrientationClass.FULLY_RANDOM: "fully-random",
            OrientationClass.HORIZONTAL_RANDOM: "hor-random",
            OrientationClass.HORIZONTAL_X: "hor-x",
            OrientationClass.HORIZONTAL_Y: "hor-y",
            OrientationClass.VERTICAL_Z: "ver-z",
        }[self]


class Observable(str, enum.Enum):
    VOLTAGE = "Voltage"
    FIELD_X = "FieldX"
    FIELD_Y = "FieldY"
    FIELD_Z = "FieldZ"

    @classmethod
    def parse(cls, value: "str | Observable") -> "Observable":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"voltage": cls.VOLTAGE, "ex": cls.FIELD_X, "ey": cls.FIELD_Y, "ez": cls.FIELD_Z,
                   "fieldx": cls.FIELD_X, "fieldy": cls.FIELD_Y, "fieldz": cls.FIELD_Z}
        try:
            return aliases[key]
        except KeyError:
            raise ValidationError(f"unknown observable {value!r}") from None

    @property
    def field_component(self) -> int | None:
        return {Observable.FIELD_X: 0, Observable.FIELD_Y: 1, Observable.FIELD_Z: 2}.get(self)


@dataclass(frozen=True)
class Tls:
    position: Vec3
    orientation: Vec3
    moment: float  # e*nm
    switch_rate: float  # Hz, per flip direction

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position, "position"))
        orient = _vec(self.orientation, "orientation")
        if abs(orient.norm() - 1.0) > 1e-12:
            raise ValidationError(f"orientation must be a unit vector, |p|={orient.norm()!r}")
        object.__setattr__(self, "orientation", orient)
        if not (self.moment > 0 and math.isfinite(self.moment)):
            raise ValidationError(f"moment must be positive, got {self.moment!r}")
        if not (self.switch_rate > 0 and math.isfinite(self.switch_rate)):
            raise ValidationError(f"switch_rate must be positive, got {self.switch_rate!r}")

    @property
    def tau(self) -> float:
        return 1.0 / (2.0 * self.switch_rate)


@dataclass(frozen=True)
class TlsConfiguration:
    tls_list: tuple[Tls, ...]
    epsilon_r: float = 11.0

    def __post_init__(self):
        object.__setattr__(self, "tls_list", tuple(self.tls_list))
        if not (self.epsilon_r > 0 and math.isfinite(self.epsilon_r)):
            raise ValidationError(f"epsilon_r must be positive, got {self.epsilon_r!r}")

    def __len__(self) -> int:
        return len(self.tls_list)

    def require_nonempty(self) -> None:
        if not self.tls_list:
            raise ValidationError("configuration has no TLS")

    @property
    def positions(self) -> np.ndarray:
        return np.array([t.position for t in self.tls_list], dtype=float).reshape(-1, 3)

    @property
    def orientations(self) -> np.ndarray:
        return np.array([t.orientation for t in self.tls_list], dtype=float).reshape(-1, 3)

    @property
    def moments(self) -> np.ndarray:
        return np.array([t.moment for t in self.tls_list], dtype=float)

    @property
    def switch_rates(self) -> np.ndarray:
        return np.array([t.switch_rate for t in self.tls_list], dtype=float)

    @property
    def taus(self) -> np.ndarray:
        return 1.0 / (2.0 * self.switch_rates)

    def __add__(self, other: "TlsConfiguration") -> "TlsConfiguration":
        if other.epsilon_r != self.epsilon_r:
            raise ValidationError("cannot merge configurations with different epsilon_r")
        return TlsConfiguration(self.tls_list + other.tls_list, self.epsilon_r)

    @classmethod
    def from_arrays(cls, positions, orientations, moments, switch_rates, epsilon_r=11.0):
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        orientations = np.asarray(orientations, dtype=float).reshape(-1, 3)
        n = len(positions)
        moments = np.broadcast_to(np.asarray(moments, dtype=float), (n,))
        switch_rates = np.broadcast_to(np.asarray(switch_rates, dtype=float), (n,))
        return cls(
            tuple(Tls(Vec3(*p), Vec3(*o), float(m), float(g))
                  for p, o, m, g in zip(positions, orientations, moments, switch_rates)),
            float(epsilon_r),
        )

    # -- JSON ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "epsilon_r": self.epsilon_r,
            "tls": [
                {"pos": list(t.position), "orient": list(t.orientation),
                 "moment_e_nm": t.moment, "switch_rate_hz": t.switch_rate}
                for t in self.tls_list
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "TlsConfiguration":
        if not isinstance(doc, dict) or set(doc) != {"epsilon_r", "tls"}:
            raise ValidationError("configuration document must have exactly the keys 'epsilon_r' and 'tls'")
        keys = {"pos", "orient", "moment_e_nm", "switch_rate_hz"}
        tls = []
        for i, item in enumerate(doc["tls"]):
            if not isinstance(item, dict) or set(item) != keys:
                raise ValidationError(f"tls[{i}] must have exactly the keys {sorted(keys)}")
            if len(item["pos"]) != 3 or len(item["orient"]) != 3:
                raise ValidationError(f"tls[{i}]: pos and orient must have three components")
            tls.append(Tls(Vec3(*item["pos"]), Vec3(*item["orient"]),
                           float(item["moment_e_nm"]), float(item["switch_rate_hz"])))
        return cls(tuple(tls), float(doc["epsilon_r"]))

    @classmethod
    def from_json(cls, text: str) -> "TlsConfiguration":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class QubitLayout:
    sites: tuple[Vec3, ...]
    check_distinct: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        sites = tuple(_vec(s, "site") for s in self.sites)
        object.__setattr__(self, "sites", sites)
        if not sites:
            raise ValidationError("layout needs at least one site")
        for s in sites:
            if s.z != 0.0:
                raise ValidationError(f"qubit sites must lie in the z=0 plane, got {s}")
        if self.check_distinct and len(set(sites)) != len(sites):
            raise ValidationError("qubit sites must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.sites, dtype=float).reshape(-1, 3)

    @classmethod
    def pair(cls, separation: float = 100.0) -> "QubitLayout":
        """Two sites at (-separation/2, 0, 0) and (+separation/2, 0, 0)."""
        return cls((Vec3(-separation / 2, 0.0, 0.0), Vec3(separation / 2, 0.0, 0.0)))


@dataclass(frozen=True)
class LayerBox:
    """Axis-aligned box (nm) in which TLS positions are drawn uniformly."""

    x: tuple[float, float]
    y: tuple[float, float]
    z: tuple[float, float]

    def __post_init__(self):
        for name in ("x", "y", "z"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ValidationError(f"layer {name}-range must be finite and ordered, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))

    @property
    def area_nm2(self) -> float:
        return (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])

    @property
    def volume_nm3(self) -> float:
        return self.area_nm2 * (self.z[1] - self.z[0])

    @property
    def lows(self) -> np.ndarray:
        return np.array([self.x[0], self.y[0], self.z[0]])

    @property
    def highs(self) -> np.ndarray:
        return np.array([self.x[1], self.y[1], self.z[1]])

    @classmethod
    def point(cls, x: float, y: float, z: float) -> "LayerBox":
        return cls((x, x), (y, y), (z, z))

    def to_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "z": list(self.z)}

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerBox":
        return cls(tuple(doc["x"]), tuple(doc["y"]), tuple(doc["z"]))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _coulomb_prefactor(epsilon_r: float) -> float:
    """Converts moment[e*nm] / distance[nm]^2 into volts."""
    return E_CHARGE * NM / (4.0 * math.pi * EPSILON_0 * epsilon_r * NM * NM)


def _separations(positions: np.ndarray, sites: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # positions (..., N, 3), sites (S, 3) -> u (..., N, S, 3), |u| (..., N, S)
    u = positions[..., :, None, :] - sites[None, :, :]
    dist = np.sqrt(np.einsum("...i,...i->...", u, u))
    if np.any(dist < ZERO_DISTANCE_NM):
        raise ZeroDistance("a TLS coincides with a qubit site")
    return u, dist


def voltage_kernels(positions, orientations, moments, sites, epsilon_r: float) -> np.ndarray:
    """Vectorized voltage kernel; returns volts with shape (..., N, S)."""
    positions = np.asarray(positions, dtype=float)
    orientations = np.asarray(orientations, dtype=float)
    sites = np.asarray(sites, dtype=float).reshape(-1, 3)
    u, dist = _separations(positions, sites)
    proj = np.einsum("...ni,...nsi->...ns", orientations, u)
    moments = np.asarray(moments, dtype=float)[..., None]
    return -_coulomb_prefactor(epsilon_r) * moments * proj / dist**3


def field_kernels(positions, orientations, moments, sites, epsilon_r: float) -> np.ndarray:
    """Gradient of the voltage kernel with respect to the site, in V/nm, shape (..., N, S, 3).

    The physical electric field is the negative of this; the sign drops out of
    every second-order statistic computed in this package.
    """
    positions = np.asarray(positions, dtype=float)
    orientations = np.asarray(orientations, dtype=float)
    sites = np.asarray(sites, dtype=float).reshape(-1, 3)
    u, dist = _separations(positions, sites)
    proj = np.einsum("...ni,...nsi->...ns", orientations, u)
    p = orientations[..., :, None, :]
    grad = p / dist[..., None] ** 3 - 3.0 * proj[..., None] * u / dist[..., None] ** 5
    moments = np.asarray(moments, dtype=float)[..., None, None]
    return _coulomb_prefactor(epsilon_r) * moments * grad


def observable_kernels(positions, orientations, moments, sites, epsilon_r, observable) -> np.ndarray:
    """Kernel for the requested observable, shape (..., N, S)."""
    observable = Observable.parse(observable)
    comp = observable.field_component
    if comp is None:
        return voltage_kernels(positions, orientations, moments, sites, epsilon_r)
    return field_kernels(positions, orientations, moments, sites, epsilon_r)[..., comp]


def voltage_kernel(tls: Tls, site: Sequence[float], epsilon_r: float) -> float:
    """Voltage (V) at ``site`` per unit telegraph state of ``tls``."""
    k = voltage_kernels(np.array([tls.position]), np.array([tls.orientation]),
                        np.array([tls.moment]), np.array([site]), epsilon_r)
    return float(k[0, 0])


def field_kernel(tls: Tls, site: Sequence[float], epsilon_r: float) -> Vec3:
    g = field_kernels(np.array([tls.position]), np.array([tls.orientation]),
                      np.array([tls.moment]), np.array([site]), epsilon_r)
    return Vec3(*(float(c) for c in g[0, 0]))


def geometry_matrix_element(m: Tls, n: Tls, site1: Sequence[float], site2: Sequence[float]) -> float:
    """Orientation-weighted geometric factor A_mn in nm^-4."""
    u1 = np.asarray(m.position) - np.asarray(site1, dtype=float)
    u2 = np.asarray(n.position) - np.asarray(site2, dtype=float)
    d1, d2 = np.linalg.norm(u1), np.linalg.norm(u2)
    if d1 < ZERO_DISTANCE_NM or d2 < ZERO_DISTANCE_NM:
        raise ZeroDistance("a TLS coincides with a qubit site")
    return float(np.dot(m.orientation, u1) * np.dot(n.orientation, u2) / (d1**3 * d2**3))


def geometry_diagonal(positions, orientations, site1, site2) -> np.ndarray:
    """A_nn for arrays of TLS, shape (...,)."""
    sites = np.array([site1, site2], dtype=float)
    u, dist = _separations(np.asarray(positions, dtype=float), sites)
    proj = np.einsum("...ni,...nsi->...ns", np.asarray(orientations, dtype=float), u) / dist**3
    return proj[..., 0] * proj[..., 1]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_orientations(orientation: OrientationClass, rng: np.random.Generator, shape) -> np.ndarray:
    orientation = OrientationClass.parse(orientation)
    shape = tuple(np.atleast_1d(shape))
    out = np.zeros(shape + (3,))
    if orientation is OrientationClass.FULLY_RANDOM:
        cos_t = rng.uniform(-1.0, 1.0, size=shape)
        phi = rng.uniform(0.0, 2.0 * math.pi, size=shape)
        sin_t = np.sqrt(1.0 - cos_t**2)
        out[..., 0] = sin_t * np.cos(phi)
        out[..., 1] = sin_t * np.sin(phi)
        out[..., 2] = cos_t
    elif orientation is OrientationClass.HORIZONTAL_RANDOM:
        phi = rng.uniform(0.0, 2.0 * math.pi, size=shape)
        out[..., 0] = np.cos(phi)
        out[..., 1] = np.sin(phi)
    elif orientation is OrientationClass.HORIZONTAL_X:
        out[..., 0] = 1.0
    elif orientation is OrientationClass.HORIZONTAL_Y:
        out[..., 1] = 1.0
    else:
        out[..., 2] = 1.0
    return out


def sample_positions(boxes: Sequence[LayerBox], rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform positions over a union of boxes.

    A union of zero-volume boxes (points, patches) is sampled by picking a box
    uniformly and then a point uniformly inside it; boxes with positive volume
    are weighted by volume.  Mixing the two kinds has no uniform density.
    """
    shape = tuple(np.atleast_1d(shape))
    boxes = list(boxes)
    if not boxes:
        raise DegenerateLayer("no layer boxes given")
    if len(boxes) == 1:
        box = boxes[0]
        if box.area_nm2 <= 0:
            raise DegenerateLayer("a single layer box must have positive x-y extent")
        return rng.uniform(box.lows, box.highs, size=shape + (3,))
    volumes = np.array([b.volume_nm3 for b in boxes])
    if np.all(volumes > 0):
        weights = volumes / volumes.sum()
    elif np.all(volumes == 0):
        weights = np.full(len(boxes), 1.0 / len(boxes))
    else:
        raise DegenerateLayer("cannot mix zero-volume and positive-volume layer boxes")
    idx = rng.choice(len(boxes), size=shape, p=weights)
    lows = np.array([b.lows for b in boxes])[idx]
    highs = np.array([b.highs for b in boxes])[idx]
    return lows + (highs - lows) * rng.uniform(size=shape + (3,))


def sample_switch_rates(rate_interval: tuple[float, float], rng: np.random.Generator, shape) -> np.ndarray:
    lo, hi = rate_interval
    shape = tuple(np.atleast_1d(shape))
    if lo == hi:
        return np.full(shape, float(lo))
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=shape))


def draw_configurations(hypothesis: "ModelHypothesis", rng: np.random.Generator, n_draws: int):
    """Draw ``n_draws`` configurations as arrays.

    Returns ``(positions, orientations, moments, rates)`` with shapes
    (D, N, 3), (D, N, 3), (D, N) and (D, N).
    """
    shape = (n_draws, hypothesis.n_tls)
    positions = sample_positions(hypothesis.boxes, rng, shape)
    orientations = sample_orientations(hypothesis.orientation, rng, shape)
    rates = sample_switch_rates(hypothesis.rate_interval, rng, shape)
    moments = np.full(shape, hypothesis.moment)
    return positions, orientations, moments, rates


def sample_configuration(hypothesis: "ModelHypothesis", rng_seed: int, epsilon_r: float | None = None
                         ) -> TlsConfiguration:
    """One configuration drawn from the hypothesis prior; deterministic in ``rng_seed``."""
    rng = np.random.default_rng(rng_seed)
    pos, orient, mom, rates = draw_configurations(hypothesis, rng, 1)
    eps = hypothesis.epsilon_r if epsilon_r is None else epsilon_r
    return TlsConfiguration.from_arrays(pos[0], orient[0], mom[0], rates[0], eps)
