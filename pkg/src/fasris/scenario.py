"""Scenario configuration, 3D geometry, and the distance/angle primitives.

Every other module consumes the frozen :class:`ScenarioConfig` built here,
either from keyword overrides (:func:`make_config`) or from a flat JSON
document (:func:`load_config`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Box",
    "PsoParams",
    "ScaParams",
    "AoParams",
    "ScenarioConfig",
    "Geometry",
    "ScenarioParseError",
    "ScenarioValidationError",
    "GeometryError",
    "db_to_linear",
    "make_config",
    "load_config",
    "parse_config",
    "distance",
    "direction_cosines",
    "geometry_at",
]


class ScenarioParseError(ValueError):
    """A document field is missing, unknown, or has the wrong shape/type."""


class ScenarioValidationError(ValueError):
    """A parsed configuration violates a model invariant."""


class GeometryError(ValueError):
    """Degenerate geometry (coincident endpoints)."""


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def _as_point(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ScenarioParseError(f"{name}: expected a 3-element position, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned deployment region for the reflecting surface."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_point(self.lo, "ris_box lo"))
        object.__setattr__(self, "hi", _as_point(self.hi, "ris_box hi"))

    def validate(self):
        if not np.all(self.hi > self.lo):
            raise ScenarioValidationError(
                f"ris_box must be non-degenerate (hi > lo per axis), got lo={self.lo} hi={self.hi}"
            )

    @property
    def center(self):
        return (self.lo + self.hi) / 2.0

    @property
    def edges(self):
        return self.hi - self.lo

    def clamp(self, points):
        return np.clip(points, self.lo, self.hi)

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)


@dataclass(frozen=True)
class PsoParams:
    """Swarm-search knobs for the placement subproblem."""

    n_particles: int = 60
    max_iters: int = 100
    w_max: float = 0.5
    w_min: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    v_max: float | None = None  # None -> 0.2 x box edge per dimension
    init_position: tuple = (50.0, 50.0, 75.0)
    tol: float = 0.0  # g_best stagnation threshold; 0 disables early stop

    def validate(self):
        if self.n_particles < 1:
            raise ScenarioValidationError("pso.n_particles must be >= 1")
        if self.max_iters < 1:
            raise ScenarioValidationError("pso.max_iters must be >= 1")
        if not (self.w_max >= self.w_min > 0):
            raise ScenarioValidationError("pso inertia must satisfy w_max >= w_min > 0")


@dataclass(frozen=True)
class ScaParams:
    """Convex-approximation loop and first-order inner-solver knobs."""

    max_iters: int = 30
    tol: float = 1e-4
    inner_max_iters: int = 2000
    inner_tol: float = 1e-6
    projection_tol: float = 1e-8
    n_randomizations: int = 200

    def validate(self):
        if self.max_iters < 1 or self.inner_max_iters < 1:
            raise ScenarioValidationError("sca iteration caps must be >= 1")
        if self.n_randomizations < 1:
            raise ScenarioValidationError("sca.n_randomizations must be >= 1")


@dataclass(frozen=True)
class AoParams:
    """Outer alternating-loop termination controls."""

    max_outer_iters: int = 20
    epsilon: float = 1e-3

    def validate(self):
        if self.max_outer_iters < 1:
            raise ScenarioValidationError("ao.max_outer_iters must be >= 1")
        if self.epsilon <= 0:
            raise ScenarioValidationError("ao.epsilon must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one scenario.

    Linear-power fields (rho, rho0, kappa_br, kappa_ri) may be given in dB in
    documents via a ``_db`` suffix; they are stored linear here.
    """

    q_b: np.ndarray = (0.0, 0.0, 0.0)
    q_n: np.ndarray = (80.0, 50.0, 0.0)
    q_m: np.ndarray = (200.0, 20.0, 0.0)
    ris_box: Box = field(default_factory=lambda: Box((10.0, 10.0, 20.0), (100.0, 100.0, 40.0)))
    L: int = 4
    M1: int = 8
    M2: int = 8
    K1: int = 20
    K2: int = 10
    W1: float = 2.0
    W2: float = 1.0
    wavelength: float = 0.1
    d: float = 0.05
    d1: float = 0.05
    d2: float = 0.05
    rho0: float = 1e3
    alpha0: float = 2.2
    kappa_br: float = 1.0
    kappa_ri: float = 0.0
    a_n: float = 0.2
    a_m: float = 0.8
    rho: float = 1e3
    d0: float | None = None  # None -> native grid pitch (C4 holds by construction)
    R_min: float = 0.5
    sigma_e: float = 0.1
    ipcsi_both_hops: bool = True
    pso: PsoParams = field(default_factory=PsoParams)
    sca: ScaParams = field(default_factory=ScaParams)
    ao: AoParams = field(default_factory=AoParams)
    seed: int = 0

    def __post_init__(self):
        for name in ("q_b", "q_n", "q_m"):
            object.__setattr__(self, name, _as_point(getattr(self, name), name))
        if not isinstance(self.ris_box, Box):
            lo, hi = _box_bounds(self.ris_box)
            object.__setattr__(self, "ris_box", Box(lo, hi))
        if self.d0 is None:
            object.__setattr__(self, "d0", self.grid_pitch)
        self.validate()

    @property
    def M(self):
        return self.M1 * self.M2

    @property
    def K(self):
        return self.K1 * self.K2

    @property
    def pitch1(self):
        """Physical port spacing along the length axis (meters)."""
        return self.W1 * self.wavelength / (self.K1 - 1) if self.K1 > 1 else 0.0

    @property
    def pitch2(self):
        return self.W2 * self.wavelength / (self.K2 - 1) if self.K2 > 1 else 0.0

    @property
    def grid_pitch(self):
        pitches = [p for p in (self.pitch1, self.pitch2) if p > 0]
        return min(pitches) if pitches else 0.0

    def validate(self):
        if abs(self.a_n + self.a_m - 1.0) > 1e-12:
            raise ScenarioValidationError(
                f"power split must satisfy a_n + a_m = 1, got {self.a_n} + {self.a_m}"
            )
        if not (self.a_m > self.a_n > 0):
            raise ScenarioValidationError(
                f"power split must satisfy a_m > a_n > 0, got a_n={self.a_n}, a_m={self.a_m}"
            )
        self.ris_box.validate()
        if self.kappa_br < 0 or self.kappa_ri < 0:
            raise ScenarioValidationError("Rice factors must be >= 0")
        if self.alpha0 <= 0:
            raise ScenarioValidationError("alpha0 must be > 0")
        for name in ("L", "M1", "M2", "K1", "K2"):
            if getattr(self, name) < 1:
                raise ScenarioValidationError(f"{name} must be >= 1")
        for name in ("W1", "W2", "wavelength", "d", "d1", "d2", "rho0", "rho"):
            if getattr(self, name) <= 0:
                raise ScenarioValidationError(f"{name} must be > 0")
        if not (0.0 <= self.sigma_e < 1.0):
            raise ScenarioValidationError("sigma_e must lie in [0, 1)")
        self.pso.validate()
        self.sca.validate()
        self.ao.validate()

    def with_changes(self, **kw):
        """Copy with replaced fields; d0 re-derives unless explicitly given."""
        if any(k in kw for k in ("W1", "W2", "K1", "K2", "wavelength")) and "d0" not in kw:
            if self.d0 == self.grid_pitch:
                kw["d0"] = None
        return replace(self, **kw)


def _box_bounds(raw):
    arr = np.asarray(raw, dtype=float)
    if arr.shape == (3, 2):
        return arr[:, 0], arr[:, 1]
    if arr.shape == (2, 3):
        return arr[0], arr[1]
    raise ScenarioParseError(f"ris_box: expected 3x2 [min,max] bounds, got shape {arr.shape}")


_DB_FIELDS = {"rho", "rho0", "kappa_br", "kappa_ri"}
_NESTED = {"pso": PsoParams, "sca": ScaParams, "ao": AoParams}


def make_config(**overrides) -> ScenarioConfig:
    """Build a validated config from keyword overrides of the defaults."""
    return parse_config(overrides)


def parse_config(document: dict) -> ScenarioConfig:
    """Turn a flat key/value mapping into a validated :class:`ScenarioConfig`.

    Keys mirror the dataclass fields; ``<name>_db`` variants of rho, rho0,
    kappa_br, and kappa_ri are converted to linear on load.
    """
    if not isinstance(document, dict):
        raise ScenarioParseError(f"expected a mapping of fields, got {type(document).__name__}")
    known = {f.name for f in fields(ScenarioConfig)}
    kwargs = {}
    for key, value in document.items():
        base = key[:-3] if key.endswith("_db") else key
        if key.endswith("_db") and base in _DB_FIELDS:
            if base in document:
                raise ScenarioParseError(f"{base}: given both linear and _db values")
            kwargs[base] = float(db_to_linear(value))
            continue
        if key not in known:
            raise ScenarioParseError(f"{key}: unknown field")
        if key in _NESTED:
            cls = _NESTED[key]
            if not isinstance(value, dict):
                raise ScenarioParseError(f"{key}: expected a mapping of parameters")
            sub_known = {f.name for f in fields(cls)}
            bad = set(value) - sub_known
            if bad:
                raise ScenarioParseError(f"{key}.{sorted(bad)[0]}: unknown field")
            if key == "pso" and "init_position" in value:
                value = dict(value, init_position=tuple(value["init_position"]))
            kwargs[key] = cls(**value)
        else:
            kwargs[key] = value
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, np.exceptions.AxisError) as exc:
        raise ScenarioParseError(str(exc)) from exc


def load_config(source) -> ScenarioConfig:
    """Load a scenario from a JSON document (path, file object, or text)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        path = Path(source)
        if path.exists():
            text = path.read_text()
        elif str(source).lstrip().startswith("{"):
            text = str(source)
        else:
            raise ScenarioParseError(f"scenario document not found: {source}")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"invalid JSON scenario document: {exc}") from exc
    return parse_config(document)


def distance(p, q) -> float:
    """Euclidean distance between two 3D points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(np.linalg.norm(p - q))


def direction_cosines(src, dst) -> np.ndarray:
    """Absolute direction cosines (|dx|, |dy|, |dz|) / distance of a link.

    Components map to (sin(elev)cos(az), sin(elev)sin(az), cos(elev)) under
    the model's magnitude-only angle convention.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    d = np.linalg.norm(dst - src)
    if d == 0.0:
        raise GeometryError(f"coincident points {src} give no direction")
    return np.abs(dst - src) / d


@dataclass(frozen=True)
class Geometry:
    """Derived distances and direction cosines for one RIS placement."""

    d_br: float
    d_rn: float
    d_rm: float
    bs_ris: np.ndarray  # |delta|/d triple of the BS->RIS link
    ris_n: np.ndarray
    ris_m: np.ndarray


def geometry_at(config: ScenarioConfig, q_r) -> Geometry:
    q_r = np.asarray(q_r, dtype=float)
    return Geometry(
        d_br=distance(config.q_b, q_r),
        d_rn=distance(q_r, config.q_n),
        d_rm=distance(q_r, config.q_m),
        bs_ris=direction_cosines(config.q_b, q_r),
        ris_n=direction_cosines(q_r, config.q_n),
        ris_m=direction_cosines(q_r, config.q_m),
    )
