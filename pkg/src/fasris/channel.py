"""Steering vectors, Jakes port correlation, and seeded channel realizations.

The white NLoS draws of a realization are frozen at sampling time and reused
for every candidate RIS position (common random numbers), so downstream
optimizers see a deterministic channel as a function of position alone.
"""

from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import j0 as _scipy_j0

from .scenario import GeometryError, ScenarioConfig

__all__ = [
    "bessel_j0",
    "port_axes",
    "PortCorrelation",
    "jakes_correlation",
    "ula_steering",
    "upa_steering",
    "fas_port_steering",
    "ChannelRealization",
    "sample_realization",
    "save_realization",
    "load_realization",
]


def bessel_j0(x):
    """Zero-order Bessel function of the first kind (vectorized)."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_j0: input must be finite")
    out = _scipy_j0(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def _axis_step(W, K):
    # single-port axis contributes no phase/correlation separation
    return W / (K - 1) if K > 1 else 0.0


def port_axes(K1, K2, W1, W2):
    """Per-port aperture coordinates (in wavelengths) in linear-index order.

    The 2D index maps to the linear one with the length axis fastest:
    k = k1 + (k2 - 1) * K1 for 1-based (k1, k2).
    """
    k = np.arange(K1 * K2)
    k1 = k % K1
    k2 = k // K1
    return k1 * _axis_step(W1, K1), k2 * _axis_step(W2, K2)


@dataclass(frozen=True)
class PortCorrelation:
    """Jakes spatial correlation across the port grid and its PSD factor."""

    R: np.ndarray
    R_half: np.ndarray
    clip_floor: float


@functools.lru_cache(maxsize=16)
def _jakes_cached(K1, K2, W1, W2):
    u1, u2 = port_axes(K1, K2, W1, W2)
    dist = np.hypot(u1[:, None] - u1[None, :], u2[:, None] - u2[None, :])
    R = bessel_j0(2.0 * np.pi * dist)
    np.fill_diagonal(R, 1.0)
    w, U = np.linalg.eigh(R)
    clip_floor = float(w.min())
    w_clipped = np.clip(w, 0.0, None)
    R_half = (U * np.sqrt(w_clipped)) @ U.T
    R_half = (R_half + R_half.T) / 2.0
    for arr in (R, R_half):
        arr.setflags(write=False)
    return PortCorrelation(R=R, R_half=R_half, clip_floor=clip_floor)


def jakes_correlation(K1, K2, W1, W2) -> PortCorrelation:
    """Port correlation matrix R and its symmetric PSD square root.

    Eigenvalues below zero (numerical leakage of the J0 kernel) are clipped
    before factorization; the pre-clip floor is reported.
    """
    return _jakes_cached(int(K1), int(K2), float(W1), float(W2))


def ula_steering(L, d, wavelength, cos_phi):
    """BS line-array response; entry l is exp(-j 2 pi d l cos_phi / lambda)."""
    steps = np.arange(L)
    return np.exp(-1j * 2.0 * np.pi * d * steps * cos_phi / wavelength)


def upa_steering(M1, M2, d1, d2, wavelength, s_cos, c):
    """RIS planar-array response: Kron of the x-axis and z-axis factors."""
    ax = np.exp(-1j * 2.0 * np.pi * d1 * np.arange(M1) * s_cos / wavelength)
    az = np.exp(-1j * 2.0 * np.pi * d2 * np.arange(M2) * c / wavelength)
    return np.kron(ax, az)


def fas_port_steering(K1, K2, W1, W2, s_cos, s_sin):
    """Fluid-port array response in linear-index order (length axis fastest)."""
    u1, u2 = port_axes(K1, K2, W1, W2)
    return np.exp(1j * 2.0 * np.pi * (u1 * s_cos + u2 * s_sin))


def _link_batch(src, dst_batch):
    """Distances and |delta|/d cosines from one point to a batch of points."""
    delta = np.atleast_2d(dst_batch) - np.asarray(src, dtype=float)[None, :]
    d = np.linalg.norm(delta, axis=1)
    if np.any(d == 0.0):
        raise GeometryError("coincident endpoints in link geometry")
    return d, np.abs(delta) / d[:, None]


class ChannelRealization:
    """Frozen stochastic draws plus deterministic channel assembly.

    Holds the i.i.d. CN(0,1) draws Z_br (L x M), Z_rn and Z_rm (M x K), the
    port-correlated products Z_ri @ R_half (position independent), and a
    one-position cache of the assembled matrices.
    """

    def __init__(self, config: ScenarioConfig, z_br, z_rn, z_rm):
        self.config = config
        self.Z_br = z_br
        self.Z_rn = z_rn
        self.Z_rm = z_rm
        self.corr = jakes_correlation(config.K1, config.K2, config.W1, config.W2)
        self._W = {"n": z_rn @ self.corr.R_half, "m": z_rm @ self.corr.R_half}
        for arr in (self.Z_br, self.Z_rn, self.Z_rm, self._W["n"], self._W["m"]):
            arr.setflags(write=False)
        self._cache_key = None
        self._cache = {}

    # -- single-position assembly (cached for the last queried position) --

    def assemble_bs_ris(self, q_r) -> np.ndarray:
        """BS-to-RIS channel H_br (L x M) at the given RIS position."""
        return self._cached("br", q_r, lambda: self.bs_ris_batch(np.asarray(q_r, float)[None, :])[0])

    def assemble_ris_user(self, q_r, user) -> np.ndarray:
        """RIS-to-user channel H_ri (M x K) for user 'n' or 'm'."""
        return self._cached(user, q_r, lambda: self._ris_user_full(q_r, user))

    def _cached(self, link, q_r, build):
        key = np.asarray(q_r, dtype=float).tobytes()
        if key != self._cache_key:
            self._cache_key = key
            self._cache = {}
        if link not in self._cache:
            out = build()
            out.setflags(write=False)
            self._cache[link] = out
        return self._cache[link]

    # -- batched assembly over candidate positions (no caching) --

    def bs_ris_batch(self, positions) -> np.ndarray:
        """H_br for a (P, 3) batch of RIS positions, shape (P, L, M)."""
        cfg = self.config
        d, cosines = _link_batch(cfg.q_b, positions)
        a_bs = np.exp(
            -1j * 2.0 * np.pi * cfg.d * np.arange(cfg.L)[None, :] * cosines[:, 1:2] / cfg.wavelength
        )  # (P, L); BS line array points along the y direction cosine
        ax = np.exp(
            -1j * 2.0 * np.pi * cfg.d1 * np.arange(cfg.M1)[None, :] * cosines[:, 0:1] / cfg.wavelength
        )
        az = np.exp(
            -1j * 2.0 * np.pi * cfg.d2 * np.arange(cfg.M2)[None, :] * cosines[:, 2:3] / cfg.wavelength
        )
        a_ris = (ax[:, :, None] * az[:, None, :]).reshape(len(d), cfg.M)
        los = a_bs[:, :, None] * a_ris.conj()[:, None, :]
        c_los, c_nlos = _rician_coeffs(cfg.kappa_br)
        scale = np.sqrt(cfg.rho0 * d ** (-cfg.alpha0))
        return scale[:, None, None] * (c_los * los + c_nlos * self.Z_br[None, :, :])

    def ris_user_column_batch(self, positions, user, k_linear0) -> np.ndarray:
        """One port column of H_ri for a (P, 3) position batch, shape (P, M)."""
        cfg = self.config
        d, cosines = _link_batch(self._user_pos(user), positions)
        a_dep = self._departure_batch(cosines)
        u1, u2 = port_axes(cfg.K1, cfg.K2, cfg.W1, cfg.W2)
        a_port = np.exp(1j * 2.0 * np.pi * (u1[k_linear0] * cosines[:, 0] + u2[k_linear0] * cosines[:, 1]))
        c_los, c_nlos = _rician_coeffs(cfg.kappa_ri)
        scale = np.sqrt(cfg.rho0 * d ** (-cfg.alpha0))
        los = a_dep * a_port.conj()[:, None]
        return scale[:, None] * (c_los * los + c_nlos * self._W[user][None, :, k_linear0])

    def _ris_user_full(self, q_r, user):
        cfg = self.config
        d, cosines = _link_batch(self._user_pos(user), np.asarray(q_r, float)[None, :])
        a_dep = self._departure_batch(cosines)[0]
        a_port = fas_port_steering(cfg.K1, cfg.K2, cfg.W1, cfg.W2, cosines[0, 0], cosines[0, 1])
        c_los, c_nlos = _rician_coeffs(cfg.kappa_ri)
        scale = np.sqrt(cfg.rho0 * d[0] ** (-cfg.alpha0))
        return scale * (c_los * np.outer(a_dep, a_port.conj()) + c_nlos * self._W[user])

    def _departure_batch(self, cosines):
        cfg = self.config
        ax = np.exp(
            -1j * 2.0 * np.pi * cfg.d1 * np.arange(cfg.M1)[None, :] * cosines[:, 0:1] / cfg.wavelength
        )
        az = np.exp(
            -1j * 2.0 * np.pi * cfg.d2 * np.arange(cfg.M2)[None, :] * cosines[:, 2:3] / cfg.wavelength
        )
        return (ax[:, :, None] * az[:, None, :]).reshape(len(cosines), cfg.M)

    def _user_pos(self, user):
        if user == "n":
            return self.config.q_n
        if user == "m":
            return self.config.q_m
        raise ValueError(f"unknown user {user!r}; expected 'n' or 'm'")


def _rician_coeffs(kappa):
    if np.isinf(kappa):
        return 1.0, 0.0
    return np.sqrt(kappa / (kappa + 1.0)), np.sqrt(1.0 / (kappa + 1.0))


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_realization(config: ScenarioConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw the frozen NLoS components of one trial.

    Draw order is Z_br, Z_rn, Z_rm; with a seeded generator the realization
    is bitwise reproducible.
    """
    z_br = _complex_normal(rng, (config.L, config.M))
    z_rn = _complex_normal(rng, (config.M, config.K))
    z_rm = _complex_normal(rng, (config.M, config.K))
    return ChannelRealization(config, z_br, z_rn, z_rm)


def config_digest(config: ScenarioConfig) -> str:
    """Stable hash of the physical configuration, for archive integrity."""
    payload = {
        "q_b": config.q_b.tolist(),
        "q_n": config.q_n.tolist(),
        "q_m": config.q_m.tolist(),
        "L": config.L,
        "M1": config.M1,
        "M2": config.M2,
        "K1": config.K1,
        "K2": config.K2,
        "W1": config.W1,
        "W2": config.W2,
        "wavelength": config.wavelength,
        "rho0": config.rho0,
        "alpha0": config.alpha0,
        "kappa_br": config.kappa_br,
        "kappa_ri": config.kappa_ri,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def save_realization(real: ChannelRealization, path, seed=None):
    """Dump the frozen draws for regression replay.

    Format: one JSON header line (dims, config digest, seed), then the
    row-major "re im" pairs of Z_br, Z_rn, and Z_rm, one entry per line.
    """
    cfg = real.config
    header = {
        "format": "fasris-realization-v1",
        "L": cfg.L,
        "M": cfg.M,
        "K": cfg.K,
        "config": config_digest(cfg),
        "seed": seed,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for mat in (real.Z_br, real.Z_rn, real.Z_rm):
            for z in mat.ravel():
                fh.write(f"{z.real!r} {z.imag!r}\n")


def load_realization(path, config: ScenarioConfig) -> ChannelRealization:
    """Rebuild a dumped realization; the config must match the archive."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "fasris-realization-v1":
            raise ValueError(f"{path}: not a realization archive")
        if header["config"] != config_digest(config):
            raise ValueError(f"{path}: archive was written for a different configuration")
        L, M, K = header["L"], header["M"], header["K"]
        values = np.loadtxt(fh)
    flat = values[:, 0] + 1j * values[:, 1]
    sizes = (L * M, M * K, M * K)
    if flat.size != sum(sizes):
        raise ValueError(f"{path}: expected {sum(sizes)} entries, found {flat.size}")
    z_br = flat[: sizes[0]].reshape(L, M)
    z_rn = flat[sizes[0] : sizes[0] + sizes[1]].reshape(M, K)
    z_rm = flat[sizes[0] + sizes[1] :].reshape(M, K)
    return ChannelRealization(config, z_br, z_rn, z_rm)
