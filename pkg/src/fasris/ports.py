"""Fluid-port selection: exhaustive per-user search and baseline policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rate import PortIndex

__all__ = ["PortPolicy", "port_gains", "best_port", "spacing_ok", "baseline_port"]


@dataclass(frozen=True)
class PortPolicy:
    """A port-choice rule and, once applied, the chosen ports per user."""

    kind: str  # "exhaustive" | "random" | "center"
    chosen: tuple | None = None
    gain_table: np.ndarray | None = None


def port_gains(H_br, v, H_ri) -> np.ndarray:
    """Effective gain of every candidate port column, as a K-vector."""
    cols = H_ri * v[:, None]
    Y = H_br @ cols  # (L, K)
    return np.einsum("lk,lk->k", Y.conj(), Y).real


def best_port(H_br, v, H_ri, K1) -> tuple[PortIndex, float]:
    """Exhaustive one-dimensional search over all ports of one user.

    Ties break toward the smallest linear index, so the scan order never
    changes the result.
    """
    H_ri = np.asarray(H_ri)
    if H_ri.ndim != 2 or H_ri.shape[1] == 0:
        raise ValueError(f"H_ri must have at least one port column, got shape {H_ri.shape}")
    gains = port_gains(H_br, v, H_ri)
    k0 = int(np.argmax(gains))
    return PortIndex.from_linear(k0 + 1, K1), float(gains[k0])


def spacing_ok(a: PortIndex, b: PortIndex, d0, config) -> bool:
    """Check the minimum physical spacing between two candidate ports."""
    if a.k == b.k:
        return True
    dx = (a.k1 - b.k1) * config.pitch1
    dy = (a.k2 - b.k2) * config.pitch2
    return bool(np.hypot(dx, dy) >= d0)


def baseline_port(kind, K1, K2, rng=None) -> PortIndex:
    """Non-searching port policies: uniform random draw or the fixed center."""
    if kind == "random":
        if rng is None:
            raise ValueError("random port policy needs a generator")
        k = int(rng.integers(1, K1 * K2 + 1))
        return PortIndex.from_linear(k, K1)
    if kind == "center":
        return PortIndex.from_grid(-(-K1 // 2), -(-K2 // 2), K1)
    raise ValueError(f"unknown baseline port policy {kind!r}")
