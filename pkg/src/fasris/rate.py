"""Effective gains, NOMA/OMA rates, SIC margins, and lifted quadratic forms.

All operations here are pure; the channel-estimate mismatch wrapper at the
bottom duck-types the realization assembly surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PortIndex",
    "LiftedForm",
    "RateReport",
    "effective_gain",
    "lift_matrix",
    "noma_sum_rate",
    "oma_sum_rate",
    "noma_rates",
    "oma_rates",
    "apply_ipcsi",
    "MismatchedChannel",
]

LOG2 = np.log(2.0)


@dataclass(frozen=True)
class PortIndex:
    """2D fluid-port coordinate with its linear index (all 1-based).

    The linear mapping runs the length axis fastest: k = k1 + (k2 - 1) * K1.
    """

    k1: int
    k2: int
    k: int

    @classmethod
    def from_grid(cls, k1, k2, K1):
        return cls(k1=k1, k2=k2, k=k1 + (k2 - 1) * K1)

    @classmethod
    def from_linear(cls, k, K1):
        k1 = (k - 1) % K1 + 1
        k2 = (k - 1) // K1 + 1
        return cls(k1=k1, k2=k2, k=k)


@dataclass(frozen=True)
class LiftedForm:
    """Hermitian PSD matrix A with v^H A v = effective gain for phase vector v."""

    A: np.ndarray
    port: PortIndex | None = None
    note: str = ""


@dataclass(frozen=True)
class RateReport:
    """Per-user rates (bits/s/Hz), SIC margin, and the minimum-rate flag."""

    r_n: float
    r_m: float
    r_sum: float
    gamma_sic: float
    meets_rmin: bool
    scheme: str


def effective_gain(H_br, v, h_port) -> float:
    """Cascaded power gain || H_br diag(h_port) v ||^2 of one selected port."""
    H_br = np.asarray(H_br)
    v = np.asarray(v)
    h_port = np.asarray(h_port)
    if H_br.ndim != 2 or v.shape != (H_br.shape[1],) or h_port.shape != v.shape:
        raise ValueError(
            f"shape mismatch: H_br {H_br.shape}, v {v.shape}, h_port {h_port.shape}"
        )
    y = H_br @ (h_port * v)
    return float(np.vdot(y, y).real)


def lift_matrix(H_br, h_port, port: PortIndex | None = None) -> LiftedForm:
    """Lift one port's cascaded channel into the quadratic form of the gain.

    A = diag(h)^H H^H H diag(h), so Tr(A v v^H) equals
    :func:`effective_gain` for every phase vector v.
    """
    H_br = np.asarray(H_br)
    h_port = np.asarray(h_port)
    if H_br.ndim != 2 or h_port.shape != (H_br.shape[1],):
        raise ValueError(f"shape mismatch: H_br {H_br.shape}, h_port {h_port.shape}")
    B = H_br * h_port[None, :]
    A = B.conj().T @ B
    A = (A + A.conj().T) / 2.0
    return LiftedForm(A=A, port=port, note="gram of H_br diag(h_port)")


def _check_gains(*gains):
    for g in gains:
        if np.any(np.asarray(g) < 0):
            raise ValueError(f"gains must be non-negative, got {g}")


def noma_sum_rate(g_n, g_m, a_n, rho):
    """Vectorized two-user superposition-coding sum rate (base-2 logs)."""
    gam_n = np.asarray(g_n) * a_n * rho
    gm_rho = np.asarray(g_m) * rho
    gam_m = gm_rho * (1.0 - a_n) / (a_n * gm_rho + 1.0)
    return np.log1p(gam_n) / LOG2 + np.log1p(gam_m) / LOG2


def oma_sum_rate(g_n, g_m, rho):
    """Vectorized equal-time-share baseline with full power per slot."""
    return 0.5 * (np.log1p(np.asarray(g_n) * rho) + np.log1p(np.asarray(g_m) * rho)) / LOG2


def noma_rates(g_n, g_m, config, scheme="NOMA") -> RateReport:
    """Rates of both users, the near user's SIC margin, and the C2 flag."""
    _check_gains(g_n, g_m)
    a_n, a_m, rho = config.a_n, config.a_m, config.rho
    r_n = float(np.log1p(g_n * a_n * rho) / LOG2)
    r_m = float(np.log1p(g_m * a_m * rho / (g_m * a_n * rho + 1.0)) / LOG2)
    gamma_sic = float(g_n * a_m * rho / (g_n * a_n * rho + 1.0))
    r_sum = r_n + r_m
    return RateReport(
        r_n=r_n,
        r_m=r_m,
        r_sum=r_sum,
        gamma_sic=gamma_sic,
        meets_rmin=bool(r_sum >= config.R_min),
        scheme=scheme,
    )


def oma_rates(g_n, g_m, config, scheme="OMA") -> RateReport:
    """Equal time split, full power per user; no interference, no SIC."""
    _check_gains(g_n, g_m)
    rho = config.rho
    r_n = float(0.5 * np.log1p(g_n * rho) / LOG2)
    r_m = float(0.5 * np.log1p(g_m * rho) / LOG2)
    r_sum = r_n + r_m
    return RateReport(
        r_n=r_n,
        r_m=r_m,
        r_sum=r_sum,
        gamma_sic=float("nan"),
        meets_rmin=bool(r_sum >= config.R_min),
        scheme=scheme,
    )


def apply_ipcsi(H, sigma_e, rng, path_amplitude):
    """Gauss-Markov channel estimate with preserved average power.

    H_hat = sqrt(1 - sigma_e^2) H + sigma_e * path_amplitude * E, with E
    i.i.d. standard complex Gaussian; path_amplitude is the link's
    sqrt(rho0 d^-alpha0) scale.
    """
    if not (0.0 <= sigma_e < 1.0):
        raise ValueError(f"sigma_e must lie in [0, 1), got {sigma_e}")
    H = np.asarray(H)
    if sigma_e == 0.0:
        return H
    err = (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)) / np.sqrt(2.0)
    return np.sqrt(1.0 - sigma_e**2) * H + sigma_e * path_amplitude * err


class MismatchedChannel:
    """Estimated-channel view of a realization for imperfect-CSI runs.

    Exposes the same assembly surface as the true realization, mixing every
    assembled matrix with frozen estimation-error draws so that optimizers
    remain deterministic functions of the RIS position. Rates are meant to
    be scored on the wrapped true realization.
    """

    def __init__(self, real, sigma_e, rng, both_hops=True):
        if not (0.0 <= sigma_e < 1.0):
            raise ValueError(f"sigma_e must lie in [0, 1), got {sigma_e}")
        cfg = real.config
        self.true_real = real
        self.config = cfg
        self.sigma_e = sigma_e
        self.both_hops = both_hops
        gauss = lambda shape: (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        self._err = {
            "br": gauss((cfg.L, cfg.M)),
            "n": gauss((cfg.M, cfg.K)),
            "m": gauss((cfg.M, cfg.K)),
        }

    def _amp(self, anchor, positions):
        d = np.linalg.norm(np.atleast_2d(positions) - np.asarray(anchor)[None, :], axis=1)
        return np.sqrt(self.config.rho0 * d ** (-self.config.alpha0))

    def _mix(self, H, err, amp):
        s = self.sigma_e
        return np.sqrt(1.0 - s**2) * H + s * amp * err

    def assemble_bs_ris(self, q_r):
        H = self.true_real.assemble_bs_ris(q_r)
        if not self.both_hops:
            return H
        amp = self._amp(self.config.q_b, np.asarray(q_r, float)[None, :])[0]
        return self._mix(H, self._err["br"], amp)

    def assemble_ris_user(self, q_r, user):
        H = self.true_real.assemble_ris_user(q_r, user)
        amp = self._amp(self._user_pos(user), np.asarray(q_r, float)[None, :])[0]
        return self._mix(H, self._err[user], amp)

    def bs_ris_batch(self, positions):
        H = self.true_real.bs_ris_batch(positions)
        if not self.both_hops:
            return H
        amp = self._amp(self.config.q_b, positions)
        return self._mix(H, self._err["br"][None, :, :], amp[:, None, None])

    def ris_user_column_batch(self, positions, user, k_linear0):
        H = self.true_real.ris_user_column_batch(positions, user, k_linear0)
        amp = self._amp(self._user_pos(user), positions)
        return self._mix(H, self._err[user][None, :, k_linear0], amp[:, None])

    def _user_pos(self, user):
        return self.config.q_n if user == "n" else self.config.q_m
