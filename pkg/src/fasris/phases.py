"""Phase-shift design: semidefinite lifting, concave-minorant iterations,
a first-order solver over the unit-diagonal PSD set, and Gaussian
randomization recovery.

The lifted objective is rewritten in difference form
log2(1 + a_n rho mu_n) + log2(1 + rho mu_m) - log2(1 + a_n rho mu_m)
(exact, using a_n + a_m = 1); linearizing the subtracted concave log gives a
true minorant, so every outer iteration ascends.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .rate import noma_sum_rate, oma_sum_rate

__all__ = [
    "ConvergenceWarning",
    "PhaseSolution",
    "Minorant",
    "project_spectrahedron",
    "dc_objective",
    "sca_minorant",
    "solve_inner",
    "sca_loop",
    "gaussian_randomize",
    "optimize_phases",
    "optimize_phases_oma",
]

LOG2 = np.log(2.0)


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at its iteration cap."""


@dataclass(frozen=True)
class PhaseSolution:
    """Recovered unit-modulus phases plus relaxation diagnostics."""

    v: np.ndarray
    V_star: np.ndarray
    r_app: float
    r_feas: float
    eta: float
    sca_trace: tuple
    n_randomizations: int


@dataclass(frozen=True)
class Minorant:
    """Tangent of the subtracted log at mu_ref: value + slope * (mu - mu_ref)."""

    mu_ref: float
    value: float
    slope: float

    def __call__(self, mu):
        return self.value + self.slope * (mu - self.mu_ref)


def _bump(counters, key, amount=1):
    if counters is not None:
        counters[key] = counters.get(key, 0) + amount


def _hermitize(V):
    return (V + V.conj().T) / 2.0


def trace_form(A, V) -> float:
    """Re Tr(A V) for Hermitian A, V in O(M^2)."""
    return float(np.vdot(V, A).real)


def _guarded_mu(A, V):
    mu = trace_form(A, V)
    scale = float(np.abs(A.diagonal().real).sum())
    if mu < -(1e-10 + 1e-7 * scale):
        raise ValueError(f"trace form is numerically infeasible: mu={mu}")
    return max(mu, 0.0)


def project_spectrahedron(V, tol=1e-8, max_rounds=300, counters=None) -> np.ndarray:
    """Alternating projections onto {V = V^H, V >= 0, diag(V) = 1}.

    Each round clips negative eigenvalues to zero and resets the diagonal;
    rounds stop once a plain round moves the iterate less than the
    fixed-point tolerance in Frobenius norm. The linearly convergent round
    sequence is extrapolated to its limit (Aitken) whenever the contraction
    ratio is stable, which cuts the round count several-fold without
    changing the fixed-point criterion.
    """
    X = _hermitize(np.asarray(V))
    prev_delta = None
    for _ in range(max_rounds):
        _bump(counters, "eigh")
        w, U = np.linalg.eigh(X)
        diag_dev = float(np.abs(np.diagonal(X) - 1.0).max())
        if w[0] >= 0.0 and diag_dev == 0.0:
            break
        if w[0] < 0.0:
            Y = _hermitize((U * np.maximum(w, 0.0)) @ U.conj().T)
        else:
            Y = X.copy()
        np.fill_diagonal(Y, 1.0)
        step = Y - X
        delta = float(np.linalg.norm(step))
        if delta < tol:
            X = Y
            break
        if prev_delta is not None and delta < prev_delta:
            ratio = delta / prev_delta
            if 0.2 < ratio < 0.995:
                Y = Y + step * (ratio / (1.0 - ratio))
                delta = None  # extrapolated move: restart ratio tracking
        prev_delta = delta
        X = Y
    return X


def dc_objective(V, A_n, A_m, config) -> float:
    """Exact lifted sum-rate objective in difference-of-logs form."""
    a_n, rho = config.a_n, config.rho
    mu_n = _guarded_mu(A_n, V)
    mu_m = _guarded_mu(A_m, V)
    return float(
        (np.log1p(a_n * rho * mu_n) + np.log1p(rho * mu_m) - np.log1p(a_n * rho * mu_m)) / LOG2
    )


def sca_minorant(V_t, A_m, config) -> Minorant:
    """First-order expansion of the subtracted log at the current point."""
    a_n, rho = config.a_n, config.rho
    mu_t = _guarded_mu(A_m, V_t)
    return Minorant(
        mu_ref=mu_t,
        value=float(np.log1p(a_n * rho * mu_t) / LOG2),
        slope=a_n * rho / ((1.0 + a_n * rho * mu_t) * LOG2),
    )


def _dykstra_project(V, tol=1e-10, max_rounds=400, counters=None) -> np.ndarray:
    """Dykstra projection onto the spectrahedron (true nearest point).

    Used for stationarity probes: unlike plain alternating projections,
    the limit is the Euclidean projection, so a failed ascent probe is
    trustworthy evidence of stationarity.
    """
    X = _hermitize(np.asarray(V))
    p = np.zeros_like(X)
    for _ in range(max_rounds):
        _bump(counters, "eigh")
        w, U = np.linalg.eigh(X + p)
        Y = _hermitize((U * np.maximum(w, 0.0)) @ U.conj().T)
        p = X + p - Y
        X_new = Y.copy()
        np.fill_diagonal(X_new, 1.0)
        delta = float(np.linalg.norm(X_new - X))
        X = X_new
        if delta < tol:
            break
    return X


def _feasible_step(X, counters=None):
    """Exact retraction onto the spectrahedron: clip negatives, then rescale.

    The diagonal congruence D^-1/2 X D^-1/2 keeps the clipped matrix PSD
    while restoring an exactly unit diagonal, so iterates never leave the
    feasible set (unlike a truncated alternating-projection pass).
    """
    _bump(counters, "eigh")
    w, U = np.linalg.eigh(_hermitize(X))
    if w[0] < 0.0:
        X = _hermitize((U * np.maximum(w, 0.0)) @ U.conj().T)
    d = np.maximum(np.diagonal(X).real, 1e-100)
    scale = 1.0 / np.sqrt(d)
    X = X * np.outer(scale, scale)
    np.fill_diagonal(X, 1.0)
    return X


def _pg_maximize(A_n, A_m, objective, V_init, sca_params, counters=None):
    """Monotone projected-gradient ascent of a smooth concave objective.

    `objective(mu_n, mu_m)` returns (value, d/dmu_n, d/dmu_m). Steps start
    from a Barzilai-Borwein estimate and backtrack until they improve; each
    trial point is retracted exactly onto the feasible set, so every
    objective comparison happens between feasible points and the returned
    value never falls below the feasible starting value.
    """
    fp_tol = sca_params.projection_tol
    V0 = _feasible_step(np.asarray(V_init), counters=counters)
    V = V0
    f, g1, g2 = objective(trace_form(A_n, V), trace_form(A_m, V))
    f0 = f
    G = g1 * A_n + g2 * A_m
    step = None
    converged = False
    stall = 0
    for _ in range(sca_params.inner_max_iters):
        _bump(counters, "pg_iters")
        # step in the unit-diagonal tangent space: the retraction's rescale
        # then only has to absorb second-order drift, not the step itself
        D = G.copy()
        np.fill_diagonal(D, 0.0)
        g_norm = float(np.linalg.norm(D))
        if g_norm == 0.0:
            converged = True
            break
        if step is None:
            step = 0.25 * np.sqrt(len(V)) / g_norm
        accepted = False
        step_entry = step
        for _ in range(30):
            V_try = _feasible_step(V + step * D, counters=counters)
            f_try, g1_try, g2_try = objective(trace_form(A_n, V_try), trace_form(A_m, V_try))
            if f_try > f:
                accepted = True
                break
            step *= 0.5
            if step * g_norm < 1e-15 * max(1.0, float(np.linalg.norm(V))):
                break
        if not accepted:
            # the cheap retraction can block ascent along the active face;
            # probe with the true projection before declaring stationarity
            _bump(counters, "rescues")
            for rescue_step in (step_entry, step_entry / 16.0):
                V_try = _dykstra_project(V + rescue_step * G, counters=counters)
                f_try, g1_try, g2_try = objective(trace_form(A_n, V_try), trace_form(A_m, V_try))
                if f_try > f:
                    accepted = True
                    step = rescue_step
                    break
        if not accepted:
            converged = True  # stationary at line-search resolution
            break
        gain = f_try - f
        G_try = g1_try * A_n + g2_try * A_m
        # Barzilai-Borwein estimate for the next step
        s = V_try - V
        y = G_try - G
        sy = float(np.vdot(s, y).real)
        step = float(np.vdot(s, s).real / -sy) if sy < 0.0 else step * 1.6
        V, f, G = V_try, f_try, G_try
        if gain <= sca_params.inner_tol * max(1.0, abs(f)):
            stall += 1
            if stall >= 4:  # BB gains oscillate; one small gain is not convergence
                converged = True
                break
        else:
            stall = 0
    if not converged:
        warnings.warn(
            "inner phase solver hit its iteration cap; returning best iterate",
            ConvergenceWarning,
        )
    # rescue steps leave tolerance-level feasibility; make it exact again
    V = _feasible_step(V, counters=counters)
    f = objective(trace_form(A_n, V), trace_form(A_m, V))[0]
    if f < f0:
        return V0, f0
    return V, f


def solve_inner(A_n, A_m, minorant: Minorant, V_init, config, counters=None) -> np.ndarray:
    """Maximize the minorized objective over the unit-diagonal PSD set."""
    a_n, rho = config.a_n, config.rho

    def objective(mu_n, mu_m):
        mu_n = max(mu_n, 0.0)
        mu_m = max(mu_m, 0.0)
        value = (np.log1p(a_n * rho * mu_n) + np.log1p(rho * mu_m)) / LOG2 - minorant(mu_m)
        d_n = a_n * rho / ((1.0 + a_n * rho * mu_n) * LOG2)
        d_m = rho / ((1.0 + rho * mu_m) * LOG2) - minorant.slope
        return value, d_n, d_m

    _bump(counters, "inner_solves")
    V, _ = _pg_maximize(A_n, A_m, objective, V_init, config.sca, counters=counters)
    return V


def sca_loop(A_n, A_m, v_init, config, counters=None):
    """Minorize-maximize until the exact objective stalls.

    Returns (V_star, relaxed objective value, per-iteration trace); the trace
    is non-decreasing up to projection wobble because each inner solve starts
    from the expansion point and only accepts improving steps.
    """
    V = _hermitize(np.outer(v_init, np.conj(v_init)))
    prev = dc_objective(V, A_n, A_m, config)
    trace = []
    for _ in range(config.sca.max_iters):
        _bump(counters, "sca_iters")
        minorant = sca_minorant(V, A_m, config)
        V = solve_inner(A_n, A_m, minorant, V, config, counters=counters)
        value = dc_objective(V, A_n, A_m, config)
        trace.append(value)
        if value - prev < config.sca.tol:
            break
        prev = value
    return V, trace[-1], tuple(trace)


def _candidate_gains(A, candidates):
    return np.einsum("ms,mn,ns->s", candidates.conj(), A, candidates, optimize=True).real


def gaussian_randomize(
    V_star,
    A_n,
    A_m,
    S,
    config,
    rng,
    sca_trace=(),
    rate_fn=None,
    r_app=None,
    counters=None,
) -> PhaseSolution:
    """Recover a unit-modulus solution from the relaxed matrix.

    Draws S vectors from CN(0, V_star), phase-projects them, adds the
    phase-projected principal eigenvector as a deterministic candidate, and
    keeps the candidate with the best achieved sum rate.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    V_star = _hermitize(np.asarray(V_star))
    M = len(V_star)
    _bump(counters, "eigh")
    w, U = np.linalg.eigh(V_star)
    if w[-1] <= 0.0:
        raise ValueError("relaxed matrix has rank 0; nothing to randomize")
    factor = U * np.sqrt(np.maximum(w, 0.0))
    draws = factor @ ((rng.standard_normal((M, S)) + 1j * rng.standard_normal((M, S))) / np.sqrt(2.0))
    principal = U[:, -1]
    candidates = np.exp(1j * np.angle(np.concatenate([draws, principal[:, None]], axis=1)))
    g_n = _candidate_gains(A_n, candidates)
    g_m = _candidate_gains(A_m, candidates)
    if rate_fn is None:
        rates = noma_sum_rate(g_n, g_m, config.a_n, config.rho)
    else:
        rates = rate_fn(g_n, g_m)
    best = int(np.argmax(rates))
    r_feas = float(rates[best])
    if r_app is None:
        r_app = dc_objective(V_star, A_n, A_m, config)
    # a feasible rank-one point is itself a relaxed-feasible point, so the
    # best known relaxed value can never sit below the recovered rate
    r_app = max(r_app, r_feas)
    eta = (r_app - r_feas) / r_app if r_app > 0 else 0.0
    return PhaseSolution(
        v=candidates[:, best].copy(),
        V_star=V_star,
        r_app=r_app,
        r_feas=r_feas,
        eta=eta,
        sca_trace=tuple(sca_trace),
        n_randomizations=S,
    )


def optimize_phases(A_n, A_m, v_init, config, rng, counters=None) -> PhaseSolution:
    """Full pipeline: minorant iterations, then randomization recovery.

    If the recovered rank-one point scores above the relaxed value, the
    relaxation provably under-converged, so the ascent restarts from that
    point; the loop is self-limiting because a converged relaxation always
    dominates its own recovery.
    """
    v_cur = np.asarray(v_init)
    best = None
    trace: tuple = ()
    for _ in range(4):
        V_star, r_app, round_trace = sca_loop(A_n, A_m, v_cur, config, counters=counters)
        trace = trace + round_trace
        sol = gaussian_randomize(
            V_star,
            A_n,
            A_m,
            config.sca.n_randomizations,
            config,
            rng,
            sca_trace=trace,
            r_app=r_app,
            counters=counters,
        )
        if best is None or sol.r_feas > best.r_feas:
            best = sol
        if sol.r_feas <= r_app * (1.0 + 1e-9):
            break
        _bump(counters, "sca_restarts")
        v_cur = sol.v
    if best.sca_trace is not trace:
        best = PhaseSolution(
            v=best.v,
            V_star=best.V_star,
            r_app=best.r_app,
            r_feas=best.r_feas,
            eta=best.eta,
            sca_trace=trace,
            n_randomizations=best.n_randomizations,
        )
    return best


def optimize_phases_oma(A_n, A_m, v_init, config, rng, counters=None) -> PhaseSolution:
    """Phase design against the equal-time-share objective (both logs concave,
    so a single first-order solve suffices)."""
    rho = config.rho

    def objective(mu_n, mu_m):
        mu_n = max(mu_n, 0.0)
        mu_m = max(mu_m, 0.0)
        value = 0.5 * (np.log1p(rho * mu_n) + np.log1p(rho * mu_m)) / LOG2
        d_n = 0.5 * rho / ((1.0 + rho * mu_n) * LOG2)
        d_m = 0.5 * rho / ((1.0 + rho * mu_m) * LOG2)
        return value, d_n, d_m

    V_init = _hermitize(np.outer(v_init, np.conj(v_init)))
    _bump(counters, "inner_solves")
    V_star, r_app = _pg_maximize(A_n, A_m, objective, V_init, config.sca, counters=counters)
    return gaussian_randomize(
        V_star,
        A_n,
        A_m,
        config.sca.n_randomizations,
        config,
        rng,
        sca_trace=(r_app,),
        rate_fn=lambda gn, gm: oma_sum_rate(gn, gm, rho),
        r_app=r_app,
        counters=counters,
    )
