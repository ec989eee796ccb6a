"""Monte Carlo sweeps over SNR, surface size, aperture, or iterations.

Each trial derives a child seed from (master seed, trial index) with a
splitmix-style mix, samples a fresh channel realization, runs the scheme's
optimizer, and aggregates means and standard errors per sweep point. Trials
reuse the same child seeds across sweep values and schemes (common random
numbers), which stabilizes the comparisons the presets are built for.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .ao import alternating_optimize, evaluate
from .channel import sample_realization
from .ports import baseline_port
from .rate import MismatchedChannel
from .scenario import ScenarioConfig, db_to_linear, make_config

__all__ = [
    "SCHEMES",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "splitmix64",
    "child_seed",
    "run_trial",
    "run_sweep",
    "preset",
    "write_csv",
    "read_csv",
]

SCHEMES = ("FAS-NOMA", "FAS-OMA", "TAS-NOMA", "TAS-OMA", "RAS-NOMA", "FAS-NOMA-ipCSI")

CSV_COLUMNS = (
    "variable",
    "value",
    "scheme",
    "mean_rsum",
    "stderr_rsum",
    "mean_rn",
    "mean_rm",
    "mean_eta",
    "mean_iters",
    "trials",
)

VARIABLES = ("snr_db", "M", "W", "K", "iteration")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 mixing round (finalizer of the golden-ratio stream)."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def child_seed(master: int, index: int) -> int:
    """Deterministic child seed: splitmix64 applied at stream offset `index`."""
    return splitmix64((master + index * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a variable, its values, the schemes, and trial bookkeeping."""

    variable: str
    values: tuple
    schemes: tuple
    trials: int
    base: ScenarioConfig
    out: str | None = None
    master_seed: int = 0

    def validate(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; choose from {VARIABLES}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if not self.schemes:
            raise ValueError("sweep needs at least one scheme")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.variable == "iteration" and any("OMA" in s for s in self.schemes):
            raise ValueError("iteration sweeps track optimizer traces; use NOMA schemes")


@dataclass(frozen=True)
class SweepRow:
    variable: str
    value: float
    scheme: str
    mean_rsum: float
    stderr_rsum: float
    mean_rn: float
    mean_rm: float
    mean_eta: float
    mean_iters: float
    trials: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple


def apply_variable(base: ScenarioConfig, variable: str, value) -> ScenarioConfig:
    """Rebuild the scenario at one sweep point."""
    if variable == "snr_db":
        return base.with_changes(rho=float(db_to_linear(value)))
    if variable == "M":
        side = math.isqrt(int(value))
        if side * side != int(value):
            raise ValueError(f"M sweep values must be perfect squares, got {value}")
        return base.with_changes(M1=side, M2=side)
    if variable == "W":
        return base.with_changes(W1=float(value))
    if variable == "K":
        ratio = base.K1 / base.K2
        k2 = round(math.sqrt(int(value) / ratio))
        k1 = int(value) // max(k2, 1)
        if k1 * k2 != int(value):
            raise ValueError(f"K sweep value {value} does not factor at the base {ratio:g}:1 aspect")
        return base.with_changes(K1=k1, K2=k2)
    if variable == "iteration":
        return base
    raise ValueError(f"unknown sweep variable {variable!r}")


@dataclass(frozen=True)
class TrialMetrics:
    r_n: float
    r_m: float
    r_sum: float
    eta: float
    iters: float
    trace: tuple = ()


def _rng(seed):
    return np.random.default_rng(np.random.PCG64(seed))


def _metrics(report, sol, trace):
    return TrialMetrics(
        r_n=report.r_n,
        r_m=report.r_m,
        r_sum=report.r_sum,
        eta=sol.eta,
        iters=float(sol.iterations),
        trace=trace,
    )


def run_trial(config: ScenarioConfig, schemes, trial_seed: int, reoptimize_oma=False) -> dict:
    """One seeded trial: optimize each requested scheme on a shared realization.

    Time-share variants reuse the variables optimized by their NOMA sibling
    (unless `reoptimize_oma`), fixed/random-port schemes keep their own
    alternating loop with the port block pinned, and the imperfect-CSI scheme
    optimizes against a mismatched channel but is scored on the true one.
    """
    real = sample_realization(config, _rng(child_seed(trial_seed, 0)))
    out = {}
    want = set(schemes)

    if want & {"FAS-NOMA", "FAS-OMA", "FAS-NOMA-ipCSI"}:
        sol = alternating_optimize(config, real, rng=_rng(child_seed(trial_seed, 1)))
        if "FAS-NOMA" in want:
            out["FAS-NOMA"] = _metrics(sol.report, sol, sol.trace)
        if "FAS-OMA" in want:
            if reoptimize_oma:
                sol_o = alternating_optimize(
                    config, real, rng=_rng(child_seed(trial_seed, 5)), objective="oma"
                )
                out["FAS-OMA"] = _metrics(sol_o.report, sol_o, sol_o.trace)
            else:
                rep = evaluate(real, config, sol.ports, sol.q_r, sol.v, mode="oma")
                out["FAS-OMA"] = _metrics(rep, sol, sol.trace)

    if want & {"TAS-NOMA", "TAS-OMA"}:
        center = baseline_port("center", config.K1, config.K2)
        sol_t = alternating_optimize(
            config, real, rng=_rng(child_seed(trial_seed, 2)), fixed_ports=(center, center)
        )
        if "TAS-NOMA" in want:
            out["TAS-NOMA"] = _metrics(sol_t.report, sol_t, sol_t.trace)
        if "TAS-OMA" in want:
            if reoptimize_oma:
                sol_to = alternating_optimize(
                    config,
                    real,
                    rng=_rng(child_seed(trial_seed, 6)),
                    fixed_ports=(center, center),
                    objective="oma",
                )
                out["TAS-OMA"] = _metrics(sol_to.report, sol_to, sol_to.trace)
            else:
                rep = evaluate(real, config, sol_t.ports, sol_t.q_r, sol_t.v, mode="oma")
                out["TAS-OMA"] = _metrics(rep, sol_t, sol_t.trace)

    if "RAS-NOMA" in want:
        rng = _rng(child_seed(trial_seed, 3))
        ras = (
            baseline_port("random", config.K1, config.K2, rng),
            baseline_port("random", config.K1, config.K2, rng),
        )
        sol_r = alternating_optimize(config, real, rng=rng, fixed_ports=ras)
        out["RAS-NOMA"] = _metrics(sol_r.report, sol_r, sol_r.trace)

    if "FAS-NOMA-ipCSI" in want:
        rng = _rng(child_seed(trial_seed, 4))
        estimate = MismatchedChannel(real, config.sigma_e, rng, both_hops=config.ipcsi_both_hops)
        sol_e = alternating_optimize(config, estimate, rng=rng)
        rep = evaluate(real, config, sol_e.ports, sol_e.q_r, sol_e.v, mode="noma")
        true_trace = tuple(
            evaluate(real, config, r.ports, r.position, sol_e.v, mode="noma").r_sum
            for r in sol_e.records
        )
        out["FAS-NOMA-ipCSI"] = _metrics(rep, sol_e, true_trace)

    return out


def _aggregate(variable, value, scheme, metrics) -> SweepRow:
    rsum = np.array([m.r_sum for m in metrics])
    n = len(rsum)
    stderr = float(rsum.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return SweepRow(
        variable=variable,
        value=float(value),
        scheme=scheme,
        mean_rsum=float(rsum.mean()),
        stderr_rsum=stderr,
        mean_rn=float(np.mean([m.r_n for m in metrics])),
        mean_rm=float(np.mean([m.r_m for m in metrics])),
        mean_eta=float(np.mean([m.eta for m in metrics])),
        mean_iters=float(np.mean([m.iters for m in metrics])),
        trials=n,
    )


def _trial_batch(config, schemes, seeds, n_jobs, reoptimize_oma):
    if n_jobs == 1:
        return [run_trial(config, schemes, s, reoptimize_oma) for s in seeds]
    runs = Parallel(n_jobs=n_jobs)(
        delayed(run_trial)(config, schemes, s, reoptimize_oma) for s in seeds
    )
    return list(runs)


def run_sweep(spec: SweepSpec, n_jobs: int = 1, reoptimize_oma: bool = False) -> SweepResult:
    """Execute a sweep and return (and optionally persist) the aggregate rows."""
    spec.validate()
    seeds = [child_seed(spec.master_seed, t) for t in range(spec.trials)]
    rows = []
    if spec.variable == "iteration":
        trials = _trial_batch(spec.base, spec.schemes, seeds, n_jobs, reoptimize_oma)
        for scheme in spec.schemes:
            per_trial = [t[scheme] for t in trials]
            for value in spec.values:
                idx = int(value)
                if idx < 1:
                    raise ValueError("iteration values are 1-based")
                # a converged trace holds its final value
                snap = [
                    replace(m, r_sum=m.trace[min(idx, len(m.trace)) - 1]) for m in per_trial
                ]
                rows.append(_aggregate("iteration", value, scheme, snap))
    else:
        for value in spec.values:
            config = apply_variable(spec.base, spec.variable, value)
            trials = _trial_batch(config, spec.schemes, seeds, n_jobs, reoptimize_oma)
            for scheme in spec.schemes:
                rows.append(_aggregate(spec.variable, value, scheme, [t[scheme] for t in trials]))
    result = SweepResult(rows=tuple(rows))
    if spec.out:
        write_csv(result, spec.out)
    return result


def write_csv(result: SweepResult, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow(
                [
                    row.variable,
                    repr(row.value),
                    row.scheme,
                    repr(row.mean_rsum),
                    repr(row.stderr_rsum),
                    repr(row.mean_rn),
                    repr(row.mean_rm),
                    repr(row.mean_eta),
                    repr(row.mean_iters),
                    row.trials,
                ]
            )


def read_csv(path) -> SweepResult:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = tuple(
            SweepRow(
                variable=r[0],
                value=float(r[1]),
                scheme=r[2],
                mean_rsum=float(r[3]),
                stderr_rsum=float(r[4]),
                mean_rn=float(r[5]),
                mean_rm=float(r[6]),
                mean_eta=float(r[7]),
                mean_iters=float(r[8]),
                trials=int(r[9]),
            )
            for r in reader
        )
    return SweepResult(rows=rows)


def preset(name: str, base: ScenarioConfig | None = None, out: str | None = None) -> SweepSpec:
    """Canned sweeps mirroring the four headline experiments.

    fig1: sum rate vs transmit SNR for every scheme (random-port and
    imperfect-CSI variants included); fig2: sum rate vs surface size at
    30 dB; fig3: per-iteration convergence of the alternating loop; fig4:
    sum rate vs aperture length (rerun with kappa_ri overridden for the
    strong-LoS contrast curve).
    """
    base = base if base is not None else make_config()
    if name == "fig1":
        return SweepSpec(
            variable="snr_db",
            values=tuple(float(x) for x in range(0, 45, 5)),
            schemes=SCHEMES,
            trials=200,
            base=base,
            out=out,
        )
    if name == "fig2":
        return SweepSpec(
            variable="M",
            values=(16.0, 64.0, 256.0),
            schemes=("FAS-NOMA",),
            trials=200,
            base=base,
            out=out,
        )
    if name == "fig3":
        return SweepSpec(
            variable="iteration",
            values=tuple(float(i) for i in range(1, 11)),
            schemes=("FAS-NOMA",),
            trials=50,
            base=base,
            out=out,
        )
    if name == "fig4":
        return SweepSpec(
            variable="W",
            values=(0.5, 1.0, 2.0, 4.0),
            schemes=("FAS-NOMA",),
            trials=200,
            base=base,
            out=out,
        )
    raise ValueError(f"unknown preset {name!r}; choose from fig1..fig4")


def ao_record_dict(scheme: str, trial_seed: int, sol) -> dict:
    """JSON-ready convergence record of one alternating-optimization run."""
    return {
        "scheme": scheme,
        "seed": trial_seed,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "eta": sol.eta,
        "r_sum": sol.r_sum,
        "ports": [[p.k1, p.k2, p.k] for p in sol.ports],
        "position": [float(x) for x in sol.q_r],
        "sweeps": [
            {
                "iteration": r.iteration,
                "r_ports": r.r_ports,
                "r_position": r.r_position,
                "r_phases": r.r_phases,
            }
            for r in sol.records
        ],
    }
