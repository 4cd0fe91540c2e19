"""Switched trajectories: signal generation, integration, certificate audit.

Switching signals are piecewise-constant subsystem selections with dwell
times drawn from a seeded generator.  Integration uses fixed-step RK4,
shortening the last step of each segment so switch instants are hit
exactly.  The audit drives batches of trajectories and checks that the
certified function never increases along any of them.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certificate import CommonLyapunovFunction
from .multiindex import build_basis
from .vectorfield import flow_step, halton, _PRIMES

ESCAPE_TOL = 1e-12


def thread_count():
    """Worker cap from KOOPMAN_CLF_THREADS; defaults to sequential."""
    try:
        return max(1, int(os.environ.get("KOOPMAN_CLF_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SwitchingSignal:
    """Piecewise-constant subsystem schedule on [0, horizon]."""

    durations: tuple
    subsystems: tuple
    horizon: float

    def __post_init__(self):
        if len(self.durations) != len(self.subsystems):
            raise ValueError("durations and subsystems must align")
        if any(d <= 0 for d in self.durations):
            raise ValueError("durations must be positive")

    @property
    def boundaries(self):
        """Segment end times; the final one equals the horizon exactly."""
        b = np.cumsum(np.array(self.durations, dtype=float))
        if len(b):
            b[-1] = self.horizon
        return b

    def __len__(self):
        return len(self.durations)


def random_signal(num_subsystems, horizon, min_dwell=0.05, max_dwell=1.0, seed=0):
    """Seeded random schedule with dwell times in [min_dwell, max_dwell].

    Dwell draws are capped so the remaining horizon always admits a final
    segment of at least min_dwell; when the bounds make an exact split
    impossible the final segment absorbs the remainder.
    """
    if num_subsystems < 1:
        raise ValueError("need at least one subsystem")
    if min_dwell <= 0:
        raise ValueError("min_dwell must be positive")
    if max_dwell < min_dwell:
        raise ValueError("max_dwell must be >= min_dwell")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    if horizon == 0:
        return SwitchingSignal((), (), 0.0)
    durs, subs = [], []
    t = 0.0
    while True:
        remaining = horizon - t
        idx = int(rng.integers(num_subsystems))
        upper = min(max_dwell, remaining - min_dwell)
        if remaining <= max_dwell + 1e-12 or upper < min_dwell:
            durs.append(remaining)
            subs.append(idx)
            break
        d = float(rng.uniform(min_dwell, upper))
        durs.append(d)
        subs.append(idx)
        t += d
    return SwitchingSignal(tuple(durs), tuple(subs), float(horizon))


def _segment_steps(duration, dt):
    n_full = int(math.floor(duration / dt + 1e-12))
    rem = duration - n_full * dt
    if rem < 1e-12 * max(1.0, dt):
        rem = 0.0
    return n_full, rem


@dataclass
class SwitchedRun:
    """One integrated trajectory with optional certificate values."""

    signal: SwitchingSignal
    times: np.ndarray
    states: np.ndarray           # (samples, n)
    active: np.ndarray           # subsystem index at each sample
    v_values: np.ndarray = None
    max_v_increase: float = None  # largest relative step increase of V
    escaped: bool = False
    escape_time: float = None

    @property
    def final_state(self):
        return self.states[-1]


def integrate_switched(family, signal, z0, dt=1e-3, clf=None):
    """Integrate the switched system along ``signal`` from ``z0``.

    Samples at every RK4 step and at every switch instant (hit exactly by
    shortening the last step of each segment).  When a certificate
    evaluator is passed, V is recorded along the run and its largest
    relative one-step increase reported.  Leaving the unit polydisk (in
    flag coordinates when the certificate provides them) sets ``escaped``
    instead of raising.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = np.asarray(z0, dtype=complex).reshape(1, -1)
    if z.shape[1] != family.dimension:
        raise ValueError("initial point dimension mismatch")
    hat = (lambda Z: clf.hat(Z)) if clf is not None else (lambda Z: Z)
    times = [0.0]
    states = [z[0].copy()]
    active = [signal.subsystems[0] if len(signal) else 0]
    v_values = [float(clf.value_batch(z)[0])] if clf is not None else None
    max_rel = 0.0 if clf is not None else None
    escaped = bool(np.max(np.abs(hat(z))) >= 1.0 - ESCAPE_TOL)
    escape_time = 0.0 if escaped else None
    boundaries = signal.boundaries
    t_start = 0.0
    for seg in range(len(signal)):
        fld = family[signal.subsystems[seg]]
        dur = signal.durations[seg]
        end = float(boundaries[seg])
        n_full, rem = _segment_steps(dur, dt)
        plan = [dt] * n_full + ([rem] if rem else [])
        for s, h in enumerate(plan):
            z = flow_step(fld, z, h)
            is_last = s == len(plan) - 1
            t = end if is_last else t_start + (s + 1) * dt
            times.append(t)
            states.append(z[0].copy())
            active.append(signal.subsystems[seg])
            if clf is not None:
                v = float(clf.value_batch(z)[0])
                rel = (v - v_values[-1]) / max(v_values[-1], 1e-300)
                max_rel = max(max_rel, rel)
                v_values.append(v)
            if not escaped and np.max(np.abs(hat(z))) >= 1.0 - ESCAPE_TOL:
                escaped = True
                escape_time = t
        t_start = end
    return SwitchedRun(
        signal=signal,
        times=np.array(times),
        states=np.array(states),
        active=np.array(active, dtype=int),
        v_values=None if v_values is None else np.array(v_values),
        max_v_increase=max_rel,
        escaped=escaped,
        escape_time=escape_time,
    )


def export_run_csv(run, fh):
    """Trace as CSV: t, Re/Im of each coordinate, V, active subsystem."""
    n = run.states.shape[1]
    cols = ["t"]
    for c in range(n):
        cols += [f"re_z{c + 1}", f"im_z{c + 1}"]
    cols += ["V", "active_subsystem"]
    fh.write(",".join(cols) + "\n")
    for s in range(len(run.times)):
        row = [repr(float(run.times[s]))]
        for c in range(n):
            row += [
                repr(float(run.states[s, c].real)),
                repr(float(run.states[s, c].imag)),
            ]
        row.append("" if run.v_values is None else repr(float(run.v_values[s])))
        row.append(str(int(run.active[s])))
        fh.write(",".join(row) + "\n")


def sample_initial_points(dimension, radius, count, seed):
    """Deterministic points in the closed polydisk of the given radius.

    The first half lies on the real section (Halton fill of the cube);
    the rest get Halton moduli with phases from the seeded generator, so
    both purely real and genuinely complex states are exercised.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = np.zeros((count, dimension), dtype=complex)
    n_real = (count + 1) // 2
    for p in range(n_real):
        for c in range(dimension):
            h = halton(p + 1, _PRIMES[c % len(_PRIMES)])
            pts[p, c] = radius * (2.0 * h - 1.0)
    for p in range(n_real, count):
        for c in range(dimension):
            h = halton(p + 1 - n_real, _PRIMES[c % len(_PRIMES)])
            pts[p, c] = radius * math.sqrt(h) * np.exp(
                2j * np.pi * rng.random()
            )
    return pts


@dataclass(frozen=True)
class AuditSummary:
    """Aggregate outcome of a simulation audit of one certificate."""

    signals: int
    points: int
    dt: float
    horizon: float
    seed: int
    rho: float
    sample_radius: float
    max_v_increase: float
    final_norm_max: float
    fraction_converged: float
    escapes: int
    slack: float
    convergence_tol: float
    passed: bool

    def to_json_dict(self):
        return {
            "kind": "audit_summary",
            "signals": int(self.signals),
            "points": int(self.points),
            "dt": float(self.dt),
            "horizon": float(self.horizon),
            "seed": int(self.seed),
            "rho": float(self.rho),
            "sample_radius": float(self.sample_radius),
            "max_v_increase": float(self.max_v_increase),
            "final_norm_max": float(self.final_norm_max),
            "fraction_converged": float(self.fraction_converged),
            "escapes": int(self.escapes),
            "slack": float(self.slack),
            "convergence_tol": float(self.convergence_tol),
            "passed": bool(self.passed),
        }


def _audit_one_signal(family, clf, P, signal, points, dt):
    Z = points @ P.T  # flag samples back to original coordinates
    Zh = clf.hat(Z)
    v_prev = clf.value_batch(Zh, hat=True)
    max_rel = 0.0
    escaped = np.abs(Zh).max(axis=1) >= 1.0 - ESCAPE_TOL
    for seg in range(len(signal)):
        fld = family[signal.subsystems[seg]]
        n_full, rem = _segment_steps(signal.durations[seg], dt)
        plan = [dt] * n_full + ([rem] if rem else [])
        for h in plan:
            Z = flow_step(fld, Z, h)
            Zh = clf.hat(Z)
            v = clf.value_batch(Zh, hat=True)
            rel = np.max((v - v_prev) / np.maximum(v_prev, 1e-300))
            max_rel = max(max_rel, float(rel))
            v_prev = v
            escaped |= np.abs(Zh).max(axis=1) >= 1.0 - ESCAPE_TOL
    final_norms = np.abs(Z).max(axis=1)
    return max_rel, int(np.sum(escaped)), final_norms


def audit_certificate(
    family,
    report,
    signals=100,
    points=50,
    seed=0,
    dt=1e-3,
    horizon=20.0,
    min_dwell=0.05,
    max_dwell=1.0,
    slack=1e-9,
    convergence_tol=1e-3,
    threads=None,
):
    """Simulation audit of a certificate over seeded switching signals.

    Integrates ``signals`` random schedules from ``points`` deterministic
    initial states inside the polydisk of radius 0.95 * rho (flag
    coordinates), monitoring the certified function at every step.  The
    audit passes when V never increases beyond ``slack`` (relative) and no
    trajectory leaves the unit polydisk.
    """
    if signals < 1 or points < 1:
        raise ValueError("signals and points must be >= 1")
    if report.epsilon is None or report.rho_certified is None:
        raise ValueError("report does not contain a usable certificate")
    n = report.dimension
    basis = build_basis(n, report.truncation_degree)
    ratio = None
    if report.convergence is not None:
        ratio = report.convergence.get("ratio")
    P_inv = report.P_inv if report.P_inv is not None else np.eye(n, dtype=complex)
    P = report.P if report.P is not None else np.eye(n, dtype=complex)
    clf = CommonLyapunovFunction(report.epsilon, P_inv, basis, ratio=ratio)
    rho = float(report.rho_certified)
    radius = 0.95 * rho
    pts = sample_initial_points(n, radius, points, seed)
    sigs = [
        random_signal(len(family), horizon, min_dwell, max_dwell, seed=seed + 7919 * s)
        for s in range(signals)
    ]
    workers = thread_count() if threads is None else max(1, int(threads))

    def job(s):
        return _audit_one_signal(family, clf, P, sigs[s], pts, dt)

    if workers == 1:
        results = [job(s) for s in range(signals)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(signals)))
    max_rel = max(r[0] for r in results)
    escapes = sum(r[1] for r in results)
    final_norms = np.concatenate([r[2] for r in results])
    fraction = float(np.mean(final_norms < convergence_tol))
    return AuditSummary(
        signals=signals,
        points=points,
        dt=float(dt),
        horizon=float(horizon),
        seed=int(seed),
        rho=rho,
        sample_radius=radius,
        max_v_increase=max_rel,
        final_norm_max=float(final_norms.max()),
        fraction_converged=fraction,
        escapes=escapes,
        slack=float(slack),
        convergence_tol=float(convergence_tol),
        passed=bool(max_rel <= slack and escapes == 0),
    )
