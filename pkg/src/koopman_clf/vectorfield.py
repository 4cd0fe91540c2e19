"""Complex polynomial vector fields on the unit polydisk.

Fields vanish at the origin and are stored sparsely, one coefficient table
per component.  Components may carry an optional exact l1 norm
(``tail_l1``) covering coefficients beyond the stored truncation, which
downstream absolute-sum operations use instead of the truncated sum.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .multiindex import order_key


class NonFiniteStateError(RuntimeError):
    """Raised when numerical integration produces NaN or infinity."""


def _validate_component(table, dimension):
    clean = {}
    for alpha, value in table.items():
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != dimension:
            raise ValueError(f"exponent {alpha} has wrong length for n={dimension}")
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative exponent in {alpha}")
        if sum(alpha) == 0:
            raise ValueError("constant terms are not allowed; fields fix the origin")
        value = complex(value)
        if value != 0:
            clean[alpha] = clean.get(alpha, 0) + value
    return {a: v for a, v in clean.items() if v != 0}


class PolyVectorField:
    """Sparse polynomial (or truncated analytic) vector field on C^n.

    Parameters
    ----------
    components : sequence of mappings
        One dict per component, multi-index tuple -> complex coefficient.
        Zero coefficients are dropped; constant terms are rejected.
    tail_l1 : sequence of float, optional
        Exact per-component l1 coefficient norms of the full (untruncated)
        series.  Must dominate the stored absolute sums.
    truncated : bool
        Mark the stored table as a truncation of an analytic series.  When
        set without tail_l1, absolute-sum queries warn that they return
        truncated values.
    """

    def __init__(self, components, tail_l1=None, truncated=False):
        components = list(components)
        if not components:
            raise ValueError("need at least one component")
        n = len(components)
        self.dimension = n
        self.components = tuple(
            _validate_component(dict(c), n) for c in components
        )
        self.truncated = bool(truncated) or tail_l1 is not None
        if tail_l1 is not None:
            tail_l1 = tuple(float(t) for t in tail_l1)
            if len(tail_l1) != n:
                raise ValueError("tail_l1 must have one entry per component")
            for l, t in enumerate(tail_l1):
                stored = sum(abs(v) for v in self.components[l].values())
                if t < stored - 1e-12 * max(1.0, stored):
                    raise ValueError(
                        f"tail_l1[{l}]={t} is below the stored coefficient sum {stored}"
                    )
        self.tail_l1 = tail_l1
        self.degree = max(
            (sum(a) for c in self.components for a in c), default=1
        )
        # dense per-component arrays, deterministic order, for evaluation
        self._exps = []
        self._coeffs = []
        for c in self.components:
            keys = sorted(c, key=order_key)
            self._exps.append(
                np.array(keys, dtype=np.int64).reshape(len(keys), n)
            )
            self._coeffs.append(np.array([c[a] for a in keys], dtype=complex))
        self._max_pow = max(
            (int(e.max()) for e in self._exps if e.size), default=0
        )

    @classmethod
    def from_linear(cls, matrix):
        """Field z -> A z."""
        A = np.asarray(matrix, dtype=complex)
        n = A.shape[0]
        comps = []
        for l in range(n):
            table = {}
            for r in range(n):
                if A[l, r] != 0:
                    alpha = tuple(1 if s == r else 0 for s in range(n))
                    table[alpha] = A[l, r]
            comps.append(table)
        return cls(comps)

    def coefficient(self, component, alpha):
        return self.components[component].get(tuple(alpha), 0j)

    def stored_abs_sum(self, component):
        return float(sum(abs(v) for v in self.components[component].values()))

    def l1_norm(self, component):
        """Exact l1 norm when available, else the stored (truncated) sum."""
        if self.tail_l1 is not None:
            return self.tail_l1[component]
        if self.truncated:
            warnings.warn(
                "tail_l1 missing for a truncated field; "
                "returning the truncated coefficient sum",
                stacklevel=2,
            )
        return self.stored_abs_sum(component)

    def term_count(self, exclude_linear_diag=False):
        """Total number of stored coefficients.

        With ``exclude_linear_diag`` the z_l term of component l does not
        count, which is the coupling count used by the polynomial weight
        scheme.
        """
        total = 0
        for l, c in enumerate(self.components):
            for alpha in c:
                if exclude_linear_diag and sum(alpha) == 1 and alpha[l] == 1:
                    continue
                total += 1
        return total

    def jacobian_at_origin(self):
        n = self.dimension
        J = np.zeros((n, n), dtype=complex)
        for l in range(n):
            for r in range(n):
                alpha = tuple(1 if s == r else 0 for s in range(n))
                J[l, r] = self.components[l].get(alpha, 0j)
        return J

    def evaluate(self, z):
        """Evaluate at one point (n,) or a batch (B, n)."""
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        zb = z.reshape(1, -1) if single else z
        if zb.shape[1] != self.dimension:
            raise ValueError("point dimension mismatch")
        out = self._evaluate_batch(zb)
        return out[0] if single else out

    def _evaluate_batch(self, zb):
        B = zb.shape[0]
        pows = _power_tables(zb, self._max_pow)
        out = np.empty((B, self.dimension), dtype=complex)
        for l in range(self.dimension):
            exps, coeffs = self._exps[l], self._coeffs[l]
            if coeffs.size == 0:
                out[:, l] = 0
                continue
            mono = pows[0][:, exps[:, 0]]
            for c in range(1, self.dimension):
                mono = mono * pows[c][:, exps[:, c]]
            out[:, l] = mono @ coeffs
        return out

    def __repr__(self):
        terms = sum(len(c) for c in self.components)
        return (
            f"PolyVectorField(n={self.dimension}, degree={self.degree}, "
            f"terms={terms}, tail_l1={'yes' if self.tail_l1 else 'no'})"
        )


def _power_tables(zb, max_pow):
    """Per-coordinate tables zb[:, c] ** p for p = 0..max_pow."""
    B, n = zb.shape
    tables = []
    for c in range(n):
        t = np.empty((B, max_pow + 1), dtype=complex)
        t[:, 0] = 1
        for p in range(1, max_pow + 1):
            t[:, p] = t[:, p - 1] * zb[:, c]
        tables.append(t)
    return tables


def _poly_mul(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            s = out.get(key, 0) + va * vb
            if s == 0:
                out.pop(key, None)
            else:
                out[key] = s
    return out


def _poly_diff(table, slot):
    out = {}
    for alpha, v in table.items():
        if alpha[slot] == 0:
            continue
        beta = list(alpha)
        beta[slot] -= 1
        out[tuple(beta)] = v * alpha[slot]
    return out


def lie_bracket(F, G):
    """Bracket [F, G] = JG . F - JF . G, computed on exact coefficients."""
    if F.dimension != G.dimension:
        raise ValueError("fields live on different spaces")
    n = F.dimension
    comps = []
    for l in range(n):
        acc = {}
        for s in range(n):
            for table in (
                _poly_mul(_poly_diff(G.components[l], s), F.components[s]),
                {
                    k: -v
                    for k, v in _poly_mul(
                        _poly_diff(F.components[l], s), G.components[s]
                    ).items()
                },
            ):
                for key, v in table.items():
                    tot = acc.get(key, 0) + v
                    if tot == 0:
                        acc.pop(key, None)
                    else:
                        acc[key] = tot
        comps.append(acc)
    return PolyVectorField(comps)


def flow_step(field, z, dt):
    """One classical Runge-Kutta step of z' = F(z); works on batches."""
    z = np.asarray(z, dtype=complex)
    k1 = field.evaluate(z)
    k2 = field.evaluate(z + 0.5 * dt * k1)
    k3 = field.evaluate(z + 0.5 * dt * k2)
    k4 = field.evaluate(z + dt * k3)
    out = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out.view(float))):
        raise NonFiniteStateError(f"non-finite state after step dt={dt}")
    return out


def integrate_flow(field, z0, t_final, dt=1e-3):
    """Integrate a single field to t_final; the last step is shortened."""
    if t_final < 0 or dt <= 0:
        raise ValueError("need t_final >= 0 and dt > 0")
    z = np.asarray(z0, dtype=complex)
    t = 0.0
    while t < t_final - 1e-15:
        h = min(dt, t_final - t)
        z = flow_step(field, z, h)
        t += h
    return z


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def halton(index, base):
    """Radical-inverse (van der Corput) value of ``index`` in ``base``."""
    result, f = 0.0, 1.0
    i = index
    while i > 0:
        f /= base
        result += f * (i % base)
        i //= base
    return result


@dataclass(frozen=True)
class BoundaryReport:
    """Outcome of the inward-pointing test on one polydisk boundary."""

    holds: bool
    worst_value: float
    worst_point: np.ndarray
    samples: int
    margin: float
    rho: float


def boundary_invariance_check(field, rho, samples=8, margin=0.0):
    """Sample Re(F_l(z) conj(z_l)) on each face |z_l| = rho of the polydisk.

    Every face is probed on a uniform phase grid of 64*samples points in
    z_l, paired with a low-discrepancy fill (Halton moduli and phases) of
    the remaining coordinates inside the polydisk.  The field points
    inward at a sample when the tested value is negative; the report keeps
    the worst (largest) value and the point attaining it.
    """
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    n = field.dimension
    count = 64 * samples
    worst = -np.inf
    worst_point = None
    for face in range(n):
        z = np.zeros((count, n), dtype=complex)
        phases = 2.0 * np.pi * np.arange(count) / count
        z[:, face] = rho * np.exp(1j * phases)
        others = [c for c in range(n) if c != face]
        for slot, c in enumerate(others):
            b_mod = _PRIMES[(2 * slot) % len(_PRIMES)]
            b_arg = _PRIMES[(2 * slot + 1) % len(_PRIMES)]
            h_mod = np.array([halton(p + 1, b_mod) for p in range(count)])
            h_arg = np.array([halton(p + 1, b_arg) for p in range(count)])
            z[:, c] = rho * np.sqrt(h_mod) * np.exp(2j * np.pi * h_arg)
        vals = np.real(field.evaluate(z)[:, face] * np.conj(z[:, face]))
        i = int(np.argmax(vals))
        if vals[i] > worst:
            worst = float(vals[i])
            worst_point = z[i].copy()
    return BoundaryReport(
        holds=bool(worst < -margin),
        worst_value=worst,
        worst_point=worst_point,
        samples=n * count,
        margin=float(margin),
        rho=float(rho),
    )


class SwitchedFamily:
    """A finite family of vector fields sharing one state space."""

    def __init__(self, fields):
        fields = tuple(fields)
        if not fields:
            raise ValueError("family must contain at least one field")
        n = fields[0].dimension
        if any(f.dimension != n for f in fields):
            raise ValueError("all fields must share the same dimension")
        self.fields = fields
        self.dimension = n

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]

    def __iter__(self):
        return iter(self.fields)

    def jacobians_at_origin(self):
        return [f.jacobian_at_origin() for f in self.fields]
