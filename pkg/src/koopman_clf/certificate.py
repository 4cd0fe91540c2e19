"""Certificate pipeline: weight schemes, coupling ratios, and the
assembled stability analysis.

The certified object is a weighted sum of squared monomials of the state
in flag coordinates,

    V(z) = sum_k eps_k |(P^{-1} z)^{alpha(k)}|^2,

whose decrease along every subsystem follows from bounding, for each
coupled pair of basis positions, the ratio

    Q_jk = |entry(k, j)|^2 / (4 |Re lam_j| |Re lam_k| b_jk b_kj)

where the b-weights split each diagonal decay budget across its couplings.
Two splitting schemes are implemented: a uniform one for polynomial
fields (``polynomial``) and a sum-proportional one for analytic fields
(``diagonal_dominance``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .koopman import build_matrix
from .liealg import (
    NotSimultaneouslyTriangularizable,
    close_under_bracket,
    is_solvable,
    simultaneous_triangularize,
)
from .multiindex import build_basis
from .vectorfield import PolyVectorField, boundary_invariance_check

EPSILON_FLOOR = 1e-12
ETA_FLOOR = 1e-9


@dataclass(frozen=True)
class WeightScheme:
    """Diagonal-budget splitting rule with its parameters.

    kind ``polynomial``: every coupled pair gets xi / (2 K) where K counts
    the field's non-diagonal-linear coefficients.  kind
    ``diagonal_dominance``: same-degree pairs get xi / (n^2 - n), pairs
    across degrees get kappa/2 weighted by the entry's share of the
    absolute row or column sum.
    """

    kind: str
    xi: float
    kappa: float = None

    def __post_init__(self):
        if self.kind not in ("polynomial", "diagonal_dominance"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if self.kind == "polynomial":
            if self.kappa is not None:
                raise ValueError("polynomial scheme takes no kappa")
        else:
            if self.kappa is None or not 0 < self.kappa < 1:
                raise ValueError("diagonal_dominance needs kappa in (0, 1)")
            if self.xi + self.kappa >= 1:
                raise ValueError("need xi + kappa < 1")


@dataclass
class SubsystemOperator:
    """One subsystem's truncated generator with cached absolute sums."""

    kmat: object
    coupling_count: int
    re_decay: np.ndarray  # |Re lam_k|, index 0 unused
    col_sums: np.ndarray  # sum_l |entry(l, j)| into column j
    row_sums: np.ndarray  # sum_j |entry(k, j)| out of row k (tail aware)


def build_operator(field_hat, basis):
    kmat = build_matrix(field_hat, basis)
    if not kmat.verify_triangular(0.0):
        raise ValueError(
            "generator matrix has entries below the diagonal; the field's "
            "Jacobian is not upper triangular"
        )
    M = basis.size
    diag = kmat.diagonal()
    re_decay = np.zeros(M + 1)
    re_decay[1:] = -diag.real
    if np.any(re_decay[1:] <= 0):
        raise ValueError("generator diagonal must have negative real part")
    col_sums = np.zeros(M + 1)
    row_sums = np.zeros(M + 1)
    for k in range(1, M + 1):
        col_sums[k] = kmat.row_abs_sum(k)
        row_sums[k] = kmat.col_abs_sum(k)
    return SubsystemOperator(
        kmat=kmat,
        coupling_count=field_hat.term_count(exclude_linear_diag=True),
        re_decay=re_decay,
        col_sums=col_sums,
        row_sums=row_sums,
    )


def _pair_degrees(basis, j, k):
    return basis.degree(j), basis.degree(k)


def weights(scheme, op, j, k):
    """Weight b_jk of the scheme for basis positions j, k (may be equal)."""
    basis = op.kmat.basis
    n = basis.dimension
    if j == k:
        if scheme.kind == "polynomial":
            return 1.0 - scheme.xi
        return 1.0 - scheme.xi - scheme.kappa
    coupled = op.kmat.entry(k, j) != 0 or op.kmat.entry(j, k) != 0
    if not coupled:
        return 0.0
    if scheme.kind == "polynomial":
        return scheme.xi / (2.0 * op.coupling_count)
    dj, dk = _pair_degrees(basis, j, k)
    if dj == dk:
        return scheme.xi / float(n * n - n)
    if dk < dj:
        # incoming coupling: share of the absolute sum feeding position j
        e = abs(op.kmat.entry(k, j))
        return 0.5 * scheme.kappa * e / op.col_sums[j]
    # outgoing coupling toward higher degree
    e = abs(op.kmat.entry(j, k))
    return 0.5 * scheme.kappa * e / op.row_sums[j]


def weight_row_sum(scheme, op, j):
    """sum_k b_jk over the realized support of row j (k inside the basis)."""
    total = weights(scheme, op, j, j)
    kmat = op.kmat
    partners = set()
    cols, _ = kmat.rows[j - 1]
    partners.update(int(c) for c in cols if c != j)
    partners.update(k for k, _ in kmat.column_support(j) if k != j)
    for k in sorted(partners):
        total += weights(scheme, op, j, k)
    return total


def q_value(op, scheme, j, k, include_scheme_factor=True):
    """Coupling ratio Q_jk for a pair k < j of one subsystem.

    With ``include_scheme_factor`` the scheme parameters enter (this is
    the quantity bounded by the certificate condition); without it the
    polynomial-scheme value is returned with the xi^2 factor removed,
    which is the scan quantity whose sup must stay below one.
    """
    if not 1 <= k < j <= op.kmat.size:
        raise ValueError("need basis positions 1 <= k < j <= size")
    e = abs(op.kmat.entry(k, j))
    if e == 0.0:
        return 0.0
    basis = op.kmat.basis
    denom = op.re_decay[j] * op.re_decay[k]
    if denom <= 0:
        raise ValueError("coupling ratio undefined: vanishing Re decay")
    dj, dk = _pair_degrees(basis, j, k)
    n = basis.dimension
    if scheme.kind == "polynomial":
        q = (op.coupling_count * e) ** 2 / denom
        return q / scheme.xi**2 if include_scheme_factor else q
    if dj == dk:
        D = (n * n - n) / 2.0
        q = (D * e) ** 2 / denom
        return q / scheme.xi**2 if include_scheme_factor else q
    q = op.col_sums[j] * op.row_sums[k] / denom
    return q / scheme.kappa**2 if include_scheme_factor else q


def _scan_pairs(op):
    """Yield coupled pairs (k, j, |entry|) with k < j from stored rows."""
    for k in range(1, op.kmat.size + 1):
        cols, vals = op.kmat.rows[k - 1]
        for c, v in zip(cols, vals):
            j = int(c)
            if j > k and v != 0:
                yield k, j, abs(complex(v))


def _by_degree_max(ops, basis, value_fn):
    """Per-degree maxima of a pair functional, keyed by the target degree."""
    sup = 0.0
    arg = None
    by_degree = {}
    for i, op in enumerate(ops):
        for k, j, e in _scan_pairs(op):
            q = value_fn(i, op, k, j, e)
            d = basis.degree(j)
            if q > by_degree.get(d, 0.0):
                by_degree[d] = q
            if q > sup:
                sup = q
                arg = {"subsystem": i, "k": k, "j": j}
    return sup, arg, dict(sorted(by_degree.items()))


def _extrapolate(by_degree):
    """Limit estimate of an eventually-increasing per-degree max sequence.

    Fits value = a + b / degree on the trailing window and keeps the fit
    only when it exceeds the computed maximum; returns (estimate, source)
    with source either "computed" or "extrapolated".
    """
    items = [(d, v) for d, v in sorted(by_degree.items()) if d >= 2]
    computed = max((v for _, v in items), default=0.0)
    window = items[-8:]
    if len(window) < 3:
        return computed, "computed"
    vals = [v for _, v in window]
    if any(b < a - 1e-12 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:])):
        return computed, "computed"
    A = np.array([[1.0, 1.0 / d] for d, _ in window])
    y = np.array(vals)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    est = float(coef[0])
    if est > computed:
        return est, "extrapolated"
    return computed, "computed"


def check_poly_condition(ops, basis):
    """Scan of the xi-free polynomial-scheme ratio over all exact pairs.

    The certificate condition of the uniform scheme holds (with radius 1)
    exactly when the supremum stays strictly below one.
    """

    def value(i, op, k, j, e):
        return (op.coupling_count * e) ** 2 / (op.re_decay[j] * op.re_decay[k])

    sup, arg, by_degree = _by_degree_max(ops, basis, value)
    est, source = _extrapolate(by_degree)
    return {
        "q_sup": sup,
        "argmax": arg,
        "by_degree": by_degree,
        "extrapolated": est,
        "source": source,
        "pass": bool(sup < 1.0),
    }


def dominance_xi_min(jacobians):
    """Smallest xi for which both diagonal-dominance inequalities hold.

    For every subsystem and every upper pair (q, r), q < r, requires

        |J_qr|  < (2 xi / (n^2 - n)) |Re J_qq|
        |J_qr|^2 < (2 xi / (n^2 - n))^2 |Re J_qq| |Re J_rr|

    Returns 0.0 when all off-diagonal entries vanish.
    """
    n = jacobians[0].shape[0]
    if n == 1:
        return 0.0
    D = (n * n - n) / 2.0
    worst = 0.0
    for J in jacobians:
        for q in range(n):
            for r in range(q + 1, n):
                a = abs(J[q, r])
                if a == 0:
                    continue
                req = abs(J[q, q].real)
                rer = abs(J[r, r].real)
                worst = max(worst, D * a / req, D * a / math.sqrt(req * rer))
    return worst


def check_dd_condition(ops, basis, jacobians, xi, kappa, rho):
    """Diagonal-dominance scheme test at radius ``rho``.

    Verifies the two Jacobian dominance inequalities at ``xi``, that every
    same-degree ratio is below one, and that the cross-degree ratio
    supremum (extrapolated past the truncation when increasing) stays
    below 1 / rho^2.
    """
    scheme = WeightScheme("diagonal_dominance", xi, kappa)
    n = basis.dimension
    xi_min = dominance_xi_min(jacobians)
    dominance_ok = xi > xi_min or xi_min == 0.0
    D = (n * n - n) / 2.0

    def same_value(i, op, k, j, e):
        if basis.degree(j) != basis.degree(k):
            return 0.0
        return (D * e / xi) ** 2 / (op.re_decay[j] * op.re_decay[k])

    def cross_value(i, op, k, j, e):
        if basis.degree(j) == basis.degree(k):
            return 0.0
        return (
            op.col_sums[j]
            * op.row_sums[k]
            / (kappa**2 * op.re_decay[j] * op.re_decay[k])
        )

    same_sup, _, _ = _by_degree_max(ops, basis, same_value)
    cross_sup, arg, by_degree = _by_degree_max(ops, basis, cross_value)
    est, source = _extrapolate(by_degree)
    lhs_sup = max(same_sup, est)
    ok = (
        dominance_ok
        and same_sup < 1.0
        and est * rho * rho < 1.0
    )
    return {
        "pass": bool(ok),
        "dominance_ok": bool(dominance_ok),
        "xi_min": xi_min,
        "same_degree_sup": same_sup,
        "cross_sup": cross_sup,
        "extrapolated": est,
        "source": source,
        "lhs_sup": lhs_sup,
        "argmax": arg,
        "by_degree": by_degree,
    }


def certified_radius_dd(ops, basis, jacobians, xi, kappa, iterations=40):
    """Largest radius accepted by the dominance scheme, found by bisection.

    Returns (rho, detail) with detail the condition record at rho; rho is
    0.0 when even arbitrarily small radii are rejected (dominance failure).
    """
    detail = check_dd_condition(ops, basis, jacobians, xi, kappa, 1.0)
    if detail["pass"]:
        return 1.0, detail
    if not detail["dominance_ok"] or detail["same_degree_sup"] >= 1.0:
        return 0.0, detail
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if check_dd_condition(ops, basis, jacobians, xi, kappa, mid)["pass"]:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return 0.0, detail
    return lo, check_dd_condition(ops, basis, jacobians, xi, kappa, lo)


def scheme_ratio_scan(ops, basis, scheme):
    """Computed sup and per-degree maxima of the scheme-weighted ratio."""

    def value(i, op, k, j, e):
        return q_value(op, scheme, j, k)

    return _by_degree_max(ops, basis, value)


def epsilon_sequence(ops, basis, scheme, eta=0.5, rho=1.0):
    """Monomial weights satisfying the strict coupling recursion.

    Each weight exceeds ``max_i max_k eps_k Q_jk`` by the headroom factor
    (1 + eta_eff).  The requested eta is capped so that the per-degree
    growth (1 + eta) * sup Q * rho^2 stays below one whenever the scheme
    condition leaves room, which keeps the certified series summable;
    positions with no incoming coupling receive a small positive floor
    tied to the previous degree's largest weight.

    Returns (epsilon, eta_effective, q_sup, q_by_degree).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    M = basis.size
    q_sup, _, q_by_degree = scheme_ratio_scan(ops, basis, scheme)
    q_est, _ = _extrapolate(q_by_degree)
    bound = max(q_sup, q_est) * rho * rho
    if bound > 0:
        eta_eff = min(eta, max(ETA_FLOOR, 0.5 * (1.0 / bound - 1.0)))
    else:
        eta_eff = eta
    eps = np.zeros(M + 1)
    eps[0] = np.nan  # index 0 is the constant monomial, never weighted
    degree_max = {0: 1.0}
    for j in range(1, M + 1):
        d = basis.degree(j)
        best = 0.0
        for op in ops:
            for k, v in op.kmat.column_support(j):
                if k >= j or v == 0:
                    continue
                best = max(best, eps[k] * q_value(op, scheme, j, k))
        if j == 1:
            eps[j] = 1.0  # first weight anchors the recursion
        else:
            floor = EPSILON_FLOOR * degree_max.get(d - 1, 1.0)
            eps[j] = max((1.0 + eta_eff) * best, floor)
        degree_max[d] = max(degree_max.get(d, 0.0), eps[j])
    return eps[1:], eta_eff, q_sup, q_by_degree


def degree_maxima(epsilon, basis):
    """Largest weight at each total degree 1..max_degree."""
    out = np.zeros(basis.max_degree + 1)
    for d in range(1, basis.max_degree + 1):
        idx = basis.indices_of_degree(d)
        out[d] = max(epsilon[k - 1] for k in idx)
    return out[1:]


def decay_ratio(epsilon, basis):
    """Observed per-degree decay rate of the weight maxima.

    Uses the geometric-mean ratio over a trailing window of even length,
    which is insensitive to parity alternation of the coupling chains.
    """
    m = degree_maxima(epsilon, basis)
    N = basis.max_degree
    if N < 2:
        return 1.0
    w = min(6, N - 1)
    if w >= 2 and w % 2 == 1:
        w -= 1
    return float((m[N - 1] / m[N - 1 - w]) ** (1.0 / w))


@dataclass(frozen=True)
class ConvergenceResult:
    partial_sum: float
    tail_bound: float
    ratio: float
    convergent: bool

    @property
    def total(self):
        return self.partial_sum + self.tail_bound


def convergence_check(epsilon, basis, rho):
    """Summability test of sum_k |alpha(k)| eps_k rho^{2 |alpha(k)|}.

    The truncated part is summed exactly; the tail is bounded by carrying
    the observed per-degree decay of the weight maxima past the
    truncation degree.
    """
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    epsilon = np.asarray(epsilon, dtype=float)
    if epsilon.shape[0] != basis.size:
        raise ValueError("weight vector does not match the basis")
    degrees = basis.exponents[1:].sum(axis=1)
    partial = float(np.sum(degrees * epsilon * rho ** (2.0 * degrees)))
    r = decay_ratio(epsilon, basis)
    N = basis.max_degree
    m = degree_maxima(epsilon, basis)
    m_ref = float(max(m[N - 1], m[N - 2] if N >= 2 else m[N - 1]))
    x = r * rho * rho
    if x >= 1.0:
        return ConvergenceResult(partial, float("inf"), r, False)
    tail = 0.0
    scale = max(1.0, partial)
    d = N + 1
    while d < N + 200000:
        term = basis.count_of_degree(d) * d * m_ref * r ** (d - N) * rho ** (2 * d)
        tail += term
        if term < 1e-22 * scale and d > N + 4:
            break
        d += 1
    return ConvergenceResult(partial, tail, r, True)


class CommonLyapunovFunction:
    """Evaluator of V(z) = sum_k eps_k |(P^{-1} z)^{alpha(k)}|^2."""

    def __init__(self, epsilon, P_inv, basis, ratio=None):
        self.epsilon = np.asarray(epsilon, dtype=float)
        if self.epsilon.shape[0] != basis.size:
            raise ValueError("weight vector does not match the basis")
        self.P_inv = np.asarray(P_inv, dtype=complex)
        self.basis = basis
        self.ratio = decay_ratio(self.epsilon, basis) if ratio is None else ratio
        self._exps = basis.exponents[1:]
        self._max_pow = int(self._exps.max())
        m = degree_maxima(self.epsilon, basis)
        N = basis.max_degree
        self._m_ref = float(max(m[N - 1], m[N - 2] if N >= 2 else m[N - 1]))

    def hat(self, z):
        z = np.asarray(z, dtype=complex)
        if z.ndim == 1:
            return self.P_inv @ z
        return z @ self.P_inv.T

    def value_batch(self, Z, hat=False):
        """V at a batch of points (B, n); set hat=True when Z is already
        in flag coordinates."""
        Z = np.asarray(Z, dtype=complex)
        W = np.abs(Z if hat else self.hat(Z)) ** 2  # (B, n) real
        B, n = W.shape
        acc = np.ones((B, self._exps.shape[0]))
        for c in range(n):
            t = np.empty((B, self._max_pow + 1))
            t[:, 0] = 1.0
            for p in range(1, self._max_pow + 1):
                t[:, p] = t[:, p - 1] * W[:, c]
            acc *= t[:, self._exps[:, c]]
        return acc @ self.epsilon

    def value(self, z):
        return float(self.value_batch(np.asarray(z, dtype=complex)[None, :])[0])

    def tail_estimate(self, z):
        """Geometric estimate of the truncated part of the series at z."""
        s = float(np.max(np.abs(self.hat(z))) ** 2)
        x = self.ratio * s
        if s == 0.0:
            return 0.0
        if x >= 1.0:
            return float("inf")
        N = self.basis.max_degree
        tail, d = 0.0, N + 1
        while d < N + 200000:
            term = self.basis.count_of_degree(d) * self._m_ref * self.ratio ** (
                d - N
            ) * s**d
            tail += term
            if term < 1e-22 and d > N + 4:
                break
            d += 1
        return tail


def clf_evaluate(epsilon, P_inv, basis, z):
    """Value and truncation-tail estimate of the certificate at ``z``.

    Requires the flag coordinates of z to lie inside the open unit
    polydisk, where the monomial series makes sense.
    """
    clf = CommonLyapunovFunction(epsilon, P_inv, basis)
    zh = clf.hat(np.asarray(z, dtype=complex))
    if np.max(np.abs(zh)) >= 1.0:
        raise ValueError("point lies outside the unit polydisk in flag coordinates")
    return clf.value(z), clf.tail_estimate(z)
