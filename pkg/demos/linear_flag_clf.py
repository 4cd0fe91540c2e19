"""Common flag and quadratic Lyapunov weights for a linear switched pair.

A family of Hurwitz matrices admits a common Lyapunov function of the
form V(x) = sum_j eps_j |v_j^dagger x|^2 whenever the Lie algebra the
matrices generate is solvable: the flag v_1..v_n comes from simultaneous
triangularization and the weights from a coupling-budget recursion.  The
script runs the construction on a conjugated triangular pair, checks the
decrease along both matrix-exponential flows, and shows the sl2 obstruction.
"""

import numpy as np
from scipy.linalg import expm

from koopman_clf.liealg import (
    NotSimultaneouslyTriangularizable,
    close_under_bracket,
    is_solvable,
    linear_clf,
    simultaneous_triangularize,
)

rng = np.random.default_rng(12)

# hidden common triangular structure, then a change of basis
T1 = np.array([[-1.0, 0.8, -0.3], [0.0, -0.6, 0.5], [0.0, 0.0, -1.4]])
T2 = np.array([[-0.9, -0.4, 0.7], [0.0, -1.2, 0.2], [0.0, 0.0, -0.5]])
S = np.eye(3) + 0.4 * rng.normal(size=(3, 3))
A1, A2 = (S @ T @ np.linalg.inv(S) for T in (T1, T2))

alg = close_under_bracket([A1, A2])
solvable, dims = is_solvable(alg)
print(f"Lie closure dimension: {alg.dim}")
print(f"derived series dimensions: {dims}  -> solvable: {solvable}")

tri = simultaneous_triangularize([A1, A2])
print(f"\ntriangularization residual: {tri.residual:.3e}")
print(f"recovered common eigenvalue chains:")
for i, ev in enumerate(tri.eigenvalues):
    print(f"  subsystem {i + 1}: {np.round(ev, 6)}")

eps, flag = linear_clf(tri)
print(f"\nweights eps: {np.round(eps, 6)}")

W = flag.conj().T
for i, A in enumerate((A1, A2)):
    step = expm(0.05 * A)
    x = np.array([1.0, -0.5, 0.25], dtype=complex)
    vals = []
    for _ in range(200):
        vals.append(float(np.sum(eps * np.abs(W @ x) ** 2)))
        x = step @ x
    drops = sum(b < a for a, b in zip(vals, vals[1:]))
    print(f"subsystem {i + 1}: V decreased on {drops}/199 steps, "
          f"V(0) = {vals[0]:.4f}, V(end) = {vals[-1]:.3e}")

# the raising/lowering pair generates all of sl2: no common flag exists
E = np.array([[0.0, 1.0], [0.0, 0.0]])
F = np.array([[0.0, 0.0], [1.0, 0.0]])
solvable, dims = is_solvable(close_under_bracket([E, F]))
print(f"\nsl2 pair: derived series {dims} -> solvable: {solvable}")
try:
    simultaneous_triangularize([E, F])
except NotSimultaneouslyTriangularizable as exc:
    print(f"triangularization refused: {exc}")
