"""Smallest eigenpair of the generalized pencil K x = lambda M x.

The iterative path is shift-inverted Lanczos with M-orthogonal restarts
(ARPACK via scipy), seeded with a deterministic all-ones start vector and
a sparse LU factorization of K - shift*M whose solves are refined to
machine-level residuals.  The shift defaults to a certified lower bound of
the pencil spectrum computed from diagonal dominance of K - lambda*M along
a scalar search, so the eigenvalue nearest the shift is the smallest one.

A dense reference (LAPACK) is exposed separately for cross-checks; very
small pencils (fewer than four unknowns, below what the Lanczos code
accepts) fall back to it directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.linalg
from scipy.sparse import csc_matrix, issparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .errors import ConvergenceError, SolverError

_DENSE_LIMIT = 4  # below this ARPACK cannot run with k=1


@dataclass
class EigenResult:
    """Converged smallest eigenpair with diagnostics.

    ``residual`` is ||K x - value * M x|| / ||M x|| recomputed from the
    returned pair; ``iterations`` counts applications of the inverted
    operator.  ``history`` holds (apply index, Rayleigh quotient) rows when
    the solve was run verbose.
    """

    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool
    shift: float
    method: str
    history: list = dataclass_field(default_factory=list)


def _row_abs_offdiag(mat) -> np.ndarray:
    diag = mat.diagonal()
    total = np.asarray(abs(mat).sum(axis=1)).ravel()
    return total - np.abs(diag)


def _scaled_dominant(mat) -> bool:
    """Sufficient positive semidefiniteness test.

    Checks weak diagonal dominance of D^{-1/2} (mat) D^{-1/2}: positive
    diagonal and off-diagonal row sums at most one.
    """
    d = mat.diagonal()
    if np.any(d <= 0):
        return False
    coo = mat.tocoo()
    off = coo.row != coo.col
    inv_sqrt = 1.0 / np.sqrt(d)
    sums = np.zeros(mat.shape[0])
    np.add.at(sums, coo.row[off], np.abs(coo.data[off]) * inv_sqrt[coo.row[off]] * inv_sqrt[coo.col[off]])
    return bool(np.all(sums <= 1.0 + 1e-14))


def _mass_lower_bound(M) -> float:
    """Certified positive lower bound for the smallest eigenvalue of M."""
    d = M.diagonal()
    coo = M.tocoo()
    off = coo.row != coo.col
    inv_sqrt = 1.0 / np.sqrt(d)
    sums = np.zeros(M.shape[0])
    np.add.at(sums, coo.row[off], np.abs(coo.data[off]) * inv_sqrt[coo.row[off]] * inv_sqrt[coo.col[off]])
    margin = 1.0 - float(np.max(sums)) if sums.size else 1.0
    if margin > 0:
        return margin * float(np.min(d))
    # pathological weight profile: fall back to an actual computation
    if M.shape[0] < _DENSE_LIMIT:
        return 0.999 * float(np.min(scipy.linalg.eigvalsh(M.toarray())))
    val = eigsh(M, k=1, sigma=0.0, which="LM", return_eigenvectors=False, tol=0)
    return 0.999 * float(val[0])


def pencil_lower_bound(K, M) -> float:
    """Lower bound for the smallest eigenvalue of K x = lambda M x.

    Combines a Rayleigh-quotient bound from Gershgorin intervals of K and M
    with a scalar search for the largest lambda at which K - lambda*M is
    provably positive semidefinite by scaled diagonal dominance.
    """
    K = K.tocsr()
    M = M.tocsr()
    dk = K.diagonal()
    dm = M.diagonal()
    if np.any(dm <= 0):
        raise SolverError("mass matrix has a nonpositive diagonal entry")
    rk = _row_abs_offdiag(K)
    rm = _row_abs_offdiag(M)
    alpha = float(np.min(dk - rk))       # lower Gershgorin bound of K
    beta = float(np.max(dm + rm))        # upper Gershgorin bound of M
    if alpha >= 0:
        base = alpha / beta
    else:
        base = alpha / _mass_lower_bound(M)
    hi = float(np.min(dk / dm))
    if hi <= base:
        return base
    best = base

    def passes(lam: float) -> bool:
        return _scaled_dominant((K - lam * M).tocsr())

    lo = base
    if not passes(lo):
        return base
    best = lo
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            best = mid
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    return best


def eigen_lower_bound(forms) -> float:
    """Certified lower bound for the assembled pencil of ``forms``."""
    K, M = forms.pencil()
    return pencil_lower_bound(K, M)


class _CountingInverse(LinearOperator):
    """Solve (K - sigma M) y = b through LU with one refinement pass."""

    def __init__(self, A: csc_matrix, lu):
        super().__init__(dtype=np.float64, shape=A.shape)
        self._A = A
        self._lu = lu
        self.count = 0
        self.rayleigh_log = None
        self._rq = None

    def _matvec(self, b):
        self.count += 1
        x = self._lu.solve(b)
        r = b - self._A @ x
        x = x + self._lu.solve(r)
        if self.rayleigh_log is not None and self._rq is not None:
            self.rayleigh_log.append((self.count, self._rq(x)))
        return x


def _dense_pair(K, M, tol):
    Kd = K.toarray() if issparse(K) else np.asarray(K)
    Md = M.toarray() if issparse(M) else np.asarray(M)
    vals, vecs = scipy.linalg.eigh(Kd, Md)
    value = float(vals[0])
    vector = vecs[:, 0]
    return value, vector


def solve_pencil(
    K,
    M,
    shift=None,
    tol: float = 1e-8,
    max_iter: int = 2000,
    verbose: bool = False,
) -> EigenResult:
    """Smallest eigenvalue and M-normalized eigenvector of K x = lambda M x."""
    K = csc_matrix(K)
    M = csc_matrix(M)
    n = K.shape[0]
    if n == 0:
        raise SolverError("empty pencil")
    if K.shape != M.shape:
        raise SolverError("pencil matrices must share a shape")
    method = "dense" if n < _DENSE_LIMIT else "shift-invert-lanczos"
    history: list = []
    applications = 0
    sigma = 0.0
    if method == "dense":
        value, vector = _dense_pair(K, M, tol)
    else:
        sigma = float(shift) if shift is not None else None
        if sigma is None:
            lb = pencil_lower_bound(K, M)
            sigma = lb - 0.01 * max(1.0, abs(lb))
        lu = None
        for attempt in range(4):
            try:
                A = (K - sigma * M).tocsc()
                lu = splu(A)
                if not np.all(np.isfinite(lu.U.diagonal())):
                    raise RuntimeError("singular factor")
                break
            except RuntimeError:
                if attempt == 3:
                    raise SolverError(
                        f"factorization of K - sigma*M failed after 4 shifts (last {sigma})"
                    )
                sigma = sigma - max(1.0, abs(sigma))
        opinv = _CountingInverse(A, lu)
        if verbose:
            Kc = K.tocsr()
            Mc = M.tocsr()

            def rq(x):
                num = float(x @ (Kc @ x))
                den = float(x @ (Mc @ x))
                return num / den if den else float("nan")

            opinv.rayleigh_log = history
            opinv._rq = rq
        v0 = np.ones(n)
        try:
            vals, vecs = eigsh(
                K,
                k=1,
                M=M,
                sigma=sigma,
                which="LM",
                v0=v0,
                OPinv=opinv,
                maxiter=max_iter,
                tol=0,
            )
        except ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"eigensolve did not converge within {max_iter} iterations"
            ) from exc
        value = float(vals[0])
        vector = vecs[:, 0]
        applications = opinv.count
    mx = M @ vector
    norm = float(np.sqrt(vector @ mx))
    if norm <= 0 or not np.isfinite(norm):
        raise SolverError("eigenvector has nonpositive mass norm")
    vector = vector / norm
    peak = int(np.argmax(np.abs(vector)))
    if vector[peak] < 0:
        vector = -vector
    mx = M @ vector
    residual_vec = K @ vector - value * mx
    residual = float(np.linalg.norm(residual_vec) / np.linalg.norm(mx))
    converged = residual <= max(tol, 1e-12)
    if not converged:
        raise ConvergenceError(
            f"eigensolve residual {residual:.3e} above tolerance {tol:.3e}"
        )
    return EigenResult(
        value=value,
        vector=vector,
        residual=residual,
        iterations=applications,
        converged=converged,
        shift=sigma if method != "dense" else 0.0,
        method=method,
        history=history,
    )


def smallest_eigenpair(forms, shift=None, tol: float = 1e-8, max_iter: int = 2000, verbose: bool = False) -> EigenResult:
    """Smallest eigenpair of the assembled forms (K_p + K_q, M)."""
    K, M = forms.pencil()
    return solve_pencil(K, M, shift=shift, tol=tol, max_iter=max_iter, verbose=verbose)


def dense_reference(forms) -> tuple[float, np.ndarray]:
    """Dense (LAPACK) smallest eigenpair, as an independent cross-check."""
    K, M = forms.pencil()
    vals, vecs = scipy.linalg.eigh(K.toarray(), M.toarray())
    return float(vals[0]), vecs[:, 0]
