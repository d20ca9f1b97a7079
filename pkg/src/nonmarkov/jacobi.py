"""Cyclic Jacobi eigensolver for small Hermitian matrices.

The solver works on a stack of matrices at once: each ``(p, q)`` rotation is
applied to every matrix in the batch with array operations, which keeps the
per-rotation interpreter overhead independent of the batch size.  Real
symmetric input stays real.

Rotations use the Golub-Van Loan symmetric Schur step after removing the
phase of the pivot.  A pivot is skipped when it is negligible relative to the
geometric mean of its diagonal entries, so tiny eigenvalues next to large
ones keep their relative accuracy.
"""

from __future__ import annotations

import numpy as np

MAX_SWEEPS = 40


class NotHermitianError(ValueError):
    """Raised when an input matrix is not Hermitian within tolerance."""


def check_hermitian(a: np.ndarray, tol: float = 1e-12) -> None:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise NotHermitianError(f"expected square matrices, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    dev = float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))), initial=0.0))
    if dev > tol * scale:
        raise NotHermitianError(f"matrix is not Hermitian (max deviation {dev:.3e})")


def _rotate(m, p, q, c, s_cph, c_cph, s, rows: bool):
    """Apply the ``(p, q)`` rotation to columns (or rows) of batch-last ``m``."""
    if rows:
        xp, xq = m[p].copy(), m[q]
    else:
        xp, xq = m[:, p].copy(), m[:, q]
    new_p = c * xp - s_cph * xq
    new_q = s * xp + c_cph * xq
    if rows:
        m[p], m[q] = new_p, new_q
    else:
        m[:, p], m[:, q] = new_p, new_q


def jacobi_eigh(a, vectors: bool = True, max_sweeps: int = MAX_SWEEPS):
    """Eigen-decomposition of Hermitian matrices by cyclic Jacobi sweeps.

    Parameters
    ----------
    a : array_like, shape (..., n, n)
        Hermitian matrices.  Only Hermitian input gives meaningful output;
        callers that need a guarantee should run :func:`check_hermitian`.
    vectors : bool
        Accumulate the unitary of eigenvectors.

    Returns
    -------
    w : ndarray, shape (..., n)
        Eigenvalues in ascending order (stable sort, so degenerate values keep
        the order in which the sweeps left them).
    v : ndarray, shape (..., n, n)
        Only if ``vectors``; column ``v[..., :, i]`` belongs to ``w[..., i]``.
    """
    a = np.asarray(a)
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    real = not np.iscomplexobj(a)
    dtype = float if real else complex
    A = np.array(a, dtype=dtype).reshape(-1, n, n)
    # symmetrize so roundoff in the input cannot bias the rotations
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    # batch axis last: every A[p, q] is a contiguous vector over the batch
    A = np.ascontiguousarray(np.moveaxis(A, 0, -1))
    nb = A.shape[-1]
    V = None
    if vectors:
        V = np.zeros((n, n, nb), dtype=dtype)
        V[np.arange(n), np.arange(n)] = 1.0
    eps = np.finfo(float).eps

    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    for _ in range(max_sweeps):
        rotated = False
        for p, q in pairs:
            apq = A[p, q]
            mag = np.abs(apq)
            app = A[p, p].real
            aqq = A[q, q].real
            active = (mag > eps * np.sqrt(np.abs(app * aqq))) & (mag > 0.0)
            n_active = int(np.count_nonzero(active))
            if n_active == 0:
                continue
            rotated = True
            if n_active < nb // 4:
                # few stragglers: rotate a gathered copy
                idx = np.nonzero(active)[0]
                sub = A[:, :, idx]
                vsub = V[:, :, idx] if vectors else None
            else:
                idx = None
                sub, vsub = A, V
            m = mag if idx is None else mag[idx]
            safe = np.where(m > 0, m, 1.0)
            ph = np.where(m > 0, (apq if idx is None else apq[idx]) / safe, 1.0)
            app_s = app if idx is None else app[idx]
            aqq_s = aqq if idx is None else aqq[idx]
            zeta = (aqq_s - app_s) / (2.0 * safe)
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            if idx is None:
                t = np.where(active, t, 0.0)  # identity rotation where inactive
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cph = np.conj(ph)
            new_pp = app_s - t * m
            new_qq = aqq_s + t * m

            _rotate(sub, p, q, c, s * cph, c * cph, s, rows=False)
            _rotate(sub, p, q, c, s * ph, c * ph, s, rows=True)
            sub[p, p] = new_pp
            sub[q, q] = new_qq
            if idx is None:
                sub[p, q] = np.where(active, 0.0, sub[p, q])
                sub[q, p] = np.where(active, 0.0, sub[q, p])
            else:
                sub[p, q] = 0.0
                sub[q, p] = 0.0
                A[:, :, idx] = sub
            if vectors:
                _rotate(vsub, p, q, c, s * cph, c * cph, s, rows=False)
                if idx is not None:
                    V[:, :, idx] = vsub
        if not rotated:
            break

    w = np.real(np.diagonal(A, axis1=0, axis2=1)).copy()  # (nb, n)
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1).reshape(batch_shape + (n,))
    if not vectors:
        return w
    V = np.moveaxis(V, -1, 0)
    V = np.take_along_axis(V, order[:, None, :], axis=2).reshape(batch_shape + (n, n))
    return w, V


def eigvalsh(a) -> np.ndarray:
    """Ascending eigenvalues of Hermitian matrices (batched)."""
    return jacobi_eigh(a, vectors=False)


def max_eigenvalue(a) -> np.ndarray:
    return eigvalsh(a)[..., -1]


def spectral_norm(m) -> np.ndarray:
    """Operator 2-norm ``sqrt(max eig(M^T M))`` of real matrices (batched)."""
    m = np.asarray(m)
    gram = np.swapaxes(m, -1, -2).conj() @ m
    return np.sqrt(np.maximum(max_eigenvalue(gram), 0.0))
