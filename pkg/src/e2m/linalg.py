"""Symmetric-matrix numerics: Jacobi eigensolver, spectral matrix functions
and Daleckii-Krein directional derivatives.

Every function accepts a single ``(l, l)`` matrix or a stack ``(..., l, l)``
and works on the whole stack at once.
"""

from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np

SYM_RTOL = 1e-10
PSD_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50

# "sqrt", "invsqrt", "square", or a float exponent for a general power
MatrixFn = Union[str, float]


class LinAlgError(ValueError):
    pass


class EigenPair(NamedTuple):
    values: np.ndarray  # (..., l), ascending
    vectors: np.ndarray  # (..., l, l), columns are eigenvectors


def check_symmetric(a, rtol=SYM_RTOL):
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise LinAlgError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinAlgError("matrix has non-finite entries")
    asym = np.abs(a - np.swapaxes(a, -1, -2)).max(axis=(-1, -2), initial=0.0)
    scale = 1.0 + np.abs(a).max(axis=(-1, -2), initial=0.0)
    if np.any(asym > rtol * scale):
        raise LinAlgError("matrix is not symmetric")
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _rotate(a, v, p, q):
    app = a[..., p, p]
    aqq = a[..., q, q]
    apq = a[..., p, q]
    # skip rotations whose angle would underflow; they are identities anyway
    nonzero = np.abs(apq) > 1e-150 * (np.abs(app) + np.abs(aqq) + 1e-300)
    safe_apq = np.where(nonzero, apq, 1.0)
    theta = (aqq - app) / (2.0 * safe_apq)
    big = np.abs(theta) > 1e150
    theta_ = np.where(big, 1.0, theta)
    t = np.sign(theta_) / (np.abs(theta_) + np.sqrt(theta_ * theta_ + 1.0))
    t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
    t = np.where(theta == 0.0, 1.0, t)
    t = np.where(nonzero, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    c_ = c[..., None]
    s_ = s[..., None]

    col_p = a[..., :, p].copy()
    col_q = a[..., :, q].copy()
    a[..., :, p] = c_ * col_p - s_ * col_q
    a[..., :, q] = s_ * col_p + c_ * col_q
    row_p = a[..., p, :].copy()
    row_q = a[..., q, :].copy()
    a[..., p, :] = c_ * row_p - s_ * row_q
    a[..., q, :] = s_ * row_p + c_ * row_q
    a[..., p, q] = 0.0
    a[..., q, p] = 0.0

    vp = v[..., :, p].copy()
    vq = v[..., :, q].copy()
    v[..., :, p] = c_ * vp - s_ * vq
    v[..., :, q] = s_ * vp + c_ * vq


def _off_norm(a):
    off = a * (1.0 - np.eye(a.shape[-1]))
    return np.sqrt((off * off).sum(axis=(-1, -2)))


def _eigen_2x2(a):
    # one Jacobi rotation diagonalizes a 2x2 block exactly
    app = a[..., 0, 0]
    aqq = a[..., 1, 1]
    apq = a[..., 0, 1]
    nonzero = apq != 0.0
    with np.errstate(over="ignore", divide="ignore"):
        theta = (aqq - app) / (2.0 * np.where(nonzero, apq, 1.0))
        root = np.sqrt(theta * theta + 1.0)
        t = np.where(np.isfinite(root), np.sign(theta) / (np.abs(theta) + root), 0.5 / theta)
    t = np.where(theta == 0.0, 1.0, t)
    t = np.where(nonzero, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    d0 = app - t * apq
    d1 = aqq + t * apq
    swap = d1 < d0
    values = np.stack([np.where(swap, d1, d0), np.where(swap, d0, d1)], axis=-1)
    # rotation columns (c, -s) and (s, c), reordered to ascending eigenvalues
    v0 = np.stack([c, -s], axis=-1)
    v1 = np.stack([s, c], axis=-1)
    first = np.where(swap[..., None], v1, v0)
    second = np.where(swap[..., None], v0, v1)
    return EigenPair(values, np.stack([first, second], axis=-1))


def sym_eigen(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS, check=True) -> EigenPair:
    """Spectral decomposition by cyclic Jacobi rotations.

    Sweeps visit the pairs ``(p, q)``, ``p < q``, in row-major order, so the
    result is deterministic. Iteration stops once the off-diagonal Frobenius
    norm drops below ``tol * ||a||_F`` for every matrix in the stack.
    ``check=False`` skips validation for callers that guarantee symmetry.
    """
    a = check_symmetric(a) if check else np.array(a, dtype=float)
    l = a.shape[-1]
    if l == 1:
        return EigenPair(a[..., 0].copy(), np.ones_like(a))
    if l == 2:
        return _eigen_2x2(a)
    v = np.broadcast_to(np.eye(l), a.shape).copy()
    scale = np.sqrt((a * a).sum(axis=(-1, -2)))
    pairs = [(p, q) for p in range(l) for q in range(p + 1, l)]
    for _ in range(max_sweeps + 1):
        if np.all(_off_norm(a) <= tol * scale):
            break
        for p, q in pairs:
            _rotate(a, v, p, q)
    else:
        raise LinAlgError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    values = np.diagonal(a, axis1=-2, axis2=-1).copy()
    order = np.argsort(values, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    vectors = np.take_along_axis(v, order[..., None, :], axis=-1)
    return EigenPair(values, vectors)


def _needs_psd(f: MatrixFn) -> bool:
    return f != "square"


def _scalar(f: MatrixFn, lam):
    if f == "sqrt":
        return np.sqrt(lam)
    if f == "invsqrt":
        return 1.0 / np.sqrt(lam)
    if f == "square":
        return lam * lam
    return np.power(lam, float(f))


def _clip_spectrum(values, f: MatrixFn):
    if not _needs_psd(f):
        return values
    if np.any(values < -PSD_TOL):
        raise LinAlgError(f"not PSD (smallest eigenvalue {values.min():.3e})")
    return np.maximum(values, 0.0)


def mm(a, b):
    """Stacked matrix product; unrolled for 2x2 blocks, where it beats
    ``np.matmul`` on large stacks."""
    if a.shape[-2:] != (2, 2) or b.shape[-2:] != (2, 2):
        return a @ b
    a00, a01, a10, a11 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
    b00, b01, b10, b11 = b[..., 0, 0], b[..., 0, 1], b[..., 1, 0], b[..., 1, 1]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0, 0] = a00 * b00 + a01 * b10
    out[..., 0, 1] = a00 * b01 + a01 * b11
    out[..., 1, 0] = a10 * b00 + a11 * b10
    out[..., 1, 1] = a10 * b01 + a11 * b11
    return out


def reconstruct(values, vectors):
    """``U diag(values) U^T`` for stacked eigenpairs."""
    return mm(vectors * values[..., None, :], np.swapaxes(vectors, -1, -2))


def apply_eigen(eig: EigenPair, f: MatrixFn):
    values = _clip_spectrum(eig.values, f)
    if f == "invsqrt" and np.any(values <= 0.0):
        raise LinAlgError("inverse square root of a singular matrix")
    out = reconstruct(_scalar(f, values), eig.vectors)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sym_apply(a, f: MatrixFn):
    """Matrix function ``U f(Lambda) U^T``.

    ``f`` is ``"sqrt"``, ``"invsqrt"``, ``"square"`` or a float exponent.
    Powers and roots need a PSD argument; eigenvalues in ``[-1e-10, 0)`` are
    clipped to zero, anything more negative raises.
    """
    return apply_eigen(sym_eigen(a), f)


def divided_differences(values, f: MatrixFn):
    """First divided differences of ``f`` on the spectrum, ``(..., l, l)``."""
    li = values[..., :, None]
    lj = values[..., None, :]
    if f == "square":
        return li + lj
    if f in ("sqrt", "invsqrt"):
        if np.any(values <= 0.0):
            raise LinAlgError("derivative singular: zero eigenvalue under sqrt")
        si = np.sqrt(li)
        sj = np.sqrt(lj)
        if f == "sqrt":
            return 1.0 / (si + sj)
        return -1.0 / (si * sj * (si + sj))
    alpha = float(f)
    if alpha < 1.0 and np.any(values <= 0.0):
        raise LinAlgError("derivative singular: zero eigenvalue under fractional power")
    diff = li - lj
    close = np.abs(diff) <= 1e-9 * np.maximum(np.abs(li), np.abs(lj)).clip(min=1e-300)
    mid = 0.5 * (li + lj)
    deriv = alpha * np.power(np.where(close, mid, 1.0), alpha - 1.0)
    quot = (np.power(li, alpha) - np.power(lj, alpha)) / np.where(close, 1.0, diff)
    return np.where(close, deriv, quot)


def dk_from_eigen(eig: EigenPair, f: MatrixFn, h):
    u = eig.vectors
    ut = np.swapaxes(u, -1, -2)
    phi = divided_differences(_clip_spectrum(eig.values, f), f)
    out = mm(mm(u, mm(mm(ut, h), u) * phi), ut)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def dk_directional(a, f: MatrixFn, h):
    """Frechet derivative ``Df(a)[h]`` via the Daleckii-Krein formula.

    The map ``h -> Df(a)[h]`` is self-adjoint under the Frobenius inner
    product, so the same routine also serves as its own adjoint in
    reverse-mode differentiation.
    """
    h = check_symmetric(h)
    return dk_from_eigen(sym_eigen(a), f, h)
