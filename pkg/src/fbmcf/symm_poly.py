"""Elementary symmetric functions of eigenvalues and related matrix algebra.

``s_k(mu)`` is the sum over all k-subsets of products of entries of ``mu``
(with ``s_0 = 1``) and ``q_k = s_k / s_{k-1}``.  For a symmetric matrix ``M``
these are evaluated on its eigenvalues; ``s_k(M)`` is also the sum of the
principal k x k minors, which gives an independent check.

All functions are pure and thread-safe.
"""

from itertools import combinations

import numpy as np

from .exceptions import (
    DomainError,
    NumericalError,
    PreconditionError,
    UndefinedQuotientError,
)

#: ``|s_{k-1}| < QUOTIENT_TOL * max(1, |s_k|)`` counts as a zero denominator.
QUOTIENT_TOL = 1e-12
MAX_DIM = 8

__all__ = [
    "elementary_symmetric",
    "elementary_symmetric_all",
    "quotient_q",
    "eigenvalues",
    "principal_minor_sum",
    "symmetric_of_matrix",
    "grad_S_k",
    "directional_derivatives",
    "hessian_quadratic_q",
    "pinching_gap",
    "pinching_gap_batch",
    "random_symmetric",
    "random_positive_definite",
    "sample_pinching_matrices",
]


def _as_vector(mu):
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size < 1:
        raise DomainError("eigenvalue vector must be one-dimensional and non-empty")
    return mu


def _as_symmetric(M, check=True):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > MAX_DIM:
        raise DomainError(f"matrix dimension {M.shape[0]} exceeds {MAX_DIM}")
    if check and not np.array_equal(M, M.T):
        # store triangularly: the lower triangle is authoritative
        M = np.tril(M) + np.tril(M, -1).T
    return M


def _check_k(k, lo, hi):
    if not isinstance(k, (int, np.integer)) or k < lo or k > hi:
        raise DomainError(f"k={k!r} outside [{lo}, {hi}]")
    return int(k)


def elementary_symmetric_all(mu):
    """Return ``[s_0, s_1, ..., s_n]`` for the trailing axis of ``mu``.

    Uses the product expansion of ``prod_i (1 + mu_i x)``; works on batches
    of shape ``(..., n)``.
    """
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[-1]
    s = np.zeros(mu.shape[:-1] + (n + 1,))
    s[..., 0] = 1.0
    for i in range(n):
        m = mu[..., i : i + 1]
        s[..., 1 : i + 2] = s[..., 1 : i + 2] + m * s[..., 0 : i + 1]
    return s


def elementary_symmetric(mu, k):
    """k-th elementary symmetric polynomial of ``mu`` (``s_0 = 1``).

    Raises
    ------
    DomainError
        If ``k`` is not in ``[0, n]``.
    """
    mu = _as_vector(mu)
    k = _check_k(k, 0, mu.size)
    return float(elementary_symmetric_all(mu)[k])


def quotient_q(mu, k, tol=QUOTIENT_TOL):
    """Return ``q_k = s_k / s_{k-1}``.

    Raises
    ------
    UndefinedQuotientError
        If ``|s_{k-1}| < tol * max(1, |s_k|)``.
    """
    mu = _as_vector(mu)
    k = _check_k(k, 1, mu.size)
    s = elementary_symmetric_all(mu)
    num, den = s[k], s[k - 1]
    if abs(den) < tol * max(1.0, abs(num)):
        raise UndefinedQuotientError(f"s_{k - 1} = {den:.3e} vanishes; q_{k} undefined")
    return float(num / den)


def eigenvalues(M):
    """Ascending eigenvalues of a symmetric matrix (deterministic order)."""
    M = _as_symmetric(M)
    try:
        w = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigendecomposition failed for\n{M!r}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError(f"non-finite eigenvalues for\n{M!r}")
    return np.sort(w, kind="stable")


def principal_minor_sum(M, k):
    """Sum of all principal k x k minors of ``M``."""
    M = _as_symmetric(M)
    n = M.shape[0]
    k = _check_k(k, 0, n)
    if k == 0:
        return 1.0
    total = 0.0
    for idx in combinations(range(n), k):
        total += np.linalg.det(M[np.ix_(idx, idx)])
    return float(total)


def symmetric_of_matrix(M, k, rtol=1e-9):
    """``s_k`` of the eigenvalues of ``M``, cross-checked against minors.

    Raises
    ------
    NumericalError
        If the eigenvalue and principal-minor evaluations disagree by more
        than ``rtol`` relative to ``s_k(|mu|)`` (the natural size of the sum).
    """
    M = _as_symmetric(M)
    k = _check_k(k, 0, M.shape[0])
    mu = eigenvalues(M)
    via_eig = elementary_symmetric(mu, k)
    via_minors = principal_minor_sum(M, k)
    scale = elementary_symmetric(np.abs(mu), k)
    if abs(via_eig - via_minors) > rtol * scale + 1e-300:
        raise NumericalError(
            f"s_{k} mismatch: eigenvalues {via_eig!r} vs minors {via_minors!r} for\n{M!r}"
        )
    return via_eig


def grad_S_k(M, k):
    """Gradient ``dS_k/dM_ij`` as a symmetric matrix.

    Uses ``dS_k/dM = sum_{j<k} (-1)^j s_{k-1-j}(M) M^j``, which for ``k = n``
    reduces to the cofactor matrix ``det(M) M^{-1}``.
    """
    M = _as_symmetric(M)
    n = M.shape[0]
    k = _check_k(k, 1, n)
    s = elementary_symmetric_all(eigenvalues(M))
    G = np.zeros_like(M)
    P = np.eye(n)
    for j in range(k):
        G += (-1) ** j * s[k - 1 - j] * P
        P = P @ M
    return 0.5 * (G + G.T)


def directional_derivatives(M, B, kmax=None):
    """``s_j(M + tB)`` and its first two t-derivatives at ``t = 0``.

    Exact up to rounding: power sums ``p_m = tr((M + tB)^m)`` are
    differentiated in closed form and converted with Newton's identities.

    Returns
    -------
    s, ds, d2s : ndarray
        Arrays indexed by ``j = 0..kmax``.
    """
    M = _as_symmetric(M)
    B = _as_symmetric(B)
    n = M.shape[0]
    kmax = n if kmax is None else kmax
    powers = [np.eye(n)]
    for _ in range(kmax):
        powers.append(powers[-1] @ M)
    p = np.zeros(kmax + 1)
    dp = np.zeros(kmax + 1)
    d2p = np.zeros(kmax + 1)
    for m in range(1, kmax + 1):
        p[m] = np.trace(powers[m])
        dp[m] = m * np.trace(powers[m - 1] @ B)
        acc = 0.0
        for a in range(m - 1):
            acc += np.trace(powers[a] @ B @ powers[m - 2 - a] @ B)
        d2p[m] = m * acc
    s = np.zeros(kmax + 1)
    ds = np.zeros(kmax + 1)
    d2s = np.zeros(kmax + 1)
    s[0] = 1.0
    for j in range(1, kmax + 1):
        a0 = a1 = a2 = 0.0
        for i in range(1, j + 1):
            sg = (-1) ** (i - 1)
            a0 += sg * s[j - i] * p[i]
            a1 += sg * (ds[j - i] * p[i] + s[j - i] * dp[i])
            a2 += sg * (d2s[j - i] * p[i] + 2.0 * ds[j - i] * dp[i] + s[j - i] * d2p[i])
        s[j], ds[j], d2s[j] = a0 / j, a1 / j, a2 / j
    return s, ds, d2s


def _q_along(M, B, k, t, tol):
    return quotient_q(eigenvalues(M + t * B), k + 1, tol=tol)


def hessian_quadratic_q(M, k, B, method="fd", step=None, tol=QUOTIENT_TOL):
    """Second derivative of ``q_{k+1}`` at ``M`` in direction ``B``.

    This is the quadratic form ``(d^2 q_{k+1} / dM_ij dM_pq) B_ij B_pq``.

    Parameters
    ----------
    M, B : array_like
        Symmetric matrices of the same size.
    k : int
        ``1 <= k <= n - 1`` (``q_{k+1}`` must exist).
    method : {"fd", "exact"}
        ``"fd"`` (default) uses central second differences of
        :func:`quotient_q` along ``B`` with one Richardson extrapolation;
        ``"exact"`` differentiates the symmetric functions in closed form.
    step : float, optional
        Finite-difference step; defaults to ``1e-2 * |M| / |B|``.

    Raises
    ------
    UndefinedQuotientError
        If ``s_k(M)`` vanishes.
    """
    M = _as_symmetric(M)
    B = _as_symmetric(B)
    n = M.shape[0]
    if B.shape != M.shape:
        raise DomainError("M and B must have the same shape")
    k = _check_k(k, 0, n - 1)
    q0 = _q_along(M, B, k, 0.0, tol)  # raises if undefined at M
    nb = np.linalg.norm(B)
    if nb == 0.0:
        return 0.0
    if method == "exact":
        s, ds, d2s = directional_derivatives(M, B, k + 1)
        N, dN, d2N = s[k + 1], ds[k + 1], d2s[k + 1]
        D, dD, d2D = s[k], ds[k], d2s[k]
        return float(
            d2N / D - 2.0 * dN * dD / D**2 - N * d2D / D**2 + 2.0 * N * dD**2 / D**3
        )
    if method != "fd":
        raise DomainError(f"unknown method {method!r}")
    h = step if step is not None else 1e-2 * max(np.linalg.norm(M), 1e-12) / nb

    def second(hh):
        qp = _q_along(M, B, k, hh, tol)
        qm = _q_along(M, B, k, -hh, tol)
        return (qp - 2.0 * q0 + qm) / (hh * hh)

    return float((4.0 * second(0.5 * h) - second(h)) / 3.0)


def pinching_gap(M, eta):
    """Return ``(|M|^2 - max_i lambda_i^2) / |M|^2``.

    Requires ``|M| > (1 + eta) tr(M)`` and ``|M| > 0``; under these
    hypotheses the gap is bounded below by a positive ``1/c(n, eta)``.

    Raises
    ------
    PreconditionError
        If the hypotheses fail or ``eta <= 0``.
    """
    if not eta > 0:
        raise PreconditionError(f"eta must be positive, got {eta!r}")
    M = _as_symmetric(M)
    norm = np.linalg.norm(M)
    tr = np.trace(M)
    if not (norm > 0 and norm > (1.0 + eta) * tr):
        raise PreconditionError(
            f"need |M| > (1+eta) tr M: |M|={norm:.6g}, (1+eta) tr M={(1 + eta) * tr:.6g}"
        )
    lam = eigenvalues(M)
    return float((norm**2 - np.max(lam**2)) / norm**2)


def pinching_gap_batch(Ms, eta):
    """Vectorised :func:`pinching_gap` over a stack of shape ``(m, n, n)``.

    Entries violating the precondition are returned as ``nan``.
    """
    Ms = np.asarray(Ms, dtype=float)
    norm2 = np.einsum("kij,kij->k", Ms, Ms)
    tr = np.einsum("kii->k", Ms)
    ok = (norm2 > 0) & (np.sqrt(norm2) > (1.0 + eta) * tr)
    lam = np.linalg.eigvalsh(Ms)
    gap = (norm2 - np.max(lam**2, axis=1)) / np.where(norm2 > 0, norm2, 1.0)
    return np.where(ok, gap, np.nan)


def random_symmetric(rng, n, size=None, scale=1.0):
    """Symmetric matrices with i.i.d. normal entries on and above the diagonal."""
    shape = (n, n) if size is None else (size, n, n)
    A = rng.normal(scale=scale, size=shape)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def random_positive_definite(rng, n, size=None, low=0.1, high=10.0):
    """``Q diag(mu) Q^T`` with log-uniform ``mu`` in ``[low, high]``."""
    m = 1 if size is None else size
    A = rng.normal(size=(m, n, n))
    Q, _ = np.linalg.qr(A)
    mu = np.exp(rng.uniform(np.log(low), np.log(high), size=(m, n)))
    out = np.einsum("kij,kj,klj->kil", Q, mu, Q)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return out[0] if size is None else out


def sample_pinching_matrices(rng, n, eta, count):
    """Draw ``count`` symmetric matrices satisfying ``|M| > (1+eta) tr M``.

    Rejection sampling from :func:`random_symmetric`, with half the draws
    shifted towards the boundary of the admissible set so that small gaps
    are exercised.
    """
    out = []
    have = 0
    while have < count:
        batch = random_symmetric(rng, n, size=2 * count)
        # push half of the batch along the identity to approach the boundary
        shift = rng.uniform(0.0, 1.0, size=(2 * count, 1, 1))
        shift[: count] = 0.0
        norm = np.linalg.norm(batch, axis=(1, 2))[:, None, None]
        batch = batch + shift * norm / np.sqrt(n) * np.eye(n)
        norm = np.linalg.norm(batch, axis=(1, 2))
        tr = np.einsum("kii->k", batch)
        good = batch[(norm > 0) & (norm > (1.0 + eta) * tr)]
        out.append(good)
        have += good.shape[0]
    return np.concatenate(out)[:count]
