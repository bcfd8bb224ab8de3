"""Non-negative matrix factorization of the Waypoints Matrix and the SVD baseline.

The factorization W ~ U x T minimizes the Frobenius residual under
elementwise non-negativity, solved with multiplicative updates whose
objective is non-increasing by construction. Row c of the tower factor T
is one latent mobility structure of the city.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .waypoints import WaypointsMatrix

EPS = 1e-12

_DENSE_SVD_MAX_DIM = 4000  # exact_singular_values densifies below this min dim
_EXACT_SVD_SMALL_DIM = 400  # truncated_svd takes the exact path below this min dim


@dataclass
class Factorization:
    U: np.ndarray  # |u| x k, non-negative user-component weights
    T: np.ndarray  # k x |t|, non-negative component-tower weights
    k: int
    seed: int
    objective_history: list[float]  # ||W - UT||_F after each iteration
    iterations_run: int
    converged: bool
    degenerate_components: tuple[int, ...] = field(default=())


@dataclass
class SvdResult:
    components: np.ndarray  # k x |t| right singular vectors as rows
    singular_values: np.ndarray  # non-increasing, non-negative
    user_scores: np.ndarray  # |u| x k


def _as_matrix(W) -> sp.csr_matrix:
    if isinstance(W, WaypointsMatrix):
        W = W.matrix
    if sp.issparse(W):
        m = W.tocsr()
        if m.dtype != np.float64:
            m = m.astype(np.float64)
    else:
        m = sp.csr_matrix(np.asarray(W, dtype=np.float64))
    m.sum_duplicates()
    return m


def mu_step(U: np.ndarray, T: np.ndarray, W) -> tuple[np.ndarray, np.ndarray]:
    """One multiplicative update of both factors for the Frobenius objective.

    Non-negativity is preserved exactly: every operation multiplies
    non-negative arrays. The epsilon guard only pads denominators.
    """
    Wm = _as_matrix(W)
    numer_u = Wm @ T.T
    denom_u = U @ (T @ T.T) + EPS
    U2 = U * numer_u / denom_u
    numer_t = (Wm.T @ U2).T
    denom_t = (U2.T @ U2) @ T + EPS
    T2 = T * numer_t / denom_t
    return U2, T2


def rss(W, U: np.ndarray, T: np.ndarray) -> float:
    """Residual sum of squares ||W - UT||_F^2, computed without densifying W.

    Uses the expansion ||W||^2 - 2 tr(T' U' W) + tr((U'U)(TT')) so the
    |u| x |t| product is never materialized.
    """
    Wm = _as_matrix(W)
    n, m = Wm.shape
    if U.ndim != 2 or T.ndim != 2 or U.shape[0] != n or T.shape[1] != m \
            or U.shape[1] != T.shape[0]:
        raise ValueError(
            f"shape mismatch: W {Wm.shape}, U {U.shape}, T {T.shape}")
    w_sq = float(Wm.multiply(Wm).sum())
    cross = float(np.sum((Wm.T @ U).T * T))
    gram = float(np.sum((U.T @ U) * (T @ T.T)))
    return max(w_sq - 2.0 * cross + gram, 0.0)


def frobenius_residual(W, U: np.ndarray, T: np.ndarray) -> float:
    return float(np.sqrt(rss(W, U, T)))


def _svd_flip(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # deterministic sign convention: largest-magnitude entry of each
    # component row is positive
    signs = np.sign(vt[np.arange(vt.shape[0]), np.argmax(np.abs(vt), axis=1)])
    signs[signs == 0] = 1.0
    return u * signs[np.newaxis, :], vt * signs[:, np.newaxis]


def truncated_svd(W, k: int, seed: int = 0, n_power_iter: int = 4,
                  oversample: int = 10, method: str = "auto") -> SvdResult:
    """Truncated SVD via a randomized range finder with power iterations.

    Small inputs take an exact dense path (the randomized scheme cannot
    resolve near-degenerate bulk spectra to high accuracy, and dense SVD
    is cheap there anyway); large matrices stay sparse and go through
    the range finder. ``method`` pins one path explicitly.
    """
    Wm = _as_matrix(W)
    n, m = Wm.shape
    if not 1 <= k <= min(n, m):
        raise ValueError(f"k={k} out of range for a {n}x{m} matrix")
    if method not in ("auto", "exact", "randomized"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        small = min(n, m) <= _EXACT_SVD_SMALL_DIM or k + oversample >= min(n, m)
        method = "exact" if small else "randomized"

    if method == "exact":
        u, s, vt = np.linalg.svd(Wm.toarray(), full_matrices=False)
    else:
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((m, k + oversample))
        Q, _ = np.linalg.qr(Wm @ G)
        for _ in range(n_power_iter):
            Z, _ = np.linalg.qr(Wm.T @ Q)
            Q, _ = np.linalg.qr(Wm @ Z)
        B = (Wm.T @ Q).T
        ub, s, vt = np.linalg.svd(B, full_matrices=False)
        u = Q @ ub
    u, vt = _svd_flip(u, vt)
    components = vt[:k].copy()
    singular_values = s[:k].copy()
    user_scores = u[:, :k] * singular_values[np.newaxis, :]
    return SvdResult(components=components, singular_values=singular_values,
                     user_scores=user_scores)


def exact_singular_values(W, k: int | None = None) -> np.ndarray:
    """Exact (non-randomized) singular values, descending; top k if given."""
    Wm = _as_matrix(W)
    small = min(Wm.shape)
    if small <= _DENSE_SVD_MAX_DIM:
        s = np.linalg.svd(Wm.toarray(), compute_uv=False)
    else:
        want = small - 1 if k is None else min(k, small - 1)
        s = sp.linalg.svds(Wm, k=want, return_singular_vectors=False)
        s = np.sort(s)[::-1]
    return s if k is None else s[:k]


def svd_rss(W, k: int, singular_values: np.ndarray | None = None) -> float:
    """RSS of the optimal rank-k approximation: ||W||_F^2 minus retained energy."""
    Wm = _as_matrix(W)
    if singular_values is None:
        singular_values = exact_singular_values(Wm, k)
    w_sq = float(Wm.multiply(Wm).sum())
    return max(w_sq - float(np.sum(singular_values[:k] ** 2)), 0.0)


def _nndsvda_init(Wm: sp.csr_matrix, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    # non-negative double SVD init, zeros filled with the matrix mean
    svd = truncated_svd(Wm, k, seed=seed)
    u = svd.user_scores / np.where(svd.singular_values > 0, svd.singular_values, 1.0)
    s = svd.singular_values
    vt = svd.components
    n, m = Wm.shape
    U = np.zeros((n, k))
    T = np.zeros((k, m))
    U[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    T[0, :] = np.sqrt(s[0]) * np.abs(vt[0, :])
    for j in range(1, k):
        x, y = u[:, j], vt[j, :]
        x_p, y_p = np.maximum(x, 0.0), np.maximum(y, 0.0)
        x_n, y_n = np.maximum(-x, 0.0), np.maximum(-y, 0.0)
        m_p = np.linalg.norm(x_p) * np.linalg.norm(y_p)
        m_n = np.linalg.norm(x_n) * np.linalg.norm(y_n)
        if m_p >= m_n:
            xs, ys, sigma = x_p, y_p, m_p
        else:
            xs, ys, sigma = x_n, y_n, m_n
        nx, ny = np.linalg.norm(xs), np.linalg.norm(ys)
        if nx * ny == 0 or sigma == 0:
            continue
        lam = np.sqrt(s[j] * sigma)
        U[:, j] = lam * xs / nx
        T[j, :] = lam * ys / ny
    avg = float(Wm.sum()) / (n * m)
    U[U <= 0] = avg
    T[T <= 0] = avg
    return U, T


def _random_init(Wm: sp.csr_matrix, k: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n, m = Wm.shape
    mean = float(Wm.sum()) / (n * m)
    scale = 2.0 * np.sqrt(max(mean, EPS) / k)
    return rng.uniform(0.0, scale, size=(n, k)), rng.uniform(0.0, scale, size=(k, m))


def nmf(W, k: int, max_iter: int = 200, tol: float = 1e-4, seed: int = 0,
        n_restarts: int = 1) -> Factorization:
    """Factorize W into non-negative U (|u| x k) and T (k x |t|).

    The first restart starts from an NNDSVD-A initialization; further
    restarts use seeded uniform-random non-negative factors. The restart
    with the lowest final objective wins. Iteration stops once the
    relative objective change drops below ``tol``.
    """
    Wm = _as_matrix(W)
    n, m = Wm.shape
    if n < 1:
        raise ValueError("W must have at least one row")
    if not 1 <= k <= min(n, m):
        raise ValueError(f"k={k} out of range for a {n}x{m} matrix")
    if Wm.nnz and float(Wm.data.min()) < 0:
        raise ValueError("W must be non-negative")
    if Wm.nnz == 0 or float(Wm.data.max()) == 0.0:
        raise ValueError("degenerate input: all-zero matrix")
    if n_restarts < 1:
        raise ValueError("n_restarts must be at least 1")

    best: Factorization | None = None
    for restart in range(n_restarts):
        if restart == 0:
            U, T = _nndsvda_init(Wm, k, seed)
        else:
            U, T = _random_init(Wm, k, np.random.default_rng([seed, restart]))
        history = [frobenius_residual(Wm, U, T)]
        converged = False
        iterations = 0
        for _ in range(max_iter):
            U, T = mu_step(U, T, Wm)
            obj = frobenius_residual(Wm, U, T)
            history.append(obj)
            iterations += 1
            prev = history[-2]
            if prev == 0.0 or (prev - obj) / prev < tol:
                converged = True
                break
        candidate = Factorization(U=U, T=T, k=k, seed=seed,
                                  objective_history=history,
                                  iterations_run=iterations, converged=converged)
        if best is None or history[-1] < best.objective_history[-1]:
            best = candidate
    assert best is not None
    return best


def normalize_components(F: Factorization) -> Factorization:
    """Scale each T row to unit L1 mass, rescaling U columns to compensate.

    The product U x T is unchanged. All-zero components cannot be
    normalized; they are flagged degenerate and left as-is.
    """
    row_sums = F.T.sum(axis=1)
    degenerate = tuple(int(c) for c in np.flatnonzero(row_sums == 0.0))
    scale = np.where(row_sums == 0.0, 1.0, row_sums)
    T = F.T / scale[:, np.newaxis]
    U = F.U * scale[np.newaxis, :]
    return replace(F, U=U, T=T, degenerate_components=degenerate)


@dataclass(frozen=True)
class KSweepPoint:
    k: int
    nmf_rss: float
    svd_rss: float


def k_sweep(W, ks: Sequence[int], seed: int = 0, n_restarts: int = 3,
            max_iter: int = 200, tol: float = 1e-4) -> list[KSweepPoint]:
    """Residual curve over candidate component counts.

    Per k: the best-of-restarts NMF residual and the exact optimal
    rank-k residual from the singular spectrum.
    """
    if not ks:
        raise ValueError("ks must be non-empty")
    Wm = _as_matrix(W)
    svals = exact_singular_values(Wm, max(ks))
    points = []
    for k in ks:
        f = nmf(Wm, k, max_iter=max_iter, tol=tol, seed=seed, n_restarts=n_restarts)
        points.append(KSweepPoint(k=k, nmf_rss=rss(Wm, f.U, f.T),
                                  svd_rss=svd_rss(Wm, k, singular_values=svals)))
    return points


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def match_components(T: np.ndarray, references: np.ndarray) -> tuple[list[int], list[float]]:
    """Best one-to-one matching of T rows to reference rows by cosine.

    Returns, for each T row, the matched reference index and the cosine
    of the matched pair.
    """
    k = T.shape[0]
    r = references.shape[0]
    sims = np.array([[cosine_similarity(T[i], references[j]) for j in range(r)]
                     for i in range(k)])
    rows, cols = linear_sum_assignment(-sims)
    assignment = [-1] * k
    cosines = [0.0] * k
    for i, j in zip(rows, cols):
        assignment[i] = int(j)
        cosines[i] = float(sims[i, j])
    return assignment, cosines


def save_factorization(F: Factorization, directory: str | Path) -> None:
    """Persist a factorization as a JSON manifest plus U and T CSV files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "k": F.k,
        "seed": F.seed,
        "iterations_run": F.iterations_run,
        "converged": F.converged,
        "objective_history": F.objective_history,
        "degenerate_components": list(F.degenerate_components),
    }
    with open(directory / "factorization.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True)
        fh.write("\n")
    _write_matrix_csv(F.U, directory / "U.csv")
    _write_matrix_csv(F.T, directory / "T.csv")


def load_factorization(directory: str | Path) -> Factorization:
    directory = Path(directory)
    with open(directory / "factorization.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    U = _read_matrix_csv(directory / "U.csv")
    T = _read_matrix_csv(directory / "T.csv")
    return Factorization(
        U=U, T=T, k=int(manifest["k"]), seed=int(manifest["seed"]),
        objective_history=[float(x) for x in manifest["objective_history"]],
        iterations_run=int(manifest["iterations_run"]),
        converged=bool(manifest["converged"]),
        degenerate_components=tuple(manifest.get("degenerate_components", [])),
    )


def _write_matrix_csv(M: np.ndarray, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def _read_matrix_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    return np.array(rows, dtype=np.float64)
