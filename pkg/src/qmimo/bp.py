"""Belief-propagation detection on quantized channel outputs.

Three detectors share the interfaces here:

* :func:`run_approx_bp` — the production detector.  Interference from the
  other streams is summarized per edge by its mean and mean-squared error and
  treated as Gaussian, which turns the signal-node update into a single
  Gaussian-cell likelihood evaluation.  Cost per iteration is
  O(N * K * |support|).
* :func:`exact_bp` — full sum-product message passing with the exact
  (K-1)-dimensional summation in the signal-node update.  Exponential in K;
  guarded to small instances.  Oracle for the Gaussian approximation.
* :func:`exact_posterior` — brute-force enumeration of the posterior.  The
  ground truth both BP variants are judged against.

All updates are parallel (flooding) and run in the log domain; leave-one-out
sums are computed as (full sum) - (own term).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import SystemConfig
from .likelihood import interval_prob
from .quantizer import InfiniteResolution, cell_bounds

_LOG_TINY = 1e-300  # clip for probabilities entering a log
_VAR_FLOOR = 1e-12  # keeps cell likelihoods evaluable when sigma0 = 0 and
                    # the interference estimate collapses

_ENUM_CAP = 2 ** 24          # max combinations for exact_posterior
_ENUM_CHUNK = 2 ** 15
_SUMPROD_CAP = 2 ** 22       # max combinations * K for exact_bp


@dataclass
class EdgeMessages:
    """Per-edge message state: symbol beliefs and interference summaries."""

    pi_weights: np.ndarray  # (N, K, S) normalized symbol-to-signal messages
    m: np.ndarray           # (N, K) means under pi_weights
    V: np.ndarray           # (N, K) variances under pi_weights
    mu: np.ndarray          # (N, K) interference estimates
    C: np.ndarray           # (N, K) interference mean-squared errors


@dataclass
class DetectionResult:
    """Posterior summaries of one detection run."""

    posterior_means: np.ndarray       # (K,)
    beliefs: np.ndarray               # (K, S)
    hard_decisions: np.ndarray        # (K,)
    iterations_run: int
    trajectory: list[float] = field(default_factory=list)
    messages: EdgeMessages | None = None


def hard_decide(beliefs: np.ndarray, support) -> np.ndarray:
    """Argmax symbol per row; exact ties break toward the larger symbol value."""
    support = np.asarray(support, dtype=float)
    order = np.argsort(support)
    b_sorted = np.asarray(beliefs)[:, order]
    # argmax picks the first maximum, so scan from the largest symbol down
    rev_idx = np.argmax(b_sorted[:, ::-1], axis=1)
    idx = len(support) - 1 - rev_idx
    return support[order][idx]


def bit_errors(decided, truth) -> int:
    decided = np.asarray(decided)
    truth = np.asarray(truth)
    if decided.shape != truth.shape:
        raise ValueError("decided/truth shape mismatch")
    return int(np.sum(decided != truth))


def _cell_bounds_vec(r: np.ndarray, cfg: SystemConfig):
    lows = np.empty(len(r))
    ups = np.empty(len(r))
    for i, rv in enumerate(r):
        lows[i], ups[i] = cell_bounds(float(rv), cfg.quantizer)
    return lows, ups


def _log_likelihood_table(r, means, var, cfg: SystemConfig):
    """log p(r_l | mean) for arrays of means; var may be scalar or broadcastable."""
    if isinstance(cfg.quantizer, InfiniteResolution):
        d = r - means
        return -0.5 * d * d / var - 0.5 * np.log(2.0 * np.pi * var)
    lo, up = _cell_bounds_vec(np.asarray(r), cfg)
    shape_tail = (1,) * (np.ndim(means) - 1)
    lo = lo.reshape((-1,) + shape_tail)
    up = up.reshape((-1,) + shape_tail)
    mass = interval_prob(lo, up, means, var)
    return np.log(np.maximum(mass, _LOG_TINY))


def _normalize_log(logp, axis):
    return logp - logsumexp(logp, axis=axis, keepdims=True)


def run_approx_bp(
    H: np.ndarray,
    r: np.ndarray,
    cfg: SystemConfig,
    max_iters: int = 10,
    tol: float = 1e-8,
    collect_messages: bool = False,
    validate_messages: bool = False,
) -> DetectionResult:
    """Gaussian-interference BP detector (modified parallel interference cancellation)."""
    H = np.asarray(H, dtype=float)
    r = np.asarray(r, dtype=float)
    N, K = H.shape
    if H.shape != (cfg.N, cfg.K) or r.shape != (N,):
        raise ValueError("H/r dimensions do not match the system config")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    support = np.asarray(cfg.prior.support, dtype=float)
    S = len(support)
    logq0 = np.log(np.asarray(cfg.prior.weights, dtype=float))

    infinite = isinstance(cfg.quantizer, InfiniteResolution)
    if not infinite:
        lo, up = _cell_bounds_vec(r, cfg)
        lo = lo[:, None, None]
        up = up[:, None, None]

    H2 = H * H
    sigma2 = cfg.sigma0 ** 2
    log_pi = np.broadcast_to(logq0, (N, K, S)).copy()
    beliefs = np.broadcast_to(np.exp(logq0), (K, S)).copy()
    trajectory: list[float] = []
    mu = C = m = V = None
    iterations = 0

    for _ in range(max_iters):
        pi = np.exp(log_pi)
        m = pi @ support                       # (N, K)
        V = pi @ (support * support) - m * m
        np.maximum(V, 0.0, out=V)

        mu = (H * m).sum(axis=1, keepdims=True) - H * m       # (N, K)
        C = (H2 * V).sum(axis=1, keepdims=True) - H2 * V
        var = np.maximum(C + sigma2, _VAR_FLOOR)[:, :, None]

        arg = mu[:, :, None] + H[:, :, None] * support[None, None, :]
        if infinite:
            d = r[:, None, None] - arg
            log_lam = -0.5 * d * d / var - 0.5 * np.log(2.0 * np.pi * var)
        else:
            mass = interval_prob(lo, up, arg, var)
            log_lam = np.log(np.maximum(mass, _LOG_TINY))

        col_sum = log_lam.sum(axis=0)                         # (K, S)
        log_pi = _normalize_log(logq0[None, None, :] + col_sum[None, :, :] - log_lam, axis=2)

        new_beliefs = np.exp(_normalize_log(logq0[None, :] + col_sum, axis=1))
        delta = np.abs(new_beliefs - beliefs)
        trajectory.append(float(delta.mean()))
        max_delta = float(delta.max())
        beliefs = new_beliefs
        iterations += 1

        if validate_messages:
            pi_chk = np.exp(log_pi)
            assert np.all(pi_chk >= 0.0)
            assert np.allclose(pi_chk.sum(axis=2), 1.0, atol=1e-9)
            spread = support.max() - support.min()
            assert np.all(V <= spread * spread / 4.0 + 1e-12)

        if max_delta < tol:
            break

    posterior_means = beliefs @ support
    result = DetectionResult(
        posterior_means=posterior_means,
        beliefs=beliefs,
        hard_decisions=hard_decide(beliefs, support),
        iterations_run=iterations,
        trajectory=trajectory,
    )
    if collect_messages:
        result.messages = EdgeMessages(pi_weights=np.exp(log_pi), m=m, V=V, mu=mu, C=C)
    return result


def _combo_symbols(indices, support, K, S):
    """Decode flat combination indices into per-stream support indices (rows, K)."""
    out = np.empty((len(indices), K), dtype=np.int64)
    rem = np.asarray(indices, dtype=np.int64).copy()
    for k in range(K - 1, -1, -1):
        out[:, k] = rem % S
        rem //= S
    return out


def exact_posterior(H: np.ndarray, r: np.ndarray, cfg: SystemConfig):
    """Brute-force marginals and conditional mean by full enumeration.

    Returns (marginals (K, S), posterior_means (K,)).
    """
    H = np.asarray(H, dtype=float)
    r = np.asarray(r, dtype=float)
    N, K = H.shape
    support = np.asarray(cfg.prior.support, dtype=float)
    S = len(support)
    total = S ** K
    if total > _ENUM_CAP:
        raise ValueError(f"enumeration of {total} combinations exceeds the cap {_ENUM_CAP}")
    logq0 = np.log(np.asarray(cfg.prior.weights, dtype=float))
    sigma2 = cfg.sigma0 ** 2
    if sigma2 <= 0:
        raise ValueError("exact_posterior requires sigma0 > 0")

    log_marg = np.full((K, S), -np.inf)
    for start in range(0, total, _ENUM_CHUNK):
        idx = np.arange(start, min(start + _ENUM_CHUNK, total))
        Xidx = _combo_symbols(idx, support, K, S)
        X = support[Xidx]                                     # (chunk, K)
        means = X @ H.T                                       # (chunk, N)
        loglik = _log_likelihood_table(r, means.T, sigma2, cfg).sum(axis=0)
        logw = loglik + logq0[Xidx].sum(axis=1)
        for k in range(K):
            for s in range(S):
                sel = logw[Xidx[:, k] == s]
                if len(sel):
                    log_marg[k, s] = np.logaddexp(log_marg[k, s], logsumexp(sel))

    marginals = np.exp(_normalize_log(log_marg, axis=1))
    return marginals, marginals @ support


def exact_bp(
    H: np.ndarray,
    r: np.ndarray,
    cfg: SystemConfig,
    max_iters: int = 10,
    tol: float = 1e-8,
) -> DetectionResult:
    """Full sum-product BP with exact multi-stream summation in the signal nodes."""
    H = np.asarray(H, dtype=float)
    r = np.asarray(r, dtype=float)
    N, K = H.shape
    if H.shape != (cfg.N, cfg.K) or r.shape != (N,):
        raise ValueError("H/r dimensions do not match the system config")
    support = np.asarray(cfg.prior.support, dtype=float)
    S = len(support)
    total = S ** K
    if total * K > _SUMPROD_CAP:
        raise ValueError(f"sum-product over {total} combinations is above the size guard")
    logq0 = np.log(np.asarray(cfg.prior.weights, dtype=float))
    sigma2 = cfg.sigma0 ** 2
    if sigma2 <= 0:
        raise ValueError("exact_bp requires sigma0 > 0")

    Xidx = _combo_symbols(np.arange(total), support, K, S)    # (T, K)
    X = support[Xidx]
    log_rho = _log_likelihood_table(r, (X @ H.T).T, sigma2, cfg)  # (N, T)
    sel = [[Xidx[:, k] == s for s in range(S)] for k in range(K)]

    log_pi = np.broadcast_to(logq0, (N, K, S)).copy()
    beliefs = np.broadcast_to(np.exp(logq0), (K, S)).copy()
    trajectory: list[float] = []
    iterations = 0

    for _ in range(max_iters):
        log_lam = np.empty((N, K, S))
        for l in range(N):
            incoming = log_pi[l][np.arange(K)[None, :], Xidx]  # (T, K)
            tot = incoming.sum(axis=1)
            for k in range(K):
                lw = log_rho[l] + tot - incoming[:, k]
                for s in range(S):
                    log_lam[l, k, s] = logsumexp(lw[sel[k][s]])
        col_sum = log_lam.sum(axis=0)                          # (K, S)
        log_pi = _normalize_log(logq0[None, None, :] + col_sum[None, :, :] - log_lam, axis=2)

        new_beliefs = np.exp(_normalize_log(logq0[None, :] + col_sum, axis=1))
        delta = np.abs(new_beliefs - beliefs)
        trajectory.append(float(delta.mean()))
        max_delta = float(delta.max())
        beliefs = new_beliefs
        iterations += 1
        if max_delta < tol:
            break

    return DetectionResult(
        posterior_means=beliefs @ support,
        beliefs=beliefs,
        hard_decisions=hard_decide(beliefs, support),
        iterations_run=iterations,
        trajectory=trajectory,
    )
