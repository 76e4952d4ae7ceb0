"""Multichannel categorical hidden Markov models.

Channels emit independently given the hidden state.  A MISSING entry
contributes a factor of 1 to the emission probability, so it is simply
marginalized out; the position still takes part in the transition chain.

Sequences are handled in encoded form: an integer array of shape
``(channels, T)`` with ``-1`` for MISSING.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .coding import CodingScheme, MultichannelSequence
from .errors import ComputationError, ValidationError


@dataclass
class HmmModel:
    initial: np.ndarray  # (S,)
    transition: np.ndarray  # (S, S)
    emission: list[np.ndarray]  # per channel (S, m_c)

    @property
    def n_states(self) -> int:
        return len(self.initial)

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return tuple(e.shape[1] for e in self.emission)

    def check(self, atol: float = 1e-9) -> None:
        rows = [self.initial[None, :], self.transition, *self.emission]
        for r in rows:
            if np.any(r < 0) or np.any(r > 1) or not np.allclose(r.sum(axis=1), 1, rtol=0, atol=atol):
                raise ValidationError("probability rows must lie in [0, 1] and sum to 1")

    def permuted(self, order: Sequence[int]) -> "HmmModel":
        """Relabel hidden states so that new state ``i`` is old ``order[i]``."""
        o = np.asarray(order)
        return HmmModel(
            self.initial[o].copy(),
            self.transition[np.ix_(o, o)].copy(),
            [e[o].copy() for e in self.emission],
        )

    def to_dict(self, scheme: CodingScheme | None = None) -> dict:
        out = {
            "n_states": self.n_states,
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "emission": [e.tolist() for e in self.emission],
        }
        if scheme is not None:
            out["channels"] = [{"name": c.name, "codes": list(c.codes)} for c in scheme.channels]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "HmmModel":
        return cls(
            np.asarray(doc["initial"], float),
            np.asarray(doc["transition"], float),
            [np.asarray(e, float) for e in doc["emission"]],
        )


def n_parameters(n_states: int, alphabet_sizes: Sequence[int]) -> int:
    S = n_states
    return (S - 1) + S * (S - 1) + S * sum(m - 1 for m in alphabet_sizes)


def encode_all(seqs, scheme: CodingScheme | None = None) -> list[np.ndarray]:
    out = []
    for s in seqs:
        if isinstance(s, MultichannelSequence):
            if scheme is None:
                raise ValueError("a scheme is needed to encode MultichannelSequence objects")
            out.append(s.encode(scheme))
        else:
            out.append(np.asarray(s, dtype=np.int64))
    return out


class _Batch:
    """Sequences concatenated along time, with start offsets."""

    def __init__(self, encoded: list[np.ndarray]):
        encoded = [e for e in encoded if e.shape[1] > 0]
        self.lengths = np.array([e.shape[1] for e in encoded], dtype=np.int64)
        self.starts = np.concatenate(([0], np.cumsum(self.lengths)[:-1])).astype(np.int64)
        self.obs = np.concatenate(encoded, axis=1) if encoded else np.zeros((0, 0), dtype=np.int64)
        self.n_obs = int(self.lengths.sum())
        last = np.zeros(self.n_obs, dtype=bool)
        last[self.starts + self.lengths - 1] = True
        self.has_next = ~last  # position t has a successor t+1 in the same sequence
        self.first = self.starts
        self.observed = (self.obs >= 0).any(axis=0) if self.n_obs else np.zeros(0, dtype=bool)
        self._onehot = {}

    def onehot(self, channel: int, size: int) -> np.ndarray:
        """``(T_total, size)`` indicator of the observed code; MISSING rows are zero."""
        key = (channel, size)
        if key not in self._onehot:
            o = self.obs[channel]
            m = np.zeros((self.n_obs, size))
            seen = np.flatnonzero(o >= 0)
            m[seen, o[seen]] = 1.0
            self._onehot[key] = m
        return self._onehot[key]

    def log_emission(self, model: HmmModel) -> np.ndarray:
        """``(T_total, S)`` log emission probability, MISSING channels skipped."""
        out = np.zeros((self.n_obs, model.n_states))
        with np.errstate(divide="ignore"):
            for c, e in enumerate(model.emission):
                # trailing zero column is what index -1 (MISSING) picks up
                padded = np.hstack([np.log(e), np.zeros((e.shape[0], 1))])
                out += padded.T[self.obs[c]]
        return out


@numba.njit(cache=True)
def _forward(B, A, pi, starts, lengths, observed):
    T, S = B.shape
    alpha = np.zeros((T, S))
    c = np.zeros(T)
    for n in range(len(starts)):
        t0 = starts[n]
        for t in range(t0, t0 + lengths[n]):
            total = 0.0
            for j in range(S):
                if t == t0:
                    v = pi[j]
                else:
                    v = 0.0
                    for i in range(S):
                        v += alpha[t - 1, i] * A[i, j]
                v *= B[t, j]
                alpha[t, j] = v
                total += v
            if not observed[t]:
                # nothing emitted: the prediction already sums to 1, so keep
                # the scale at exactly 1 rather than adding rounding noise
                c[t] = 1.0
                continue
            c[t] = total
            if total > 0.0:
                for j in range(S):
                    alpha[t, j] /= total
    return alpha, c


@numba.njit(cache=True)
def _backward(B, A, c, starts, lengths):
    T, S = B.shape
    beta = np.ones((T, S))
    tmp = np.zeros(S)
    for n in range(len(starts)):
        t0 = starts[n]
        for t in range(t0 + lengths[n] - 2, t0 - 1, -1):
            for j in range(S):
                tmp[j] = B[t + 1, j] * beta[t + 1, j]
            for i in range(S):
                v = 0.0
                for j in range(S):
                    v += A[i, j] * tmp[j]
                beta[t, i] = v / c[t + 1]
    return beta


def _scaled_emission(batch: _Batch, model: HmmModel):
    logB = batch.log_emission(model)
    m = logB.max(axis=1) if logB.size else np.zeros(0)
    finite = np.isfinite(m)
    B = np.zeros_like(logB)
    B[finite] = np.exp(logB[finite] - m[finite, None])
    return B, m


def _forward_pass(batch: _Batch, model: HmmModel):
    B, m = _scaled_emission(batch, model)
    alpha, c = _forward(B, model.transition, model.initial, batch.starts, batch.lengths, batch.observed)
    with np.errstate(divide="ignore"):
        ll = float(np.log(c).sum() + m.sum()) if batch.n_obs else 0.0
    if np.isnan(ll):
        ll = -math.inf
    return B, alpha, c, ll


def log_likelihood(model: HmmModel, seqs, scheme: CodingScheme | None = None) -> float:
    """Total log-probability of the sequences (scaled forward algorithm).

    Returns ``-inf`` when some position is impossible under every state.
    """
    batch = _Batch(encode_all(seqs, scheme))
    if batch.n_obs == 0:
        return 0.0
    return _forward_pass(batch, model)[3]


def _em_step(batch: _Batch, model: HmmModel):
    """One E-step under ``model``; returns its log-likelihood and the M-step update."""
    B, alpha, c, ll = _forward_pass(batch, model)
    if not np.isfinite(ll):
        raise ComputationError("observation has zero probability under every state")
    A = model.transition
    beta = _backward(B, A, c, batch.starts, batch.lengths)
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    init = gamma[batch.first].sum(axis=0)
    nxt = np.flatnonzero(batch.has_next)
    right = B[nxt + 1] * beta[nxt + 1] / c[nxt + 1, None]
    trans = A * (alpha[nxt].T @ right)

    new_init = init / init.sum()
    rows = trans.sum(axis=1, keepdims=True)
    new_trans = np.where(rows > 0, trans / np.where(rows > 0, rows, 1), A)
    new_emis = []
    for ch, e in enumerate(model.emission):
        counts = gamma.T @ batch.onehot(ch, e.shape[1])
        tot = counts.sum(axis=1, keepdims=True)
        new_emis.append(np.where(tot > 0, counts / np.where(tot > 0, tot, 1), e))
    return ll, HmmModel(new_init, new_trans, new_emis)


def random_model(n_states: int, alphabet_sizes: Sequence[int], rng: np.random.Generator) -> HmmModel:
    """Every probability row drawn from a symmetric Dirichlet(1)."""
    S = n_states
    initial = rng.dirichlet(np.ones(S))
    transition = rng.dirichlet(np.ones(S), size=S)
    emission = [rng.dirichlet(np.ones(m), size=S) for m in alphabet_sizes]
    return HmmModel(initial, transition, emission)


@dataclass
class EmRun:
    model: HmmModel
    log_likelihood: float
    history: list[float]
    converged: bool
    iterations: int


def baum_welch(batch_or_seqs, model: HmmModel, tol: float = 1e-8, max_iter: int = 1000) -> EmRun:
    """Iterate EM from ``model`` until the relative gain drops below ``tol``.

    ``history[i]`` is the log-likelihood of the i-th parameter set visited;
    the returned model is the last one evaluated.
    """
    batch = batch_or_seqs if isinstance(batch_or_seqs, _Batch) else _Batch(encode_all(batch_or_seqs))
    history = []
    converged = False
    current = model
    for it in range(max_iter):
        ll, updated = _em_step(batch, current)
        history.append(ll)
        if len(history) > 1:
            gain = history[-1] - history[-2]
            if gain < tol * max(abs(history[-2]), 1e-300):
                converged = True
                break
        current = updated
    else:
        ll = _forward_pass(batch, current)[3]
        history.append(ll)
    return EmRun(current, history[-1], history, converged, len(history))


@dataclass
class FitReport:
    model: HmmModel
    log_likelihood: float
    bic: float
    n_parameters: int
    n_obs: int
    restarts_run: int
    best_restart: int
    best_restart_seed: int
    converged: bool
    history: list[float] = field(default_factory=list)
    restart_log_likelihoods: list[float] = field(default_factory=list)
    tol: float = 1e-8
    max_iter: int = 1000

    def summary(self) -> dict:
        return {
            "n_states": self.model.n_states,
            "log_likelihood": self.log_likelihood,
            "bic": self.bic,
            "n_parameters": self.n_parameters,
            "n_obs": self.n_obs,
            "restarts_run": self.restarts_run,
            "best_restart": self.best_restart,
            "best_restart_seed": self.best_restart_seed,
            "converged": self.converged,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }


def bic(log_lik: float, n_params: int, n_obs: int) -> float:
    return -2.0 * log_lik + n_params * math.log(n_obs)


def _one_restart(args):
    encoded, S, sizes, seed, tol, max_iter = args
    batch = _Batch(encoded)
    start = random_model(S, sizes, np.random.default_rng(seed))
    try:
        return baum_welch(batch, start, tol, max_iter)
    except ComputationError:
        return None


def em_fit(
    seqs,
    n_states: int,
    restarts: int = 100,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 1000,
    alphabet_sizes: Sequence[int] | None = None,
    scheme: CodingScheme | None = None,
    workers: int = 1,
) -> FitReport:
    """Baum-Welch from ``restarts`` random starts; keep the best final fit.

    Restart ``r`` is seeded with ``seed + r``.  Ties in final
    log-likelihood go to the lowest restart index.
    """
    if n_states < 1 or restarts < 1:
        raise ValidationError("n_states and restarts must be >= 1")
    encoded = encode_all(seqs, scheme)
    if not encoded:
        raise ValidationError("no sequences to fit")
    if alphabet_sizes is None:
        if scheme is None:
            raise ValueError("pass alphabet_sizes or a scheme")
        alphabet_sizes = scheme.alphabet_sizes
    sizes = tuple(alphabet_sizes)
    n_obs = sum(e.shape[1] for e in encoded)
    if n_obs == 0:
        raise ValidationError("sequences are all empty")
    tasks = [(encoded, n_states, sizes, seed + r, tol, max_iter) for r in range(restarts)]
    if workers > 1 and restarts > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_one_restart, tasks))
    else:
        runs = [_one_restart(t) for t in tasks]
    lls = [r.log_likelihood if r is not None else -math.inf for r in runs]
    if all(r is None for r in runs):
        raise ComputationError("every restart hit a zero-probability observation")
    best = int(np.argmax(lls))
    run = runs[best]
    k = n_parameters(n_states, sizes)
    return FitReport(
        model=run.model,
        log_likelihood=run.log_likelihood,
        bic=bic(run.log_likelihood, k, n_obs),
        n_parameters=k,
        n_obs=n_obs,
        restarts_run=restarts,
        best_restart=best,
        best_restart_seed=seed + best,
        converged=run.converged,
        history=run.history,
        restart_log_likelihoods=lls,
        tol=tol,
        max_iter=max_iter,
    )


@dataclass
class Selection:
    best: FitReport
    fits: dict[int, FitReport]

    def table(self) -> list[dict]:
        return [
            {
                "n_states": S,
                "log_likelihood": f.log_likelihood,
                "n_parameters": f.n_parameters,
                "n_obs": f.n_obs,
                "bic": f.bic,
            }
            for S, f in sorted(self.fits.items())
        ]


def select_states(
    seqs,
    s_min: int = 2,
    s_max: int = 9,
    restarts: int = 100,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 1000,
    alphabet_sizes: Sequence[int] | None = None,
    scheme: CodingScheme | None = None,
    workers: int = 1,
) -> Selection:
    """Fit every state count in ``s_min..s_max``; lowest BIC wins, ties to fewer states."""
    if s_min > s_max or s_min < 1:
        raise ValidationError(f"invalid state range {s_min}..{s_max}")
    encoded = encode_all(seqs, scheme)
    fits = {
        S: em_fit(encoded, S, restarts, seed, tol, max_iter, alphabet_sizes or scheme.alphabet_sizes, workers=workers)
        for S in range(s_min, s_max + 1)
    }
    best_S = min(fits, key=lambda S: (fits[S].bic, S))
    return Selection(fits[best_S], fits)


def viterbi(model: HmmModel, seq, scheme: CodingScheme | None = None) -> tuple[np.ndarray, float]:
    """Most probable state path and its joint log-probability.

    Ties go to the lowest state index, both at the final step and when
    backtracking.
    """
    (enc,) = encode_all([seq], scheme)
    T = enc.shape[1]
    if T == 0:
        return np.zeros(0, dtype=np.int64), 0.0
    batch = _Batch([enc])
    logB = batch.log_emission(model)
    with np.errstate(divide="ignore"):
        logA = np.log(model.transition)
        delta = np.log(model.initial) + logB[0]
    back = np.zeros((T, model.n_states), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + logA
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(model.n_states)] + logB[t]
    if not np.isfinite(delta.max()):
        raise ComputationError("every state path has zero probability")
    path = np.zeros(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(delta.max())


def sample(
    model: HmmModel,
    lengths: Sequence[int],
    rng: np.random.Generator,
    missing_rate: float = 0.0,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Draw encoded sequences and their hidden paths from ``model``."""
    seqs, paths = [], []
    S = model.n_states
    for T in lengths:
        states = np.zeros(T, dtype=np.int64)
        obs = np.zeros((len(model.emission), T), dtype=np.int64)
        for t in range(T):
            p = model.initial if t == 0 else model.transition[states[t - 1]]
            states[t] = rng.choice(S, p=p)
            for c, e in enumerate(model.emission):
                obs[c, t] = rng.choice(e.shape[1], p=e[states[t]])
        if missing_rate > 0:
            obs[rng.random(obs.shape) < missing_rate] = -1
        seqs.append(obs)
        paths.append(states)
    return seqs, paths
