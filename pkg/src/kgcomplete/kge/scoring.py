"""Scoring functions and their analytic gradients.

Every scoring function works on batches: ``h``, ``r`` and ``t`` are arrays of
shape ``(..., width)`` and the result has shape ``(...)``. Adding a model means
writing one subclass of :class:`ScoringFunction` and registering it.
"""

from __future__ import annotations

import numpy as np


def circular_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``[a ⋆ b]_k = sum_m a_m b_{(m + k) mod d}`` along the last axis."""
    fa = np.fft.rfft(a, axis=-1)
    fb = np.fft.rfft(b, axis=-1)
    return np.fft.irfft(np.conj(fa) * fb, n=a.shape[-1], axis=-1)


def circular_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``[a * b]_k = sum_m a_m b_{(k - m) mod d}`` along the last axis."""
    fa = np.fft.rfft(a, axis=-1)
    fb = np.fft.rfft(b, axis=-1)
    return np.fft.irfft(fa * fb, n=a.shape[-1], axis=-1)


def circular_correlation_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """O(d^2) reference for :func:`circular_correlation` on 1-d inputs."""
    d = len(a)
    return np.array([sum(a[m] * b[(m + k) % d] for m in range(d)) for k in range(d)])


class ScoringFunction:
    """Plausibility score ``f(h, r, t)``; higher means more plausible."""

    name: str = ""

    def entity_width(self, dim: int) -> int:
        return dim

    def relation_width(self, dim: int) -> int:
        return dim

    def score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, h, r, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Partial derivatives of :meth:`score` w.r.t. ``h``, ``r`` and ``t``."""
        raise NotImplementedError

    def score_and_grad(self, h, r, t):
        return self.score(h, r, t), self.grad(h, r, t)

    def score_all_objects(self, h: np.ndarray, r: np.ndarray, entities: np.ndarray) -> np.ndarray:
        """Scores of ``(h, r, e)`` for every row ``e``; shape ``(batch, n_entities)``.

        Valid whenever the score is linear in ``t`` (and, for subjects, in
        ``h``): the gradient then is the coefficient vector. TransE overrides.
        """
        _, _, gt = self.grad(h, r, np.zeros_like(h))
        return gt @ entities.T

    def score_all_subjects(self, r: np.ndarray, t: np.ndarray, entities: np.ndarray) -> np.ndarray:
        gh, _, _ = self.grad(np.zeros_like(t), r, t)
        return gh @ entities.T


class TransE(ScoringFunction):
    def __init__(self, norm: int = 1):
        if norm not in (1, 2):
            raise ValueError("TransE norm must be 1 or 2")
        self.norm = norm
        self.name = f"transe-l{norm}"

    def score(self, h, r, t):
        diff = h + r - t
        if self.norm == 1:
            return -np.abs(diff).sum(axis=-1)
        return -np.sqrt((diff * diff).sum(axis=-1))

    def grad(self, h, r, t):
        diff = h + r - t
        if self.norm == 1:
            g = -np.sign(diff)
        else:
            n = np.sqrt((diff * diff).sum(axis=-1, keepdims=True))
            # subgradient 0 at the minimum of the norm
            g = -np.divide(diff, n, out=np.zeros_like(diff), where=n > 0)
        return g, g.copy(), -g

    def _all(self, q, entities, sign):
        out = np.empty((q.shape[0], entities.shape[0]))
        # chunked to bound the (batch, n, width) temporary
        step = max(1, 2**22 // max(1, entities.size))
        for i in range(0, q.shape[0], step):
            diff = q[i : i + step, None, :] - sign * entities[None, :, :]
            if self.norm == 1:
                out[i : i + step] = -np.abs(diff).sum(axis=-1)
            else:
                out[i : i + step] = -np.sqrt((diff * diff).sum(axis=-1))
        return out

    def score_all_objects(self, h, r, entities):
        return self._all(h + r, entities, 1.0)

    def score_all_subjects(self, r, t, entities):
        # h + r - t = h - (t - r)
        return self._all(r - t, entities, -1.0)


class DistMult(ScoringFunction):
    name = "distmult"

    def score(self, h, r, t):
        return (h * r * t).sum(axis=-1)

    def grad(self, h, r, t):
        return r * t, h * t, h * r


class ComplEx(ScoringFunction):
    """Complex bilinear score; vectors hold ``[real parts | imaginary parts]``.

    With ``conjugate=True`` this is ``Re(<h, r, conj(t)>)``; ``conjugate=False``
    drops the conjugate on the object.
    """

    def __init__(self, conjugate: bool = True):
        self.conjugate = conjugate
        self.name = "complex" if conjugate else "complex-noconj"

    def entity_width(self, dim: int) -> int:
        return 2 * dim

    def relation_width(self, dim: int) -> int:
        return 2 * dim

    @staticmethod
    def _split(x):
        d = x.shape[-1] // 2
        return x[..., :d], x[..., d:]

    def score(self, h, r, t):
        hr, hi = self._split(h)
        rr, ri = self._split(r)
        tr, ti = self._split(t)
        if self.conjugate:
            s = hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr
        else:
            s = (hr * rr - hi * ri) * tr - (hr * ri + hi * rr) * ti
        return s.sum(axis=-1)

    def grad(self, h, r, t):
        hr, hi = self._split(h)
        rr, ri = self._split(r)
        tr, ti = self._split(t)
        if self.conjugate:
            gh = (rr * tr + ri * ti, rr * ti - ri * tr)
            gr = (hr * tr + hi * ti, hr * ti - hi * tr)
            gt = (hr * rr - hi * ri, hi * rr + hr * ri)
        else:
            gh = (rr * tr - ri * ti, -ri * tr - rr * ti)
            gr = (hr * tr - hi * ti, -hi * tr - hr * ti)
            gt = (hr * rr - hi * ri, -(hr * ri + hi * rr))
        cat = lambda p: np.concatenate(p, axis=-1)  # noqa: E731
        return cat(gh), cat(gr), cat(gt)


class HolE(ScoringFunction):
    """Holographic embeddings: ``r · (h ⋆ t)``."""

    name = "hole"

    def score(self, h, r, t):
        return (r * circular_correlation(h, t)).sum(axis=-1)

    def grad(self, h, r, t):
        return circular_correlation(r, t), circular_correlation(h, t), circular_convolution(r, h)

    def score_and_grad(self, h, r, t):
        d = h.shape[-1]
        fh, fr, ft = (np.fft.rfft(x, axis=-1) for x in (h, r, t))
        corr_ht = np.fft.irfft(np.conj(fh) * ft, n=d, axis=-1)
        gh = np.fft.irfft(np.conj(fr) * ft, n=d, axis=-1)
        gt = np.fft.irfft(fr * fh, n=d, axis=-1)
        return (r * corr_ht).sum(axis=-1), (gh, corr_ht, gt)


SCORING_FUNCTIONS = {
    "transe-l1": lambda: TransE(1),
    "transe-l2": lambda: TransE(2),
    "distmult": DistMult,
    "complex": lambda: ComplEx(True),
    "complex-noconj": lambda: ComplEx(False),
    "hole": HolE,
}
ALIASES = {"transe": "transe-l1", "transe_l1": "transe-l1", "transe_l2": "transe-l2"}
MODEL_KINDS = tuple(SCORING_FUNCTIONS)


def canonical_kind(kind: str) -> str:
    k = kind.strip().lower()
    k = ALIASES.get(k, k)
    if k not in SCORING_FUNCTIONS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    return k


def get_scoring_function(kind: str) -> ScoringFunction:
    return SCORING_FUNCTIONS[canonical_kind(kind)]()
