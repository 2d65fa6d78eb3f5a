"""Training (``fit``), negative sampling, prediction and acceptance."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..graph import KGE, PROVENANCE_NAMES, KnowledgeGraph, keys_isin, triple_keys
from .model import EmbeddingModel, grow_model, init_model, sigmoid
from .scoring import canonical_kind

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Training diverged (non-finite parameters)."""

    def __init__(self, epoch: int, message: str = "non-finite parameters"):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class SamplingError(RuntimeError):
    """No valid negative could be drawn within the retry budget."""


@dataclass
class TrainConfig:
    model: str = "distmult"
    dim: int = 50
    epochs: int = 100
    batch_size: int = 512
    learning_rate: float = 0.1
    optimizer: str = "adagrad"
    margin: float = 1.0
    loss: str = "pairwise"
    negatives: int = 2
    norm_constraint: bool = True
    regularization: float = 0.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.model = canonical_kind(self.model)
        if self.optimizer not in ("sgd", "adagrad"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("pairwise", "logistic"):
            raise ValueError(f"unknown loss {self.loss!r}")
        for name in ("dim", "epochs", "batch_size", "negatives", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.margin <= 0:
            raise ValueError("learning_rate and margin must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class ScoredTriple:
    triple: tuple[int, int, int]
    score: float
    probability: float
    provenance: str = "kge"


# negative sampling ------------------------------------------------------------


def corrupt(t, g: KnowledgeGraph, k: int, rng: np.random.Generator, max_tries: int | None = None) -> list[tuple]:
    """``k`` negatives of ``t``: subject or object (coin flip) replaced uniformly.

    Replacements equal to the original entity, and corruptions present in
    ``g``, are rejected and redrawn.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    s, r, o = (int(x) for x in t)
    n = g.n_entities
    budget = max_tries if max_tries is not None else 100 * k + 100
    known = g.triple_set
    out: list[tuple] = []
    tries = 0
    while len(out) < k:
        if tries >= budget:
            raise SamplingError(f"no negative for {(s, r, o)} after {budget} draws")
        tries += 1
        x = int(rng.integers(n))
        if rng.random() < 0.5:
            if x == s:
                continue
            cand = (x, r, o)
        else:
            if x == o:
                continue
            cand = (s, r, x)
        if cand not in known:
            out.append(cand)
    return out


def corrupt_batch(
    pos: np.ndarray,
    known_keys: np.ndarray,
    k: int,
    n_entities: int,
    n_relations: int,
    rng: np.random.Generator,
    retries: int = 10,
) -> np.ndarray:
    """Vectorised corruption used during training; shape ``(len(pos), k, 3)``.

    Rows still colliding after ``retries`` rounds are kept (only possible on
    near-complete graphs).
    """
    neg = np.repeat(pos[:, None, :], k, axis=1).reshape(-1, 3)
    orig = neg.copy()
    col = np.where(rng.random(len(neg)) < 0.5, 0, 2)
    rows = np.arange(len(neg))
    pending = rows
    for _ in range(retries + 1):
        if len(pending) == 0:
            break
        neg[pending, col[pending]] = rng.integers(n_entities, size=len(pending))
        same = neg[pending, col[pending]] == orig[pending, col[pending]]
        bad = same | keys_isin(triple_keys(neg[pending], n_entities, n_relations), known_keys)
        pending = pending[bad]
    return neg.reshape(len(pos), k, 3)


# losses -------------------------------------------------------------------------


def loss_score_grads(pos_scores: np.ndarray, neg_scores: np.ndarray, cfg: TrainConfig):
    """Loss value and dLoss/dscore for positives ``(B,)`` and negatives ``(B, k)``."""
    if cfg.loss == "pairwise":
        viol = cfg.margin - pos_scores[:, None] + neg_scores
        active = (viol > 0).astype(np.float64)
        loss = float(np.maximum(viol, 0.0).sum())
        return loss, -active.sum(axis=1), active
    loss = float(np.logaddexp(0.0, -pos_scores).sum() + np.logaddexp(0.0, neg_scores).sum())
    return loss, -sigmoid(-pos_scores), sigmoid(neg_scores)


def scatter_add(table: np.ndarray, rows: np.ndarray, values: np.ndarray) -> None:
    """``table[rows] += values`` with repeated rows accumulated."""
    order = np.argsort(rows, kind="stable")
    sorted_rows = rows[order]
    uniq, starts = np.unique(sorted_rows, return_index=True)
    table[uniq] += np.add.reduceat(values[order], starts, axis=0)


def batch_gradients(m: EmbeddingModel, pos: np.ndarray, neg: np.ndarray, cfg: TrainConfig):
    """Loss and dense parameter-shaped gradients for one batch.

    ``pos`` has shape ``(B, 3)`` and ``neg`` shape ``(B, k, 3)``. The loss is
    normalised by ``B``.
    """
    B = len(pos)
    E, R = m.entity_emb, m.relation_emb
    allt = np.concatenate([pos, neg.reshape(-1, 3)])
    h, r, t = E[allt[:, 0]], R[allt[:, 1]], E[allt[:, 2]]
    scores, (gh, gr, gt) = m.scorer.score_and_grad(h, r, t)
    loss, dpos, dneg = loss_score_grads(scores[:B], scores[B:].reshape(B, -1), cfg)
    coef = (np.concatenate([dpos, dneg.ravel()]) / B)[:, None]
    gE = np.zeros_like(E)
    gR = np.zeros_like(R)
    scatter_add(gE, np.r_[allt[:, 0], allt[:, 2]], np.vstack([coef * gh, coef * gt]))
    scatter_add(gR, allt[:, 1], coef * gr)
    loss /= B
    if cfg.regularization > 0:
        lam = cfg.regularization
        ents = np.unique(np.r_[allt[:, 0], allt[:, 2]])
        rels = np.unique(allt[:, 1])
        loss += lam * float((E[ents] ** 2).sum() + (R[rels] ** 2).sum())
        gE[ents] += 2 * lam * E[ents]
        gR[rels] += 2 * lam * R[rels]
    return loss, gE, gR


def score_gradient(m: EmbeddingModel, t) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``score(m, t)`` as dense tables shaped like the parameters."""
    s, r, o = (int(x) for x in t)
    E, R = m.entity_emb, m.relation_emb
    gh, gr, gt = m.scorer.grad(E[s], R[r], E[o])
    gE = np.zeros_like(E)
    gR = np.zeros_like(R)
    gE[s] += gh
    gE[o] += gt
    gR[r] += gr
    return gE, gR


# training ---------------------------------------------------------------------


class _Optimizer:
    def __init__(self, m: EmbeddingModel, cfg: TrainConfig):
        self.cfg = cfg
        self.accE = np.zeros_like(m.entity_emb)
        self.accR = np.zeros_like(m.relation_emb)

    def step(self, m: EmbeddingModel, gE: np.ndarray, gR: np.ndarray) -> None:
        lr = self.cfg.learning_rate
        if self.cfg.optimizer == "sgd":
            m.entity_emb -= lr * gE
            m.relation_emb -= lr * gR
            return
        self.accE += gE * gE
        self.accR += gR * gR
        m.entity_emb -= lr * gE / (np.sqrt(self.accE) + 1e-10)
        m.relation_emb -= lr * gR / (np.sqrt(self.accR) + 1e-10)


def _normalize_rows(m: EmbeddingModel, rows: np.ndarray) -> None:
    E = m.entity_emb
    norms = np.linalg.norm(E[rows], axis=1, keepdims=True)
    E[rows] = E[rows] / np.maximum(norms, 1e-12)


def _run_batches(m, X, order, known_keys, cfg, opt, rng, ne, nr, lock=None) -> float:
    total = 0.0
    renorm = cfg.norm_constraint and m.kind.startswith("transe")
    for start in range(0, len(order), cfg.batch_size):
        pos = X[order[start : start + cfg.batch_size]]
        neg = corrupt_batch(pos, known_keys, cfg.negatives, ne, nr, rng)
        loss, gE, gR = batch_gradients(m, pos, neg, cfg)
        opt.step(m, gE, gR)
        if renorm:
            touched = np.unique(np.r_[pos[:, [0, 2]].ravel(), neg[..., [0, 2]].ravel()])
            _normalize_rows(m, touched)
        total += loss * len(pos)
    return total


def fit(
    X: KnowledgeGraph,
    cfg: TrainConfig,
    valid: np.ndarray | None = None,
    init: EmbeddingModel | None = None,
    epochs: int | None = None,
    history: list | None = None,
) -> EmbeddingModel:
    """Train an embedding model on the triples of ``X``.

    Parameters
    ----------
    X
        Training graph; its vocabulary sizes fix the table shapes.
    cfg
        Hyperparameters. ``cfg.threads > 1`` selects lock-free data-parallel
        updates, which are not reproducible.
    valid
        Held-out positive triples used for Platt calibration of the
        probability mapping. Without them the calibration stays ``(1, 0)``.
    init
        Warm start from an existing model (tables grown to the vocabulary).
    epochs
        Overrides ``cfg.epochs`` (warm-start rounds train for fewer epochs).
    history
        If given, the mean loss of every epoch is appended to it.

    Raises
    ------
    ValueError
        If ``X`` holds no triples.
    TrainingError
        If parameters become non-finite; names the epoch.
    """
    if len(X) == 0:
        raise ValueError("cannot fit a model on an empty triple set")
    rng = np.random.default_rng(cfg.seed)
    ne, nr = X.n_entities, X.n_relations
    if init is None:
        m = init_model(cfg.model, cfg.dim, ne, nr, rng)
    else:
        if canonical_kind(init.kind) != cfg.model:
            raise ValueError("warm-start model kind does not match the config")
        m = grow_model(init, ne, nr, rng)
    triples = np.ascontiguousarray(X.triples)
    known_keys = X.keys()
    opt = _Optimizer(m, cfg)
    n_epochs = cfg.epochs if epochs is None else epochs
    if cfg.norm_constraint and m.kind.startswith("transe"):
        _normalize_rows(m, np.arange(ne))
    workers = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.threads)]
    for epoch in range(1, n_epochs + 1):
        order = rng.permutation(len(triples))
        if cfg.threads == 1:
            loss = _run_batches(m, triples, order, known_keys, cfg, opt, rng, ne, nr)
        else:
            shards = np.array_split(order, cfg.threads)
            with ThreadPoolExecutor(cfg.threads) as pool:
                futures = [
                    pool.submit(_run_batches, m, triples, shard, known_keys, cfg, opt, w, ne, nr)
                    for shard, w in zip(shards, workers)
                ]
                loss = sum(f.result() for f in futures)
        if not m.is_finite() or not np.isfinite(loss):
            raise TrainingError(epoch)
        if history is not None:
            history.append(float(loss / len(triples)))
        if epoch == 1 or epoch % 50 == 0 or epoch == n_epochs:
            logger.debug("epoch %d loss %.5f", epoch, loss / len(triples))
    if valid is not None and len(valid):
        m.calibration = calibrate(m, X, np.asarray(valid, dtype=np.int64).reshape(-1, 3), rng)
    else:
        m.calibration = (1.0, 0.0)
    return m


def platt_scaling(scores: np.ndarray, labels: np.ndarray, ridge: float = 1e-3, iters: int = 100) -> tuple[float, float]:
    """Fit ``P(y=1|s) = sigmoid(a s + b)`` by Newton's method.

    A small ridge penalty on ``a`` keeps the fit finite on separable data.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    scale = max(float(np.std(s)), 1e-12)
    z = (s - s.mean()) / scale
    w = np.zeros(2)
    A = np.c_[z, np.ones_like(z)]
    reg = np.diag([ridge, 0.0]) * len(z)
    for _ in range(iters):
        p = sigmoid(A @ w)
        grad = A.T @ (p - y) + reg @ w
        hess = (A * (p * (1 - p))[:, None]).T @ A + reg + 1e-12 * np.eye(2)
        step = np.linalg.solve(hess, grad)
        w -= step
        if np.abs(step).max() < 1e-10:
            break
    a = w[0] / scale
    b = w[1] - w[0] * s.mean() / scale
    return float(a), float(b)


def calibrate(m: EmbeddingModel, X: KnowledgeGraph, valid: np.ndarray, rng: np.random.Generator) -> tuple[float, float]:
    """Platt calibration on held-out positives versus one corruption each."""
    keys = np.sort(np.r_[X.keys(), triple_keys(valid, X.n_entities, X.n_relations)])
    neg = corrupt_batch(valid, keys, 1, X.n_entities, X.n_relations, rng).reshape(-1, 3)
    scores = np.r_[m.score_many(valid), m.score_many(neg)]
    labels = np.r_[np.ones(len(valid)), np.zeros(len(neg))]
    return platt_scaling(scores, labels)


# prediction -------------------------------------------------------------------


def predict(Y, m: EmbeddingModel) -> list[ScoredTriple]:
    """Score candidates, attaching calibrated probabilities (order preserved)."""
    Y = np.asarray(Y, dtype=np.int64).reshape(-1, 3)
    if len(Y) == 0:
        return []
    scores = m.score_many(Y)
    probs = m.probability(scores)
    name = PROVENANCE_NAMES[KGE]
    return [
        ScoredTriple(tuple(t), float(s), float(p), name)
        for t, s, p in zip(Y.tolist(), scores.tolist(), probs.tolist())
    ]


def accept(scored: list[ScoredTriple], threshold: float) -> list[ScoredTriple]:
    """Candidates whose probability is strictly above ``threshold``."""
    return [st for st in scored if st.probability > threshold]
