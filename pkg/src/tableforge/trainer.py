"""Contrastive training of a linear projection over hashed features.

The trainable encoder is deliberately small: text -> hashed bag-of-words
-> linear projection -> unit sphere. That keeps gradients exact and
training reproducible while still letting retrieval quality move in the
direction the loss pushes. The loss is InfoNCE over temperature-scaled
cosines: each anchor scores its positive against the hard negatives plus
every other sample's positive in the batch.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedding import HashedBowEmbedder
from .seeds import derive_seed
from .serialize import DEFAULT_TOKEN_CAP, to_embedding_text, truncate_tokens
from .tables import Table

DEFAULT_PROJECTION_DIM = 256
DEFAULT_FEATURE_DIM = 1024
DEFAULT_TEMPERATURE = 0.05

_CHECKPOINT_MAGIC = b"TFPJ"
_CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    """Training diverged or a checkpoint is unreadable."""


class ProjectionModel:
    """Linear projection encoder with a fixed softmax temperature.

    ``weights`` has shape (d_out, d_in); the feature extractor is a
    hashed bag-of-words of dimension d_in seeded by ``feature_seed``, so
    a checkpoint fully determines the encoder.
    """

    def __init__(
        self,
        weights: np.ndarray,
        temperature: float = DEFAULT_TEMPERATURE,
        feature_seed: int = 0,
    ) -> None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 2:
            raise ValueError("weights must be a 2-d matrix")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.weights = weights
        self.temperature = float(temperature)
        self.feature_seed = int(feature_seed)
        self._featurizer = HashedBowEmbedder(
            dimension=weights.shape[1], seed=feature_seed
        )

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def random_init(
        cls,
        d_out: int = DEFAULT_PROJECTION_DIM,
        d_in: int = DEFAULT_FEATURE_DIM,
        temperature: float = DEFAULT_TEMPERATURE,
        seed: int = 0,
        feature_seed: int = 0,
    ) -> "ProjectionModel":
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(d_in)
        weights = rng.normal(0.0, scale, size=(d_out, d_in))
        return cls(weights, temperature=temperature, feature_seed=feature_seed)

    def copy(self) -> "ProjectionModel":
        return ProjectionModel(
            self.weights.copy(),
            temperature=self.temperature,
            feature_seed=self.feature_seed,
        )

    def features(self, text: str) -> np.ndarray:
        return self._featurizer.embed_one(text)

    def encode_features(self, f: np.ndarray) -> np.ndarray:
        z = self.weights @ f
        norm = float(np.linalg.norm(z))
        if norm > 0.0:
            z = z / norm
        return z

    def encode_text(self, text: str) -> np.ndarray:
        return self.encode_features(self.features(text))


def temperature_scaled_cosine(
    model: ProjectionModel, a: np.ndarray, b: np.ndarray
) -> float:
    """Cosine of two encoded vectors divided by the model temperature."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb)) / model.temperature


def encode_table(
    model: ProjectionModel,
    t: Table,
    seed: int,
    blank_cells: bool = False,
    token_cap: int = DEFAULT_TOKEN_CAP,
) -> np.ndarray:
    """Serialize, truncate, hash, project, normalize."""
    text = truncate_tokens(to_embedding_text(t, seed, blank_cells), token_cap)
    return model.encode_text(text)


class ProjectionEmbeddingProvider:
    """Adapter exposing a ProjectionModel as an embedding provider."""

    def __init__(self, model: ProjectionModel) -> None:
        self.model = model
        self.dimension = model.d_out

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = self.model.encode_text(text)
        return out


@dataclass(frozen=True)
class TrainSample:
    """One training instance; texts are already serialized and capped."""

    anchor_text: str
    positive_text: str
    hard_negative_texts: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "hard_negative_texts", tuple(self.hard_negative_texts)
        )


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    n_hard: int = 15
    learning_rate: float = 0.05
    epochs: int = 3
    seed: int = 0
    token_cap: int = DEFAULT_TOKEN_CAP

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError(
                "batch_size must be >= 2: in-batch negatives need company"
            )
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass(frozen=True)
class TrainResult:
    model: ProjectionModel
    epoch_losses: tuple[float, ...]


def loss_from_logits(logits: Sequence[float], pos_index: int = 0) -> float:
    """InfoNCE for one anchor given its candidate logits.

    The positive sits inside the softmax denominator, so the loss is
    always non-negative.
    """
    arr = np.asarray(logits, dtype=np.float64)
    m = float(arr.max())
    lse = m + math.log(float(np.exp(arr - m).sum()))
    return lse - float(arr[pos_index])


class _BatchComputer:
    """Shared forward/backward pass over one batch.

    Every distinct text in the batch maps to one feature row; gradient
    contributions accumulate per row and collapse into a single matmul at
    the end.
    """

    def __init__(
        self,
        model: ProjectionModel,
        batch: Sequence[TrainSample],
        feature_cache: dict[str, np.ndarray],
    ) -> None:
        self.model = model
        self.batch = batch
        texts: list[str] = []
        index: dict[str, int] = {}
        for s in batch:
            for text in (s.anchor_text, s.positive_text, *s.hard_negative_texts):
                if text not in index:
                    index[text] = len(texts)
                    texts.append(text)
        self.text_index = index
        rows = []
        for text in texts:
            f = feature_cache.get(text)
            if f is None:
                f = model.features(text)
                feature_cache[text] = f
            rows.append(f)
        self.features = np.stack(rows)
        z = self.features @ model.weights.T
        self.norms = np.linalg.norm(z, axis=1)
        safe = np.where(self.norms > 0.0, self.norms, 1.0)
        self.units = z / safe[:, None]

    def _candidates(self, i: int) -> list[int]:
        s = self.batch[i]
        cand = [self.text_index[s.positive_text]]
        cand.extend(self.text_index[t] for t in s.hard_negative_texts)
        for j, other in enumerate(self.batch):
            if j != i:
                cand.append(self.text_index[other.positive_text])
        return cand

    def loss_and_gradient(self) -> tuple[float, np.ndarray]:
        tau = self.model.temperature
        n_rows = self.features.shape[0]
        coeff = np.zeros((n_rows, self.model.d_out), dtype=np.float64)
        total_loss = 0.0
        for i, s in enumerate(self.batch):
            a = self.text_index[s.anchor_text]
            cand = self._candidates(i)
            u_a = self.units[a]
            live_a = self.norms[a] > 0.0
            gains = np.array(
                [
                    float(u_a @ self.units[c])
                    if live_a and self.norms[c] > 0.0
                    else 0.0
                    for c in cand
                ]
            )
            logits = gains / tau
            total_loss += loss_from_logits(logits, pos_index=0)
            m = logits.max()
            p = np.exp(logits - m)
            p /= p.sum()
            w = p.copy()
            w[0] -= 1.0
            for idx, c in enumerate(cand):
                if not live_a or self.norms[c] == 0.0:
                    continue
                g = gains[idx]
                u_c = self.units[c]
                coeff[a] += w[idx] * (u_c - g * u_a) / (tau * self.norms[a])
                coeff[c] += w[idx] * (u_a - g * u_c) / (tau * self.norms[c])
        grad = coeff.T @ self.features / len(self.batch)
        return total_loss / len(self.batch), grad

    def loss(self) -> float:
        tau = self.model.temperature
        total = 0.0
        for i, s in enumerate(self.batch):
            a = self.text_index[s.anchor_text]
            cand = self._candidates(i)
            u_a = self.units[a]
            live_a = self.norms[a] > 0.0
            logits = [
                (
                    float(u_a @ self.units[c]) / tau
                    if live_a and self.norms[c] > 0.0
                    else 0.0
                )
                for c in cand
            ]
            total += loss_from_logits(logits, pos_index=0)
        return total / len(self.batch)


def infonce_loss(
    model: ProjectionModel,
    batch: Sequence[TrainSample],
    feature_cache: dict[str, np.ndarray] | None = None,
) -> float:
    """Mean InfoNCE over the batch (positive, hard, and in-batch
    negatives)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    cache = feature_cache if feature_cache is not None else {}
    return _BatchComputer(model, batch, cache).loss()


def loss_gradient(
    model: ProjectionModel,
    batch: Sequence[TrainSample],
    feature_cache: dict[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Analytic gradient of :func:`infonce_loss` with respect to the
    weights."""
    if not batch:
        raise ValueError("batch must be non-empty")
    cache = feature_cache if feature_cache is not None else {}
    return _BatchComputer(model, batch, cache).loss_and_gradient()[1]


def train(
    model: ProjectionModel,
    dataset: Sequence[TrainSample],
    cfg: TrainConfig,
) -> TrainResult:
    """Plain SGD over seeded-shuffled mini-batches.

    The input model is left untouched; the returned model carries the
    trained weights. A non-finite loss aborts with the failing epoch and
    batch in the message.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    trained = model.copy()
    feature_cache: dict[str, np.ndarray] = {}
    epoch_losses: list[float] = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = list(range(n))
        random.Random(derive_seed(cfg.seed, "epoch", epoch)).shuffle(order)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
            computer = _BatchComputer(trained, batch, feature_cache)
            loss, grad = computer.loss_and_gradient()
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch}, "
                    f"batch starting at {start}"
                )
            loss_sum += loss * len(batch)
            trained.weights -= cfg.learning_rate * grad
        epoch_losses.append(loss_sum / n)
    return TrainResult(model=trained, epoch_losses=tuple(epoch_losses))


def save_checkpoint(model: ProjectionModel, path: str | Path) -> None:
    """Write magic, version, shape, temperature, feature seed, then the
    row-major little-endian float64 weights."""
    path = Path(path)
    header = _CHECKPOINT_MAGIC + struct.pack(
        "<BIIdQ",
        _CHECKPOINT_VERSION,
        model.d_out,
        model.d_in,
        model.temperature,
        model.feature_seed,
    )
    body = model.weights.astype("<f8").tobytes(order="C")
    path.write_bytes(header + body)


def load_checkpoint(path: str | Path) -> ProjectionModel:
    data = Path(path).read_bytes()
    if data[:4] != _CHECKPOINT_MAGIC:
        raise TrainingError(f"{path}: not a projection checkpoint")
    header_size = 4 + struct.calcsize("<BIIdQ")
    if len(data) < header_size:
        raise TrainingError(f"{path}: truncated checkpoint header")
    version, d_out, d_in, temperature, feature_seed = struct.unpack(
        "<BIIdQ", data[4:header_size]
    )
    if version != _CHECKPOINT_VERSION:
        raise TrainingError(f"{path}: unsupported version {version}")
    expected = header_size + d_out * d_in * 8
    if len(data) != expected:
        raise TrainingError(
            f"{path}: expected {expected} bytes, found {len(data)}"
        )
    weights = np.frombuffer(
        data[header_size:], dtype="<f8"
    ).reshape(d_out, d_in)
    return ProjectionModel(
        weights.copy(), temperature=temperature, feature_seed=feature_seed
    )
