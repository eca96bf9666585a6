"""Desk-scale binary relevance classifier over hashed features.

A linear softmax scorer trained with mini-batch gradient descent on

    loss = alpha * CE(student, smoothed labels)
         + (1 - alpha) * T^2 * KL(teacher_T || student_T)

where the teacher is an exponential moving average of the student
(updated after every optimizer step) and inverted dropout is applied to
the student's active features during training. Everything is
deterministic given a seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from . import kernels
from .features import DEFAULT_HASH_BITS, FeatureVector, featurize, stack_csr

MODEL_MAGIC = b"RFORGE-TOY-1\n"

N_CLASSES = 2


@dataclass(frozen=True)
class SmoothingConfig:
    epsilon: float = 0.05
    num_classes: int = N_CLASSES

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon={self.epsilon} outside [0, 1]")
        if self.num_classes != N_CLASSES:
            raise ConfigError("this classifier is binary; num_classes must be 2")


@dataclass(frozen=True)
class DistillConfig:
    alpha: float = 0.5
    temperature: float = 2.5
    ema_decay: float = 0.999
    dropout_rate: float = 0.20
    # T^2 scaling of the KL term is standard practice but optional here
    scale_kl_by_t2: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha={self.alpha} outside [0, 1]")
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature={self.temperature} must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError(f"ema_decay={self.ema_decay} outside [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate={self.dropout_rate} outside [0, 1)")


@dataclass
class ModelParams:
    """Student and teacher weights; treat as immutable once training returns."""

    student_w: np.ndarray  # (2**hash_bits, 2)
    student_b: np.ndarray  # (2,)
    teacher_w: np.ndarray
    teacher_b: np.ndarray
    hash_bits: int = DEFAULT_HASH_BITS
    seed: int = 42

    def __post_init__(self) -> None:
        if self.student_w.shape != self.teacher_w.shape or self.student_b.shape != self.teacher_b.shape:
            raise DataError("student and teacher weight shapes differ")
        for arr in (self.student_w, self.student_b, self.teacher_w, self.teacher_b):
            if not np.all(np.isfinite(arr)):
                raise DataError("model weights must be finite")

    @classmethod
    def zeros(cls, hash_bits: int = DEFAULT_HASH_BITS, seed: int = 42) -> "ModelParams":
        n = 1 << hash_bits
        return cls(
            student_w=np.zeros((n, N_CLASSES)),
            student_b=np.zeros(N_CLASSES),
            teacher_w=np.zeros((n, N_CLASSES)),
            teacher_b=np.zeros(N_CLASSES),
            hash_bits=hash_bits,
            seed=seed,
        )


def smooth_labels(y: Sequence[float] | np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    """Blend a one-hot target toward uniform: (1 - eps) * y + eps / K."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (cfg.num_classes,) or not np.all((y == 0.0) | (y == 1.0)) or y.sum() != 1.0:
        raise DataError(f"target {y!r} is not a one-hot vector over {cfg.num_classes} classes")
    return (1.0 - cfg.epsilon) * y + cfg.epsilon / cfg.num_classes


def one_hot(labels: Sequence[int]) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("no labels given")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    out = np.zeros((labels.size, N_CLASSES))
    out[np.arange(labels.size), labels] = 1.0
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def ce_loss(student_logits: np.ndarray, smoothed_target: np.ndarray) -> float:
    """Cross-entropy of the student distribution against a (possibly smoothed) target."""
    target = np.asarray(smoothed_target, dtype=np.float64)
    if abs(target.sum() - 1.0) > 1e-9:
        raise DataError("target distribution must sum to 1")
    return float(-(target * log_softmax(np.asarray(student_logits, dtype=np.float64))).sum())


def kl_distill_loss(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    temperature: float,
    scale_by_t2: bool = True,
) -> float:
    """KL(teacher || student) at temperature T; the teacher side carries no gradient."""
    if temperature <= 0.0:
        raise ConfigError(f"temperature={temperature} must be positive")
    s = np.asarray(student_logits, dtype=np.float64) / temperature
    t = np.asarray(teacher_logits, dtype=np.float64) / temperature
    p_teacher = softmax(t)
    kl = float((p_teacher * (log_softmax(t) - log_softmax(s))).sum())
    kl = max(kl, 0.0)
    return kl * temperature**2 if scale_by_t2 else kl


def total_loss(ce: float, kl: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha={alpha} outside [0, 1]")
    return alpha * ce + (1.0 - alpha) * kl


def ema_update(teacher: np.ndarray, student: np.ndarray, decay: float) -> np.ndarray:
    """teacher' = decay * teacher + (1 - decay) * student, elementwise."""
    teacher = np.asarray(teacher, dtype=np.float64)
    student = np.asarray(student, dtype=np.float64)
    if teacher.shape != student.shape:
        raise DataError(f"shape mismatch in ema_update: {teacher.shape} vs {student.shape}")
    if not 0.0 <= decay < 1.0:
        raise ConfigError(f"decay={decay} outside [0, 1)")
    return decay * teacher + (1.0 - decay) * student


def _dropout_values(
    vals: np.ndarray, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Inverted dropout on active features: zero with prob rate, scale by 1/(1-rate)."""
    if rate == 0.0:
        return vals
    keep = rng.random(vals.shape) >= rate
    return vals * keep / (1.0 - rate)


def forward(
    params: ModelParams,
    x: FeatureVector,
    use_teacher: bool = False,
    dropout: tuple[float, np.random.Generator] | None = None,
) -> np.ndarray:
    """Logits for a single feature vector (student by default, no dropout)."""
    if dropout is not None and use_teacher:
        raise ConfigError("dropout applies to the student only")
    weights = params.teacher_w if use_teacher else params.student_w
    bias = params.teacher_b if use_teacher else params.student_b
    if x.indices.size and int(x.indices.max()) >= weights.shape[0]:
        raise DataError("feature index out of range for this model")
    vals = x.counts
    if dropout is not None:
        rate, rng = dropout
        vals = _dropout_values(vals, rate, rng)
    return bias + (weights[x.indices] * vals[:, None]).sum(axis=0)


def _dlogits(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    targets: np.ndarray,
    distill: DistillConfig,
) -> tuple[np.ndarray, float]:
    """Per-sample gradient of the combined loss w.r.t. student logits, plus mean loss."""
    temp = distill.temperature
    p_student = softmax(student_logits)
    q_student = softmax(student_logits / temp)
    q_teacher = softmax(teacher_logits / temp)

    ce = -(targets * log_softmax(student_logits)).sum(axis=1)
    kl = (q_teacher * (log_softmax(teacher_logits / temp) - log_softmax(student_logits / temp))).sum(axis=1)
    kl = np.maximum(kl, 0.0)
    kl_scale = temp**2 if distill.scale_kl_by_t2 else 1.0
    loss = float(np.mean(distill.alpha * ce + (1.0 - distill.alpha) * kl_scale * kl))

    grad_kl = (q_student - q_teacher) * (temp if distill.scale_kl_by_t2 else 1.0 / temp)
    dlogits = distill.alpha * (p_student - targets) + (1.0 - distill.alpha) * grad_kl
    return dlogits / student_logits.shape[0], loss


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    indptr: np.ndarray,
    cols: np.ndarray,
    vals: np.ndarray,
    targets: np.ndarray,
    teacher_logits: np.ndarray,
    distill: DistillConfig,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean combined loss over a CSR batch and its analytic student gradient."""
    student_logits = kernels.gather_logits(weights, bias, indptr, cols, vals)
    dlogits, loss = _dlogits(student_logits, teacher_logits, targets, distill)
    grad_w = np.zeros_like(weights)
    grad_b = np.zeros_like(bias)
    kernels.grad_accumulate(grad_w, grad_b, indptr, cols, vals, dlogits)
    return loss, grad_w, grad_b


def train_step(
    params: ModelParams,
    indptr: np.ndarray,
    cols: np.ndarray,
    vals: np.ndarray,
    targets: np.ndarray,
    distill: DistillConfig,
    lr: float,
    rng: np.random.Generator,
) -> float:
    """One SGD step on the student (in place); the teacher is only read."""
    vals_student = _dropout_values(vals, distill.dropout_rate, rng)
    teacher_logits = kernels.gather_logits(params.teacher_w, params.teacher_b, indptr, cols, vals)
    student_logits = kernels.gather_logits(params.student_w, params.student_b, indptr, cols, vals_student)
    dlogits, loss = _dlogits(student_logits, teacher_logits, targets, distill)
    kernels.sgd_scatter(params.student_w, params.student_b, indptr, cols, vals_student, dlogits, lr)
    return loss


def _featurize_pairs(
    pairs: Sequence[tuple[str, str]], hash_bits: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return stack_csr([featurize(q, t, hash_bits) for q, t in pairs])


def train(
    samples: Iterable[tuple[str, str, int]],
    smoothing: SmoothingConfig = SmoothingConfig(),
    distill: DistillConfig = DistillConfig(),
    epochs: int = 5,
    lr: float = 0.1,
    batch_size: int = 64,
    seed: int = 42,
    hash_bits: int = DEFAULT_HASH_BITS,
    loss_history: list[float] | None = None,
) -> ModelParams:
    """Mini-batch SGD with student dropout and an EMA teacher update per step.

    samples are (query, target, label) triples of already-normalized text.
    Deterministic for a fixed seed. loss_history, when given, receives the
    mean batch loss of each epoch.
    """
    samples = list(samples)
    if not samples:
        raise DataError("training requires at least one labeled sample")
    if epochs < 0 or batch_size < 1 or lr <= 0.0 or not 1 <= hash_bits <= 30:
        raise ConfigError(
            f"bad training setup: epochs={epochs}, batch_size={batch_size}, lr={lr}, hash_bits={hash_bits}"
        )
    labels = [s[2] for s in samples]
    targets_hard = one_hot(labels)
    targets = (1.0 - smoothing.epsilon) * targets_hard + smoothing.epsilon / smoothing.num_classes

    indptr, cols, vals = _featurize_pairs([(q, t) for q, t, _ in samples], hash_bits)
    starts = indptr[:-1]
    ends = indptr[1:]

    params = ModelParams.zeros(hash_bits=hash_bits, seed=seed)
    rng = np.random.default_rng(seed)
    n = len(samples)

    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for lo in range(0, n, batch_size):
            batch = order[lo : lo + batch_size]
            b_indptr = np.zeros(batch.size + 1, dtype=np.int64)
            np.cumsum(ends[batch] - starts[batch], out=b_indptr[1:])
            b_cols = np.concatenate([cols[starts[i] : ends[i]] for i in batch])
            b_vals = np.concatenate([vals[starts[i] : ends[i]] for i in batch])
            loss = train_step(
                params, b_indptr, b_cols, b_vals, targets[batch], distill, lr, rng
            )
            kernels.ema_blend(params.teacher_w, params.student_w, distill.ema_decay)
            kernels.ema_blend(params.teacher_b, params.student_b, distill.ema_decay)
            epoch_losses.append(loss)
        if loss_history is not None:
            loss_history.append(float(np.mean(epoch_losses)))
    return params


def predict(
    params: ModelParams,
    pairs: Sequence[tuple[str, str]],
    use_teacher: bool = False,
) -> np.ndarray:
    """Positive-class probability per (query, target) pair; no dropout at inference."""
    if not pairs:
        return np.empty(0)
    indptr, cols, vals = _featurize_pairs(pairs, params.hash_bits)
    weights = params.teacher_w if use_teacher else params.student_w
    bias = params.teacher_b if use_teacher else params.student_b
    logits = kernels.gather_logits(weights, bias, indptr, cols, vals)
    return softmax(logits)[:, 1]


def save_model(params: ModelParams, path: str) -> None:
    """Versioned binary format: magic line, JSON meta line, four raw arrays."""
    meta = {"hash_bits": params.hash_bits, "seed": params.seed, "n_classes": N_CLASSES}
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
        for arr in (params.student_w, params.student_b, params.teacher_w, params.teacher_b):
            np.save(fh, arr)


def load_model(path: str) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MODEL_MAGIC:
            raise DataError(f"{path}: not a relforge model file (bad magic {magic!r})")
        meta = json.loads(fh.readline().decode("utf-8"))
        arrays = [np.load(fh, allow_pickle=False) for _ in range(4)]
    return ModelParams(
        student_w=arrays[0],
        student_b=arrays[1],
        teacher_w=arrays[2],
        teacher_b=arrays[3],
        hash_bits=int(meta["hash_bits"]),
        seed=int(meta["seed"]),
    )
