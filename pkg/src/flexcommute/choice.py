"""Work-location choice model.

Predicts, for each worker, the fraction of their commuting trips that fall
into five buckets: unchanged (employer site), eliminated (working at home),
and redirected to one of three kinds of third place (public space,
co-working space, friend's or family member's home).

The model is a fractional multinomial logit: a softmax over five linear
scores trained against fractional share targets with weighted cross-entropy

    J(B) = -(1/W) * sum_i w_i * sum_k y_ik * log p_ik + l2 * ||B'||^2

where W = sum_i w_i, p_i = softmax(B x_i), and B' excludes both the
intercept column and the employer row. The employer row is pinned at zero
as the identification constraint, so only four rows of coefficients are
free. Minimization is plain gradient descent with Armijo backtracking,
which is deterministic: refitting identical inputs yields bit-identical
coefficients.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import EstimationError, ValidationError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .ingest import PersonRecord, TrainingRecord

CATEGORIES: tuple[str, ...] = ("employer", "home", "public_space", "coworking", "friend_home")

# Person fields entering the model, in encoding order.
CATEGORICAL_FIELDS: tuple[str, ...] = ("occupation", "industry", "income_cat", "sex", "race", "education")
CONTINUOUS_FIELDS: tuple[str, ...] = ("age", "home_density")
FIELD_ORDER: tuple[str, ...] = (
    "occupation",
    "industry",
    "income_cat",
    "sex",
    "age",
    "race",
    "education",
    "home_density",
)

SHARE_SUM_TOL = 1e-9

# Line-search constants: Armijo sufficient-decrease coefficient and step shrink.
ARMIJO_C = 1e-4
BACKTRACK_SHRINK = 0.5


@dataclass(frozen=True, slots=True)
class WorkLocationShares:
    """Probability vector over the five work-location categories."""

    employer: float
    home: float
    public_space: float
    coworking: float
    friend_home: float

    def __post_init__(self) -> None:
        total = 0.0
        for name in CATEGORIES:
            value = getattr(self, name)
            if not (math.isfinite(value) and -SHARE_SUM_TOL <= value <= 1.0 + SHARE_SUM_TOL):
                raise ValidationError(f"share {name}={value!r} outside [0, 1]")
            total += value
        if abs(total - 1.0) > SHARE_SUM_TOL:
            raise ValidationError(f"shares sum to {total!r}, expected 1 within {SHARE_SUM_TOL}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.employer, self.home, self.public_space, self.coworking, self.friend_home)

    @property
    def unchanged(self) -> float:
        """Fraction of commute trips kept as-is (employer site)."""
        return self.employer

    @property
    def eliminated(self) -> float:
        """Fraction of commute trips dropped entirely (work at home)."""
        return self.home

    @property
    def redirected(self) -> float:
        """Fraction of commute trips re-pointed at a third place."""
        return self.public_space + self.coworking + self.friend_home

    def third_place(self, category: str) -> float:
        if category not in ("public_space", "coworking", "friend_home"):
            raise ValidationError(f"{category!r} is not a third-place category")
        return getattr(self, category)


@dataclass
class EncodeStats:
    """Mutable counters accumulated while encoding people."""

    unseen_levels: int = 0


@dataclass(frozen=True)
class FeatureEncoding:
    """Design-matrix recipe derived from the training data.

    Categorical variables are one-hot encoded with the lexicographically
    first level as the dropped reference; continuous variables are
    standardized to (x - mean) / sd using training-set statistics.
    """

    categorical_levels: dict[str, tuple[str, ...]]
    continuous_stats: dict[str, tuple[float, float]]
    feature_names: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        names = ["intercept"]
        for fname in FIELD_ORDER:
            if fname in self.categorical_levels:
                names.extend(f"{fname}={lvl}" for lvl in self.categorical_levels[fname][1:])
            else:
                names.append(fname)
        object.__setattr__(self, "feature_names", tuple(names))

    @classmethod
    def from_training(cls, records: Sequence["TrainingRecord"]) -> "FeatureEncoding":
        if not records:
            raise EstimationError("cannot build a feature encoding from zero training records")
        categorical_levels: dict[str, tuple[str, ...]] = {}
        for fname in CATEGORICAL_FIELDS:
            levels = sorted({getattr(rec.person, fname) for rec in records})
            categorical_levels[fname] = tuple(levels)
        continuous_stats: dict[str, tuple[float, float]] = {}
        for fname in CONTINUOUS_FIELDS:
            values = np.array([getattr(rec.person, fname) for rec in records], dtype=float)
            mean = float(values.mean())
            sd = float(values.std())  # population sd; a degenerate column falls back to sd=1
            continuous_stats[fname] = (mean, sd if sd > 0.0 else 1.0)
        return cls(categorical_levels=categorical_levels, continuous_stats=continuous_stats)

    @property
    def width(self) -> int:
        return len(self.feature_names)

    def encode(self, person: "PersonRecord", stats: EncodeStats | None = None) -> np.ndarray:
        """Feature vector for one person: intercept, one-hots, z-scored continuous.

        An unseen categorical level maps to the reference level (all-zero
        one-hot block) and bumps ``stats.unseen_levels`` instead of raising.
        """
        row = np.zeros(self.width)
        row[0] = 1.0
        pos = 1
        for fname in FIELD_ORDER:
            if fname in self.categorical_levels:
                levels = self.categorical_levels[fname]
                block = len(levels) - 1
                value = getattr(person, fname)
                if value in levels:
                    idx = levels.index(value)
                    if idx > 0:
                        row[pos + idx - 1] = 1.0
                elif stats is not None:
                    stats.unseen_levels += 1
                pos += block
            else:
                mean, sd = self.continuous_stats[fname]
                row[pos] = (getattr(person, fname) - mean) / sd
                pos += 1
        return row

    def encode_batch(
        self, persons: Iterable["PersonRecord"], stats: EncodeStats | None = None
    ) -> np.ndarray:
        rows = [self.encode(p, stats) for p in persons]
        if not rows:
            return np.zeros((0, self.width))
        return np.vstack(rows)

    def to_json_dict(self) -> dict:
        return {
            "categorical_levels": {k: list(v) for k, v in self.categorical_levels.items()},
            "continuous_stats": {k: [v[0], v[1]] for k, v in self.continuous_stats.items()},
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FeatureEncoding":
        return cls(
            categorical_levels={k: tuple(v) for k, v in data["categorical_levels"].items()},
            continuous_stats={k: (float(v[0]), float(v[1])) for k, v in data["continuous_stats"].items()},
        )


def build_design(
    records: Sequence["TrainingRecord"], encoding: FeatureEncoding
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Design matrix X (n, p), share targets Y (n, 5), and weights w (n)."""
    X = encoding.encode_batch([rec.person for rec in records])
    Y = np.array([rec.shares.as_tuple() for rec in records], dtype=float)
    w = np.array([rec.person.weight for rec in records], dtype=float)
    return X, Y, w


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def objective(
    coefficients: np.ndarray, X: np.ndarray, Y: np.ndarray, w: np.ndarray, l2: float
) -> float:
    """Weighted fractional cross-entropy plus the L2 penalty."""
    log_p = _log_softmax(X @ coefficients.T)
    nll = -float((w[:, None] * Y * log_p).sum()) / float(w.sum())
    penalty = l2 * float((coefficients[:, 1:] ** 2).sum())
    return nll + penalty


def objective_and_gradient(
    coefficients: np.ndarray, X: np.ndarray, Y: np.ndarray, w: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Objective value and its gradient over the free coefficients.

    The returned gradient matrix has the employer row zeroed: that row is a
    pinned identification constraint, not a free parameter. Intercepts are
    never penalized.
    """
    logits = X @ coefficients.T
    log_p = _log_softmax(logits)
    p = np.exp(log_p)
    total_w = float(w.sum())
    nll = -float((w[:, None] * Y * log_p).sum()) / total_w
    penalty = l2 * float((coefficients[:, 1:] ** 2).sum())
    grad = ((p - Y) * w[:, None]).T @ X / total_w
    grad[:, 1:] += 2.0 * l2 * coefficients[:, 1:]
    grad[0, :] = 0.0
    return nll + penalty, grad


@dataclass(frozen=True, eq=False)
class ChoiceModel:
    """A fitted work-location choice model."""

    encoding: FeatureEncoding
    coefficients: np.ndarray  # (5, p); employer row all zero
    l2: float
    iterations: int
    objective: float

    def __post_init__(self) -> None:
        if self.coefficients.shape != (len(CATEGORIES), self.encoding.width):
            raise EstimationError(
                f"coefficient matrix shape {self.coefficients.shape} does not match encoding"
            )
        if np.any(self.coefficients[0] != 0.0):
            raise EstimationError("employer coefficient row must be all zero")
        if not np.all(np.isfinite(self.coefficients)):
            raise EstimationError("coefficients must be finite")

    def predict_shares(
        self, person: "PersonRecord", stats: EncodeStats | None = None
    ) -> WorkLocationShares:
        row = self.encoding.encode(person, stats)
        probs = _softmax((self.coefficients @ row)[None, :])[0]
        return WorkLocationShares(*(float(v) for v in probs))

    def predict_batch(
        self, persons: Sequence["PersonRecord"], stats: EncodeStats | None = None
    ) -> np.ndarray:
        X = self.encoding.encode_batch(persons, stats)
        return _softmax(X @ self.coefficients.T)

    def log_loss(self, records: Sequence["TrainingRecord"]) -> float:
        """Weighted cross-entropy of this model on held-out records (no penalty)."""
        X, Y, w = build_design(records, self.encoding)
        log_p = _log_softmax(X @ self.coefficients.T)
        return -float((w[:, None] * Y * log_p).sum()) / float(w.sum())

    def to_json_dict(self) -> dict:
        return {
            "categories": list(CATEGORIES),
            "feature_names": list(self.encoding.feature_names),
            "encoding": self.encoding.to_json_dict(),
            "coefficients": [[float(v) for v in row] for row in self.coefficients],
            "l2": self.l2,
            "iterations": self.iterations,
            "objective": self.objective,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_json_dict(cls, data: dict) -> "ChoiceModel":
        if tuple(data["categories"]) != CATEGORIES:
            raise ValidationError(f"unexpected category order {data['categories']!r}")
        encoding = FeatureEncoding.from_json_dict(data["encoding"])
        coefficients = np.array(data["coefficients"], dtype=float)
        return cls(
            encoding=encoding,
            coefficients=coefficients,
            l2=float(data["l2"]),
            iterations=int(data["iterations"]),
            objective=float(data["objective"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ChoiceModel":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def predict_shares(model: ChoiceModel, person: "PersonRecord") -> WorkLocationShares:
    return model.predict_shares(person)


def fit(
    records: Sequence["TrainingRecord"],
    l2: float = 1e-4,
    tolerance: float = 1e-8,
    max_iters: int = 10_000,
    seed: int | None = None,
    initial: np.ndarray | None = None,
) -> ChoiceModel:
    """Fit the choice model by gradient descent with backtracking line search.

    Starts from zero coefficients (or ``initial``), accepts a step when the
    Armijo condition holds, and stops once the relative objective decrease
    drops below ``tolerance`` or ``max_iters`` is reached. The descent is
    monotone and fully deterministic; ``seed`` is reserved for stochastic
    optimizer variants and unused here.
    """
    del seed
    if not records:
        raise EstimationError("cannot fit on an empty training set")
    if l2 < 0:
        raise EstimationError(f"l2 penalty must be >= 0, got {l2}")
    encoding = FeatureEncoding.from_training(records)
    X, Y, w = build_design(records, encoding)
    B = np.zeros((len(CATEGORIES), encoding.width)) if initial is None else initial.astype(float).copy()
    B[0, :] = 0.0

    f, grad = objective_and_gradient(B, X, Y, w, l2)
    if not math.isfinite(f):
        raise EstimationError("objective is non-finite at the starting point")
    step = 1.0
    iterations = 0
    for _ in range(max_iters):
        gnorm2 = float((grad * grad).sum())
        if gnorm2 == 0.0:
            break
        # Grow the trial step so a single conservative iteration does not
        # throttle the whole descent; backtracking pulls it down again.
        step = min(step * 2.0, 1e6)
        while True:
            candidate = B - step * grad
            f_new = objective(candidate, X, Y, w, l2)
            if math.isfinite(f_new) and f_new <= f - ARMIJO_C * step * gnorm2:
                break
            step *= BACKTRACK_SHRINK
            if step < 1e-20:
                # The objective can no longer be decreased in floating point.
                f_new = f
                candidate = B
                break
        iterations += 1
        decrease = f - f_new
        B = candidate
        f = f_new
        if not math.isfinite(f):
            raise EstimationError("objective became non-finite during fitting")
        if decrease <= tolerance * max(abs(f), 1e-12):
            break
        _, grad = objective_and_gradient(B, X, Y, w, l2)

    return ChoiceModel(encoding=encoding, coefficients=B, l2=l2, iterations=iterations, objective=f)


def holdout_split(
    records: Sequence["TrainingRecord"],
) -> tuple[list["TrainingRecord"], list["TrainingRecord"]]:
    """Deterministic 80/20 train/holdout split keyed by a hash of person_id."""
    train: list[TrainingRecord] = []
    holdout: list[TrainingRecord] = []
    for rec in records:
        digest = hashlib.sha256(rec.person.person_id.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:8], "big") % 5
        (holdout if bucket == 0 else train).append(rec)
    return train, holdout
