"""Seeded synthetic generator for the five cyber-physical operating states.

States:
    S1  normal operation (centered baseline)
    S2  DDoS blocking (elevated cyber indicators)
    S3  false data injection disguised as a fault
    S4  protection-parameter tampering
    S5  genuine grid fault

Each state is an isotropic Gaussian around a fixed mean template. The
templates are rescaled so the closest pair of state means sits exactly
``separation`` noise standard deviations apart. ``overlap`` pulls the S5
mean toward S3 along their difference (0 = fully separated, 1 = coincident).
Each physical signature occupies ``signature_width`` attributes; the rest of
the physical attributes carry noise only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datalink import CYBER_FEATURES, FusedRecord, StateDataLink
from .errors import InvalidConfigError

STATES = ("S1", "S2", "S3", "S4", "S5")
ATTACK_STATES = ("S2", "S3", "S4")
DEFAULT_PROPORTIONS = (0.35, 0.29, 0.25, 0.08, 0.03)


@dataclass(frozen=True)
class ScenarioConfig:
    n_records: int = 5000
    n_features: int = 56
    proportions: tuple[float, ...] = DEFAULT_PROPORTIONS
    separation: float = 8.0
    overlap: float = 0.2
    noise: float = 1.0
    signature_width: int = 3
    seed: int = 42

    def __post_init__(self):
        p = np.asarray(self.proportions, dtype=float)
        if p.shape != (len(STATES),):
            raise InvalidConfigError(f"need {len(STATES)} class proportions")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidConfigError("class proportions must be >= 0 and sum to 1")
        if self.n_records < 10 * len(STATES):
            raise InvalidConfigError("n_records must be at least 10 per class")
        if self.signature_width < 1:
            raise InvalidConfigError("signature_width must be >= 1")
        if self.n_features < 4 * self.signature_width + len(CYBER_FEATURES):
            raise InvalidConfigError("n_features too small for four signature blocks + 3 cyber")
        if not self.separation > 0:
            raise InvalidConfigError("separation must be > 0")
        if self.overlap < 0 or self.noise < 0:
            raise InvalidConfigError("overlap and noise must be >= 0")


def class_counts(n: int, proportions) -> np.ndarray:
    """Largest-remainder apportionment of ``n`` records over the proportions."""
    p = np.asarray(proportions, dtype=float)
    raw = p * n
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def state_means(n_features: int, separation: float, overlap: float = 0.0,
                signature_width: int = 3) -> np.ndarray:
    """Mean vector of each state, shape (5, n_features)."""
    h = n_features - len(CYBER_FEATURES)
    width = min(signature_width, h // 4)
    fault, inject, genuine, protect = np.arange(4 * width).reshape(4, width)
    cyber = np.arange(h, n_features)
    T = np.zeros((len(STATES), n_features))
    T[1, cyber] = 1.0
    T[2, fault] = 1.0
    T[2, inject] = 1.0
    T[3, protect] = 1.0
    T[4, fault] = 1.0
    T[4, genuine] = 1.0
    norms = np.linalg.norm(T, axis=1)
    T[1:] /= norms[1:, None]
    diff = T[:, None, :] - T[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    closest = dist[np.triu_indices(len(STATES), 1)].min()
    M = T * (separation / closest)
    pull = min(overlap, 1.0)
    M[4] = M[2] + (1.0 - pull) * (M[4] - M[2])
    return M


def generate_arrays(config: ScenarioConfig):
    """Feature matrix and integer state codes (0..4), record order shuffled."""
    rng = np.random.default_rng(config.seed)
    counts = class_counts(config.n_records, config.proportions)
    y = np.repeat(np.arange(len(STATES)), counts)
    y = y[rng.permutation(len(y))]
    M = state_means(config.n_features, config.separation, config.overlap,
                    config.signature_width)
    X = M[y] + config.noise * rng.standard_normal((len(y), config.n_features))
    return X, y


def generate(config: ScenarioConfig = ScenarioConfig()) -> StateDataLink:
    """Labeled fused data link drawn from the configured scenario."""
    X, y = generate_arrays(config)
    h = config.n_features - len(CYBER_FEATURES)
    records = []
    for i in range(len(y)):
        comp = i % 20
        records.append(FusedRecord(
            timestamp=float(i),
            area=f"A{comp // 10 + 1}",
            line=f"L{comp // 5 + 1}",
            component_id=f"X{comp + 1}",
            ip=f"10.0.{comp // 10}.{comp % 10 + 1}",
            features=tuple(X[i].tolist()),
            label=STATES[y[i]],
        ))
    names = tuple(f"attr_{j + 1}" for j in range(h)) + CYBER_FEATURES
    return StateDataLink(tuple(records), feature_names=names)
