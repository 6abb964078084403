"""Differential-privacy machinery: DP-SGD-style gradient hardening and a
brute-force (epsilon, delta) verifier for finite discrete mechanisms.

The verifier makes the DP inequality executable on toy mechanisms; it
does not certify the neural training pipeline, and no privacy accountant
is provided (the toolkit reports DP-SGD parameters, never a claimed
epsilon for a trained model).
"""

from __future__ import annotations

import dataclasses
import itertools
import json

import numpy as np

from trajaudit import nn
from trajaudit.errors import ConfigError, EmptyInputError, NumericError, ValidationError

#: slack for comparing hinge mass against delta; absorbs float rounding in
#: probability tables and exp(epsilon)
VERIFIER_ATOL = 1e-9


@dataclasses.dataclass(frozen=True)
class DpConfig:
    """Per-example clipping bound and Gaussian noise multiplier.

    Unit of privacy is one complete trajectory (instance level): each
    training example is one trajectory, so adjacency means changing one
    trajectory.
    """

    clip_norm: float
    noise_multiplier: float
    unit_of_privacy: str = "instance"

    def __post_init__(self):
        if self.clip_norm <= 0 or self.noise_multiplier < 0:
            raise ConfigError(f"bad DP config: {self}")
        if self.unit_of_privacy != "instance":
            raise ConfigError("only instance-level unit of privacy is implemented")


def clip_per_example(grads: nn.GradientSet, clip_norm: float) -> nn.GradientSet:
    """Scale the whole gradient so its global L2 norm is at most clip_norm."""
    if clip_norm <= 0:
        raise ConfigError(f"clip_norm must be positive, got {clip_norm}")
    if not grads.all_finite():
        raise NumericError("non-finite gradient entries")
    norm = grads.global_norm()
    if norm <= clip_norm:
        return grads
    return grads.scaled(clip_norm / norm)


def aggregate_private_grads(
    per_example: list[nn.GradientSet], config: DpConfig, rng: np.random.Generator
) -> nn.GradientSet:
    """Clip each example's gradient, sum, add N(0, (sigma*C)^2) noise, and
    divide by the batch size."""
    if not per_example:
        raise EmptyInputError("empty batch")
    total = nn.GradientSet(
        [np.zeros_like(g) for g in per_example[0].d_weights],
        [np.zeros_like(g) for g in per_example[0].d_biases],
    )
    for g in per_example:
        total.add_(clip_per_example(g, config.clip_norm))
    std = config.noise_multiplier * config.clip_norm
    if std > 0:
        for g in itertools.chain(total.d_weights, total.d_biases):
            g += std * rng.standard_normal(g.shape)
    return total.scaled(1.0 / len(per_example))


def dp_sgd_step(
    per_example: list[nn.GradientSet],
    config: DpConfig,
    lr: float,
    net: nn.Mlp,
    seed: int,
) -> nn.Mlp:
    """One DP-SGD update on `net` from per-example gradients."""
    rng = np.random.default_rng(seed)
    mean_grad = aggregate_private_grads(per_example, config, rng)
    return nn.sgd_step(net, mean_grad, lr)


# -- discrete mechanism verifier -------------------------------------------

@dataclasses.dataclass(frozen=True)
class DiscreteMechanism:
    """Finite randomized mechanism given by an explicit probability table.

    probs[i, j] = P[output j | dataset i]; rows must sum to 1.
    """

    datasets: tuple[str, ...]
    outputs: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if probs.shape != (len(self.datasets), len(self.outputs)):
            raise ValidationError(
                f"probability table shape {probs.shape} does not match "
                f"{len(self.datasets)} datasets x {len(self.outputs)} outputs"
            )
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValidationError("probabilities must lie in [0, 1]")
        row_sums = probs.sum(axis=1)
        bad = np.abs(row_sums - 1.0) > 1e-12
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise ValidationError(
                f"row for dataset {self.datasets[idx]!r} sums to {row_sums[idx]!r}"
            )

    def row(self, dataset: str) -> np.ndarray:
        try:
            return self.probs[self.datasets.index(dataset)]
        except ValueError:
            raise ValidationError(f"unknown dataset {dataset!r}") from None


@dataclasses.dataclass(frozen=True)
class DpVerdict:
    holds: bool
    #: on violation: (dataset, adjacent dataset, offending output subset)
    witness: tuple[str, str, tuple[str, ...]] | None = None

    def __bool__(self) -> bool:
        return self.holds


def verify_dp(
    mech: DiscreteMechanism,
    adjacency: list[tuple[str, str]],
    epsilon: float,
    delta: float,
) -> DpVerdict:
    """Check Pr[M(D) in S] <= exp(eps) * Pr[M(D') in S] + delta for every
    adjacent pair (both directions) and every output subset S.

    Uses the tight reduction: the worst subset is the set of outputs with
    P[o|D] > exp(eps) * P[o|D'], so it suffices to compare the summed
    positive part against delta.
    """
    e_eps = float(np.exp(epsilon))
    for a, b in adjacency:
        for d1, d2 in ((a, b), (b, a)):
            p, q = mech.row(d1), mech.row(d2)
            excess = p - e_eps * q
            mass = float(np.sum(excess[excess > 0]))
            if mass > delta + VERIFIER_ATOL:
                witness = tuple(
                    o for o, ex in zip(mech.outputs, excess) if ex > 0
                )
                return DpVerdict(False, (d1, d2, witness))
    return DpVerdict(True)


def verify_dp_bruteforce(
    mech: DiscreteMechanism,
    adjacency: list[tuple[str, str]],
    epsilon: float,
    delta: float,
    max_outputs: int = 12,
) -> DpVerdict:
    """Literal enumeration of every output subset; exponential, only for
    small output domains. Cross-check oracle for verify_dp."""
    k = len(mech.outputs)
    if k > max_outputs:
        raise ConfigError(f"{k} outputs > brute-force limit {max_outputs}")
    e_eps = float(np.exp(epsilon))
    for a, b in adjacency:
        for d1, d2 in ((a, b), (b, a)):
            p, q = mech.row(d1), mech.row(d2)
            for r in range(1, k + 1):
                for subset in itertools.combinations(range(k), r):
                    idx = list(subset)
                    if p[idx].sum() > e_eps * q[idx].sum() + delta + VERIFIER_ATOL:
                        return DpVerdict(
                            False, (d1, d2, tuple(mech.outputs[i] for i in idx))
                        )
    return DpVerdict(True)


def load_mechanism(path) -> DiscreteMechanism:
    """Load a mechanism specification file (JSON: datasets, outputs, probs)."""
    try:
        spec = json.loads(open(path).read())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("datasets", "outputs", "probs"):
        if key not in spec:
            raise ValidationError(f"{path}: missing key {key!r}")
    return DiscreteMechanism(
        tuple(spec["datasets"]), tuple(spec["outputs"]), np.array(spec["probs"])
    )


def randomized_response(flip_prob: float) -> DiscreteMechanism:
    """One-bit randomized response: report the true bit with probability
    1 - flip_prob. Satisfies pure DP at eps = ln((1-f)/f)."""
    if not 0 < flip_prob < 0.5:
        raise ConfigError(f"flip_prob must be in (0, 0.5), got {flip_prob}")
    f = flip_prob
    return DiscreteMechanism(
        ("bit0", "bit1"),
        ("report0", "report1"),
        np.array([[1 - f, f], [f, 1 - f]]),
    )
