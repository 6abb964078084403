"""ROC/AUC leakage metrics over scored samples.

The threshold sweep groups tied scores (all equal scores cross together),
which makes the trapezoidal area equal the Mann-Whitney statistic with
ties counted 0.5; `auc_pairwise` is the O(M*N) brute-force cross-check.
"""

from __future__ import annotations

import csv
import dataclasses

import numpy as np

from trajaudit.errors import ValidationError


@dataclasses.dataclass(frozen=True)
class RocCurve:
    """Threshold sweep: point i is the (fpr, tpr) of predicting "member"
    for scores >= thresholds[i]. Starts at (0,0), ends at (1,1)."""

    fprs: np.ndarray
    tprs: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        for name in ("fprs", "tprs", "thresholds"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (self.fprs.shape == self.tprs.shape == self.thresholds.shape):
            raise ValidationError("fprs/tprs/thresholds length mismatch")
        if np.any(np.diff(self.fprs) < 0) or np.any(np.diff(self.tprs) < 0):
            raise ValidationError("ROC rates must be non-decreasing")
        if self.fprs[0] != 0 or self.tprs[0] != 0 or self.fprs[-1] != 1 or self.tprs[-1] != 1:
            raise ValidationError("ROC must start at (0,0) and end at (1,1)")


def _split_scores(samples):
    member = np.array([s.score for s in samples if s.is_member])
    non_member = np.array([s.score for s in samples if not s.is_member])
    if member.size == 0 or non_member.size == 0:
        raise ValidationError(
            f"need both classes: {member.size} members, {non_member.size} non-members"
        )
    return member, non_member


def roc_curve(samples) -> RocCurve:
    """Sweep thresholds over the distinct scores in descending order."""
    member, non_member = _split_scores(samples)
    cuts = np.unique(np.concatenate([member, non_member]))[::-1]
    fprs = [0.0]
    tprs = [0.0]
    thresholds = [np.inf]
    for c in cuts:
        tprs.append(float(np.count_nonzero(member >= c)) / member.size)
        fprs.append(float(np.count_nonzero(non_member >= c)) / non_member.size)
        thresholds.append(float(c))
    return RocCurve(np.array(fprs), np.array(tprs), np.array(thresholds))


def auc(samples) -> float:
    """Trapezoidal area under the tie-grouped ROC curve."""
    curve = roc_curve(samples)
    return float(np.trapezoid(curve.tprs, curve.fprs))


def auc_pairwise(samples) -> float:
    """Brute-force Mann-Whitney: mean over all member/non-member pairs of
    1 if member scores higher, 0.5 on ties, else 0."""
    member, non_member = _split_scores(samples)
    wins = 0.0
    for m in member:
        wins += np.count_nonzero(m > non_member)
        wins += 0.5 * np.count_nonzero(m == non_member)
    return wins / (member.size * non_member.size)


def tpr_at_fpr(curve: RocCurve, target_fpr: float) -> float:
    """Best TPR at FPR <= target, conservative step interpolation."""
    if not 0.0 <= target_fpr <= 1.0:
        raise ValidationError(f"target fpr must be in [0,1], got {target_fpr}")
    ok = curve.fprs <= target_fpr
    return float(np.max(curve.tprs[ok]))


@dataclasses.dataclass(frozen=True)
class AuditMetrics:
    auc: float
    tpr_at_fpr: dict[float, float]
    n_members: int
    n_non_members: int

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ValidationError(f"auc {self.auc} outside [0, 1]")


#: FPR targets reported in every audit
FPR_TARGETS = (0.1, 0.01)


def compute_metrics(samples) -> AuditMetrics:
    member, non_member = _split_scores(samples)
    curve = roc_curve(samples)
    return AuditMetrics(
        auc=float(np.trapezoid(curve.tprs, curve.fprs)),
        tpr_at_fpr={f: tpr_at_fpr(curve, f) for f in FPR_TARGETS},
        n_members=member.size,
        n_non_members=non_member.size,
    )


def save_roc_csv(curve: RocCurve, path) -> None:
    """ROC CSV: threshold,fpr,tpr rows in sweep order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "fpr", "tpr"])
        for th, fpr, tpr in zip(curve.thresholds, curve.fprs, curve.tprs):
            writer.writerow([repr(float(th)), repr(float(fpr)), repr(float(tpr))])
