"""Experiment orchestration: data -> target training -> attack -> metrics
-> report, with all stage seeds derived from one master seed."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import pathlib
import time

import numpy as np

from trajaudit import attacks, dp, metrics, targets, trajectory
from trajaudit.errors import ConfigError, RuntimeFailure, TrajauditError, ValidationError

__version__ = "0.1.0"


@dataclasses.dataclass(frozen=True)
class SyntheticData:
    n: int
    seq_len: int
    n_anchors: int = 3
    step_scale: float = 0.05


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str
    family: str  # gan | diffusion
    data: SyntheticData | str  # synthetic params or a trajectory CSV path
    member_count: int
    non_member_count: int
    train: targets.TrainConfig
    attack: attacks.AttackConfig
    master_seed: int
    seq_len: int
    dp_config: dp.DpConfig | None = None
    schedule_t_max: int = 100

    def __post_init__(self):
        if self.family not in ("gan", "diffusion"):
            raise ConfigError(f"unknown target family {self.family!r}")
        wanted = "discriminator" if self.family == "gan" else "loss_based"
        if self.attack.attack_kind != wanted:
            raise ConfigError(
                f"attack kind {self.attack.attack_kind!r} incompatible with "
                f"{self.family} target (expected {wanted!r})"
            )


def stage_seed(master_seed: int, stage: str) -> int:
    """Derive a stage seed; changing one stage never perturbs the others."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclasses.dataclass
class AuditReport:
    config: dict
    metrics: metrics.AuditMetrics
    score_stats: dict
    loss_summary: dict
    scored_samples_path: str
    roc_path: str
    toolkit_version: str = __version__
    duration_seconds: float = 0.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["metrics"]["tpr_at_fpr"] = {
            repr(k): v for k, v in self.metrics.tpr_at_fpr.items()
        }
        return d

    def save(self, path) -> None:
        pathlib.Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        )

    @classmethod
    def load(cls, path) -> "AuditReport":
        d = json.loads(pathlib.Path(path).read_text())
        m = d["metrics"]
        d["metrics"] = metrics.AuditMetrics(
            auc=m["auc"],
            tpr_at_fpr={float(k): v for k, v in m["tpr_at_fpr"].items()},
            n_members=m["n_members"],
            n_non_members=m["n_non_members"],
        )
        return cls(**d)


def _config_echo(config: ExperimentConfig) -> dict:
    echo = dataclasses.asdict(config)
    echo["note"] = (
        "members and non-members are drawn from one synthetic distribution; "
        "leaky/safe presets are constructed overfitting regimes, not "
        "replications of any published model"
    )
    return echo


def _class_stats(scores: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(scores)),
        "std": float(np.std(scores)),
        "min": float(np.min(scores)),
        "max": float(np.max(scores)),
    }


def build_dataset(config: ExperimentConfig) -> trajectory.MembershipDataset:
    if isinstance(config.data, str):
        trajs = trajectory.load_trajectories(config.data, config.seq_len)
    else:
        trajs = trajectory.synth_mobility(
            config.data.n,
            config.data.seq_len,
            stage_seed(config.master_seed, "data"),
            n_anchors=config.data.n_anchors,
            step_scale=config.data.step_scale,
        )
    return trajectory.split_membership(
        trajs,
        config.member_count,
        config.non_member_count,
        stage_seed(config.master_seed, "split"),
    )


def train_target(config: ExperimentConfig, dataset: trajectory.MembershipDataset):
    train_cfg = dataclasses.replace(
        config.train, seed=stage_seed(config.master_seed, "train")
    )
    if config.family == "gan":
        return targets.train_gan(dataset.members, train_cfg, dp_config=config.dp_config)
    if config.dp_config is not None:
        raise ConfigError("DP-SGD defense is implemented for the GAN target only")
    schedule = targets.NoiseSchedule.linear(config.schedule_t_max)
    return targets.train_diffusion(dataset.members, train_cfg, schedule)


def run_experiment(config: ExperimentConfig, out_dir) -> AuditReport:
    """Full pipeline; deterministic given the master seed (report differs
    between runs only in the wall-clock field). Writes scored_samples.csv,
    roc.csv, and report.json into out_dir; partial outputs are removed on
    failure."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scored_path = out / "scored_samples.csv"
    roc_path = out / "roc.csv"
    report_path = out / "report.json"
    started = time.monotonic()
    stage = "data"
    try:
        dataset = build_dataset(config)
        stage = "train"
        target = train_target(config, dataset)
        stage = "attack"
        attack_cfg = dataclasses.replace(
            config.attack, seed=stage_seed(config.master_seed, "attack")
        )
        samples = attacks.run_attack(target, dataset, attack_cfg)
        stage = "metrics"
        curve = metrics.roc_curve(samples)
        audit_metrics = metrics.compute_metrics(samples)
        stage = "report"
        attacks.save_scores(samples, scored_path)
        metrics.save_roc_csv(curve, roc_path)
        member_scores = np.array([s.score for s in samples if s.is_member])
        non_scores = np.array([s.score for s in samples if not s.is_member])
        trace = target.loss_trace
        report = AuditReport(
            config=_config_echo(config),
            metrics=audit_metrics,
            score_stats={
                "members": _class_stats(member_scores),
                "non_members": _class_stats(non_scores),
            },
            loss_summary={
                "epochs": len(trace),
                "first": trace[0],
                "last": trace[-1],
            },
            scored_samples_path=scored_path.name,
            roc_path=roc_path.name,
            duration_seconds=time.monotonic() - started,
        )
        report.save(report_path)
        return report
    except TrajauditError as exc:
        for p in (scored_path, roc_path, report_path):
            p.unlink(missing_ok=True)
        # keep the error class so the CLI exit-code mapping survives
        wrapper = type(exc) if isinstance(exc, ValidationError) else RuntimeFailure
        raise wrapper(
            f"experiment {config.name!r} failed in stage {stage}: {exc}"
        ) from exc


def compare_reports(a: AuditReport, b: AuditReport) -> dict:
    """Structured diff: AUC delta, config differences, score-distribution
    shifts per class, and a family-mismatch flag."""
    config_diffs = {}
    keys = set(a.config) | set(b.config)
    for k in sorted(keys):
        va, vb = a.config.get(k), b.config.get(k)
        if va != vb:
            config_diffs[k] = {"a": va, "b": vb}
    shifts = {}
    for cls in ("members", "non_members"):
        sa, sb = a.score_stats[cls], b.score_stats[cls]
        shifts[cls] = {
            "mean_shift": sb["mean"] - sa["mean"],
            "std_shift": sb["std"] - sa["std"],
        }
    return {
        "auc_delta": b.metrics.auc - a.metrics.auc,
        "family_mismatch": a.config.get("family") != b.config.get("family"),
        "config_diffs": config_diffs,
        "score_shifts": shifts,
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    """Parse an experiment config from its JSON form (the config echo in a
    report, minus the note, round-trips through this)."""
    d = dict(d)
    d.pop("note", None)
    data = d["data"]
    if isinstance(data, dict):
        data = SyntheticData(**data)
    train = d["train"]
    if isinstance(train, dict):
        train = dict(train)
        train["hidden"] = tuple(train.get("hidden", (128, 64)))
        train = targets.TrainConfig(**train)
    attack = d["attack"]
    if isinstance(attack, dict):
        attack = attacks.AttackConfig(**attack)
    dp_config = d.get("dp_config")
    if isinstance(dp_config, dict):
        dp_config = dp.DpConfig(**dp_config)
    return ExperimentConfig(
        name=d["name"],
        family=d["family"],
        data=data,
        member_count=d["member_count"],
        non_member_count=d["non_member_count"],
        train=train,
        attack=attack,
        master_seed=d["master_seed"],
        seq_len=d["seq_len"],
        dp_config=dp_config,
        schedule_t_max=d.get("schedule_t_max", 100),
    )


def load_config(path) -> ExperimentConfig:
    try:
        return config_from_dict(json.loads(pathlib.Path(path).read_text()))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad experiment config ({exc})") from exc


# -- bundled presets --------------------------------------------------------

_PRESET_SEED = 20260823


def _gan_preset(name, n_members, n_non, epochs, batch, lr, master_seed, dp_config=None):
    return ExperimentConfig(
        name=name,
        family="gan",
        data=SyntheticData(n=n_members + n_non, seq_len=10),
        member_count=n_members,
        non_member_count=n_non,
        train=targets.TrainConfig(
            epochs=epochs, batch_size=batch, lr=lr, seed=0, hidden=(64, 32), noise_dim=8
        ),
        attack=attacks.AttackConfig(attack_kind="discriminator", seed=0),
        master_seed=master_seed,
        seq_len=10,
        dp_config=dp_config,
    )


def _diffusion_preset(
    name, n_members, n_non, epochs, batch, lr, master_seed, draws=2, hidden=(128, 64)
):
    return ExperimentConfig(
        name=name,
        family="diffusion",
        data=SyntheticData(n=n_members + n_non, seq_len=10),
        member_count=n_members,
        non_member_count=n_non,
        train=targets.TrainConfig(
            epochs=epochs, batch_size=batch, lr=lr, seed=0, hidden=hidden
        ),
        attack=attacks.AttackConfig(
            attack_kind="loss_based",
            seed=0,
            num_probe_timesteps=50,
            noise_draws_per_timestep=draws,
        ),
        master_seed=master_seed,
        seq_len=10,
    )


def presets() -> dict[str, ExperimentConfig]:
    """Leaky/safe regimes for both target families, plus a DP-defended
    variant of the leaky GAN."""
    return {
        "leaky-gan": _gan_preset("leaky-gan", 64, 64, 2000, 32, 0.02, _PRESET_SEED),
        "safe-gan": _gan_preset("safe-gan", 4096, 1024, 50, 128, 0.02, _PRESET_SEED),
        "leaky-gan-dp": _gan_preset(
            "leaky-gan-dp", 64, 64, 2000, 32, 0.02, _PRESET_SEED,
            dp_config=dp.DpConfig(clip_norm=1.0, noise_multiplier=1.0),
        ),
        "leaky-diffusion": _diffusion_preset(
            "leaky-diffusion", 32, 32, 6000, 32, 0.01, _PRESET_SEED,
            draws=8, hidden=(256, 128),
        ),
        "safe-diffusion": _diffusion_preset(
            "safe-diffusion", 4096, 1024, 50, 128, 0.003, _PRESET_SEED, draws=2
        ),
    }


def get_preset(name: str) -> ExperimentConfig:
    try:
        return presets()[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(presets()))}"
        ) from None
