"""Trajectory data model: ingestion, normalization, synthetic mobility,
and member/non-member splitting."""

from __future__ import annotations

import csv
import dataclasses

import numpy as np

from trajaudit.errors import (
    EmptyInputError,
    ParseError,
    SizeError,
    ValidationError,
)

CSV_HEADER = ["traj_id", "seq", "lon", "lat", "t"]


@dataclasses.dataclass(frozen=True)
class Point:
    """One spatiotemporal sample: normalized coordinates plus a timestamp."""

    x: float  # in [-1, 1] after normalization
    y: float  # in [-1, 1] after normalization
    t: float  # seconds since dataset epoch, >= 0


@dataclasses.dataclass(frozen=True)
class Bounds:
    """Raw-coordinate bounding box used for the affine [-1, 1] mapping."""

    min_lon: float
    max_lon: float
    min_lat: float
    max_lat: float

    def __post_init__(self):
        if not (self.min_lon < self.max_lon and self.min_lat < self.max_lat):
            raise ValidationError(f"degenerate bounds {self}")

    def normalize(self, lon: np.ndarray, lat: np.ndarray):
        x = 2.0 * (lon - self.min_lon) / (self.max_lon - self.min_lon) - 1.0
        y = 2.0 * (lat - self.min_lat) / (self.max_lat - self.min_lat) - 1.0
        return x, y

    def denormalize(self, x: np.ndarray, y: np.ndarray):
        lon = (x + 1.0) / 2.0 * (self.max_lon - self.min_lon) + self.min_lon
        lat = (y + 1.0) / 2.0 * (self.max_lat - self.min_lat) + self.min_lat
        return lon, lat


#: Bounds under which normalized coordinates pass through unchanged.
UNIT_BOUNDS = Bounds(-1.0, 1.0, -1.0, 1.0)


@dataclasses.dataclass
class Trajectory:
    """Fixed-length sequence of points; the unit of membership.

    Coordinates are stored as an (L, 2) array and timestamps as (L,);
    ``points`` exposes the Point view.
    """

    id: str
    xy: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.xy.ndim != 2 or self.xy.shape[1] != 2 or self.xy.shape[0] < 2:
            raise ValidationError(f"trajectory {self.id}: xy shape {self.xy.shape}")
        if self.t.shape != (self.xy.shape[0],):
            raise ValidationError(f"trajectory {self.id}: t shape {self.t.shape}")
        if np.any(np.diff(self.t) <= 0):
            raise ValidationError(f"trajectory {self.id}: timestamps not strictly increasing")
        if self.t[0] < 0:
            raise ValidationError(f"trajectory {self.id}: negative timestamp")

    def __len__(self) -> int:
        return self.xy.shape[0]

    @property
    def points(self) -> list[Point]:
        return [Point(float(x), float(y), float(tt)) for (x, y), tt in zip(self.xy, self.t)]

    def flat_xy(self) -> np.ndarray:
        """Flattened (2L,) coordinate vector, the model input layout."""
        return self.xy.reshape(-1)


@dataclasses.dataclass
class MembershipDataset:
    """Labeled member/non-member pools for one audit."""

    members: list[Trajectory]
    non_members: list[Trajectory]
    bounds: Bounds = UNIT_BOUNDS

    def __post_init__(self):
        if not self.members or not self.non_members:
            raise ValidationError("both member and non-member pools must be non-empty")
        member_ids = {tr.id for tr in self.members}
        overlap = member_ids & {tr.id for tr in self.non_members}
        if overlap:
            raise ValidationError(f"pools overlap by id: {sorted(overlap)[:5]}")


def load_trajectories(path, seq_len: int, bounds: Bounds | None = None) -> list[Trajectory]:
    """Read the trajectory CSV (header traj_id,seq,lon,lat,t).

    Trajectories longer than seq_len keep their last seq_len points;
    shorter ones are dropped. Coordinates are normalized into [-1, 1]
    using `bounds`, or a box inferred from the file's extent.
    """
    if seq_len < 2:
        raise ValidationError(f"seq_len must be >= 2, got {seq_len}")
    groups: dict[str, list[tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"{path}: empty file")
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"{path}:1: bad header {header!r}, expected {CSV_HEADER}")
        n_rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                traj_id = row[0]
                seq = int(row[1])
                lon, lat, t = float(row[2]), float(row[3]), float(row[4])
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed row {row!r}") from exc
            rows = groups.setdefault(traj_id, [])
            if seq != len(rows):
                raise ParseError(
                    f"{path}:{lineno}: trajectory {traj_id} expects seq {len(rows)}, got {seq}"
                )
            rows.append((lon, lat, t))
            n_rows += 1
        if n_rows == 0:
            raise EmptyInputError(f"{path}: no data rows")

    if bounds is None:
        all_lon = [p[0] for rows in groups.values() for p in rows]
        all_lat = [p[1] for rows in groups.values() for p in rows]
        bounds = Bounds(min(all_lon), max(all_lon), min(all_lat), max(all_lat))

    out = []
    for traj_id, rows in groups.items():
        if len(rows) < seq_len:
            continue
        rows = rows[len(rows) - seq_len :]
        lon = np.array([r[0] for r in rows])
        lat = np.array([r[1] for r in rows])
        t = np.array([r[2] for r in rows])
        if np.any(np.diff(t) <= 0):
            raise ValidationError(f"trajectory {traj_id}: timestamps not strictly increasing")
        x, y = bounds.normalize(lon, lat)
        out.append(Trajectory(traj_id, np.column_stack([x, y]), t))
    return out


def save_trajectories(trajectories: list[Trajectory], path) -> None:
    """Write the trajectory CSV schema (normalized coordinates as-is)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for tr in trajectories:
            for i, ((x, y), t) in enumerate(zip(tr.xy, tr.t)):
                writer.writerow([tr.id, i, repr(float(x)), repr(float(y)), repr(float(t))])


def synth_mobility(
    n: int,
    seq_len: int,
    seed: int,
    n_anchors: int = 3,
    step_scale: float = 0.05,
    attraction: float = 0.15,
) -> list[Trajectory]:
    """Seeded anchor-attracted random walks standing in for real mobility data.

    Each trajectory picks one of `n_anchors` fixed points of interest and
    walks toward it with Gaussian step noise, clipped to the unit square.
    Timestamps are unit-spaced. Deterministic given the seed.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if seq_len < 2:
        raise ValidationError(f"seq_len must be >= 2, got {seq_len}")
    if n_anchors < 1:
        raise ValidationError(f"n_anchors must be >= 1, got {n_anchors}")
    if step_scale <= 0:
        raise ValidationError(f"step_scale must be > 0, got {step_scale}")

    rng = np.random.default_rng(seed)
    anchors = rng.uniform(-0.8, 0.8, size=(n_anchors, 2))
    width = max(1, len(str(n - 1)))
    t = np.arange(seq_len, dtype=np.float64)

    out = []
    for i in range(n):
        anchor = anchors[rng.integers(n_anchors)]
        pos = rng.uniform(-1.0, 1.0, size=2)
        xy = np.empty((seq_len, 2))
        xy[0] = pos
        for j in range(1, seq_len):
            pos = pos + attraction * (anchor - pos) + step_scale * rng.standard_normal(2)
            pos = np.clip(pos, -1.0, 1.0)
            xy[j] = pos
        out.append(Trajectory(f"synth-{i:0{width}d}", xy, t.copy()))
    return out


def split_membership(
    trajectories: list[Trajectory],
    member_count: int,
    non_member_count: int,
    seed: int,
    bounds: Bounds = UNIT_BOUNDS,
) -> MembershipDataset:
    """Sample disjoint member/non-member pools without replacement."""
    needed = member_count + non_member_count
    if needed > len(trajectories):
        raise SizeError(
            f"need {needed} trajectories ({member_count} members + "
            f"{non_member_count} non-members), have {len(trajectories)}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(trajectories))
    members = [trajectories[i] for i in order[:member_count]]
    non_members = [trajectories[i] for i in order[member_count:needed]]
    return MembershipDataset(members, non_members, bounds)
