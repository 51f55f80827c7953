"""
Monte-Carlo detection records drawn from Gaussian mixture states.

Each draw picks a mixture component by weight and samples the component's
2-D marginal exactly (Cholesky factor times standard normals). A coordinate
outside its detector range is a MISS; that is the only miss mechanism.

Draws are split into shards of settings.sample_shard_size, shard i using the
i-th child of SeedSequence(seed), so the events depend only on the seed and
the shard size, not on how shards are scheduled.
"""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import beta

from app.config import settings
from app.exceptions import DegenerateInputError, DomainError, GridError
from app.schemas.binning_schema import BinnedJoint, DetectorGrid
from app.schemas.common import FloatArray
from app.schemas.state_schema import Basis, GaussianMixtureState, MarginalComponent
from app.services.gaussian_states import marginal

logger = logging.getLogger(__name__)

MISS_TOKEN = "MISS"


class EventRecord(BaseModel):
    """One detection record; None marks a party that missed its detector."""

    model_config = ConfigDict(frozen=True)

    basis: Basis
    value_a: Optional[float] = None
    value_b: Optional[float] = None

    @property
    def both_detected(self) -> bool:
        return self.value_a is not None and self.value_b is not None


class EventBatch(BaseModel):
    """
    Columnar event storage: one float per party and draw, NaN for MISS.
    Indexing and iteration yield EventRecord objects.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    basis: Basis
    values_a: FloatArray
    values_b: FloatArray

    @model_validator(mode="after")
    def _check_columns(self) -> "EventBatch":
        if self.values_a.shape != self.values_b.shape or self.values_a.ndim != 1:
            raise ValueError("event columns must be vectors of equal length")
        return self

    def __len__(self) -> int:
        return int(self.values_a.size)

    def __getitem__(self, i: int) -> EventRecord:
        a, b = self.values_a[i], self.values_b[i]
        return EventRecord(
            basis=self.basis,
            value_a=None if np.isnan(a) else float(a),
            value_b=None if np.isnan(b) else float(b),
        )

    def __iter__(self) -> Iterator[EventRecord]:  # type: ignore[override]
        for i in range(len(self)):
            yield self[i]

    @property
    def detected(self) -> np.ndarray:
        """Mask of draws where both parties were detected."""
        return ~(np.isnan(self.values_a) | np.isnan(self.values_b))

    @property
    def n_missed(self) -> int:
        return len(self) - int(self.detected.sum())

    @classmethod
    def from_records(cls, records: Sequence[EventRecord]) -> "EventBatch":
        if not records:
            raise DegenerateInputError("no events to collect")
        bases = {r.basis for r in records}
        if len(bases) != 1:
            raise DomainError(f"events mix bases {sorted(b.value for b in bases)}")
        values_a = np.array([np.nan if r.value_a is None else r.value_a for r in records], dtype=float)
        values_b = np.array([np.nan if r.value_b is None else r.value_b for r in records], dtype=float)
        return cls(basis=bases.pop(), values_a=values_a, values_b=values_b)


def _draw_shard(
    components: List[MarginalComponent],
    size: int,
    seed_seq: np.random.SeedSequence,
) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    weights = np.array([c.weight for c in components])
    means = np.stack([c.mean for c in components])
    factors = np.stack([np.linalg.cholesky(c.cov) for c in components])

    which = rng.choice(len(components), size=size, p=weights / weights.sum())
    z = rng.standard_normal((size, 2))
    return means[which] + np.einsum("nij,nj->ni", factors[which], z)


def _mark_misses(values: np.ndarray, grid: DetectorGrid) -> np.ndarray:
    out = values.copy()
    out[(values < grid.lo) | (values > grid.hi)] = np.nan
    return out


def sample_events(
    state: GaussianMixtureState,
    basis: Basis,
    n: int,
    grid_a: DetectorGrid,
    grid_b: DetectorGrid,
    seed: Union[int, np.random.SeedSequence],
    shard_size: Optional[int] = None,
) -> EventBatch:
    """Draw n detection records in the given basis; deterministic in (seed, shard_size)."""
    if n < 1:
        raise DomainError(f"number of events must be at least 1, got {n}")
    basis = Basis(basis)
    shard_size = shard_size or settings.sample_shard_size
    components = marginal(state, basis)

    n_shards = math.ceil(n / shard_size)
    sizes = [min(shard_size, n - i * shard_size) for i in range(n_shards)]
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_shards)

    if settings.max_workers > 1 and n_shards > 1:
        with ThreadPoolExecutor(max_workers=settings.max_workers) as executor:
            shards = list(executor.map(lambda args: _draw_shard(components, *args), zip(sizes, children)))
    else:
        shards = [_draw_shard(components, size, child) for size, child in zip(sizes, children)]

    draws = np.concatenate(shards, axis=0)
    batch = EventBatch(
        basis=basis,
        values_a=_mark_misses(draws[:, 0], grid_a),
        values_b=_mark_misses(draws[:, 1], grid_b),
    )
    logger.info(
        f"Sampled {n} {basis.value}-basis events in {n_shards} shard(s) (entropy={root.entropy}): "
        f"{batch.n_missed} with at least one miss"
    )
    return batch


def empirical_joint(
    events: Union[EventBatch, Sequence[EventRecord]],
    grid_a: DetectorGrid,
    grid_b: DetectorGrid,
) -> BinnedJoint:
    """
    Per-bin-pair fraction of events where both parties were detected;
    missed_mass is the fraction with at least one MISS.
    """
    batch = events if isinstance(events, EventBatch) else EventBatch.from_records(list(events))
    n = len(batch)
    if n == 0:
        raise DegenerateInputError("no events to bin")

    mask = batch.detected
    a, b = batch.values_a[mask], batch.values_b[mask]
    if np.any((a < grid_a.lo) | (a > grid_a.hi)) or np.any((b < grid_b.lo) | (b > grid_b.hi)):
        raise GridError("detected event values lie outside the grids they are binned on")

    counts, _, _ = np.histogram2d(a, b, bins=[grid_a.edges, grid_b.edges])
    probs = counts / n
    detected = float(probs.sum())
    return BinnedJoint(probs=probs, detected_mass=detected, missed_mass=1.0 - detected)


def miss_upper_bound(n_missed: int, n: int, confidence: float) -> float:
    """One-sided Clopper-Pearson upper confidence bound on the miss probability."""
    if n < 1:
        raise DegenerateInputError("a miss bound needs at least one event")
    if not 0 <= n_missed <= n:
        raise DomainError(f"n_missed must lie in [0, {n}], got {n_missed}")
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    if n_missed == n:
        return 1.0
    return float(beta.ppf(confidence, n_missed + 1, n - n_missed))


def bound_missed_mass(joint: BinnedJoint, n: int, n_missed: int, confidence: Optional[float]) -> BinnedJoint:
    """
    Replace the observed miss fraction of an empirical joint by its upper
    confidence bound, scaling the detected counts down to match. With
    confidence None the joint is returned unchanged.
    """
    if confidence is None:
        return joint
    bound = max(miss_upper_bound(n_missed, n, confidence), joint.missed_mass)
    detected = 1.0 - bound
    probs = joint.probs * (detected / joint.detected_mass) if joint.detected_mass > 0 else np.zeros_like(joint.probs)
    logger.debug(
        f"Missed mass {joint.missed_mass:.6g} raised to {bound:.6g} at confidence {confidence} ({n_missed}/{n} missed)"
    )
    return BinnedJoint(probs=probs, detected_mass=float(probs.sum()), missed_mass=1.0 - float(probs.sum()))


def write_events_csv(batch: EventBatch, path: Union[str, Path]) -> Path:
    """Dump events as basis,value_a,value_b with the literal MISS token."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def fmt(v: float) -> str:
        return MISS_TOKEN if np.isnan(v) else repr(float(v))

    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["basis", "value_a", "value_b"])
        for a, b in zip(batch.values_a, batch.values_b):
            writer.writerow([batch.basis.value, fmt(a), fmt(b)])
    logger.info(f"Wrote {len(batch)} events to {path}")
    return path
