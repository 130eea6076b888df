"""Synthetic embedding cohorts for end-to-end pipeline verification.

Identities are unit vectors with a low-rank factor component (so
across-identity similarities have the heavy-tailed "lookalike" structure
real matchers exhibit) plus an identity-specific direction. Images jitter
around their identity mean. A degradation condition applies three effects
to a row, controlled by its shift fraction delta:

* it rotates the identity content by a fixed orthogonal map (the domain
  gap between degraded and clean imagery),
* it replaces a delta fraction of the row's energy with a per-condition
  occlusion appearance (a shared direction plus per-image style jitter),
* it renormalizes.

Because the rotation is exactly orthogonal it cancels when probe and
gallery carry the same condition, which is what makes gallery
augmentation recover accuracy, while the replaced energy fraction stays
lost. delta=0 applies no transformation at all.

Generation is deterministic: per-identity streams are derived from
(seed, identity index) so parallel generation cannot reorder draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embedstore import EmbeddingSet
from .errors import SimulateError
from .manifest import CONDITION_BASES, ConditionTag, ImageRecord, Manifest

# nominal degradation parameters stamped into variant records so the
# manifest schema's per-condition params invariants hold
NOMINAL_PARAMS = {
    "blur": {"sigma": 4.6},
    "lowres": {"side": 37.0},
    "sunglasses_blur": {"sigma": 4.6},
    "sunglasses_lowres": {"sigma": 4.6, "side": 37.0},
}


@dataclass
class CohortSpec:
    """Knobs for one synthetic cohort.

    ``conditions`` maps an atomic condition name to its shift fraction
    delta in [0, 1]; ``combined`` lists compound conditions (for example
    "sunglasses_blur") whose parts must appear in ``conditions`` and are
    applied sequentially, first named part first.
    """

    identities: int
    images_per_identity: int | tuple = (8, 14)
    dim: int = 128
    intra_class_concentration: float = 14.0
    degradation_shift: float = 0.3
    conditions: dict | None = None
    combined: tuple = ()
    appearance_jitter: float = 0.35
    domain_similarity: float = 0.70
    factor_rank: int = 6
    factor_share: float = 0.30
    seed: int = 0
    demographic_split: dict = field(
        default_factory=lambda: {"CF": 0.5, "CM": 0.5}
    )

    def __post_init__(self):
        if self.identities < 2:
            raise SimulateError("need at least 2 identities")
        if self.dim < 8 or self.dim % 2:
            raise SimulateError("dim must be even and >= 8")
        if not self.intra_class_concentration > 0:
            raise SimulateError("intra_class_concentration must be > 0")
        if isinstance(self.images_per_identity, int):
            self.images_per_identity = (
                self.images_per_identity,
                self.images_per_identity,
            )
        lo, hi = self.images_per_identity
        if lo < 1 or hi < lo:
            raise SimulateError("bad images_per_identity range")
        if self.conditions is None:
            self.conditions = {"sunglasses": float(self.degradation_shift)}
        for name, delta in self.conditions.items():
            if name not in CONDITION_BASES or name == "original":
                raise SimulateError(f"unknown condition {name!r}")
            if not 0.0 <= delta <= 1.0:
                raise SimulateError(f"delta for {name!r} outside [0, 1]")
        self.combined = tuple(self.combined)
        for name in self.combined:
            if name not in CONDITION_BASES:
                raise SimulateError(f"unknown combined condition {name!r}")
            for part in name.split("_"):
                if part not in self.conditions:
                    raise SimulateError(
                        f"combined condition {name!r} needs part {part!r} "
                        f"in conditions"
                    )
        if not 0 <= self.factor_share < 1:
            raise SimulateError("factor_share must be in [0, 1)")
        if not 0 < self.domain_similarity <= 1:
            raise SimulateError("domain_similarity must be in (0, 1]")
        if self.factor_rank < 1 or self.factor_rank > self.dim:
            raise SimulateError("factor_rank out of range")
        total = sum(self.demographic_split.values())
        if not self.demographic_split or total <= 0:
            raise SimulateError("demographic_split must be non-empty")

    @classmethod
    def from_json_dict(cls, raw: dict) -> "CohortSpec":
        kwargs = dict(raw)
        if "images_per_identity" in kwargs and isinstance(
            kwargs["images_per_identity"], list
        ):
            kwargs["images_per_identity"] = tuple(kwargs["images_per_identity"])
        if "combined" in kwargs:
            kwargs["combined"] = tuple(kwargs["combined"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise SimulateError(f"bad cohort spec: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "CohortSpec":
        return cls.from_json_dict(json.loads(text))


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=-1, keepdims=True)


def _skew_orthogonal(dim: int, rng) -> np.ndarray:
    """Orthogonal J with J^2 = -I: 90-degree rotations in random planes."""
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    j = np.zeros((dim, dim))
    for k in range(0, dim, 2):
        a, b = basis[:, k], basis[:, k + 1]
        j += np.outer(b, a) - np.outer(a, b)
    return j


@dataclass
class _ConditionModel:
    direction: np.ndarray  # shared occlusion appearance
    rotation_im: np.ndarray  # J of the domain rotation rho*I + sqrt(1-rho^2)*J
    rho: float
    delta: float

    def apply(self, rows: np.ndarray, styles: np.ndarray, eps: float):
        """Degrade rows; ``styles`` are per-row unit jitter directions."""
        if self.delta == 0.0:
            return rows.copy()
        rotated = self.rho * rows + np.sqrt(1.0 - self.rho ** 2) * (
            rows @ self.rotation_im.T
        )
        appearance = _unit(self.direction[None, :] + eps * styles)
        mixed = (
            np.sqrt(1.0 - self.delta) * rotated
            + np.sqrt(self.delta) * appearance
        )
        return _unit(mixed)


def _demographic_blocks(spec: CohortSpec):
    names = sorted(spec.demographic_split)
    weights = np.array([spec.demographic_split[n] for n in names], dtype=float)
    weights = weights / weights.sum()
    counts = np.floor(weights * spec.identities).astype(int)
    leftover = spec.identities - counts.sum()
    order = np.argsort(-(weights * spec.identities - counts), kind="stable")
    for i in range(leftover):
        counts[order[i % len(names)]] += 1
    labels = []
    for name, count in zip(names, counts):
        labels.extend([name] * count)
    return labels


def generate_cohort(spec: CohortSpec):
    """Build a (Manifest, EmbeddingSet) pair for the cohort.

    Every image gets one original record plus one variant record and
    embedding row per configured condition, linked via variant_of, with
    one session per capture so the protocol's same-session exclusion
    never empties a gallery.
    """
    rng_shared = np.random.default_rng([spec.seed, 0])
    factors, _ = np.linalg.qr(
        rng_shared.standard_normal((spec.dim, spec.factor_rank))
    )
    condition_names = sorted(spec.conditions)
    models = {}
    for pos, name in enumerate(condition_names):
        rng_c = np.random.default_rng([spec.seed, 1, pos])
        models[name] = _ConditionModel(
            direction=_unit(rng_c.standard_normal(spec.dim)),
            rotation_im=_skew_orthogonal(spec.dim, rng_c),
            rho=spec.domain_similarity,
            delta=float(spec.conditions[name]),
        )
    all_conditions = condition_names + [
        c for c in sorted(spec.combined) if c not in condition_names
    ]

    demographics = _demographic_blocks(spec)
    lo, hi = spec.images_per_identity
    kappa = spec.intra_class_concentration
    width = len(str(spec.identities - 1))

    records = []
    ids = []
    rows = []
    for idx in range(spec.identities):
        rng_i = np.random.default_rng([spec.seed, 2, idx])
        z = _unit(rng_i.standard_normal(spec.factor_rank))
        core = _unit(rng_i.standard_normal(spec.dim))
        mean = _unit(
            np.sqrt(spec.factor_share) * (factors @ z)
            + np.sqrt(1.0 - spec.factor_share) * core
        )
        count = int(rng_i.integers(lo, hi + 1)) if hi > lo else lo
        jitter = rng_i.standard_normal((count, spec.dim)) / kappa
        images = _unit(mean[None, :] + jitter)

        subject = f"s{idx:0{width}d}"
        demographic = demographics[idx]
        image_ids = [f"{subject}-{k:02d}" for k in range(count)]
        for k in range(count):
            records.append(
                ImageRecord(
                    image_id=image_ids[k],
                    subject_id=subject,
                    session_id=f"s{k:02d}",
                    capture_order=k + 1,
                    demographic=demographic,
                    condition=ConditionTag(),
                )
            )
            ids.append(image_ids[k])
            rows.append(images[k])

        for name in all_conditions:
            variant_rows = images
            for part in name.split("_"):
                styles = _unit(rng_i.standard_normal((count, spec.dim)))
                variant_rows = models[part].apply(
                    variant_rows, styles, spec.appearance_jitter
                )
            params = dict(NOMINAL_PARAMS.get(name, {}))
            for k in range(count):
                variant_id = f"{image_ids[k]}-{name}"
                records.append(
                    ImageRecord(
                        image_id=variant_id,
                        subject_id=subject,
                        session_id=f"s{k:02d}",
                        capture_order=k + 1,
                        demographic=demographic,
                        condition=ConditionTag(
                            base=name,
                            params=params,
                            variant_of=image_ids[k],
                        ),
                    )
                )
                ids.append(variant_id)
                rows.append(variant_rows[k])

    manifest = Manifest(records)
    embeddings = EmbeddingSet.from_rows(ids, np.array(rows, dtype=np.float32))
    return manifest, embeddings
