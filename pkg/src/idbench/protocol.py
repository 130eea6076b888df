"""Closed-set identification protocol: probe/gallery partitioning.

For each subject the most recent original image (largest capture_order,
ties broken by session_id then image_id) becomes the probe; every other
original image of that subject is enrolled in the gallery unless it was
captured in the probe's session (the same-session exclusion). Subjects
left with an empty gallery are dropped from the partition and reported.

All sampling (identity balancing, per-identity gallery picks) uses
numpy's PCG64 generator seeded directly with the caller's 64-bit seed,
so runs are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ProtocolError
from .manifest import CONDITION_BASES, ConditionTag, Manifest

GALLERY_POLICIES = ("none", "one_per_identity", "all")


@dataclass(frozen=True)
class Partition:
    """Probe and gallery assignments, with provenance for replay."""

    probes: tuple  # ((subject_id, image_id), ...)
    gallery: tuple
    seed: int
    balance_spec: tuple | None = None  # (demographic, target_identity_count)
    condition_binding: str = "original"
    gallery_variant_policy: str = "none"
    excluded_subjects: tuple = ()

    def probe_subjects(self):
        return [s for s, _ in self.probes]

    def to_json_dict(self) -> dict:
        return {
            "probes": [list(p) for p in self.probes],
            "gallery": [list(g) for g in self.gallery],
            "seed": self.seed,
            "balance_spec": list(self.balance_spec) if self.balance_spec else None,
            "condition_binding": self.condition_binding,
            "gallery_variant_policy": self.gallery_variant_policy,
            "excluded_subjects": list(self.excluded_subjects),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        raw = json.loads(text)
        return cls(
            probes=tuple((s, i) for s, i in raw["probes"]),
            gallery=tuple((s, i) for s, i in raw["gallery"]),
            seed=raw["seed"],
            balance_spec=tuple(raw["balance_spec"]) if raw["balance_spec"] else None,
            condition_binding=raw["condition_binding"],
            gallery_variant_policy=raw["gallery_variant_policy"],
            excluded_subjects=tuple(raw["excluded_subjects"]),
        )


def check_partition(partition: Partition, manifest: Manifest) -> None:
    """Assert the partition invariants against its manifest."""
    probe_ids = {i for _, i in partition.probes}
    gallery_ids = {i for _, i in partition.gallery}
    overlap = probe_ids & gallery_ids
    if overlap:
        raise ProtocolError(f"images in both probes and gallery: {sorted(overlap)[:5]}")
    subjects = partition.probe_subjects()
    if len(subjects) != len(set(subjects)):
        raise ProtocolError("more than one probe for a subject")
    for ids in (probe_ids, gallery_ids):
        missing = [i for i in ids if i not in manifest.by_id]
        if missing:
            raise ProtocolError(f"partition references unknown images: {missing[:5]}")
    probe_session = {}
    for subject, image_id in partition.probes:
        rec = manifest.by_id[image_id]
        if rec.subject_id != subject:
            raise ProtocolError(f"probe {image_id!r} does not belong to {subject!r}")
        probe_session[subject] = rec.session_id
    for subject, image_id in partition.gallery:
        rec = manifest.by_id[image_id]
        if rec.subject_id != subject:
            raise ProtocolError(f"gallery image {image_id!r} does not belong to {subject!r}")
        if probe_session.get(subject) == rec.session_id:
            raise ProtocolError(
                f"gallery image {image_id!r} shares the probe session of {subject!r}"
            )


def build_partition(
    manifest: Manifest,
    demographic: str,
    seed: int,
    balance_to: int | None = None,
) -> Partition:
    """Partition one demographic's originals into probes and gallery.

    With ``balance_to`` set, identities are subsampled without replacement
    using the seeded generator (same seed, same subsample).
    """
    per_subject: dict[str, list] = {}
    for rec in manifest.records:
        if rec.condition.base != "original" or rec.demographic != demographic:
            continue
        per_subject.setdefault(rec.subject_id, []).append(rec)
    if not per_subject:
        raise ProtocolError(f"demographic {demographic!r} absent from manifest")

    probes = {}
    galleries = {}
    excluded = []
    for subject in sorted(per_subject):
        records = per_subject[subject]
        probe = max(
            records,
            key=lambda r: (r.capture_order, r.session_id, r.image_id),
        )
        enrolled = sorted(
            r.image_id
            for r in records
            if r.image_id != probe.image_id and r.session_id != probe.session_id
        )
        if not enrolled:
            excluded.append(subject)
            continue
        probes[subject] = probe.image_id
        galleries[subject] = enrolled

    eligible = sorted(probes)
    balance_spec = None
    if balance_to is not None:
        if balance_to > len(eligible):
            raise ProtocolError(
                f"balance_to={balance_to} exceeds {len(eligible)} eligible "
                f"identities for {demographic!r}"
            )
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(eligible), size=balance_to, replace=False)
        eligible = sorted(eligible[int(i)] for i in picks)
        balance_spec = (demographic, balance_to)

    partition = Partition(
        probes=tuple((s, probes[s]) for s in eligible),
        gallery=tuple((s, g) for s in eligible for g in galleries[s]),
        seed=seed,
        balance_spec=balance_spec,
        excluded_subjects=tuple(excluded),
    )
    check_partition(partition, manifest)
    return partition


def _require_base(base) -> str:
    name = base.base if isinstance(base, ConditionTag) else str(base)
    if name not in CONDITION_BASES:
        raise ProtocolError(f"unknown condition base {name!r}")
    return name


def bind_condition(partition: Partition, manifest: Manifest, base) -> Partition:
    """Swap every probe image for its ``base``-condition variant."""
    name = _require_base(base)
    if name == "original":
        return replace(partition, condition_binding="original")
    if partition.condition_binding != "original":
        raise ProtocolError(
            f"probes already bound to {partition.condition_binding!r}"
        )
    bound = []
    missing = []
    for subject, image_id in partition.probes:
        variant = manifest.variant_for(image_id, name)
        if variant is None:
            missing.append(subject)
        else:
            bound.append((subject, variant.image_id))
    if missing:
        raise ProtocolError(
            f"probes missing {name!r} variant for subjects: {missing[:10]}"
            + (f" (+{len(missing) - 10} more)" if len(missing) > 10 else "")
        )
    out = replace(partition, probes=tuple(bound), condition_binding=name)
    check_partition(out, manifest)
    return out


def apply_gallery_variants(
    partition: Partition,
    manifest: Manifest,
    policy: str,
    seed: int,
    variant_base: str = "sunglasses",
) -> Partition:
    """Substitute gallery images by their ``variant_base`` variants.

    ``all`` swaps every gallery image; ``one_per_identity`` swaps exactly
    one per subject, chosen uniformly by the seeded generator (subjects
    visited in sorted order, candidates sorted by image_id).
    """
    if policy not in GALLERY_POLICIES:
        raise ProtocolError(f"unknown gallery policy {policy!r}")
    if policy == "none":
        return replace(partition, gallery_variant_policy="none")
    if partition.gallery_variant_policy != "none":
        raise ProtocolError(
            f"gallery variants already applied "
            f"({partition.gallery_variant_policy!r})"
        )

    def variant_id(image_id):
        variant = manifest.variant_for(image_id, variant_base)
        if variant is None:
            raise ProtocolError(
                f"gallery image {image_id!r} has no {variant_base!r} variant"
            )
        return variant.image_id

    gallery = list(partition.gallery)
    if policy == "all":
        gallery = [(s, variant_id(i)) for s, i in gallery]
    else:
        by_subject: dict[str, list] = {}
        for pos, (subject, image_id) in enumerate(gallery):
            by_subject.setdefault(subject, []).append((image_id, pos))
        rng = np.random.default_rng(seed)
        for subject in sorted(by_subject):
            candidates = sorted(by_subject[subject])
            image_id, pos = candidates[int(rng.integers(len(candidates)))]
            gallery[pos] = (subject, variant_id(image_id))
    out = replace(
        partition, gallery=tuple(gallery), gallery_variant_policy=policy
    )
    check_partition(out, manifest)
    return out
