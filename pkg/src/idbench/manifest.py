"""Dataset manifest: image records, condition variants and CSV ingest.

A manifest row describes one captured image: who it shows, in which
acquisition session it was taken, its within-subject ordering key, the
subject's demographic label and the image's condition (original or a
degraded variant linked back to its original via ``variant_of``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import ManifestError

CONDITION_BASES = (
    "original",
    "sunglasses",
    "blur",
    "lowres",
    "sunglasses_blur",
    "sunglasses_lowres",
)

BLUR_FAMILY = ("blur", "sunglasses_blur")
LOWRES_FAMILY = ("lowres", "sunglasses_lowres")

CSV_HEADER = (
    "image_id,subject_id,session_id,capture_order,demographic,"
    "condition,params,variant_of,source_path"
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ConditionTag:
    """Condition of an image: a base condition plus numeric parameters.

    ``variant_of`` links a degraded record to the unmodified record it was
    derived from.
    """

    base: str = "original"
    params: dict = field(default_factory=dict)
    variant_of: str | None = None

    def check(self) -> None:
        if self.base not in CONDITION_BASES:
            raise ManifestError(f"unknown condition base {self.base!r}")
        if self.base in BLUR_FAMILY:
            sigma = self.params.get("sigma")
            if sigma is None or not sigma > 0:
                raise ManifestError(
                    f"condition {self.base!r} requires params sigma > 0"
                )
        if self.base in LOWRES_FAMILY:
            side = self.params.get("side")
            if side is None or not float(side).is_integer() or side < 1:
                raise ManifestError(
                    f"condition {self.base!r} requires integer params side >= 1"
                )
        if self.base == "original" and self.variant_of is not None:
            raise ManifestError("original records must not carry variant_of")


@dataclass(frozen=True)
class ImageRecord:
    """One captured image (or a degraded variant of one)."""

    image_id: str
    subject_id: str
    session_id: str
    capture_order: int
    demographic: str
    condition: ConditionTag = field(default_factory=ConditionTag)
    source_path: str | None = None

    def check(self) -> None:
        for name in ("image_id", "subject_id", "session_id", "demographic"):
            if not getattr(self, name):
                raise ManifestError(f"record {self.image_id!r}: empty {name}")
        self.condition.check()


class Manifest:
    """Validated, immutable collection of image records.

    Construction enforces every manifest invariant; a constructed Manifest
    is safe to share read-only across threads.
    """

    def __init__(self, records, schema_version: int = SCHEMA_VERSION):
        self.records: tuple[ImageRecord, ...] = tuple(records)
        self.schema_version = schema_version
        self.by_id: dict[str, ImageRecord] = {}
        self.variant_index: dict[tuple[str, str], ImageRecord] = {}
        self._validate()

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Manifest)
            and self.records == other.records
            and self.schema_version == other.schema_version
        )

    def variant_for(self, image_id: str, base: str) -> ImageRecord | None:
        """The ``base``-condition variant of an original image, if present."""
        return self.variant_index.get((image_id, base))

    def _validate(self) -> None:
        for rec in self.records:
            rec.check()
            if rec.image_id in self.by_id:
                raise ManifestError(f"duplicate image_id {rec.image_id!r}")
            self.by_id[rec.image_id] = rec

        capture_keys = set()
        subject_demo: dict[str, str] = {}
        for rec in self.records:
            key = (rec.subject_id, rec.session_id, rec.capture_order,
                   rec.condition.base)
            if key in capture_keys:
                raise ManifestError(
                    f"duplicate (subject, session, capture_order, condition) "
                    f"tuple {key!r}"
                )
            capture_keys.add(key)
            seen = subject_demo.setdefault(rec.subject_id, rec.demographic)
            if seen != rec.demographic:
                raise ManifestError(
                    f"subject {rec.subject_id!r} has inconsistent demographics "
                    f"({seen!r} vs {rec.demographic!r})"
                )

        for rec in self.records:
            target_id = rec.condition.variant_of
            if target_id is None:
                continue
            target = self.by_id.get(target_id)
            if target is None:
                raise ManifestError(
                    f"dangling variant: {rec.image_id!r} points at missing "
                    f"image {target_id!r}"
                )
            if target.condition.base != "original":
                raise ManifestError(
                    f"variant {rec.image_id!r} must point at an original "
                    f"record, not {target.condition.base!r}"
                )
            same_capture = (
                target.subject_id == rec.subject_id
                and target.session_id == rec.session_id
                and target.capture_order == rec.capture_order
            )
            if not same_capture:
                raise ManifestError(
                    f"variant {rec.image_id!r} does not share subject/session/"
                    f"capture_order with its original {target_id!r}"
                )
            self.variant_index[(target_id, rec.condition.base)] = rec


def _parse_params(text: str, line: int) -> dict:
    params = {}
    if not text:
        return params
    for part in text.split(";"):
        if "=" not in part:
            raise ManifestError(f"line {line}: malformed params entry {part!r}")
        key, _, value = part.partition("=")
        if not key:
            raise ManifestError(f"line {line}: empty params key")
        try:
            params[key] = float(value)
        except ValueError:
            raise ManifestError(
                f"line {line}: params value {value!r} is not a number"
            ) from None
    return params


def _format_params(params: dict) -> str:
    parts = []
    for key in sorted(params):
        value = float(params[key])
        text = str(int(value)) if value.is_integer() else repr(value)
        parts.append(f"{key}={text}")
    return ";".join(parts)


def load_manifest(path) -> Manifest:
    """Load and fully validate a manifest CSV (see module docs for schema)."""
    expected = CSV_HEADER.split(",")
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty file") from None
        if header != expected:
            raise ManifestError(
                f"{path}: bad header {','.join(header)!r}, "
                f"expected {CSV_HEADER!r}"
            )
        for line, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ManifestError(
                    f"line {line}: expected {len(expected)} fields, "
                    f"got {len(row)}"
                )
            (image_id, subject_id, session_id, order_text, demographic,
             base, params_text, variant_of, source_path) = row
            try:
                capture_order = int(order_text)
            except ValueError:
                raise ManifestError(
                    f"line {line}: capture_order {order_text!r} is not an "
                    f"integer"
                ) from None
            try:
                condition = ConditionTag(
                    base=base,
                    params=_parse_params(params_text, line),
                    variant_of=variant_of or None,
                )
                record = ImageRecord(
                    image_id=image_id,
                    subject_id=subject_id,
                    session_id=session_id,
                    capture_order=capture_order,
                    demographic=demographic,
                    condition=condition,
                    source_path=source_path or None,
                )
                record.check()
            except ManifestError as exc:
                raise ManifestError(f"line {line}: {exc}") from None
            records.append(record)
    return Manifest(records)


def save_manifest(manifest: Manifest, path) -> None:
    """Write the canonical CSV serialization (load/save round-trips)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for rec in manifest.records:
            writer.writerow([
                rec.image_id,
                rec.subject_id,
                rec.session_id,
                str(rec.capture_order),
                rec.demographic,
                rec.condition.base,
                _format_params(rec.condition.params),
                rec.condition.variant_of or "",
                rec.source_path or "",
            ])


@dataclass(frozen=True)
class ManifestStats:
    subjects: int
    images: int
    variant_images: int
    images_per_subject: float
    demographic_subjects: dict


def manifest_stats(manifest: Manifest) -> ManifestStats:
    """Summary counts. The per-subject mean covers originals only, so
    degraded variants never inflate it."""
    originals = [r for r in manifest.records if r.condition.base == "original"]
    subjects = sorted({r.subject_id for r in manifest.records})
    demo_subjects: dict[str, set] = {}
    for rec in manifest.records:
        demo_subjects.setdefault(rec.demographic, set()).add(rec.subject_id)
    per_subject = len(originals) / len(subjects) if subjects else 0.0
    return ManifestStats(
        subjects=len(subjects),
        images=len(originals),
        variant_images=len(manifest.records) - len(originals),
        images_per_subject=round(per_subject, 2),
        demographic_subjects={
            demo: len(subs) for demo, subs in sorted(demo_subjects.items())
        },
    )
