"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from idbench.embedstore import EmbeddingSet
from idbench.manifest import ConditionTag, ImageRecord
from idbench.simulate import CohortSpec, generate_cohort


def record(
    image_id,
    subject="s1",
    session="a",
    order=1,
    demographic="CF",
    base="original",
    params=None,
    variant_of=None,
):
    return ImageRecord(
        image_id=image_id,
        subject_id=subject,
        session_id=session,
        capture_order=order,
        demographic=demographic,
        condition=ConditionTag(
            base=base, params=params or {}, variant_of=variant_of
        ),
    )


def subject_block(subject, sessions, demographic="CF", with_sunglasses=False):
    """Original records (one per session, ordered) plus optional variants."""
    records = []
    for order, session in enumerate(sessions, start=1):
        image_id = f"{subject}-{order}"
        records.append(
            record(image_id, subject, session, order, demographic)
        )
        if with_sunglasses:
            records.append(
                record(
                    f"{image_id}-sg",
                    subject,
                    session,
                    order,
                    demographic,
                    base="sunglasses",
                    variant_of=image_id,
                )
            )
    return records


def unit_rows(rows):
    arr = np.asarray(rows, dtype=np.float64)
    return (arr / np.linalg.norm(arr, axis=1, keepdims=True)).astype(np.float32)


def embedding_set(mapping):
    """EmbeddingSet from {image_id: vector} with normalization."""
    ids = list(mapping)
    return EmbeddingSet.from_rows(ids, np.array([mapping[i] for i in ids]))


@pytest.fixture(scope="session")
def small_cohort():
    """A compact simulated cohort shared by protocol/search/experiment tests."""
    spec = CohortSpec(
        identities=30,
        images_per_identity=(3, 6),
        dim=32,
        conditions={"sunglasses": 0.3, "blur": 0.25},
        combined=("sunglasses_blur",),
        seed=7,
    )
    return generate_cohort(spec)
