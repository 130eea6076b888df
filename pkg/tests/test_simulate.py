import numpy as np
import pytest

from idbench.embedstore import read_embeddings, write_embeddings
from idbench.errors import SimulateError
from idbench.manifest import load_manifest, manifest_stats, save_manifest
from idbench.metrics import fpir, wasserstein1
from idbench.protocol import build_partition, bind_condition
from idbench.search import rank_one
from idbench.simulate import CohortSpec, generate_cohort


def small_spec(**overrides):
    base = dict(
        identities=20,
        images_per_identity=(3, 5),
        dim=16,
        conditions={"sunglasses": 0.3},
        seed=5,
    )
    base.update(overrides)
    return CohortSpec(**base)


def test_deterministic_regeneration():
    m1, e1 = generate_cohort(small_spec())
    m2, e2 = generate_cohort(small_spec())
    assert m1 == m2
    assert e1.ids == e2.ids
    assert e1.matrix.tobytes() == e2.matrix.tobytes()


def test_different_seed_differs():
    _, e1 = generate_cohort(small_spec())
    _, e2 = generate_cohort(small_spec(seed=6))
    assert e1.matrix.tobytes() != e2.matrix.tobytes()


def test_zero_delta_variants_equal_originals():
    m, e = generate_cohort(small_spec(conditions={"sunglasses": 0.0}))
    for rec in m.records:
        if rec.condition.base == "sunglasses":
            original = e.row(rec.condition.variant_of)
            variant = e.row(rec.image_id)
            assert variant.tobytes() == original.tobytes()


def test_infinite_concentration_zero_delta_limit():
    # jitter off, no degradation: every mated score is 1, FPIR is 0
    spec = small_spec(
        identities=12,
        intra_class_concentration=float("inf"),
        conditions={"sunglasses": 0.0},
    )
    m, e = generate_cohort(spec)
    for demographic in ("CF", "CM"):
        p = bind_condition(
            build_partition(m, demographic, seed=1), m, "sunglasses"
        )
        results = rank_one(e, e, p)
        assert all(r.mated_score == pytest.approx(1.0, abs=1e-6) for r in results)
        assert fpir(results) == 0.0


def test_manifest_is_valid_and_roundtrips(tmp_path):
    m, e = generate_cohort(small_spec(combined=()))
    stats = manifest_stats(m)
    assert stats.subjects == 20
    assert stats.images + stats.variant_images == len(m)
    save_manifest(m, tmp_path / "m.csv")
    assert load_manifest(tmp_path / "m.csv") == m
    write_embeddings(e.ids, e.matrix, tmp_path / "e.bin")
    back = read_embeddings(tmp_path / "e.bin")
    assert back.ids == e.ids
    assert back.matrix.tobytes() == e.matrix.tobytes()


def test_embeddings_cover_every_record():
    m, e = generate_cohort(small_spec(combined=("sunglasses_blur",),
                                      conditions={"sunglasses": 0.3,
                                                  "blur": 0.2}))
    assert set(e.ids) == {r.image_id for r in m.records}
    norms = np.linalg.norm(e.matrix.astype(np.float64), axis=1)
    assert np.all(np.abs(norms - 1) < 1e-4)


def test_demographic_split_counts():
    m, _ = generate_cohort(small_spec(identities=21,
                                      demographic_split={"CF": 2, "CM": 1}))
    stats = manifest_stats(m)
    assert stats.demographic_subjects == {"CF": 14, "CM": 7}


def test_combined_condition_needs_parts():
    with pytest.raises(SimulateError, match="needs part"):
        small_spec(combined=("sunglasses_blur",))


def test_validation_errors():
    with pytest.raises(SimulateError, match="identities"):
        small_spec(identities=1)
    with pytest.raises(SimulateError, match="dim"):
        small_spec(dim=15)
    with pytest.raises(SimulateError, match="delta"):
        small_spec(conditions={"blur": 1.5})
    with pytest.raises(SimulateError, match="unknown condition"):
        small_spec(conditions={"sharpen": 0.2})


def test_spec_json_roundtrip():
    raw = {
        "identities": 10,
        "images_per_identity": [3, 4],
        "dim": 16,
        "conditions": {"sunglasses": 0.25},
        "combined": [],
        "seed": 9,
    }
    spec = CohortSpec.from_json_dict(raw)
    assert spec.images_per_identity == (3, 4)
    assert spec.conditions == {"sunglasses": 0.25}
    with pytest.raises(SimulateError, match="bad cohort spec"):
        CohortSpec.from_json_dict({"identities": 5, "bogus": 1})


def shift_for(delta, seed=3, identities=120, dim=64):
    spec = CohortSpec(
        identities=identities,
        images_per_identity=(4, 8),
        dim=dim,
        conditions={"sunglasses": delta},
        seed=seed,
        demographic_split={"CF": 1.0},
    )
    m, e = generate_cohort(spec)
    p0 = build_partition(m, "CF", seed=seed)
    base = rank_one(e, e, p0)
    cell = rank_one(e, e, bind_condition(p0, m, "sunglasses"))
    return wasserstein1(
        [r.diff for r in base], [r.diff for r in cell]
    ), fpir(cell)


def test_shift_monotone_in_delta_small_scale():
    shifts = []
    fpirs = []
    for delta in (0.1, 0.3, 0.5):
        s, f = shift_for(delta)
        shifts.append(s)
        fpirs.append(f)
    assert shifts[0] > 0
    assert shifts[0] < shifts[1] < shifts[2]
    assert fpirs[0] <= fpirs[1] <= fpirs[2]
