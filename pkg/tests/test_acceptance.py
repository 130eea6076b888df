"""Acceptance suite: one test per release criterion, each printing a
pass line with its measured evidence (run with ``pytest -s`` to see the
lines as they pass)."""

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from idbench.cli import main as cli_main
from idbench.degrade import (
    AlignedFace,
    BlurSpec,
    SunglassesSpec,
    _bilinear_resize,
    add_sunglasses,
    gaussian_blur,
    reduce_resolution,
    sunglasses_mask,
    LowResSpec,
)
from idbench.embedstore import EmbeddingSet, write_embeddings
from idbench.manifest import ConditionTag, ImageRecord, Manifest, save_manifest
from idbench.metrics import (
    dprime,
    fpir,
    fpir_percent,
    recovery_pct,
    wasserstein1,
)
from idbench.protocol import (
    apply_gallery_variants,
    bind_condition,
    build_partition,
)
from idbench.search import rank_one, rank_one_oracle
from idbench.simulate import CohortSpec, generate_cohort

REPO_ROOT = Path(__file__).resolve().parents[1]


def ok(criterion, evidence):
    print(f"[PASS] criterion {criterion}: {evidence}")


# reference mitigation shifts and the recovery percentages they imply
RECOVERY_CASES = [
    (0.191, 0.136, 28.80),
    (0.190, 0.122, 35.79),
    (0.197, 0.141, 28.43),
    (0.194, 0.121, 37.63),
]


def test_criterion_1_recovery_arithmetic():
    start = time.perf_counter()
    values = [recovery_pct(unmit, mit) for unmit, mit, _ in RECOVERY_CASES]
    elapsed = time.perf_counter() - start
    for got, (_, _, expected) in zip(values, RECOVERY_CASES):
        assert got == pytest.approx(expected, abs=0.05)
    assert elapsed < 1e-3
    ok(1, f"4 recovery values within 0.05pp, {elapsed * 1e6:.0f}us")


def test_criterion_2_fpir_granularity():
    for k in range(576):
        diffs = [-1.0] * k + [1.0] * (575 - k)
        assert fpir(diffs) == k / 575
    diffs_26 = [-1.0] * 26 + [1.0] * 549
    assert round(fpir_percent(diffs_26), 3) == 4.522
    assert fpir_percent([1.0] * 575) == 0.0
    ok(2, "all 576 FPIR values are exact multiples of 1/575; "
          "26/575 -> 4.522%, 0/575 -> 0%")


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    n_ids = int(rng.integers(2, 201))
    dim = int(rng.choice([4, 8, 16, 32]))
    rows, ids, vecs = [], [], []
    for i in range(n_ids):
        subject = f"s{i:03d}"
        for k in range(int(rng.integers(2, 13))):
            image_id = f"{subject}-{k:02d}"
            rows.append(ImageRecord(
                image_id=image_id,
                subject_id=subject,
                session_id=f"sess{k}",
                capture_order=k + 1,
                demographic="CF",
                condition=ConditionTag(),
            ))
            ids.append(image_id)
            vecs.append(rng.standard_normal(dim))
    manifest = Manifest(rows)
    partition = build_partition(manifest, "CF", seed=seed)
    embeddings = EmbeddingSet.from_rows(ids, np.array(vecs, dtype=np.float32))
    return embeddings, partition


def test_criterion_3_oracle_equivalence():
    start = time.perf_counter()
    for seed in range(50):
        embeddings, partition = _random_instance(seed)
        fast = rank_one(embeddings, embeddings, partition)
        slow = rank_one_oracle(embeddings, embeddings, partition)
        assert fast == slow, f"instance seed {seed} diverged"
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    ok(3, f"50 instances byte-equal incl. tie-breaks in {elapsed:.1f}s")


def test_criterion_4_metric_axioms():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        x = rng.standard_normal(int(rng.integers(2, 40)))
        y = rng.standard_normal(int(rng.integers(2, 40))) * 2 + 0.5
        z = rng.standard_normal(int(rng.integers(2, 40))) - 1
        assert wasserstein1(x, x) <= 1e-9
        assert abs(wasserstein1(x, y) - wasserstein1(y, x)) <= 1e-9
        assert (
            wasserstein1(x, z)
            <= wasserstein1(x, y) + wasserstein1(y, z) + 1e-9
        )
    for c in (0.25, -3.0, 1e-3):
        x = rng.standard_normal(64)
        assert abs(wasserstein1(x, x + c) - abs(c)) <= 1e-9
    x = rng.standard_normal(50)
    y = rng.standard_normal(50) + 1.5
    base = dprime(x, y)
    for a, b in ((2.0, 5.0), (-0.5, 0.0), (10.0, -7.0)):
        assert abs(dprime(a * x + b, a * y + b) - base) <= 1e-9
    assert abs(dprime([-1, 0, 1], [1, 2, 3]) - 2.0) <= 1e-12
    ok(4, "W1 axioms on 200 triples, translation, d-prime invariances, "
          "exact reference value")


def _cohort(seed, conditions, combined=()):
    spec = CohortSpec(
        identities=500,
        images_per_identity=(8, 14),
        dim=128,
        conditions=conditions,
        combined=combined,
        seed=seed,
        demographic_split={"CF": 1.0},
    )
    return generate_cohort(spec)


def _diffs(results):
    return [r.diff for r in results]


def test_criterion_5_simulator_headline_findings():
    start = time.perf_counter()
    monotone_ok = additivity_ok = all_vs_none_ok = 0
    all_le_one = 0
    for seed in range(10):
        manifest, emb = _cohort(
            seed, {"sunglasses": 0.3, "blur": 0.25}, ("sunglasses_blur",)
        )
        partition = build_partition(manifest, "CF", seed=seed)
        base_diffs = _diffs(rank_one(emb, emb, partition))

        def shift(cell_results):
            return wasserstein1(base_diffs, _diffs(cell_results))

        shift_sg = shift(
            rank_one(emb, emb, bind_condition(partition, manifest, "sunglasses"))
        )
        shift_blur = shift(
            rank_one(emb, emb, bind_condition(partition, manifest, "blur"))
        )
        shift_both = shift(
            rank_one(
                emb, emb, bind_condition(partition, manifest, "sunglasses_blur")
            )
        )

        # (a) same originals, increasing shift fraction
        grid = [shift_sg]
        for delta, pos in ((0.15, 0), (0.45, 2)):
            m2, e2 = _cohort(seed, {"sunglasses": delta})
            p2 = build_partition(m2, "CF", seed=seed)
            cell = rank_one(e2, e2, bind_condition(p2, m2, "sunglasses"))
            grid.insert(pos, wasserstein1(base_diffs, _diffs(cell)))
        if 0 < grid[0] < grid[1] < grid[2]:
            monotone_ok += 1

        # (b) combined effect between the max and 1.15x the sum
        if max(shift_sg, shift_blur) <= shift_both <= 1.15 * (
            shift_sg + shift_blur
        ):
            additivity_ok += 1

        # (c) gallery augmentation orderings
        bound = bind_condition(partition, manifest, "sunglasses")
        shift_one = shift(
            rank_one(
                emb, emb,
                apply_gallery_variants(bound, manifest, "one_per_identity", seed),
            )
        )
        shift_all = shift(
            rank_one(
                emb, emb, apply_gallery_variants(bound, manifest, "all", seed)
            )
        )
        if shift_all < shift_sg:
            all_vs_none_ok += 1
        if shift_all <= shift_one:
            all_le_one += 1

    elapsed = time.perf_counter() - start
    assert monotone_ok == 10, f"monotonicity held in {monotone_ok}/10 seeds"
    assert additivity_ok == 10, f"additivity held in {additivity_ok}/10 seeds"
    assert all_vs_none_ok == 10, (
        f"policy=all reduced shift in {all_vs_none_ok}/10 seeds"
    )
    assert all_le_one >= 9, f"all <= one held in {all_le_one}/10 seeds"
    assert elapsed < 120.0
    ok(5, f"10 seeds: monotone {monotone_ok}/10, additivity "
          f"{additivity_ok}/10, all<none {all_vs_none_ok}/10, "
          f"all<=one {all_le_one}/10, {elapsed:.0f}s")


def test_criterion_6_degradation_determinism(tmp_path):
    rng = np.random.default_rng(99)
    face = AlignedFace(
        pixels=rng.integers(0, 256, (112, 112, 3)).astype(np.uint8),
        landmarks={"left_eye": (38.0, 52.0), "right_eye": (74.0, 52.0),
                   "nose_tip": (56.0, 70.0)},
    )
    blur_spec, lowres_spec = BlurSpec(4.6), LowResSpec(37)
    sg_spec = SunglassesSpec(style_seed=7)
    for op, spec in (
        (gaussian_blur, blur_spec),
        (reduce_resolution, lowres_spec),
        (add_sunglasses, sg_spec),
    ):
        first = op(face, spec).pixels
        second = op(face, spec).pixels
        assert first.tobytes() == second.tobytes()

    gray = AlignedFace(pixels=np.full((64, 64, 3), 131, np.uint8))
    assert (
        gaussian_blur(gray, blur_spec).pixels.tobytes()
        == gray.pixels.tobytes()
    )

    checker = np.zeros((2, 2, 3), np.uint8)
    checker[0, 1] = checker[1, 0] = 255
    assert int(_bilinear_resize(checker, 1, 1)[0, 0, 0]) == 128

    mask = sunglasses_mask(face, sg_spec)
    overlaid = add_sunglasses(face, sg_spec)
    assert np.array_equal(overlaid.pixels[~mask], face.pixels[~mask])
    ok(6, "transforms byte-stable; constant blur identity; checkerboard "
          "-> 128; outside-mask pixels untouched")


def _tree_hashes(root):
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_criterion_7_full_pipeline_determinism(tmp_path):
    manifest, embeddings = generate_cohort(CohortSpec(
        identities=40,
        images_per_identity=(4, 7),
        dim=32,
        conditions={"sunglasses": 0.3},
        seed=31,
    ))
    cohort = tmp_path / "cohort"
    cohort.mkdir()
    save_manifest(manifest, cohort / "manifest.csv")
    write_embeddings(embeddings.ids, embeddings.matrix,
                     cohort / "embeddings.bin")
    config = {
        "manifest_path": str(cohort / "manifest.csv"),
        "embeddings_path": str(cohort / "embeddings.bin"),
        "demographics": ["CF", "CM"],
        "conditions": ["sunglasses"],
        "gallery_policies": ["none", "one_per_identity", "all"],
        "seed": 5,
    }
    trees = []
    for name in ("run_a", "run_b"):
        cfg = dict(config, output_dir=str(tmp_path / name))
        cfg_path = tmp_path / f"{name}.json"
        cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
        assert cli_main(["run", "--config", str(cfg_path)]) == 0
        trees.append(_tree_hashes(tmp_path / name))
    assert trees[0] == trees[1]
    assert len(trees[0]) > 10
    ok(7, f"two runs, {len(trees[0])} artifacts each, identical hashes")


def test_criterion_8_non_reproducibility_note_present():
    raw = (REPO_ROOT / "README.md").read_text(encoding="utf-8")
    flat = " ".join(raw.replace("*", "").split())
    assert "not desk-reproducible" in flat
    assert "ND-Sunglasses" in flat
    assert "2.6694" in flat and "4.522" in flat
    ok(8, "README states which published numbers need the private data")
