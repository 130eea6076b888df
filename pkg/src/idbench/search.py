"""Exhaustive rank-one search over an enrolled gallery.

For every probe the search reports the best same-subject (mated) and best
other-subject (non-mated) cosine similarity over the full gallery. A
probe whose non-mated score strictly exceeds its mated score is a
rank-one false positive identification.

Scores are float32 values obtained by rounding a float64-accumulated
inner product once; comparisons (max, tie, FPI) all happen on those
float32 values. Ties on score are broken by the lexicographically
smallest gallery image_id, which makes results invariant under gallery
permutation and worker layout. ``rank_one_oracle`` is an intentionally
naive reference implementation used to cross-check ``rank_one``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .embedstore import EmbeddingSet
from .errors import SearchError
from .protocol import Partition

RESULTS_CSV_HEADER = (
    "probe_id,subject_id,mated_score,mated_id,nonmated_score,nonmated_id,"
    "nonmated_subject,diff,is_fpi"
)


@dataclass(frozen=True)
class RankOneResult:
    """Best mated and non-mated match for one probe."""

    probe_id: str
    subject_id: str
    mated_score: float
    mated_gallery_id: str
    nonmated_score: float
    nonmated_gallery_id: str
    nonmated_subject_id: str
    diff: float
    is_fpi: bool


def _gather(embeddings: EmbeddingSet, pairs, what: str):
    ids = [image_id for _, image_id in pairs]
    missing = [i for i in ids if i not in embeddings]
    if missing:
        raise SearchError(f"missing embedding for {what} ids: {missing[:5]}")
    return ids, embeddings.rows(ids)


def _check_subjects(probe_pairs, gallery_pairs):
    gallery_subjects = {s for s, _ in gallery_pairs}
    for subject, _ in probe_pairs:
        if subject not in gallery_subjects:
            raise SearchError(f"probe subject {subject!r} absent from gallery")
        if not (gallery_subjects - {subject}):
            raise SearchError(
                f"no non-mated candidates: gallery holds only {subject!r}"
            )


def rank_one(
    probes: EmbeddingSet, gallery: EmbeddingSet, partition: Partition
) -> list[RankOneResult]:
    """Rank-one mated/non-mated scores for every probe in the partition.

    ``probes`` and ``gallery`` may be the same EmbeddingSet; rows are
    looked up by the partition's image ids. Results are ordered by
    probe_id.
    """
    probe_pairs = sorted(partition.probes, key=lambda p: p[1])
    gallery_pairs = list(partition.gallery)
    if not probe_pairs:
        return []
    if not gallery_pairs:
        raise SearchError("empty gallery")
    _check_subjects(probe_pairs, gallery_pairs)

    probe_ids, pmat = _gather(probes, probe_pairs, "probe")
    gallery_ids, gmat = _gather(gallery, gallery_pairs, "gallery")
    scores = (pmat.astype(np.float64) @ gmat.astype(np.float64).T).astype(
        np.float32
    )

    gal_ids_arr = np.array(gallery_ids, dtype=object)
    gal_subjects = [s for s, _ in gallery_pairs]
    gal_subj_arr = np.array(gal_subjects, dtype=object)

    results = []
    for i, (subject, _) in enumerate(probe_pairs):
        row = scores[i]
        mated_mask = gal_subj_arr == subject
        m_idx = _best_index(row, np.flatnonzero(mated_mask), gal_ids_arr)
        n_idx = _best_index(row, np.flatnonzero(~mated_mask), gal_ids_arr)
        mated = float(row[m_idx])
        nonmated = float(row[n_idx])
        results.append(
            RankOneResult(
                probe_id=probe_ids[i],
                subject_id=subject,
                mated_score=mated,
                mated_gallery_id=str(gal_ids_arr[m_idx]),
                nonmated_score=nonmated,
                nonmated_gallery_id=str(gal_ids_arr[n_idx]),
                nonmated_subject_id=str(gal_subj_arr[n_idx]),
                diff=mated - nonmated,
                is_fpi=nonmated > mated,
            )
        )
    return results


def _best_index(row, candidate_idx, ids_arr) -> int:
    best = row[candidate_idx]
    top = candidate_idx[np.flatnonzero(best == best.max())]
    if len(top) == 1:
        return int(top[0])
    return int(top[np.argmin(ids_arr[top])])


def rank_one_oracle(
    probes: EmbeddingSet, gallery: EmbeddingSet, partition: Partition
) -> list[RankOneResult]:
    """Triple-loop reference implementation of :func:`rank_one`.

    Scores each pair with an exactly-rounded sum (math.fsum) and scans the
    gallery in image_id order so the first maximum seen is the tie-break
    winner. Slow, but independent of the blocked matrix path it checks.
    """
    probe_pairs = sorted(partition.probes, key=lambda p: p[1])
    gallery_pairs = list(partition.gallery)
    if not probe_pairs:
        return []
    if not gallery_pairs:
        raise SearchError("empty gallery")
    _check_subjects(probe_pairs, gallery_pairs)

    probe_ids, pmat = _gather(probes, probe_pairs, "probe")
    order = sorted(range(len(gallery_pairs)), key=lambda k: gallery_pairs[k][1])
    gallery_sorted = [gallery_pairs[k] for k in order]
    _, gmat = _gather(gallery, gallery_sorted, "gallery")
    grows = [r.astype(np.float64).tolist() for r in gmat]

    results = []
    for i, (subject, _) in enumerate(probe_pairs):
        prow = pmat[i].astype(np.float64).tolist()
        best_m = best_n = None
        for j, (gal_subject, gal_id) in enumerate(gallery_sorted):
            score = float(
                np.float32(math.fsum(a * b for a, b in zip(prow, grows[j])))
            )
            if gal_subject == subject:
                if best_m is None or score > best_m[0]:
                    best_m = (score, gal_id, gal_subject)
            else:
                if best_n is None or score > best_n[0]:
                    best_n = (score, gal_id, gal_subject)
        results.append(
            RankOneResult(
                probe_id=probe_ids[i],
                subject_id=subject,
                mated_score=best_m[0],
                mated_gallery_id=best_m[1],
                nonmated_score=best_n[0],
                nonmated_gallery_id=best_n[1],
                nonmated_subject_id=best_n[2],
                diff=best_m[0] - best_n[0],
                is_fpi=best_n[0] > best_m[0],
            )
        )
    return results


def write_results_csv(results, path) -> None:
    """Serialize results with scores printed at 6 decimals."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_CSV_HEADER.split(","))
        for r in results:
            writer.writerow([
                r.probe_id,
                r.subject_id,
                f"{r.mated_score:.6f}",
                r.mated_gallery_id,
                f"{r.nonmated_score:.6f}",
                r.nonmated_gallery_id,
                r.nonmated_subject_id,
                f"{r.diff:.6f}",
                "true" if r.is_fpi else "false",
            ])


def read_results_csv(path) -> list[RankOneResult]:
    expected = RESULTS_CSV_HEADER.split(",")
    results = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise SearchError(f"{path}: bad results header")
        for row in reader:
            results.append(
                RankOneResult(
                    probe_id=row[0],
                    subject_id=row[1],
                    mated_score=float(row[2]),
                    mated_gallery_id=row[3],
                    nonmated_score=float(row[4]),
                    nonmated_gallery_id=row[5],
                    nonmated_subject_id=row[6],
                    diff=float(row[7]),
                    is_fpi=row[8] == "true",
                )
            )
    return results
