from collections import Counter

import numpy as np
import pytest

from attnbalance.bench import (
    build_count_set,
    build_existence_set,
    build_identity_set,
    label_count,
    label_existence,
    rederive_gold,
    view_groups_from_annotations,
)
from attnbalance.bench.annotations import AnnotationRecord, SimilarityMatrix
from attnbalance.bench.builders import EXISTENCE_SUBTYPES
from attnbalance.bench.instances import read_dataset, write_dataset
from attnbalance.errors import DataError, DomainError

SEED = 404


def presence_of(annotations):
    return {rec.image_id: rec.present_labels() for rec in annotations}


class TestExistenceBuilder:
    @pytest.mark.parametrize("subtype", EXISTENCE_SUBTYPES)
    def test_balance_and_size(self, annotation_pool, subtype):
        instances = build_existence_set(annotation_pool, subtype, per_subtype=60, seed=SEED)
        assert len(instances) == 60
        golds = Counter(inst.gold for inst in instances)
        assert golds["yes"] == golds["no"] == 30
        assert all(len(inst.image_ids) == 3 for inst in instances)

    def test_gold_rederives_from_labels(self, annotation_pool):
        presence = presence_of(annotation_pool)
        for subtype in EXISTENCE_SUBTYPES:
            instances = build_existence_set(annotation_pool, subtype, per_subtype=40, seed=SEED)
            for inst in instances:
                assert rederive_gold(inst) == inst.gold
                # labels in meta agree with the annotation pool itself
                recomputed = [int(inst.meta["object"] in presence[i]) for i in inst.image_ids]
                assert recomputed == inst.meta["labels"]
                assert label_existence(recomputed) == inst.gold

    def test_question_template_and_article(self, annotation_pool):
        instances = build_existence_set(annotation_pool, "random", per_subtype=30, seed=SEED)
        for inst in instances:
            obj = inst.meta["object"]
            article = "an" if obj[0].lower() in "aeiou" else "a"
            assert inst.question == f"Is there {article} {obj} in all 3 images?"

    def test_forced_positives_when_object_everywhere(self):
        annotations = [
            AnnotationRecord(image_id=f"i{k}", objects={"dog": (0.9, 1), f"x{k}": (0.9, 1)})
            for k in range(6)
        ]
        instances = build_existence_set(annotations, "random", per_subtype=4, seed=SEED)
        positives = [inst for inst in instances if inst.gold == "yes"]
        assert all(inst.meta["object"] == "dog" for inst in positives)

    def test_adversarial_picks_argmax_cooccurrence(self):
        # dog co-occurs with cat in every image; bird never co-occurs.
        annotations = [
            AnnotationRecord(image_id="a", objects={"dog": (0.9, 1), "cat": (0.9, 1)}),
            AnnotationRecord(image_id="b", objects={"dog": (0.9, 1), "cat": (0.9, 1)}),
            AnnotationRecord(image_id="c", objects={"dog": (0.9, 1), "cat": (0.9, 1)}),
            AnnotationRecord(image_id="d", objects={"bird": (0.9, 1)}),
        ]
        instances = build_existence_set(annotations, "adversarial", per_subtype=2, seed=SEED)
        negatives = [inst for inst in instances if inst.gold == "no"]
        # brute-force: candidates absent somewhere are ranked by summed
        # co-occurrence with the sampled images' present objects
        for inst in negatives:
            assert inst.meta["object"] == "bird"  # only fully-absent candidate object
            # the adversarial winner among {bird} is trivially bird; the real
            # assertion is that dog/cat (present in all three) were excluded
            assert inst.meta["object"] not in ("dog", "cat")

    def test_popular_picks_most_frequent_absent(self):
        annotations = [
            AnnotationRecord(image_id="a", objects={"dog": (0.9, 1)}),
            AnnotationRecord(image_id="b", objects={"dog": (0.9, 1), "cat": (0.9, 1)}),
            AnnotationRecord(image_id="c", objects={"dog": (0.9, 1), "cat": (0.9, 1)}),
            AnnotationRecord(image_id="d", objects={"cat": (0.9, 1), "bird": (0.9, 1)}),
        ]
        instances = build_existence_set(annotations, "popular", per_subtype=2, seed=SEED)
        for inst in instances:
            if inst.gold == "no":
                # cat appears in 3 images pool-wide, bird in 1
                assert inst.meta["object"] == "cat"

    def test_insufficient_pool_raises_named_error(self):
        annotations = [AnnotationRecord(image_id="only", objects={"dog": (0.9, 1)})]
        with pytest.raises(DataError, match="existence/random"):
            build_existence_set(annotations, "random", per_subtype=4, seed=SEED)

    def test_deterministic_byte_for_byte(self, annotation_pool, tmp_path):
        a = build_existence_set(annotation_pool, "random", per_subtype=50, seed=SEED)
        b = build_existence_set(annotation_pool, "random", per_subtype=50, seed=SEED)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(pa, a, manifest_hash="h")
        write_dataset(pb, b, manifest_hash="h")
        assert pa.read_bytes() == pb.read_bytes()
        c = build_existence_set(annotation_pool, "random", per_subtype=50, seed=SEED + 1)
        assert [i.image_ids for i in a] != [i.image_ids for i in c]


class TestCountBuilder:
    def test_composition_quotas(self, annotation_pool):
        instances = build_count_set(annotation_pool, total=80, seed=SEED)
        assert len(instances) == 80
        golds = Counter(inst.gold for inst in instances)
        assert golds["yes"] == golds["no"] == 40
        double_absent = [i for i in instances if i.meta["counts"] == [0, 0]]
        single_absent = [
            i for i in instances if (i.meta["counts"][0] == 0) ^ (i.meta["counts"][1] == 0)
        ]
        assert len(double_absent) == 20
        assert len(single_absent) == 20
        assert all(i.gold == "yes" for i in double_absent)
        assert all(i.gold == "no" for i in single_absent)

    def test_counts_within_limit_and_gold_sound(self, annotation_pool):
        records = {rec.image_id: rec for rec in annotation_pool}
        instances = build_count_set(annotation_pool, total=60, seed=SEED)
        for inst in instances:
            n1, n2 = inst.meta["counts"]
            assert 0 <= n1 <= 3 and 0 <= n2 <= 3
            assert rederive_gold(inst) == inst.gold
            assert label_count(n1, n2) == inst.gold
            # stored counts match the pool's effective counts
            obj = inst.meta["object"]
            assert records[inst.image_ids[0]].effective_count(obj) == n1
            assert records[inst.image_ids[1]].effective_count(obj) == n2

    def test_degenerate_pool_raises(self):
        # identical single-object images: no unequal or single-absent pairs
        annotations = [
            AnnotationRecord(image_id=f"i{k}", objects={"dog": (0.9, 2)}) for k in range(8)
        ]
        with pytest.raises(DataError, match="count"):
            build_count_set(annotations, total=8, seed=SEED)

    def test_high_count_objects_excluded(self):
        annotations = [
            AnnotationRecord(image_id="a", objects={"dog": (0.9, 5)}),
            AnnotationRecord(image_id="b", objects={"dog": (0.9, 5)}),
            AnnotationRecord(image_id="c", objects={"cat": (0.9, 1)}),
            AnnotationRecord(image_id="d", objects={"cat": (0.9, 1)}),
            AnnotationRecord(image_id="e", objects={"cat": (0.9, 2)}),
        ]
        instances = build_count_set(annotations, total=8, seed=SEED)
        for inst in instances:
            if inst.meta["object"] == "dog":
                # dog can only appear via its zero-count side
                assert 5 not in inst.meta["counts"]


class TestIdentityBuilder:
    def test_balance_and_shape(self, view_pool):
        records, sim = view_pool
        groups = view_groups_from_annotations(records)
        instances = build_identity_set(groups, sim, total=60, seed=SEED)
        golds = Counter(inst.gold for inst in instances)
        assert golds["yes"] == golds["no"] == 30
        assert all(len(inst.image_ids) == 4 for inst in instances)

    def test_distractor_is_argmin_similarity(self, view_pool):
        records, sim = view_pool
        groups = view_groups_from_annotations(records)
        instances = build_identity_set(groups, sim, total=40, seed=SEED)
        for inst in instances:
            if inst.gold == "yes":
                assert rederive_gold(inst) == "yes"
                continue
            distractor = inst.meta["distractor_id"]
            position = inst.meta["distractor_position"]
            assert inst.image_ids[position - 1] == distractor
            views = [v for v in inst.image_ids if v != distractor]
            outsiders = sorted(
                v for obj, vs in groups.items() if obj != inst.meta["object"] for v in vs
            )
            best = min(outsiders, key=lambda c: (np.mean([sim.score(c, r) for r in views]), c))
            assert distractor == best

    def test_argmin_tie_breaks_lexicographic(self):
        groups = {"t": ["t0", "t1", "t2", "t3"], "o": ["zz", "aa"]}
        ids = ("aa", "t0", "t1", "t2", "t3", "zz")
        scores = np.full((6, 6), 0.4)
        np.fill_diagonal(scores, 1.0)
        sim = SimilarityMatrix(ids=ids, scores=scores)
        instances = build_identity_set(groups, sim, total=2, seed=SEED)
        negatives = [inst for inst in instances if inst.gold == "no"]
        assert negatives and all(inst.meta["distractor_id"] == "aa" for inst in negatives)

    def test_fixed_position_respected(self, view_pool):
        records, sim = view_pool
        groups = view_groups_from_annotations(records)
        instances = build_identity_set(
            groups, sim, total=20, seed=SEED, distractor_position=2
        )
        for inst in instances:
            if inst.gold == "no":
                assert inst.meta["distractor_position"] == 2

    def test_small_groups_rejected(self, view_pool):
        _, sim = view_pool
        groups = {"a": ["airplane-view0", "airplane-view1"], "b": ["apple-view0"]}
        with pytest.raises(DataError, match="identity"):
            build_identity_set(groups, sim, total=4, seed=SEED)

    def test_missing_similarity_row_rejected(self, view_pool):
        _, sim = view_pool
        groups = {"a": ["u1", "u2", "u3", "u4"], "b": ["u5", "u6", "u7", "u8"]}
        with pytest.raises(DataError, match="similarity"):
            build_identity_set(groups, sim, total=4, seed=SEED)

    def test_positions_uniform_chi_square(self, view_pool):
        from scipy.stats import chisquare

        records, sim = view_pool
        groups = view_groups_from_annotations(records)
        instances = build_identity_set(groups, sim, total=800, seed=SEED)
        positions = Counter(
            inst.meta["distractor_position"] for inst in instances if inst.gold == "no"
        )
        assert set(positions) <= {1, 2, 3, 4}
        observed = [positions.get(p, 0) for p in (1, 2, 3, 4)]
        assert sum(observed) == 400
        result = chisquare(observed)
        assert result.pvalue > 0.01


class TestDatasetIO:
    def test_round_trip(self, annotation_pool, tmp_path):
        instances = build_existence_set(annotation_pool, "random", per_subtype=10, seed=SEED)
        path = tmp_path / "ds.jsonl"
        write_dataset(path, instances, manifest_hash="abc123")
        header, loaded = read_dataset(path)
        assert header["manifest_hash"] == "abc123"
        assert header["count"] == 10
        assert loaded == instances

    def test_gold_must_be_yes_no(self):
        from attnbalance.bench.instances import QAInstance

        with pytest.raises(DomainError):
            QAInstance(
                id="x", task="existence", image_ids=("a",), question="?",
                gold="maybe", meta={},
            )
