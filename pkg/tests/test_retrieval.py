import numpy as np
import pytest

from crosshash.mathops import make_rng, sign_matrix
from crosshash.retrieval import (
    CodeDatabase,
    GroundTruth,
    average_precision,
    hamming_distance,
    hash_lookup,
    load_codes,
    mean_average_precision,
    pr_curve,
    queries_without_relevant,
    rank_database,
    save_codes,
)


def random_codes(rng, c, m):
    return sign_matrix(rng.standard_normal((c, m)))


def random_db(rng, c, m):
    return CodeDatabase(random_codes(rng, c, m), [str(i) for i in range(m)])


def distance_oracle(a, b):
    """Position-by-position disagreement count."""
    return sum(1 for x, y in zip(a, b) if x != y)


def ap_oracle(flags):
    """Nested-recount average precision: precision@k recomputed from scratch."""
    total_relevant = sum(flags)
    precisions = []
    for k in range(1, len(flags) + 1):
        if flags[k - 1]:
            hits = sum(flags[:k])
            precisions.append(hits / k)
    return sum(precisions) / total_relevant


class TestHammingDistance:
    def test_equal_codes(self):
        a = np.ones(8, dtype=np.int8)
        assert hamming_distance(a, a) == 0

    def test_opposite_codes(self):
        a = np.ones(16, dtype=np.int8)
        assert hamming_distance(a, -a) == 16

    def test_matches_positional_oracle(self):
        rng = make_rng(70)
        for _ in range(50):
            c = int(rng.integers(1, 20))
            a = random_codes(rng, c, 1)[:, 0]
            b = random_codes(rng, c, 1)[:, 0]
            assert hamming_distance(a, b) == distance_oracle(a, b)

    def test_inner_product_identity(self):
        rng = make_rng(71)
        for _ in range(30):
            c = int(rng.integers(1, 24))
            a = random_codes(rng, c, 1)[:, 0]
            b = random_codes(rng, c, 1)[:, 0]
            assert hamming_distance(a, b) == (c - int(a @ b)) / 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hamming_distance(np.ones(3, dtype=np.int8), np.ones(4, dtype=np.int8))

    def test_rejects_non_code_entries(self):
        with pytest.raises(ValueError):
            hamming_distance(np.array([1, 0, -1]), np.array([1, 1, 1]))


class TestRankDatabase:
    def test_single_point(self):
        db = CodeDatabase(np.ones((4, 1), dtype=np.int8), ["only"])
        assert rank_database(np.ones(4, dtype=np.int8), db) == ["only"]

    def test_all_equal_codes_keep_original_order(self):
        db = CodeDatabase(np.ones((4, 5), dtype=np.int8), [f"p{i}" for i in range(5)])
        assert rank_database(np.ones(4, dtype=np.int8), db) == [f"p{i}" for i in range(5)]

    def test_matches_sort_oracle(self):
        rng = make_rng(72)
        for _ in range(20):
            c, m = int(rng.integers(2, 10)), int(rng.integers(1, 15))
            db = random_db(rng, c, m)
            q = random_codes(rng, c, 1)[:, 0]
            expected = [
                db.ids[k]
                for k in sorted(range(m), key=lambda k: (distance_oracle(q, db.codes[:, k]), k))
            ]
            assert rank_database(q, db) == expected

    def test_output_is_permutation(self):
        rng = make_rng(73)
        db = random_db(rng, 6, 12)
        q = random_codes(rng, 6, 1)[:, 0]
        assert sorted(rank_database(q, db)) == sorted(db.ids)


class TestAveragePrecision:
    def test_all_relevant_first(self):
        ranking = ["a", "b", "c", "d"]
        assert average_precision(ranking, {"a", "b"}) == 1.0

    def test_single_relevant_at_rank_k(self):
        ranking = [f"p{i}" for i in range(10)]
        for k in range(1, 11):
            assert average_precision(ranking, {f"p{k - 1}"}) == 1.0 / k

    def test_matches_direct_summation_oracle(self):
        rng = make_rng(74)
        ranking = [f"p{i}" for i in range(10)]
        relevant = {"p1", "p4", "p5", "p9"}
        flags = [r in relevant for r in ranking]
        assert average_precision(ranking, relevant) == ap_oracle(flags)

    def test_no_relevant_raises(self):
        with pytest.raises(ValueError):
            average_precision(["a", "b"], set())

    def test_in_unit_interval_and_one_iff_prefix(self):
        rng = make_rng(75)
        for _ in range(50):
            m = int(rng.integers(2, 12))
            n_rel = int(rng.integers(1, m + 1))
            flags = np.zeros(m, dtype=bool)
            flags[rng.choice(m, size=n_rel, replace=False)] = True
            ranking = [f"p{i}" for i in range(m)]
            relevant = {ranking[i] for i in range(m) if flags[i]}
            ap = average_precision(ranking, relevant)
            assert 0.0 < ap <= 1.0
            prefix = all(flags[:n_rel])
            assert (ap == 1.0) == prefix


class TestMeanAveragePrecision:
    def test_repeated_query_equals_its_ap(self):
        rng = make_rng(76)
        db = random_db(rng, 6, 8)
        q = random_codes(rng, 6, 1)
        queries = CodeDatabase(np.repeat(q, 3, axis=1), ["q0", "q1", "q2"])
        relevant_row = np.zeros(8, dtype=bool)
        relevant_row[[1, 4]] = True
        truth = GroundTruth(np.tile(relevant_row, (3, 1)))
        single = average_precision(rank_database(q[:, 0], db), {"1", "4"})
        assert mean_average_precision(queries, db, truth) == single

    def test_perfect_codes_score_one(self):
        c = 8
        db_codes = np.ones((c, 4), dtype=np.int8)
        db_codes[:, 2:] *= -1
        db = CodeDatabase(db_codes, ["a", "b", "c", "d"])
        queries = CodeDatabase(np.ones((c, 1), dtype=np.int8), ["q"])
        truth = GroundTruth(np.array([[True, True, False, False]]))
        assert mean_average_precision(queries, db, truth) == 1.0

    def test_matches_per_query_oracle(self):
        rng = make_rng(77)
        queries = random_db(rng, 5, 5)
        db = random_db(rng, 5, 8)
        relevance = rng.random((5, 8)) < 0.4
        relevance[0, :] = True  # at least one evaluable query
        truth = GroundTruth(relevance)
        aps = []
        for qi in range(5):
            if not relevance[qi].any():
                continue
            ranking = rank_database(queries.codes[:, qi], db)
            relevant = {db.ids[k] for k in range(8) if relevance[qi, k]}
            aps.append(average_precision(ranking, relevant))
        assert mean_average_precision(queries, db, truth) == sum(aps) / len(aps)

    def test_zero_relevant_queries_are_excluded_and_counted(self):
        rng = make_rng(78)
        queries = random_db(rng, 4, 3)
        db = random_db(rng, 4, 5)
        relevance = np.zeros((3, 5), dtype=bool)
        relevance[0, 2] = True
        truth = GroundTruth(relevance)
        assert queries_without_relevant(truth) == 2
        value = mean_average_precision(queries, db, truth)
        single = average_precision(rank_database(queries.codes[:, 0], db), {db.ids[2]})
        assert value == single

    def test_no_valid_query_raises(self):
        rng = make_rng(79)
        queries = random_db(rng, 4, 2)
        db = random_db(rng, 4, 3)
        truth = GroundTruth(np.zeros((2, 3), dtype=bool))
        with pytest.raises(ValueError):
            mean_average_precision(queries, db, truth)

    def test_invariant_under_database_relabeling(self):
        # tie-free by construction: database points sit at distinct distances
        rng = make_rng(80)
        c, m = 12, 8
        for _ in range(10):
            query = random_codes(rng, c, 1)
            flip_counts = rng.choice(c + 1, size=m, replace=False)
            db_codes = np.repeat(query, m, axis=1)
            for k, flips in enumerate(flip_counts):
                positions = rng.choice(c, size=flips, replace=False)
                db_codes[positions, k] *= -1
            db = CodeDatabase(db_codes, [str(k) for k in range(m)])
            queries = CodeDatabase(query, ["q"])
            relevance = rng.random((1, m)) < 0.5
            relevance[0, 0] = True
            truth = GroundTruth(relevance)
            base = mean_average_precision(queries, db, truth)
            perm = rng.permutation(m)
            shuffled = CodeDatabase(db.codes[:, perm], [db.ids[k] for k in perm])
            shuffled_truth = GroundTruth(relevance[:, perm])
            assert mean_average_precision(queries, shuffled, shuffled_truth) == base

    def test_top_k_must_be_positive(self):
        rng = make_rng(95)
        queries = random_db(rng, 4, 2)
        db = random_db(rng, 4, 5)
        truth = GroundTruth(np.ones((2, 5), dtype=bool))
        with pytest.raises(ValueError):
            mean_average_precision(queries, db, truth, top_k=0)

    def test_top_k_cutoff(self):
        rng = make_rng(81)
        queries = random_db(rng, 6, 3)
        db = random_db(rng, 6, 10)
        relevance = rng.random((3, 10)) < 0.5
        relevance[:, 3] = True
        truth = GroundTruth(relevance)
        full = mean_average_precision(queries, db, truth)
        top = mean_average_precision(queries, db, truth, top_k=4)
        assert 0.0 <= top <= 1.0
        assert top != full or full == 1.0


class TestHashLookup:
    def test_radius_c_returns_everything(self):
        rng = make_rng(82)
        db = random_db(rng, 5, 7)
        q = random_codes(rng, 5, 1)[:, 0]
        assert hash_lookup(q, db, 5) == set(db.ids)

    def test_radius_zero_exact_matches_only(self):
        # columns: (1,1,1), (1,-1,1), (-1,1,-1)
        codes = np.array([[1, 1, -1], [1, -1, 1], [1, 1, -1]], dtype=np.int8)
        db = CodeDatabase(codes, ["a", "b", "c"])
        assert hash_lookup(np.array([1, 1, 1], dtype=np.int8), db, 0) == {"a"}

    def test_matches_filter_oracle(self):
        rng = make_rng(83)
        for _ in range(20):
            c, m = int(rng.integers(2, 9)), int(rng.integers(1, 12))
            db = random_db(rng, c, m)
            q = random_codes(rng, c, 1)[:, 0]
            r = int(rng.integers(0, c + 1))
            expected = {db.ids[k] for k in range(m)
                        if distance_oracle(q, db.codes[:, k]) <= r}
            assert hash_lookup(q, db, r) == expected

    def test_radius_out_of_range(self):
        rng = make_rng(84)
        db = random_db(rng, 4, 3)
        with pytest.raises(ValueError):
            hash_lookup(db.codes[:, 0], db, 5)
        with pytest.raises(ValueError):
            hash_lookup(db.codes[:, 0], db, -1)


def pr_oracle_micro(queries, db, truth, radius):
    retrieved = retrieved_relevant = total_relevant = 0
    for qi in range(queries.size):
        for k in range(db.size):
            d = distance_oracle(queries.codes[:, qi], db.codes[:, k])
            if d <= radius:
                retrieved += 1
                if truth.relevance[qi, k]:
                    retrieved_relevant += 1
            if truth.relevance[qi, k]:
                total_relevant += 1
    precision = retrieved_relevant / retrieved if retrieved else 0.0
    recall = retrieved_relevant / total_relevant if total_relevant else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


class TestPrCurve:
    def test_full_radius_recall_is_one(self):
        rng = make_rng(85)
        queries = random_db(rng, 6, 4)
        db = random_db(rng, 6, 9)
        relevance = rng.random((4, 9)) < 0.4
        relevance[0, 0] = True
        truth = GroundTruth(relevance)
        points = pr_curve(queries, db, truth)
        assert points[-1].radius == 6
        assert points[-1].recall == 1.0

    def test_empty_retrieval_convention(self):
        db = CodeDatabase(np.ones((4, 2), dtype=np.int8), ["a", "b"])
        queries = CodeDatabase(-np.ones((4, 1), dtype=np.int8), ["q"])
        truth = GroundTruth(np.array([[True, False]]))
        point = pr_curve(queries, db, truth)[0]
        assert point.radius == 0
        assert point.precision == 0.0 and point.recall == 0.0 and point.f_measure == 0.0

    def test_matches_pooled_count_oracle(self):
        rng = make_rng(86)
        for _ in range(10):
            c = int(rng.integers(2, 9))
            queries = random_db(rng, c, int(rng.integers(1, 6)))
            db = random_db(rng, c, int(rng.integers(2, 12)))
            relevance = rng.random((queries.size, db.size)) < 0.5
            truth = GroundTruth(relevance)
            points = pr_curve(queries, db, truth)
            assert [p.radius for p in points] == list(range(c + 1))
            for p in points:
                expected = pr_oracle_micro(queries, db, truth, p.radius)
                assert (p.precision, p.recall, p.f_measure) == expected

    def test_recall_nondecreasing(self):
        rng = make_rng(87)
        for _ in range(10):
            queries = random_db(rng, 7, 3)
            db = random_db(rng, 7, 10)
            relevance = rng.random((3, 10)) < 0.5
            relevance[0, 0] = True
            truth = GroundTruth(relevance)
            recalls = [p.recall for p in pr_curve(queries, db, truth)]
            assert all(a <= b for a, b in zip(recalls, recalls[1:]))

    def test_macro_average_flag(self):
        rng = make_rng(88)
        queries = random_db(rng, 5, 4)
        db = random_db(rng, 5, 8)
        relevance = rng.random((4, 8)) < 0.5
        relevance[:, 1] = True
        truth = GroundTruth(relevance)
        micro = pr_curve(queries, db, truth, average="micro")
        macro = pr_curve(queries, db, truth, average="macro")
        assert len(micro) == len(macro) == 6
        assert macro[-1].recall == 1.0
        with pytest.raises(ValueError):
            pr_curve(queries, db, truth, average="median")


class TestCodeFile:
    def test_round_trip(self, tmp_path):
        rng = make_rng(89)
        for c in (1, 7, 8, 9, 16):
            db = random_db(rng, c, 5)
            path = tmp_path / f"codes{c}.bin"
            save_codes(db, path)
            loaded = load_codes(path)
            assert np.array_equal(loaded.codes, db.codes)
            assert loaded.ids == db.ids

    def test_documented_bit_order(self, tmp_path):
        # bit k of each byte is LSB-first; +1 -> 1, -1 -> 0
        codes = np.array([[1], [-1], [1], [1], [-1], [-1], [-1], [1]], dtype=np.int8)
        db = CodeDatabase(codes, ["p"])
        path = tmp_path / "codes.bin"
        save_codes(db, path)
        blob = path.read_bytes()
        assert blob[:4] == b"CMHC"
        assert blob[14] == 0b10001101
        assert len(blob) == 15

    def test_empty_database(self, tmp_path):
        db = CodeDatabase(np.zeros((8, 0), dtype=np.int8) + 1, [])
        path = tmp_path / "empty.bin"
        save_codes(db, path)
        loaded = load_codes(path)
        assert loaded.size == 0
        assert loaded.code_length == 8

    def test_truncated_file_rejected(self, tmp_path):
        rng = make_rng(90)
        db = random_db(rng, 16, 4)
        path = tmp_path / "codes.bin"
        save_codes(db, path)
        blob = path.read_bytes()
        (tmp_path / "cut.bin").write_bytes(blob[:-1])
        (tmp_path / "cut.bin.ids").write_text("".join(f"{i}\n" for i in range(4)))
        with pytest.raises(ValueError, match="truncated|implies"):
            load_codes(tmp_path / "cut.bin")

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOPE" + bytes(10))
        (tmp_path / "bogus.bin.ids").write_text("")
        with pytest.raises(ValueError, match="magic"):
            load_codes(path)

    def test_missing_sidecar_rejected(self, tmp_path):
        rng = make_rng(91)
        db = random_db(rng, 8, 2)
        path = tmp_path / "codes.bin"
        save_codes(db, path)
        (tmp_path / "codes.bin.ids").unlink()
        with pytest.raises(ValueError, match="sidecar"):
            load_codes(path)
