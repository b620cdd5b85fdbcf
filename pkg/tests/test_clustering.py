import numpy as np
import pytest

from oracles import greedy_ward
from seqpath.clustering import (
    ClusterAssignment,
    Dendrogram,
    cut_tree,
    read_assignment_csv,
    silhouette,
    silhouette_profile,
    ward_cluster,
    write_assignment_csv,
)
from seqpath.dissimilarity import DissimilarityMatrix
from seqpath.errors import ValidationError


def _matrix_from_points(points):
    points = np.asarray(points, dtype=float)
    square = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(square, 0.0)
    square = np.minimum(square, square.T)  # enforce exact symmetry
    return DissimilarityMatrix.from_square(square)


def _random_matrix(rng, n):
    points = rng.normal(size=(n, 3))
    return _matrix_from_points(points)


class TestWardCluster:
    def test_two_items_merge_at_their_distance(self):
        matrix = DissimilarityMatrix.from_square(np.array([[0.0, 3.5], [3.5, 0.0]]))
        tree = ward_cluster(matrix)
        assert tree.merges.shape == (1, 4)
        left, right, height, count = tree.merges[0]
        assert (left, right, count) == (0.0, 1.0, 2.0)
        assert height == pytest.approx(3.5)

    def test_close_pair_merges_first(self):
        square = np.array(
            [
                [0.0, 1.0, 10.0],
                [1.0, 0.0, 10.0],
                [10.0, 10.0, 0.0],
            ]
        )
        tree = ward_cluster(DissimilarityMatrix.from_square(square))
        assert (int(tree.merges[0, 0]), int(tree.merges[0, 1])) == (0, 1)
        assert tree.merges[0, 2] == pytest.approx(1.0)

    def test_matches_naive_rescan_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            n = int(rng.integers(2, 41))
            matrix = _random_matrix(rng, n)
            tree = ward_cluster(matrix)
            naive = greedy_ward(matrix.toarray())
            for t in range(n - 1):
                left, right, height, count = tree.merges[t]
                nl, nr, nh, nc = naive[t]
                assert (int(left), int(right), int(count)) == (nl, nr, nc)
                assert height == pytest.approx(nh, rel=1e-9)

    def test_matches_scipy_heights(self):
        from scipy.cluster.hierarchy import linkage
        from scipy.spatial.distance import squareform

        rng = np.random.default_rng(22)
        matrix = _random_matrix(rng, 30)
        tree = ward_cluster(matrix)
        expected = linkage(squareform(matrix.toarray()), method="ward")
        assert np.allclose(tree.merges[:, 2], expected[:, 2], rtol=1e-9)
        assert np.array_equal(tree.merges[:, 3], expected[:, 3])

    def test_heights_non_decreasing(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            tree = ward_cluster(_random_matrix(rng, int(rng.integers(3, 60))))
            heights = tree.merges[:, 2]
            assert np.all(np.diff(heights) >= -1e-12)

    def test_partition_invariant_under_permutation(self):
        rng = np.random.default_rng(24)
        points = rng.normal(size=(20, 2))
        matrix = _matrix_from_points(points)
        perm = rng.permutation(20)
        permuted = _matrix_from_points(points[perm])
        for k in (2, 3, 5):
            base = cut_tree(ward_cluster(matrix), k).labels
            shuffled = cut_tree(ward_cluster(permuted), k).labels
            # same partition after undoing the permutation
            restored = np.empty(20, dtype=int)
            restored[perm] = shuffled
            pairs_base = {(i, j): base[i] == base[j] for i in range(20) for j in range(i)}
            pairs_restored = {
                (i, j): restored[i] == restored[j] for i in range(20) for j in range(i)
            }
            assert pairs_base == pairs_restored

    def test_rejects_single_item(self):
        with pytest.raises(ValidationError):
            ward_cluster(DissimilarityMatrix(n=1, values=np.zeros(0)))

    def test_leaf_order_is_permutation_consistent_with_tree(self):
        rng = np.random.default_rng(25)
        tree = ward_cluster(_random_matrix(rng, 15))
        assert sorted(tree.leaf_order.tolist()) == list(range(15))


class TestCutTree:
    def test_k_one_puts_everyone_together(self):
        rng = np.random.default_rng(26)
        tree = ward_cluster(_random_matrix(rng, 12))
        assignment = cut_tree(tree, 1)
        assert assignment.k == 1
        assert np.all(assignment.labels == 1)

    def test_k_n_gives_singletons(self):
        rng = np.random.default_rng(27)
        tree = ward_cluster(_random_matrix(rng, 9))
        assignment = cut_tree(tree, 9)
        assert assignment.k == 9
        assert sorted(assignment.labels.tolist()) == list(range(1, 10))
        # size ties resolve by smallest member: leaf 0 gets label 1
        assert assignment.labels[0] == 1

    def test_three_well_separated_pairs(self):
        matrix = _matrix_from_points(
            [[0.0, 0], [0.1, 0], [10.0, 0], [10.1, 0], [50.0, 0], [50.2, 0]]
        )
        tree = ward_cluster(matrix)
        assignment = cut_tree(tree, 3)
        labels = assignment.labels
        assert labels[0] == labels[1]
        assert labels[2] == labels[3]
        assert labels[4] == labels[5]
        # equal sizes: ordering falls back to smallest member index
        assert labels[0] == 1 and labels[2] == 2 and labels[4] == 3

    def test_labels_sorted_by_descending_size(self):
        matrix = _matrix_from_points(
            [[0.0, 0], [0.1, 0], [0.2, 0], [30.0, 0], [30.1, 0], [90.0, 0]]
        )
        assignment = cut_tree(ward_cluster(matrix), 3)
        assert assignment.sizes.tolist() == [3, 2, 1]
        assert assignment.labels[5] == 3

    def test_partitions_are_nested(self):
        rng = np.random.default_rng(28)
        tree = ward_cluster(_random_matrix(rng, 25))
        for k in range(2, 25):
            fine = cut_tree(tree, k).labels
            coarse = cut_tree(tree, k - 1).labels
            # if two items share a fine cluster they share a coarse one
            for i in range(25):
                for j in range(i):
                    if fine[i] == fine[j]:
                        assert coarse[i] == coarse[j]

    def test_k_out_of_range_rejected(self):
        rng = np.random.default_rng(29)
        tree = ward_cluster(_random_matrix(rng, 5))
        with pytest.raises(ValidationError, match="k must be"):
            cut_tree(tree, 0)
        with pytest.raises(ValidationError, match="k must be"):
            cut_tree(tree, 6)


class TestSilhouette:
    def test_two_tight_pairs_score_high(self):
        square = np.full((4, 4), 100.0)
        square[0, 1] = square[1, 0] = 1.0
        square[2, 3] = square[3, 2] = 1.0
        np.fill_diagonal(square, 0.0)
        matrix = DissimilarityMatrix.from_square(square)
        assignment = ClusterAssignment(
            k=2, labels=np.array([1, 1, 2, 2]), sizes=np.array([2, 2])
        )
        value = silhouette(matrix, assignment)
        assert value == pytest.approx((100.0 - 1.0) / 100.0)
        assert value > 0.9

    def test_random_labels_on_iid_points_near_zero(self):
        rng = np.random.default_rng(30)
        values = []
        for _ in range(100):
            matrix = _random_matrix(rng, 24)
            labels = rng.integers(1, 4, 24)
            while len(np.unique(labels)) < 3:
                labels = rng.integers(1, 4, 24)
            assignment = ClusterAssignment(
                k=3, labels=labels, sizes=np.bincount(labels, minlength=4)[1:]
            )
            values.append(silhouette(matrix, assignment))
        assert abs(float(np.mean(values))) < 0.1

    def test_one_merged_pair_rest_singletons(self):
        # hand evaluation: the pair (0, 1) sits at distance 1; both score
        # (b - a) / b with a = 1 and b = the distance to the nearest
        # other point; singletons score 0
        square = np.array(
            [
                [0.0, 1.0, 8.0, 9.0],
                [1.0, 0.0, 7.0, 9.0],
                [8.0, 7.0, 0.0, 9.0],
                [9.0, 9.0, 9.0, 0.0],
            ]
        )
        matrix = DissimilarityMatrix.from_square(square)
        assignment = ClusterAssignment(
            k=3, labels=np.array([1, 1, 2, 3]), sizes=np.array([2, 1, 1])
        )
        expected = ((8.0 - 1.0) / 8.0 + (7.0 - 1.0) / 7.0 + 0.0 + 0.0) / 4.0
        assert silhouette(matrix, assignment) == pytest.approx(expected)

    def test_rejects_degenerate_clusterings(self):
        rng = np.random.default_rng(31)
        matrix = _random_matrix(rng, 6)
        with pytest.raises(ValidationError, match="at least 2"):
            silhouette(matrix, cut_tree(ward_cluster(matrix), 1))
        with pytest.raises(ValidationError, match="singleton"):
            silhouette(matrix, cut_tree(ward_cluster(matrix), 6))

    def test_profile_reports_requested_range(self):
        rng = np.random.default_rng(32)
        matrix = _random_matrix(rng, 20)
        tree = ward_cluster(matrix)
        profile = silhouette_profile(matrix, tree)
        assert sorted(profile) == [2, 3, 4, 5, 6, 7, 8]
        for value in profile.values():
            assert -1.0 <= value <= 1.0


class TestSerialization:
    def test_dendrogram_json_round_trip(self):
        rng = np.random.default_rng(33)
        tree = ward_cluster(_random_matrix(rng, 10))
        loaded = Dendrogram.from_json(tree.to_json())
        assert loaded.n == tree.n
        assert np.allclose(loaded.merges, tree.merges)
        assert np.array_equal(loaded.leaf_order, tree.leaf_order)

    def test_assignment_csv_round_trip(self, tmp_path):
        assignment = ClusterAssignment(
            k=2, labels=np.array([1, 2, 1]), sizes=np.array([2, 1])
        )
        path = tmp_path / "assignment.csv"
        write_assignment_csv(assignment, ["a", "b", "c"], path)
        loaded, ids = read_assignment_csv(path)
        assert ids == ["a", "b", "c"]
        assert np.array_equal(loaded.labels, assignment.labels)
        assert loaded.k == 2
