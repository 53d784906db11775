"""Tests for the profile co-occurrence matrix and the smoothing function."""

import math
from itertools import combinations

import numpy as np
import pytest

from conftest import make_dataset
from dataset import Dataset
from errors import ArtifactError
from pco import Basis, build_pco, dump_pco, load_pco, smooth, smooth_array


def brute_force_counts(dataset: Dataset, basis: Basis) -> dict[tuple[int, int], int]:
    """O(n^2 * profiles) double loop over entity pairs."""
    if basis == Basis.ITEM:
        n, profiles = dataset.num_items, dataset.user_profiles
    else:
        n, profiles = dataset.num_users, dataset.item_profiles
    members = [{entity for entity, _ in profile} for profile in profiles]
    counts = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            shared = sum(1 for profile in members if i in profile and j in profile)
            if shared:
                counts[(i, j)] = shared
    return counts


class TestBuildPco:
    def test_two_users_same_profile(self):
        dataset = Dataset.from_triples(2, 2, [(0, 0, 5), (0, 1, 3), (1, 0, 1), (1, 1, 2)])
        pco = build_pco(dataset, Basis.ITEM)
        assert pco.lookup(0, 1) == 2
        assert pco.lookup(1, 0) == 2

    def test_no_co_occurrence(self):
        dataset = Dataset.from_triples(2, 2, [(0, 0, 5), (1, 1, 3)])
        pco = build_pco(dataset, Basis.ITEM)
        assert pco.nnz == 0
        assert pco.entries == {}

    def test_user_basis_counts_shared_items(self):
        dataset = Dataset.from_triples(
            3, 3, [(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, 1), (2, 2, 1)]
        )
        pco = build_pco(dataset, Basis.USER)
        assert pco.n == 3
        assert pco.entries == {(0, 1): 2, (1, 0): 2}

    def test_ratings_do_not_matter(self):
        low = Dataset.from_triples(2, 3, [(0, 0, 1), (0, 2, 1), (1, 0, 1), (1, 2, 1)])
        high = Dataset.from_triples(2, 3, [(0, 0, 5), (0, 2, 4), (1, 0, 3), (1, 2, 5)])
        assert build_pco(low, Basis.ITEM).entries == build_pco(high, Basis.ITEM).entries

    def test_lookup_out_of_range(self):
        pco = build_pco(Dataset.from_triples(1, 2, [(0, 0, 1), (0, 1, 1)]), Basis.ITEM)
        with pytest.raises(IndexError):
            pco.lookup(0, 2)

    def test_random_dataset_matches_brute_force(self, rng):
        dataset = make_dataset(rng, 20, 15, 0.35)
        for basis in Basis:
            assert build_pco(dataset, basis).entries == brute_force_counts(dataset, basis)


@pytest.mark.parametrize("case", range(200))
def test_pco_properties(case):
    rng = np.random.default_rng(case)
    dataset = make_dataset(rng, int(rng.integers(1, 41)), int(rng.integers(1, 31)), 0.3)
    basis = Basis.ITEM if case % 2 == 0 else Basis.USER
    pco = build_pco(dataset, basis)
    entries = pco.entries

    assert entries == brute_force_counts(dataset, basis)
    if basis == Basis.ITEM:
        frequency = [len(profile) for profile in dataset.item_profiles]
    else:
        frequency = [len(profile) for profile in dataset.user_profiles]
    for (i, j), count in entries.items():
        assert i != j
        assert count >= 1
        assert entries[(j, i)] == count
        assert count <= min(frequency[i], frequency[j])


class TestSmooth:
    def test_zero_and_one_are_identity(self):
        assert smooth(0) == 0.0
        assert smooth(1) == 1.0

    def test_natural_log_above_one(self):
        assert smooth(100) == pytest.approx(4.605170185988091, rel=1e-15)

    def test_base_two(self):
        assert smooth(8, log_base="2") == pytest.approx(3.0)
        assert smooth(1, log_base="2") == 1.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            smooth(-1)
        with pytest.raises(ValueError):
            smooth_array(np.array([1, -2]))

    def test_array_matches_scalar(self):
        counts = np.arange(0, 50)
        for base in ("e", "2"):
            expected = [smooth(int(c), base) for c in counts]
            assert smooth_array(counts, base).tolist() == pytest.approx(expected, rel=1e-15)

    def test_natural_log_dips_right_after_one(self):
        # ln(2) < 1: the identity branch and the log branch do not join up
        assert smooth(2) < smooth(1)


@pytest.mark.parametrize("case", range(200))
def test_smooth_monotone_within_each_branch(case):
    rng = np.random.default_rng(case)
    low = np.sort(rng.uniform(0, 1, size=2))
    assert smooth(low[0]) <= smooth(low[1])
    high = np.sort(rng.uniform(1 + 1e-9, 1e6, size=2))
    assert smooth(high[0]) <= smooth(high[1])
    counts = np.sort(rng.integers(0, 10_000, size=2))
    assert smooth(int(counts[0]), "2") <= smooth(int(counts[1]), "2")


def test_smooth_continuous_at_one():
    assert smooth(1 - 1e-12) == pytest.approx(smooth(1), abs=1e-11)


class TestPcoFiles:
    def test_dump_format(self, tmp_path):
        dataset = Dataset.from_triples(
            3, 3, [(0, 0, 1), (0, 1, 1), (0, 2, 1), (1, 0, 1), (1, 2, 1), (2, 1, 1), (2, 2, 1)]
        )
        pco = build_pco(dataset, Basis.ITEM)
        dump_pco(pco, tmp_path / "pco.tsv")
        assert (tmp_path / "pco.tsv").read_text().splitlines() == ["0\t1\t1", "0\t2\t2", "1\t2\t2"]

    def test_reload_restores_both_orientations(self, tmp_path, rng):
        pco = build_pco(make_dataset(rng, 15, 10, 0.4), Basis.ITEM)
        dump_pco(pco, tmp_path / "pco.tsv")
        reloaded = load_pco(tmp_path / "pco.tsv", pco.n, Basis.ITEM)
        assert reloaded.entries == pco.entries

    def test_reload_empty_matrix(self, tmp_path):
        pco = build_pco(Dataset.from_triples(2, 2, [(0, 0, 1), (1, 1, 1)]), Basis.ITEM)
        dump_pco(pco, tmp_path / "pco.tsv")
        assert load_pco(tmp_path / "pco.tsv", 2, Basis.ITEM).nnz == 0

    def test_reject_lower_triangle(self, tmp_path):
        (tmp_path / "pco.tsv").write_text("2\t1\t3\n")
        with pytest.raises(ArtifactError):
            load_pco(tmp_path / "pco.tsv", 3, Basis.ITEM)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            load_pco(tmp_path / "absent.tsv", 3, Basis.ITEM)


def test_item_pairs_cover_every_profile_pair(rng):
    dataset = make_dataset(rng, 10, 12, 0.5)
    pco = build_pco(dataset, Basis.ITEM)
    for profile in dataset.user_profiles:
        for (a, _), (b, _) in combinations(profile, 2):
            assert pco.lookup(a, b) >= 1
    assert math.isclose(sum(pco.entries.values()) / 2, pco.matrix.sum() / 2)
