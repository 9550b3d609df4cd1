import numpy as np
import pytest

from spectral_sbm.errors import ParameterError
from spectral_sbm.model import (
    BlockParams,
    PlantedModel,
    _sample_adjacency,
    assign_uniform,
    center,
    derive_seed,
    plant,
    rng_for,
    sample_ssbm,
    split,
    structure_matrix,
)


# ===== PARAMETERS =====

@pytest.mark.parametrize("kwargs", [
    dict(n=10, p=0.3, q=0.3, k=2),
    dict(n=10, p=0.2, q=0.5, k=2),
    dict(n=10, p=1.2, q=0.1, k=2),
    dict(n=0, p=0.5, q=0.1, k=1),
    dict(n=10, p=0.5, q=0.1, k=11),
    dict(n=10, p=0.5, q=0.1),
    dict(n=10, p=0.5, q=0.1, sizes=(4, 4)),
    dict(n=10, p=0.5, q=0.1, sizes=(10, 0)),
    dict(n=10, p=0.5, q=0.1, sizes=(5, 5), k=3),
])
def test_block_params_rejects_invalid(kwargs):
    with pytest.raises(ParameterError):
        BlockParams(**kwargs)


def test_block_params_sizes_derive_k():
    params = BlockParams(n=10, p=0.5, q=0.1, sizes=[6, 4])
    assert params.k == 2
    assert params.sizes == (6, 4)
    assert not params.uniform
    assert params.s == 5.0
    assert params.gap == pytest.approx(0.4)


@pytest.mark.parametrize("p, q", [(0.5, 0.1), (0.9, 0.2), (0.3, 0.0), (1.0, 0.5)])
def test_sigma2_bounded_by_p_times_one_minus_q(p, q):
    params = BlockParams(n=4, p=p, q=q, k=2)
    assert params.sigma2 <= p * (1 - q) + 1e-15


# ===== SEEDING =====

def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(7, "edges") == derive_seed(7, "edges")
    assert derive_seed(7, "edges") != derive_seed(7, "labels")
    assert derive_seed(7, 0, 1) != derive_seed(7, 1, 0)
    assert 0 <= derive_seed(2**70, 3) < 2**64


def test_rng_for_reproduces_stream():
    first = rng_for(3, "edges").random(5)
    second = rng_for(3, "edges").random(5)
    assert np.array_equal(first, second)


# ===== PLANTING =====

def test_assign_uniform_covers_labels():
    labels = assign_uniform(1000, 4, seed=1)
    assert labels.shape == (1000,)
    assert set(np.unique(labels).tolist()) == {0, 1, 2, 3}
    assert np.array_equal(labels, assign_uniform(1000, 4, seed=1))


def test_assign_uniform_rejects_bad_k():
    with pytest.raises(ParameterError):
        assign_uniform(5, 0, seed=0)


def test_plant_explicit_sizes_is_contiguous():
    model = plant(BlockParams(n=7, p=0.5, q=0.1, sizes=(3, 4)), seed=0)
    assert model.labels.tolist() == [0, 0, 0, 1, 1, 1, 1]
    assert model.s_star == 4
    assert model.s_min == 3
    assert model.largest_label == 1
    assert model.members(0).tolist() == [0, 1, 2]


def test_plant_uniform_depends_on_seed():
    params = BlockParams(n=200, p=0.5, q=0.1, k=3)
    assert np.array_equal(plant(params, 5).labels, plant(params, 5).labels)
    assert not np.array_equal(plant(params, 5).labels, plant(params, 6).labels)


def test_planted_model_rejects_inconsistent_labels():
    params = BlockParams(n=4, p=0.5, q=0.1, sizes=(2, 2))
    with pytest.raises(ParameterError):
        PlantedModel(params, np.array([0, 0, 0, 1]), seed=0)
    with pytest.raises(ParameterError):
        PlantedModel(params, np.array([0, 1, 2, 1]), seed=0)


# ===== SAMPLERS =====

def test_extreme_probabilities_give_block_ones(instance):
    model, a, _, _ = instance(9, 1.0, 0.0, sizes=(4, 5))
    expected = (model.labels[:, None] == model.labels[None, :]).astype(float)
    assert np.array_equal(a, expected)


def test_extreme_probabilities_without_self_loops(instance):
    model, a, _, _ = instance(9, 1.0, 0.0, sizes=(4, 5), self_loops=False)
    expected = (model.labels[:, None] == model.labels[None, :]).astype(float)
    np.fill_diagonal(expected, 0.0)
    assert np.array_equal(a, expected)


def test_zero_probabilities_give_empty_graph(rng):
    a = _sample_adjacency(np.zeros(6, dtype=int), 0.0, 0.0, rng, self_loops=True)
    assert np.array_equal(a, np.zeros((6, 6)))


def test_sample_is_symmetric_binary_and_deterministic(instance):
    model, a, _, _ = instance(120, 0.6, 0.2, k=3, seed=11)
    assert np.array_equal(a, a.T)
    assert set(np.unique(a).tolist()) <= {0.0, 1.0}
    assert np.array_equal(a, sample_ssbm(model))


def test_empirical_densities_match_p_and_q(instance):
    model, a, _, _ = instance(1000, 0.5, 0.1, k=2, seed=3)
    same = model.labels[:, None] == model.labels[None, :]
    upper = np.triu(np.ones_like(a, dtype=bool), k=1)
    assert a[same & upper].mean() == pytest.approx(0.5, abs=0.02)
    assert a[~same & upper].mean() == pytest.approx(0.1, abs=0.02)


# ===== CENTERING & SPLIT =====

def test_center_subtracts_q_everywhere():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(center(a, 0.25), [[0.75, -0.25], [-0.25, 0.75]])


def test_split_reconstructs_b(instance):
    _, _, b, parts = instance(60, 0.7, 0.2, k=3, seed=2)
    np.testing.assert_allclose(parts.L + parts.R, b, atol=1e-15)
    assert parts.n == 60


def test_structure_matrix_on_diagonal_and_blocks():
    L = structure_matrix([0, 1, 0], 0.6, 0.2)
    np.testing.assert_allclose(L, [[0.4, 0.0, 0.4], [0.0, 0.4, 0.0], [0.4, 0.0, 0.4]])


def test_noise_diagonal_without_self_loops(instance):
    _, _, _, parts = instance(20, 0.6, 0.2, k=2, self_loops=False)
    np.testing.assert_allclose(np.diag(parts.R), -0.6)


def test_noise_entries_take_two_values(instance):
    model, _, _, parts = instance(50, 0.6, 0.2, k=2, seed=4)
    same = model.labels[:, None] == model.labels[None, :]
    inside = np.unique(np.round(parts.R[same], 12))
    across = np.unique(np.round(parts.R[~same], 12))
    assert set(inside.tolist()) <= {0.4, -0.6}
    assert set(across.tolist()) <= {0.8, -0.2}


@pytest.mark.parametrize("seed", range(10))
def test_noise_has_zero_mean_on_every_block(instance, seed):
    p, q = 0.6, 0.2
    model, _, _, parts = instance(300, p, q, k=3, seed=seed)
    for c in range(model.k):
        for d in range(c, model.k):
            rows, cols = model.members(c), model.members(d)
            block = parts.R[np.ix_(rows, cols)]
            # independent pairs only: the upper triangle of a diagonal block
            entries = block[np.triu_indices(rows.size)] if c == d else block.ravel()
            sigma = np.sqrt(p * (1 - p) if c == d else q * (1 - q))
            assert abs(entries.mean()) <= 5 * sigma / np.sqrt(entries.size)


def test_structure_power_closed_form():
    # equal blocks of size s: L^r = (p - q)^r s^(r - 1) on same-label entries
    labels = np.repeat([0, 1, 2], 5)
    L = structure_matrix(labels, 0.7, 0.3)
    same = labels[:, None] == labels[None, :]
    for r in (1, 2, 4):
        expected = np.where(same, 0.4 ** r * 5 ** (r - 1), 0.0)
        np.testing.assert_allclose(np.linalg.matrix_power(L, r), expected, rtol=1e-12, atol=1e-15)


def test_split_rejects_dimension_mismatch(instance):
    model, _, _, _ = instance(10, 0.5, 0.1, k=2)
    with pytest.raises(ParameterError):
        split(np.zeros((9, 9)), model)
