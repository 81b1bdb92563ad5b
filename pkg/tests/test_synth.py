import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssbm.errors import ConfigError
from ssbm.synth import (NETWORK_VI_PI, BlockPairConfig, SgConfig,
                        generate_block_pair, generate_sg, make_rng,
                        network_vi_config)


def within_mask(truth):
    a = truth.assignment
    return a[:, None] == a[None, :]


def test_balanced_signs():
    g, truth = generate_sg(SgConfig(4, 32, 32, 0.7, 0, 0, seed=4))
    adj = g.to_dense()
    same = within_mask(truth)
    assert np.all(adj[same & (adj != 0)] == 1)
    assert np.all(adj[~same & (adj != 0)] == -1)


def test_p_in_one_keeps_edges_inside():
    g, truth = generate_sg(SgConfig(2, 4, 2, 1.0, 0, 0, seed=0))
    assert g.n_edges == 8
    adj = g.to_dense()
    assert np.all(adj[~within_mask(truth)] == 0)


def test_within_fraction_binomial():
    p, target = 0.6, 128 * 32 // 2
    sigma = math.sqrt(target * p * (1 - p))
    for seed in range(200):
        g, truth = generate_sg(SgConfig(4, 32, 32, p, seed=seed))
        rows, cols, _ = g.edges()
        upper = rows < cols
        inside = np.count_nonzero(truth.assignment[rows[upper]]
                                  == truth.assignment[cols[upper]])
        assert abs(inside - p * target) <= 3 * sigma + 1, seed


@given(c=st.integers(1, 5), m=st.integers(2, 12), frac=st.floats(0, 0.9),
       p_in=st.floats(0, 1), p_minus=st.floats(0, 1), p_plus=st.floats(0, 1),
       seed=st.integers(0, 2**31))
def test_sg_properties(c, m, frac, p_in, p_minus, p_plus, seed):
    n = c * m
    k = frac * (n - 1)
    if c == 1:
        p_in = 1.0
    cfg = SgConfig(c, m, k, p_in, p_minus, p_plus, seed=seed)
    within_total = c * m * (m - 1) // 2
    between_total = n * (n - 1) // 2 - within_total
    g, truth = generate_sg(cfg)
    capacity = (within_total if p_in > 0 else 0) + \
        (between_total if p_in < 1 else 0)
    assert g.n_edges == min(cfg.n_edges, capacity)
    adj = g.to_dense()
    assert np.array_equal(adj, adj.T) and np.all(np.diagonal(adj) == 0)
    assert truth.k == c and np.all(truth.sizes() == m)
    again, _ = generate_sg(cfg)
    assert again == g


def test_saturated_pool_stops_short(caplog):
    g, _ = generate_sg(SgConfig(4, 32, 32, 1.0, seed=1))
    assert g.n_edges == 4 * 32 * 31 // 2
    assert "exhausted" in caplog.text


def test_sg_validation_names_field():
    with pytest.raises(ConfigError) as info:
        SgConfig(4, 32, 32, 1.2)
    assert info.value.field == "p_in"
    with pytest.raises(ConfigError) as info:
        SgConfig(2, 2, 4, 0.5)
    assert info.value.field == "k"
    with pytest.raises(ConfigError):
        SgConfig(0, 2, 1, 0.5)


def test_block_pair_null_is_empty():
    pi = np.tile([0.0, 0.0, 1.0], (3, 3, 1))
    g, truth = generate_block_pair(BlockPairConfig((4, 3, 5), pi, seed=2))
    assert g.nnz == 0 and truth.k == 3


def test_block_pair_cliques():
    pi = {(0, 0): (1, 0, 0), (1, 1): (1, 0, 0), (0, 1): (0, 0, 1)}
    g, _ = generate_block_pair(BlockPairConfig((3, 3), pi))
    expected = np.zeros((6, 6), dtype=np.int8)
    expected[:3, :3] = 1
    expected[3:, 3:] = 1
    np.fill_diagonal(expected, 0)
    assert np.array_equal(g.to_dense(), expected)


def test_network_vi_block_one_positive_count():
    mean = math.comb(32, 2) * 0.6
    assert mean == pytest.approx(297.6)
    counts = []
    for seed in range(100):
        g, _ = generate_block_pair(network_vi_config(seed=seed))
        block = g.to_dense()[:32, :32]
        counts.append(np.count_nonzero(np.triu(block, 1) == 1))
    sigma = math.sqrt(math.comb(32, 2) * 0.6 * 0.4 / 100)
    assert abs(np.mean(counts) - mean) <= 3 * sigma


def test_network_vi_table_complete_and_symmetric():
    cfg = network_vi_config()
    assert cfg.pi.shape == (4, 4, 3)
    assert np.array_equal(cfg.pi, cfg.pi.transpose(1, 0, 2))
    assert tuple(cfg.pi[1, 3]) == NETWORK_VI_PI[(1, 3)]
    g, truth = generate_block_pair(cfg)
    assert g.n == 128 and truth.k == 4


def test_block_pair_validation():
    with pytest.raises(ConfigError):
        BlockPairConfig((2, 2), {(0, 0): (1, 0, 0), (1, 1): (1, 0, 0)})
    with pytest.raises(ConfigError):
        BlockPairConfig((2,), [[[0.5, 0.5, 0.5]]])
    asym = np.tile([0.0, 0.0, 1.0], (2, 2, 1))
    asym[0, 1] = (1, 0, 0)
    with pytest.raises(ConfigError):
        BlockPairConfig((2, 2), asym)


def test_block_pair_deterministic():
    a, _ = generate_block_pair(network_vi_config(seed=9))
    b, _ = generate_block_pair(network_vi_config(seed=9))
    c, _ = generate_block_pair(network_vi_config(seed=10))
    assert a == b and not a == c


def test_make_rng_is_philox():
    assert isinstance(make_rng(3).bit_generator, np.random.Philox)
    assert make_rng(3).random() == make_rng(3).random()
