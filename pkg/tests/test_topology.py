import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsdirect.topology import (
    NetworkRealization,
    SystemConfig,
    cascade_columns,
    compose_channel,
    composite_channels,
    draw_realization,
)


def test_config_defaults_and_derived():
    cfg = SystemConfig()
    assert (cfg.users_per_cell, cfg.n_irs, cfg.bts_antennas, cfg.rician_factor) == (2, 16, 6, 10)
    assert cfg.num_users == 4 and cfg.num_interferers == 2
    assert np.isclose(10 * np.log10(cfg.cross_gain), -3.0)
    assert list(cfg.cell_users(1)) == [2, 3]
    assert list(cfg.other_users(0)) == [2, 3]


@pytest.mark.parametrize("bad", [
    dict(num_cells=0), dict(bts_antennas=0), dict(pilot_len=0), dict(rician_factor=-1),
    dict(cross_gain=0.0), dict(cross_gain=1.5), dict(tx_power=0), dict(noise_var=-1.0),
    dict(codebook="foo"), dict(pilot_kind="gold"),
])
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        SystemConfig(**bad)


def test_shapes():
    cfg = SystemConfig(num_cells=3, users_per_cell=2, n_irs=5, bts_antennas=4, ue_antennas=2)
    r = draw_realization(cfg, 0)
    assert r.direct.shape == (3, 6, 4, 2)
    assert r.ue_to_irs.shape == (3, 6, 5, 2)
    assert r.bts_to_irs.shape == (3, 5, 4)


def test_rician_limit_is_rank_one():
    r = draw_realization(SystemConfig(rician_factor=1e12), 3)
    for h in r.bts_to_irs:
        s = np.linalg.svd(h, compute_uv=False)
        assert s[1] / s[0] < 1e-5
        assert np.allclose(np.abs(h), 1.0, atol=1e-5)


def test_bts_to_irs_unit_second_moment():
    cfg = SystemConfig(num_cells=1, users_per_cell=1)
    m = np.mean([np.mean(np.abs(draw_realization(cfg, s).bts_to_irs) ** 2)
                 for s in range(10_000)])
    assert abs(m - 1.0) < 0.05


def test_full_scattering_statistics():
    cfg = SystemConfig(rician_factor=0.0)
    hs = np.stack([draw_realization(cfg, s).bts_to_irs for s in range(400)])
    assert abs(np.mean(hs)) < 0.02
    assert abs(np.mean(np.abs(hs) ** 2) - 1.0) < 0.03


def test_determinism():
    cfg = SystemConfig()
    a, b = draw_realization(cfg, 42), draw_realization(cfg, 42)
    for x, y in [(a.direct, b.direct), (a.ue_to_irs, b.ue_to_irs), (a.bts_to_irs, b.bts_to_irs)]:
        assert np.array_equal(x, y)
    assert not np.array_equal(a.direct, draw_realization(cfg, 43).direct)


def test_cross_cell_power_ratio():
    cfg = SystemConfig()
    intra, cross = [], []
    for s in range(1000):
        r = draw_realization(cfg, s)
        for c in range(cfg.num_cells):
            own, other = cfg.cell_users(c), cfg.other_users(c)
            intra.append(np.mean(np.abs(r.direct[c, own]) ** 2))
            intra.append(np.mean(np.abs(r.ue_to_irs[c, own]) ** 2))
            cross.append(np.mean(np.abs(r.direct[c, other]) ** 2))
            cross.append(np.mean(np.abs(r.ue_to_irs[c, other]) ** 2))
    ratio = np.mean(cross) / np.mean(intra)
    assert abs(ratio - cfg.cross_gain) < 0.1 * cfg.cross_gain


def test_compose_zero_reflection():
    r = draw_realization(SystemConfig(), 1)
    assert np.array_equal(compose_channel(r, 0, 2, np.zeros(16)), r.direct[0, 2])


def test_compose_destructive_scalar():
    one = np.ones((1, 1, 1, 1), dtype=complex)
    r = NetworkRealization(one, one.copy(), np.ones((1, 1, 1), dtype=complex))
    assert abs(compose_channel(r, 0, 0, np.array([np.exp(1j * np.pi)]))[0, 0]) < 1e-15


def test_compose_brute_force(rng):
    cfg = SystemConfig(num_cells=1, users_per_cell=1, n_irs=4, bts_antennas=3, ue_antennas=2)
    r = draw_realization(cfg, 5)
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    h_ir, h_it = r.bts_to_irs[0], r.ue_to_irs[0, 0]
    ref = r.direct[0, 0].copy()
    for j in range(4):
        ref += w[j] * np.outer(h_ir[j, :], h_it[j, :])
    assert np.allclose(compose_channel(r, 0, 0, w), ref, atol=1e-13)


def test_compose_shape_mismatch():
    r = draw_realization(SystemConfig(), 0)
    with pytest.raises(ValueError):
        compose_channel(r, 0, 0, np.ones(5))


def test_composite_channels_consistent():
    cfg = SystemConfig()
    r = draw_realization(cfg, 2)
    w = np.exp(1j * np.linspace(0, 3, cfg.n_irs))
    hs = composite_channels(r, 1, w)
    for m in range(cfg.num_users):
        assert np.allclose(hs[m], compose_channel(r, 1, m, w))
    cols = cascade_columns(r, 1, [0, 3])
    assert np.allclose(r.direct[1, [0, 3]] + np.einsum("snmt,n->smt", cols, w),
                       composite_channels(r, 1, w, users=[0, 3]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity_in_w(seed, a, b):
    r = draw_realization(SystemConfig(n_irs=6), seed)
    rng = np.random.default_rng(seed)
    w1 = a * np.exp(1j * rng.uniform(0, 7, 6))
    w2 = b * np.exp(1j * rng.uniform(0, 7, 6))
    base = compose_channel(r, 0, 1, np.zeros(6))
    lhs = compose_channel(r, 0, 1, w1 + w2) - base
    rhs = (compose_channel(r, 0, 1, w1) - base) + (compose_channel(r, 0, 1, w2) - base)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_no_irs_allowed():
    cfg = SystemConfig(n_irs=0)
    r = draw_realization(cfg, 0)
    assert np.array_equal(compose_channel(r, 0, 0, np.zeros(0)), r.direct[0, 0])
