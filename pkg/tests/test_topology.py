import pytest

from spraywatch.topology import (build_fat_tree, down_id, h2l_id, l2h_id,
                                 set_link_state, up_id)


def test_link_ids():
    assert up_id(3, 17) == "up:L3:S17"
    assert down_id(17, 3) == "down:S17:L3"
    assert h2l_id(1, 5) == "h2l:L1:H5"
    assert l2h_id(1, 5) == "l2h:L1:H5"


def test_build_shape():
    topo = build_fat_tree(4, 8, hosts_per_leaf=2)
    assert topo.n_leaves == 4 and topo.n_spines == 8
    assert topo.n_hosts == 8
    # 2 * leaves * spines fabric links + 2 * hosts access links
    assert len(topo.links) == 2 * 4 * 8 + 2 * 8
    assert topo.leaf_of_host(5) == 2
    assert list(topo.hosts_of_leaf(2)) == [4, 5]


def test_default_rates():
    topo = build_fat_tree(2, 2)
    assert topo.up_link(0, 1).rate_bps == 100_000_000_000
    assert topo.link(h2l_id(0, 0)).rate_bps == 100_000_000_000
    fast_hosts = build_fat_tree(2, 2, host_rate_bps=800_000_000_000)
    assert fast_hosts.link(h2l_id(0, 0)).rate_bps == 800_000_000_000
    assert fast_hosts.up_link(0, 0).rate_bps == 100_000_000_000


def test_usable_spines_drop_disabled():
    topo = build_fat_tree(2, 4)
    assert topo.usable_spines(0, 1) == (0, 1, 2, 3)
    set_link_state(topo, up_id(0, 2), enabled=False)
    set_link_state(topo, down_id(1, 1), enabled=False)
    assert topo.usable_spines(0, 1) == (0, 3)
    # both degraded links are directional: the reverse path keeps all four
    assert topo.usable_spines(1, 0) == (0, 1, 2, 3)


def test_usable_spines_ignores_drop_rate():
    # a lossy link still routes; only admin-down links leave the set
    topo = build_fat_tree(2, 4)
    set_link_state(topo, up_id(0, 2), drop_rate=0.5)
    assert topo.usable_spines(0, 1) == (0, 1, 2, 3)


def test_path_links():
    topo = build_fat_tree(2, 4, hosts_per_leaf=2)
    ids = [l.link_id for l in topo.path_links(0, 3, spine=2)]
    assert ids == ["h2l:L0:H0", "up:L0:S2", "down:S2:L1", "l2h:L1:H3"]
    same_leaf = [l.link_id for l in topo.path_links(0, 1, spine=None)]
    assert same_leaf == ["h2l:L0:H0", "l2h:L0:H1"]


def test_set_link_state_validation():
    topo = build_fat_tree(2, 2)
    with pytest.raises(KeyError):
        set_link_state(topo, "up:L9:S0", enabled=False)
    with pytest.raises(ValueError):
        set_link_state(topo, up_id(0, 0), drop_rate=1.5)


def test_bad_dimensions_rejected():
    with pytest.raises(ValueError):
        build_fat_tree(0, 4)
