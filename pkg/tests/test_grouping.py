import numpy as np
import pytest
import torch

from groupaq.grouping import (GroupAssignment, LocationFuser,
                              cities_to_groups, groups_to_cities,
                              kmeans_assignment, normalize_locations,
                              soft_assignment)


def test_soft_assignment_uniform_logits():
    s = soft_assignment(torch.zeros(3, 5, dtype=torch.float64))
    np.testing.assert_allclose(s.numpy(), 0.2)


def test_soft_assignment_saturated_row():
    logits = torch.full((1, 4), -10.0, dtype=torch.float64)
    logits[0, 1] = 10.0
    s = soft_assignment(logits)[0]
    assert abs(s[1].item() - 1.0) < 1e-4
    assert s.sum().item() == pytest.approx(1.0, abs=1e-12)


def test_soft_assignment_probability_semantics():
    # a row of [0.7, 0.3] means the city leans toward group 0
    s = soft_assignment(torch.log(torch.tensor([[0.7, 0.3]], dtype=torch.float64)))
    np.testing.assert_allclose(s.numpy(), [[0.7, 0.3]], atol=1e-12)
    assert s.argmax().item() == 0


def test_soft_assignment_shift_invariance():
    gen = torch.Generator().manual_seed(0)
    logits = torch.randn(6, 4, generator=gen, dtype=torch.float64)
    shifted = logits + torch.randn(6, 1, generator=gen, dtype=torch.float64)
    np.testing.assert_allclose(soft_assignment(shifted).numpy(),
                               soft_assignment(logits).numpy(), atol=1e-7)


def test_assignment_module_rows_sum_to_one():
    torch.manual_seed(0)
    module = GroupAssignment(10, 4).double()
    s = module()
    np.testing.assert_allclose(s.sum(dim=1).detach().numpy(), 1.0, atol=1e-6)
    assert (s >= 0).all()


# ---------------------------------------------------------------------------
# Level transforms

def _loop_cities_to_groups(fused, assign):
    b, n, d = fused.shape
    k = assign.shape[1]
    out = np.zeros((b, k, d))
    for bi in range(b):
        for j in range(k):
            for i in range(n):
                out[bi, j] += assign[i, j] * fused[bi, i]
    return out


def _loop_groups_to_cities(assign, group_reps):
    b, k, d = group_reps.shape
    n = assign.shape[0]
    out = np.zeros((b, n, d))
    for bi in range(b):
        for i in range(n):
            for j in range(k):
                out[bi, i] += assign[i, j] * group_reps[bi, j]
    return out


def test_cities_to_groups_one_hot():
    fused = torch.arange(6, dtype=torch.float64).reshape(1, 3, 2)
    assign = torch.tensor([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], dtype=torch.float64)
    z = cities_to_groups(fused, assign)
    np.testing.assert_allclose(z[0, 0].numpy(), fused[0, 0].numpy())
    np.testing.assert_allclose(z[0, 1].numpy(), (fused[0, 1] + fused[0, 2]).numpy())


def test_cities_to_groups_uniform():
    gen = torch.Generator().manual_seed(1)
    fused = torch.randn(2, 4, 3, generator=gen, dtype=torch.float64)
    assign = torch.full((4, 2), 0.5, dtype=torch.float64)
    z = cities_to_groups(fused, assign)
    expected = fused.sum(dim=1, keepdim=True) * 0.5
    np.testing.assert_allclose(z.numpy(), expected.expand(-1, 2, -1).numpy())


def test_cities_to_groups_matches_loop():
    gen = torch.Generator().manual_seed(2)
    fused = torch.randn(2, 3, 4, generator=gen, dtype=torch.float64)
    assign = soft_assignment(torch.randn(3, 2, generator=gen, dtype=torch.float64))
    z = cities_to_groups(fused, assign)
    np.testing.assert_allclose(z.numpy(),
                               _loop_cities_to_groups(fused.numpy(), assign.numpy()),
                               atol=1e-6)


def test_groups_to_cities_one_hot_picks_group():
    group_reps = torch.arange(4, dtype=torch.float64).reshape(1, 2, 2)
    assign = torch.tensor([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    x1 = groups_to_cities(assign, group_reps)
    np.testing.assert_allclose(x1[0, 0].numpy(), group_reps[0, 1].numpy())
    np.testing.assert_allclose(x1[0, 1].numpy(), group_reps[0, 0].numpy())


def test_groups_to_cities_single_group():
    group_reps = torch.randn(2, 1, 5, dtype=torch.float64)
    assign = torch.ones(4, 1, dtype=torch.float64)
    x1 = groups_to_cities(assign, group_reps)
    for i in range(4):
        np.testing.assert_allclose(x1[:, i].numpy(), group_reps[:, 0].numpy())


def test_groups_to_cities_matches_loop():
    gen = torch.Generator().manual_seed(3)
    group_reps = torch.randn(2, 3, 4, generator=gen, dtype=torch.float64)
    assign = soft_assignment(torch.randn(5, 3, generator=gen, dtype=torch.float64))
    x1 = groups_to_cities(assign, group_reps)
    np.testing.assert_allclose(
        x1.numpy(), _loop_groups_to_cities(assign.numpy(), group_reps.numpy()),
        atol=1e-6)


def test_round_trip_identity_for_solo_cities():
    # cities 0 and 2 are each the only member of their group
    assign = torch.tensor([[1.0, 0.0, 0.0],
                           [0.0, 1.0, 0.0],
                           [0.0, 0.0, 1.0],
                           [0.0, 1.0, 0.0]], dtype=torch.float64)
    gen = torch.Generator().manual_seed(4)
    fused = torch.randn(1, 4, 6, generator=gen, dtype=torch.float64)
    z = cities_to_groups(fused, assign)
    back = groups_to_cities(assign, z)
    np.testing.assert_allclose(back[0, 0].numpy(), fused[0, 0].numpy())
    np.testing.assert_allclose(back[0, 2].numpy(), fused[0, 2].numpy())


# ---------------------------------------------------------------------------
# Location fusion

def test_fuse_location_identical_inputs():
    torch.manual_seed(5)
    fuser = LocationFuser(4).double()
    x = torch.ones(1, 3, 4, dtype=torch.float64)
    loc = torch.full((3, 2), 0.5, dtype=torch.float64)
    out = fuser(x, loc)
    np.testing.assert_allclose(out[0, 0].detach().numpy(),
                               out[0, 1].detach().numpy())
    np.testing.assert_allclose(out[0, 0].detach().numpy(),
                               out[0, 2].detach().numpy())


def test_fuse_location_zero_weights_gives_bias():
    torch.manual_seed(6)
    fuser = LocationFuser(4).double()
    with torch.no_grad():
        fuser.mlp.net[0].weight.zero_()
        fuser.mlp.net[0].bias.zero_()
        fuser.mlp.net[2].weight.zero_()
        fuser.mlp.net[2].bias.fill_(2.5)
    out = fuser(torch.randn(2, 3, 4, dtype=torch.float64),
                torch.rand(3, 2, dtype=torch.float64))
    np.testing.assert_allclose(out.detach().numpy(), 2.5)


def test_fuse_location_gradient_wrt_location():
    torch.manual_seed(7)
    fuser = LocationFuser(4).double()
    gen = torch.Generator().manual_seed(8)
    x = torch.randn(1, 3, 4, generator=gen, dtype=torch.float64)
    loc = torch.rand(3, 2, generator=gen, dtype=torch.float64)
    loc.requires_grad_(True)
    probe = torch.randn(1, 3, 4, generator=gen, dtype=torch.float64)
    loss = (fuser(x, loc) * probe).sum()
    loss.backward()
    eps = 1e-4
    for i in range(3):
        for j in range(2):
            with torch.no_grad():
                orig = loc[i, j].item()
                loc[i, j] = orig + eps
                up = (fuser(x, loc) * probe).sum().item()
                loc[i, j] = orig - eps
                down = (fuser(x, loc) * probe).sum().item()
                loc[i, j] = orig
            fd = (up - down) / (2 * eps)
            ad = loc.grad[i, j].item()
            assert abs(ad - fd) / max(abs(ad), abs(fd), 1e-8) < 1e-3


def test_no_location_variant_ignores_coordinates():
    torch.manual_seed(9)
    fuser = LocationFuser(4, use_location=False).double()
    x = torch.randn(1, 3, 4, dtype=torch.float64)
    out1 = fuser(x, torch.zeros(3, 2, dtype=torch.float64))
    out2 = fuser(x, torch.ones(3, 2, dtype=torch.float64))
    np.testing.assert_array_equal(out1.detach().numpy(), out2.detach().numpy())


def test_normalize_locations_unit_box():
    loc = np.array([[100.0, 20.0], [110.0, 30.0], [105.0, 25.0]])
    norm = normalize_locations(loc)
    assert norm.min() == 0.0 and norm.max() == 1.0
    np.testing.assert_allclose(norm[2], [0.5, 0.5])
    constant = normalize_locations(np.array([[5.0, 1.0], [5.0, 2.0]]))
    np.testing.assert_allclose(constant[:, 0], 0.0)


# ---------------------------------------------------------------------------
# K-means baseline

def test_kmeans_each_city_own_cluster():
    rng = np.random.default_rng(0)
    loc = rng.uniform(0, 10, size=(5, 2))
    one_hot = kmeans_assignment(loc, k=5, seed=0)
    assert one_hot.shape == (5, 5)
    np.testing.assert_allclose(one_hot.sum(axis=0), 1.0)
    np.testing.assert_allclose(one_hot.sum(axis=1), 1.0)


def test_kmeans_single_cluster():
    rng = np.random.default_rng(1)
    loc = rng.uniform(0, 10, size=(6, 2))
    one_hot = kmeans_assignment(loc, k=1, seed=0)
    np.testing.assert_allclose(one_hot, 1.0)


def test_kmeans_square_corners_edge_pairing():
    corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    # brute-force oracle: enumerate all 2-partitions, keep minimum
    # within-cluster sum of squares
    from itertools import product
    best_cost = np.inf
    optima = set()
    for assign in product([0, 1], repeat=4):
        if len(set(assign)) < 2:
            continue
        cost = 0.0
        for k in (0, 1):
            pts = corners[[i for i in range(4) if assign[i] == k]]
            cost += ((pts - pts.mean(axis=0)) ** 2).sum()
        canon = tuple(a ^ assign[0] for a in assign)
        if cost < best_cost - 1e-12:
            best_cost = cost
            optima = {canon}
        elif abs(cost - best_cost) < 1e-12:
            optima.add(canon)
    # the optima are exactly the two opposite-edge pairings
    assert optima == {(0, 0, 1, 1), (0, 1, 0, 1)}
    labels = kmeans_assignment(corners, k=2, seed=1).argmax(axis=1)
    canon = tuple(v ^ labels[0] for v in labels)
    assert canon in optima


def test_kmeans_separated_clusters_recovered():
    rng = np.random.default_rng(2)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]])
    labels_true = np.repeat([0, 1, 2], 6)
    pts = centers[labels_true] + rng.normal(0, 0.3, size=(18, 2))
    one_hot = kmeans_assignment(pts, k=3, seed=0)
    labels = one_hot.argmax(axis=1)
    for g in range(3):
        member_labels = labels[labels_true == g]
        assert len(set(member_labels.tolist())) == 1
    assert len(set(labels.tolist())) == 3


def test_kmeans_deterministic_and_validated():
    rng = np.random.default_rng(3)
    loc = rng.uniform(0, 5, size=(8, 2))
    a = kmeans_assignment(loc, k=3, seed=4)
    b = kmeans_assignment(loc, k=3, seed=4)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        kmeans_assignment(loc, k=9, seed=0)
