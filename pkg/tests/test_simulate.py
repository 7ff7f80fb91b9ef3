import numpy as np
import pytest

from jcitransfer.admg import satisfies_background
from jcitransfer.simulate import (
    NOISE_SD,
    LinearScm,
    SimConfig,
    generate_task,
    make_task,
    model_rngs,
    random_model,
    regimes,
    sample,
    shifted_chain_model,
)


@pytest.fixture(scope="module")
def many_models():
    rng = np.random.default_rng(123)
    return [random_model(rng) for _ in range(100_000)]


def test_latent_fraction(many_models):
    frac = np.mean([len(m.latents) > 0 for m in many_models])
    assert abs(frac - 0.5) < 0.01
    counts = np.bincount([len(m.latents) for m in many_models])
    assert len(counts) == 3 and abs(counts[1] - counts[2]) < 0.02 * len(many_models)


def test_structural_rules(many_models):
    for m in many_models[:20_000]:
        for c in m.context:
            assert len(m.children(c)) < 3
        for lat in m.latents:
            assert len(set(m.children(lat))) == 2
        pos = {v: i for i, v in enumerate(m.order)}
        for p, c in m.weights:
            if p in pos:
                assert pos[p] < pos[c]


def test_coefficient_moments(many_models):
    coefs = np.array([w for m in many_models for w in m.weights.values()])
    assert len(coefs) > 100_000
    assert abs(coefs.mean()) < 0.01
    assert coefs.var() == pytest.approx(0.68, abs=0.01)


def test_gamma_scales_context_coefficients():
    a = random_model(np.random.default_rng(5), gamma=1.0)
    b = random_model(np.random.default_rng(5), gamma=10.0)
    for key, w in a.weights.items():
        scale = 10.0 if key[0].startswith("C") else 1.0
        assert b.weights[key] == pytest.approx(scale * w)


def test_zero_coefficients_give_noise_variance():
    scm = LinearScm(("C1", "C2"), ("X1", "X2", "X3"), (), ("X1", "X2", "X3"), {})
    n = 20_000
    rows = sample(scm, n, np.random.default_rng(0))
    assert rows.shape == (3 * n, 5)
    assert rows[:, 0].sum() == n and rows[:, 1].sum() == n
    se = NOISE_SD**2 * np.sqrt(2 / (3 * n))
    for j in range(2, 5):
        assert abs(rows[:, j].var(ddof=1) - 0.0064) < 3 * se


def test_chain_variance_propagation():
    scm = LinearScm(("C1", "C2"), ("X1", "X2"), (), ("X1", "X2"), {("C2", "X1"): 1.0, ("X1", "X2"): 1.0})
    n = 100_000
    rows = sample(scm, n, np.random.default_rng(1))
    obs = rows[:n]
    x1, x2 = obs[:, 2] - obs[:, 2].mean(), obs[:, 3] - obs[:, 3].mean()
    diff = x2**2 - x1**2
    se = diff.std() / np.sqrt(n)
    assert abs(diff.mean() - 0.0064) < 3 * se
    # C2 = 1 shifts X1 and X2 by one unit each
    assert rows[2 * n:, 3].mean() == pytest.approx(1.0, abs=0.01)


def test_regimes():
    np.testing.assert_array_equal(regimes(2), [[0, 0], [1, 0], [0, 1]])


def test_tasks_never_have_direct_c1_to_y():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        scm = random_model(rng)
        rows = np.zeros((3, 5))
        rows[1, 0] = rows[2, 1] = 1
        task = make_task(rows, scm, rng)
        bg = task.background
        assert (bg.c1, bg.y) not in task.graph.directed
        assert satisfies_background(task.graph, bg)


def test_task_masks_one_regime():
    rng = model_rngs(3, 1)[0]
    scm, task = generate_task(rng, 10.0, 200)
    ds = task.dataset
    assert ds.y_mask.sum() == 200 == len(task.truth)
    assert np.all(ds.rows[ds.y_mask, ds.c1] == 1)
    np.testing.assert_array_equal(task.full.rows[ds.y_mask, ds.y], task.truth)
    assert not np.isnan(task.full.rows).any()
    assert task.graph == scm.graph()


def test_determinism():
    def draw(seed):
        return [generate_task(r, 10.0, 50) for r in model_rngs(seed, 5)]

    a, b = draw(7), draw(7)
    for (sa, ta), (sb, tb) in zip(a, b):
        assert sa == sb and sa.weights == sb.weights
        np.testing.assert_array_equal(ta.dataset.rows, tb.dataset.rows)
    assert draw(8)[0][1].dataset.rows.tobytes() != a[0][1].dataset.rows.tobytes()


def test_task_choice_independent_of_sample_size():
    for r1, r2 in zip(model_rngs(0, 10), model_rngs(0, 10)):
        (s1, t1), (s2, t2) = generate_task(r1, 1.0, 20), generate_task(r2, 1.0, 300)
        assert s1 == s2 and t1.background == t2.background


def test_gamma_degeneracy():
    scm = random_model(np.random.default_rng(11), gamma=1e-6)
    n = 100_000
    rows = sample(scm, n, np.random.default_rng(12))
    blocks = [rows[k * n:(k + 1) * n, 2:] for k in range(3)]
    ref = blocks[0]
    for other in blocks[1:]:
        for i in range(3):
            se = np.sqrt(ref[:, i].var() / n + other[:, i].var() / n)
            assert abs(ref[:, i].mean() - other[:, i].mean()) < 3 * se
            for j in range(i, 3):
                a = (ref[:, i] - ref[:, i].mean()) * (ref[:, j] - ref[:, j].mean())
                b = (other[:, i] - other[:, i].mean()) * (other[:, j] - other[:, j].mean())
                se = np.sqrt(a.var() / n + b.var() / n)
                assert abs(a.mean() - b.mean()) < 3 * se


def test_shifted_chain_model_graph(chain_graph):
    assert shifted_chain_model().graph() == chain_graph


def test_latent_projection():
    w = {("L1", "X1"): 0.5, ("L1", "X3"): -0.5, ("X1", "X2"): 1.0}
    scm = LinearScm(("C1", "C2"), ("X1", "X2", "X3"), ("L1",), ("X1", "X2", "X3"), w)
    g = scm.graph()
    assert g.bidirected == {(0, 1), (2, 4)}
    assert g.directed == {(2, 3)}


def test_config_validation():
    SimConfig()
    for bad in ({"n_models": 0}, {"n_samples": -1}, {"gamma": 0.0}, {"alpha": 1.0}):
        with pytest.raises(ValueError):
            SimConfig(**bad)
