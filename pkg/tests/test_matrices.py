import numpy as np
import pytest

from gossiplab.errors import DyadicOverflowError, ExactnessWarning
from gossiplab.graphs import SelectionMatrix, induced_graph, laplacian
from gossiplab.matrices import (DyadicVector, StochasticMatrix,
                                asymmetric_update, delta_coefficient,
                                expected_update_dependent,
                                expected_update_independent, identity_update,
                                is_finite_consensus, is_scrambling,
                                lambda_coefficient, product_chain,
                                second_largest_eigenvalue_symmetric,
                                symmetric_update)


def random_stochastic(rng, n):
    raw = rng.random((n, n)) + 1e-9
    return StochasticMatrix(floats=raw / raw.sum(axis=1, keepdims=True),
                            validate=False)


def delta_oracle(f):
    # direct evaluation: max over columns of the largest pairwise row gap
    n = f.shape[0]
    best = 0.0
    for j in range(n):
        for a in range(n):
            for b in range(n):
                best = max(best, abs(f[a, j] - f[b, j]))
    return best


def lambda_oracle(f):
    n = f.shape[0]
    worst = 1.0
    for a in range(n):
        for b in range(n):
            worst = min(worst, sum(min(f[a, j], f[b, j]) for j in range(n)))
    return 1.0 - worst


def test_delta_examples():
    assert delta_coefficient(np.eye(3)) == 1.0
    rank_one = np.tile([0.2, 0.3, 0.5], (3, 1))
    assert delta_coefficient(rank_one) == 0.0
    w = symmetric_update(0, 1, 3).expand()
    assert delta_coefficient(w) == 1.0  # rows 0 and 2 differ by 1 in column 2


def test_lambda_examples():
    assert lambda_coefficient(np.eye(3)) == 1.0
    assert lambda_coefficient(np.full((3, 3), 1 / 3)) == pytest.approx(0.0)
    assert lambda_coefficient(symmetric_update(0, 1, 3).expand()) == 1.0
    assert not is_scrambling(np.eye(3))
    assert is_scrambling(np.full((3, 3), 1 / 3))


def test_coefficients_match_direct_evaluation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = random_stochastic(rng, int(rng.integers(2, 6)))
        assert delta_coefficient(m) == pytest.approx(delta_oracle(m.f))
        assert lambda_coefficient(m) == pytest.approx(lambda_oracle(m.f))


def test_expand_symmetric():
    w = symmetric_update(0, 1, 3).expand()
    assert w.mode == "dyadic"
    expect = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    assert np.array_equal(w.to_floats(), expect)
    # doubly stochastic projection: W^T = W and W @ W = W
    f = w.to_floats()
    assert np.array_equal(f, f.T)
    assert (w @ w) == w


def test_expand_asymmetric():
    w = asymmetric_update(0, 1, 3).expand()
    expect = np.array([[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.array_equal(w.to_floats(), expect)
    f = w.to_floats()
    assert not np.array_equal(f.sum(axis=0), np.ones(3))  # not doubly stochastic


def test_expand_identity_and_validation():
    assert np.array_equal(identity_update(3).expand().to_floats(), np.eye(3))
    with pytest.raises(ValueError):
        symmetric_update(1, 1, 3)
    with pytest.raises(ValueError):
        asymmetric_update(0, 3, 3)
    with pytest.raises(ValueError):
        identity_update(3).expand().__class__(nums=[[1, 1], [0, 1]], exp=0)


def test_product_chain_projection_and_identity():
    w = symmetric_update(0, 1, 3).expand()
    assert product_chain([w, w]) == w
    ident = StochasticMatrix.identity(3)
    assert product_chain([ident, ident, ident]) == ident


def test_product_chain_orientation_newest_left():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mats = [random_stochastic(rng, 4) for _ in range(4)]
        prod = product_chain(mats)
        want = mats[3].f @ mats[2].f @ mats[1].f @ mats[0].f
        assert np.allclose(prod.f, want, atol=1e-14)


def test_product_entry_floor_example():
    chain = [asymmetric_update(0, 1, 3).expand(), symmetric_update(1, 2, 3).expand()]
    prod = product_chain(chain)
    f = prod.to_floats()
    assert f[f > 0].min() >= 0.25  # two factors: floor 2^-2
    # independent float-arithmetic cross-check
    want = chain[1].to_floats() @ chain[0].to_floats()
    assert np.array_equal(f, want)


def test_dyadic_product_exact_and_overflow():
    w = symmetric_update(0, 1, 3).expand()
    prod = product_chain([w] * 50)
    assert prod == w  # projection, exactly, no float drift
    # odd off-diagonal numerators keep the denominator growing every multiply
    grower = StochasticMatrix(nums=[[1, 3], [3, 1]], exp=2)
    with pytest.raises(DyadicOverflowError):
        product_chain([grower] * 5000)


def test_dyadic_row_sum_validation():
    with pytest.raises(ValueError):
        StochasticMatrix(nums=[[1, 1, 1], [2, 1, 1], [1, 1, 2]], exp=2)
    m = StochasticMatrix(nums=[[2, 1, 1], [1, 2, 1], [1, 1, 2]], exp=2)
    assert m.to_floats().sum(axis=1) == pytest.approx([1, 1, 1])


def test_is_finite_consensus():
    rank_one = StochasticMatrix(nums=[[1, 2, 1]] * 3, exp=2)
    assert is_finite_consensus(rank_one)
    assert not is_finite_consensus(StochasticMatrix.identity(3))
    with pytest.warns(ExactnessWarning):
        assert is_finite_consensus(np.tile([0.25, 0.75], (2, 1)))


def test_contraction_bound_random_chains():
    rng = np.random.default_rng(11)
    for _ in range(200):
        mats = [random_stochastic(rng, 3) for _ in range(int(rng.integers(1, 5)))]
        prod = product_chain(mats)
        bound = 1.0
        for m in mats:
            bound *= lambda_coefficient(m)
        assert delta_coefficient(prod) <= bound + 1e-12


def test_graph_union_absorbed_by_product():
    rng = np.random.default_rng(13)
    kinds = [symmetric_update, asymmetric_update]
    for _ in range(100):
        n = 4
        mats = []
        for _ in range(int(rng.integers(1, 6))):
            i, j = rng.choice(n, size=2, replace=False)
            mats.append(kinds[int(rng.integers(0, 2))](int(i), int(j), n).expand())
        prod = product_chain(mats)
        union = set()
        for m in mats:
            union |= induced_graph(m.to_floats()).arcs
        assert union <= induced_graph(prod.to_floats()).arcs


def test_expected_update_dependent_formula():
    sel = SelectionMatrix.complete_uniform(3)
    assert np.array_equal(expected_update_dependent(sel, 0.0).to_floats(), np.eye(3))
    ew = expected_update_dependent(sel, 1.0)
    want = np.eye(3) - laplacian(sel.a) / 6
    assert np.allclose(ew.to_floats(), want, atol=1e-15)
    assert second_largest_eigenvalue_symmetric(ew) == pytest.approx(0.5, abs=1e-9)


def test_expected_update_dependent_matches_mixture():
    # probability-weighted sum over the one-coin sample space
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(3, 6))
        raw = rng.random((n, n))
        np.fill_diagonal(raw, 0.0)
        sel = SelectionMatrix(raw / raw.sum(axis=1, keepdims=True))
        p = float(rng.random())
        mix = np.zeros((n, n))
        total = 0.0
        for i in range(n):
            for j in range(i):
                pij = (sel.a[i, j] + sel.a[j, i]) / n * p
                mix += pij * symmetric_update(i, j, n).expand().to_floats()
                total += pij
        mix += (1 - total) * np.eye(n)
        assert np.allclose(expected_update_dependent(sel, p).to_floats(), mix,
                           atol=1e-12)


def test_expected_update_dependent_eigenvalue_identity():
    rng = np.random.default_rng(19)
    for _ in range(30):
        n = int(rng.integers(3, 6))
        raw = rng.random((n, n))
        np.fill_diagonal(raw, 0.0)
        sel = SelectionMatrix(raw / raw.sum(axis=1, keepdims=True))
        p = float(rng.uniform(0.05, 1.0))
        lam2_star = float(np.linalg.eigvalsh(laplacian(sel.a))[1])
        got = second_largest_eigenvalue_symmetric(expected_update_dependent(sel, p))
        assert got <= 1 - lam2_star * p / (2 * n) + 1e-9


def test_expected_update_independent_cases():
    sel = SelectionMatrix.complete_uniform(3)
    assert np.array_equal(expected_update_independent(sel, 0, 0).to_floats(), np.eye(3))
    both = expected_update_independent(sel, 1.0, 1.0).to_floats()
    assert np.allclose(both, expected_update_dependent(sel, 1.0).to_floats(),
                       atol=1e-14)
    one_way = expected_update_independent(sel, 1.0, 0.0).to_floats()
    assert one_way.sum(axis=1) == pytest.approx([1, 1, 1], abs=1e-12)
    # one-sided mixture entries are a_ij/(2n); symmetric A keeps it symmetric,
    # an asymmetric A does not
    assert np.allclose(one_way, np.eye(3) * (1 - 1 / 6) + sel.a / 6, atol=1e-14)
    ring = SelectionMatrix.directed_cycle(3)
    ring_one_way = expected_update_independent(ring, 1.0, 0.0).to_floats()
    assert ring_one_way.sum(axis=1) == pytest.approx([1, 1, 1], abs=1e-12)
    assert not np.allclose(ring_one_way, ring_one_way.T)


def test_expected_update_independent_symmetric_when_equal():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(3, 6))
        raw = rng.random((n, n))
        np.fill_diagonal(raw, 0.0)
        sel = SelectionMatrix(raw / raw.sum(axis=1, keepdims=True))
        p = float(rng.random())
        e = expected_update_independent(sel, p, p).to_floats()
        assert np.allclose(e, e.T, atol=1e-14)
        assert e.sum(axis=1) == pytest.approx(np.ones(n), abs=1e-12)


def test_dyadic_vector_roundtrip_and_averaging():
    v = DyadicVector.from_floats([0.0, 1.0, 0.5])
    assert v.exp == 1 and v.nums == (0, 2, 1)
    assert np.array_equal(v.to_floats(), [0.0, 1.0, 0.5])
    before = v.sum_fraction()
    w = v.averaged(0, 1, both=True)
    assert w.sum_fraction() == before
    assert w.to_floats() == pytest.approx([0.5, 0.5, 0.5])
    assert w.all_equal()
    one_sided = v.averaged(0, 1, both=False)
    assert one_sided.sum_fraction() != before  # one-sided move shifts the sum
    assert not one_sided.all_equal()


def test_dyadic_vector_random_bits_exact():
    rng = np.random.default_rng(29)
    ints = rng.integers(0, 1 << 53, size=5, dtype=np.int64)
    v = DyadicVector._reduced([int(x) for x in ints], 53)
    assert np.array_equal(v.to_floats(), ints.astype(float) / float(1 << 53))
