"""Smoke test for the metric_dcov extension module; exits nonzero on failure."""

import math
import random

import metric_dcov as md


def main():
    rng = random.Random(0)
    x = [rng.gauss(0.0, 1.0) for _ in range(60)]

    r = md.dcov(x, [2.0 * v for v in x])
    assert abs(r["dcor"] - 1.0) < 1e-12, r
    assert r["n"] == 60

    # a constant marginal leaves dcor undefined
    assert md.dcov(x, [1.0] * 60)["dcor"] is None

    y = [v + rng.gauss(0.0, 1.0) for v in x]
    p = md.permutation_test(x, y, permutations=199, seed=7)
    assert p == md.permutation_test(x, y, permutations=199, seed=7)
    assert 0.0 < p["p_value"] <= 1.0 / 200 + 1e-15, p
    a = md.asymptotic_test(x, y, mc_draws=499, seed=7)
    assert a["p_value"] < 0.01, a

    z = [rng.gauss(0.0, 1.0) for _ in range(60)]
    q = md.permutation_test(x, z, metric_x="minkowski:1.5", metric_y=md.Metric("euclidean", 0.5), seed=1)
    assert 0.0 < q["p_value"] <= 1.0

    labels = ["a", "b", "a", "c", "b", "c"]
    d = md.distance_matrix(labels, "discrete")
    assert d.n == 6 and d[0, 2] == 0.0 and d[0, 1] == 1.0

    # the euclidean unit square embeds isometrically
    square = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    rep = md.negtype_check(square)
    assert rep["verdict"] == "negative_type_on_sample", rep
    emb = md.embed(square)
    dm = md.distance_matrix(square)
    for i in range(4):
        for j in range(4):
            sq = sum((u - v) ** 2 for u, v in zip(emb[i], emb[j]))
            assert abs(sq - dm[i, j]) < 1e-9

    star = [[0, 1, 1, 1, 1], [1, 0, 2, 2, 2], [1, 2, 0, 2, 2], [1, 2, 2, 0, 2], [1, 2, 2, 2, 0]]
    k = md.DistanceMatrix([[float(v) for v in row] for row in star])
    # tree metrics are of negative type; squaring the star metric breaks it
    sq = md.DistanceMatrix([[float(v * v) for v in row] for row in star])
    assert k.negtype_check()["verdict"] == "negative_type_on_sample"
    bad = sq.negtype_check()
    assert bad["verdict"] == "violation", bad
    w = bad["witness"]
    assert abs(sum(w)) < 1e-9
    qf = sum(w[i] * w[j] * sq[i, j] for i in range(5) for j in range(5))
    assert qf > 0.0 and math.isclose(qf, bad["witness_quadratic_form"], rel_tol=1e-9, abs_tol=1e-12)
    try:
        sq.embed()
    except ValueError:
        pass
    else:
        raise AssertionError("embedding a violation must fail")

    c = md.categorical_dcov([[10, 0], [0, 10]])
    assert abs(c["dcov"] - 0.25) < 1e-15, c
    assert abs(md.categorical_dcov([[2, 4], [3, 6]])["dcov"]) < 1e-15
    assert abs(md.pearson_chisq([[10, 0], [0, 10]]) - 20.0) < 1e-12

    for bad_input in (lambda: md.dcov([1.0, 2.0], [1.0]), lambda: md.Metric("nope"), lambda: md.dcov([1.0, float("nan")], [1.0, 2.0])):
        try:
            bad_input()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    try:
        import numpy as np
    except ImportError:
        np = None
    if np is not None:
        arr = np.arange(12, dtype=float).reshape(6, 2)
        assert md.distance_matrix(arr).n == 6

    print("smoke test passed")


if __name__ == "__main__":
    main()
