"""Smoke test for the nomamimo_py extension.

    cd crates/py && maturin develop --release && python ../../python/smoke_test.py
"""

import math

import nomamimo_py as nm


def main():
    b1, b2 = 10 ** 1.5, 10 ** -0.5
    value, ceil = nm.m_star(b1, b2, 1.0)
    assert abs(value - 10.16) < 0.01 and ceil == 11, (value, ceil)

    scn = nm.Scenario(25, [b1, b2], trials=2000, seed=3)
    assert math.isclose(scn.tau, 0.98)
    noma, mmimo = nm.two_user_sum_rates(scn, 1.0)
    assert math.isclose(noma, 0.98 * math.log2(1 + 25 * b1), rel_tol=1e-12)

    powers, report = nm.solve_p1(scn, "mmimo")
    assert abs(powers[0] - 0.5681) < 1e-3, powers
    assert report.method == "closed_form_perfect_csi"

    p = nm.waterfill([10.0, 5.0, 2.0, 1.0], 1.0)
    assert math.isclose(sum(p), 1.0)

    cf = nm.mmimo_rate_cf(scn, [0.5, 0.5])
    mc = nm.ergodic_rates_mc(scn, "mmimo", [0.5, 0.5])
    assert all(m + 3 * s >= c for m, s, c in zip(mc.per_user_rates, mc.standard_error, cf.per_user_rates))
    ub = nm.noma_bounds(scn, [0.7, 0.3])
    mc = nm.ergodic_rates_mc(scn, "noma", [0.7, 0.3], "estimated")
    assert mc.sum_rate <= ub.sum_rate

    [(at_center, at_edge, margin, se, ok)] = nm.sic_feasible(scn, [0.7, 0.3])
    assert ok and at_center > at_edge

    betas = nm.sample_placement(4, 1.0, seed=9, index=2)
    assert min(betas[:2]) > max(betas[2:])
    assert betas == nm.sample_placement(4, 1.0, seed=9, index=2)

    csv = nm.run_experiment("sumrate-vs-m-2user")
    assert "crossing_integer=11" in csv
    assert nm.render_svg("sumrate-vs-m-2user", csv).startswith("<svg")

    try:
        nm.Scenario(25, [1.0, 2.0, 3.0])
    except ValueError as e:
        assert "K must be even" in str(e)
    else:
        raise AssertionError("odd K accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
