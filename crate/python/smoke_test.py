"""Smoke test for the cascadelab Python extension.

Build and install first:  pip install --no-build-isolation -e crates/py
Then run:                 python3 python/smoke_test.py
"""

import math

import cascadelab as cl


def main() -> None:
    diamond = cl.Network.builtin("diamond")
    assert diamond.node_count == 6 and diamond.arc_count == 16

    at_a = cl.Params(diamond).with_single_seed(diamond, "a")

    # Every arc transmits: SIR reaches everyone, distancing stops at a, b, c.
    assert cl.exact(diamond, at_a).mean_extent == 6.0
    assert cl.exact(diamond, at_a, model="fleesir").mean_extent == 3.0

    trajectory = cl.simulate(diamond, at_a, model="fleesir", seed=1)
    assert trajectory.extent == 3 and trajectory.steps[0] == "ISSSSS"

    grid = [i / 20 for i in range(21)]
    points, shape = cl.sweep(diamond, at_a, grid, model="fleesir", mode="exact")
    peak_tau, peak = max(points, key=lambda p: p[1].mean)
    assert shape == "discordant" and 0 < peak_tau < 1 and peak.mean > 3
    _, shape = cl.sweep(diamond, at_a, grid, model="sir", mode="exact")
    assert shape == "concordant"

    k100 = cl.Network.builtin("complete:100")
    seeded = cl.Params(k100, tau=0.3).with_single_seed(k100, "0")
    est = cl.estimate_mean_extent(k100, seeded, model="fleesir", replications=10_000, seed=5)
    assert est.contains(1 + 0.3 * 99), est
    again = cl.estimate_mean_extent(k100, seeded, model="fleesir", replications=10_000, seed=5)
    assert (again.mean, again.half_width_95) == (est.mean, est.half_width_95)

    under = at_a.with_uniform_transmission(0.4)
    over = at_a.with_uniform_transmission(0.7)
    assert over.dominates(under) and not under.dominates(over)
    hi, lo, verdict = cl.compare(diamond, over, under)
    assert verdict == "ordered" and hi.mean > lo.mean

    net, params = cl.Network.from_edge_list("u v 0.3\n", directed=True)
    reduced, reduced_params, offset, dilation = cl.reduce("tau_to_gamma", net, params)
    assert reduced.node_count == 3 and offset == 0.0 and dilation == 2
    helper = reduced.index("h:u→v")
    assert math.isclose(reduced_params.removal[helper], 0.7)
    params.induction = [0.5, 0.0]
    original, via_alpha, holds = cl.verify_reduction("sigma_to_alpha", net, params)
    assert holds and math.isclose(original, via_alpha, abs_tol=1e-12)

    try:
        cl.exact(cl.Network.builtin("karate"), cl.Params(cl.Network.builtin("karate"), sigma=0.5))
    except ValueError as err:
        assert "budget" in str(err) or "nodes" in str(err), err
    else:
        raise AssertionError("oversized exact request should fail")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
