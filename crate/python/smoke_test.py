"""Smoke test for the fvlab_py extension module.

Build and stage the module first:

    cargo build -p fvlab-py --release
    cp target/release/libfvlab_py.so python/fvlab_py.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import fvlab_py as fv  # noqa: E402


def main() -> None:
    assert abs(fv.theta_pd(2.0, 2) - math.pi / 4) < 1e-10
    assert abs(fv.theta_pd(2.0, 3) - math.acos(1 / math.sqrt(3))) < 1e-10
    assert abs(fv.hyp_h(1.0, 2, math.pi / 3) - 0.5) < 1e-12
    assert abs(fv.invert_theta(math.pi / 8, 2) - 4.0) < 1e-8
    assert abs(fv.lipschitz_threshold(10_000, 3) - 1 / math.sqrt(2)) < 1e-3
    assert fv.hawkes_nonintersect(2, 0.5) and not fv.hawkes_nonintersect(2, 1.0)

    unit = fv.Domain.interval(0.0, 1.0)
    assert unit.dim == 1 and unit.contains([0.5]) and not unit.contains([1.5])
    assert abs(unit.dist_to_boundary([0.25]) - 0.25) < 1e-15
    square = fv.Domain.from_json('{"type": "box", "lo": [0, 0], "hi": [1, 1]}')
    assert square.dim == 2
    assert json.loads(fv.Domain.l_shape().to_json())["type"] == "polygon2d"
    try:
        fv.Domain.polygon([[0, 0], [1, 1], [1, 0], [0, 1]])
    except fv.FvlabError:
        pass
    else:
        raise AssertionError("self-intersecting polygon accepted")

    system = fv.FvSystem(unit, [[0.5]] * 10, 1e-3, seed=7)
    jumps = system.run(2000)
    assert system.n == 10 and len(system.positions()) == 10
    assert all(unit.contains(x) for x in system.positions())
    assert system.jump_count == len(jumps) > 0
    taus = [j[1] for j in jumps]
    assert all(b > a for a, b in zip(taus, taus[1:]))
    again = fv.FvSystem(unit, [[0.5]] * 10, 1e-3, seed=7).run(2000)
    assert again == jumps

    masses, reference, l1 = fv.qsd_estimate(unit, 50, 1e-3, 10.0, 2.0, 20, seed=1)
    assert abs(sum(masses) - 1.0) < 1e-12 and abs(sum(reference) - 1.0) < 1e-9
    assert l1 < 0.15

    summary = json.loads(fv.run_experiment(json.dumps({"experiment": "cone-math", "p": [1, 2], "d": [2]})))
    assert summary["pass"] is True and summary["experiment"] == "cone-math"
    summary = json.loads(
        fv.run_experiment(
            json.dumps({"experiment": "extinction", "seed": 3, "nReps": 200, "nChains": 10, "chainLength": 40, "dt": 1e-3})
        )
    )
    assert summary["report"]["sigma"]["mean"] < 0.25
    try:
        fv.run_experiment(json.dumps({"experiment": "qsd"}))
    except fv.FvlabError as e:
        assert "seed" in str(e)
    else:
        raise AssertionError("missing seed accepted")

    print("fvlab_py smoke test passed")


if __name__ == "__main__":
    main()
