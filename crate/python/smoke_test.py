"""Quick check that the extension module imports and runs the main paths."""

import json
import math
import tempfile
from pathlib import Path

import periodic_inclusions_py as pi


def main():
    g = pi.TimeGrid(1.0, 1000)
    assert g.n_steps == 1000 and abs(g.tau - 1e-3) < 1e-15
    assert len(g.times()) == 1001

    u = pi.solve_cauchy_scalar(1.0, 1.0, g)
    assert abs(u[-1] - math.exp(-1.0)) < 1e-3, u[-1]

    k0 = pi.poincare_scalar(2.0, 0.0, g)
    k1 = pi.poincare_scalar(2.0, 1.0, g)
    assert abs(k1 - k0) <= math.exp(-2.0) * 1.01

    assert pi.prox("abs", 1.0, 0.5, [2.0, 0.2, -1.0]) == [1.5, 0.0, -0.5]
    assert pi.weak_norm([1.0, -1.0], 1.0) <= 1.0
    assert pi.hausdorff([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0

    assert "cos_periodic" in pi.oracle_names()
    vals = dict(pi.oracle("cos_periodic"))
    assert vals, vals

    heat = pi.stationary_heat(49, 1.0, 1.0)
    assert abs(max(heat) - 0.125) < 1e-3, max(heat)

    scn = pi.Scenario.builtin("cos_periodic")
    assert scn.workflow == "periodic_fixed_h"
    diag = json.loads(scn.diagnostics_json())
    assert diag["status"] == "verified", diag
    out = scn.execute()
    assert len(out.times) == len(out.states) == len(out.forcing) + 1
    assert abs(out.states[0][0] - out.states[-1][0]) < 1e-8
    json.loads(out.report_json())

    with tempfile.TemporaryDirectory() as d:
        status, files = scn.run(d)
        assert status == "ok", status
        assert (Path(d) / "trajectory.csv").is_file(), files

    try:
        pi.Scenario.parse("name = 1")
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    print(f"ok: {len(pi.builtin_names())} builtin scenarios")


if __name__ == "__main__":
    main()
