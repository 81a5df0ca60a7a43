"""Smoke test for the pywquant extension module."""

import json
import math

import pywquant as wq


def main():
    # uniform on [-1/2, 1/2], dirac quantization: W_p = h / (2 (p+1)^(1/p))
    u = wq.Measure.uniform_cube(1)
    z = wq.Lattice.integer(1)
    for p in (1.0, 2.0):
        a = wq.quantize_lattice(u, z, 0.125, "dirac")
        ev = wq.evaluate(u, a, p)
        exact = 0.125 / (2 * (p + 1) ** (1 / p))
        assert abs(ev["measured"] - exact) < 1e-9, (ev, exact)
        assert abs(wq.coupling_cost(u, a, p) - exact) < 1e-9

    g = wq.Measure.gaussian([0.0, 0.0], 0.3, 4.0)
    hexl = wq.Lattice.hexagonal()
    diam, rad = hexl.cell_geometry()
    a = wq.quantize_lattice(g, hexl, 0.25, "indicator")
    ev = wq.evaluate(g, a, 2.0)
    assert ev["measured"] <= ev["coupling"] + 1e-8 <= diam * 0.25 + 1e-8
    b = wq.Approximant.from_json(a.to_json())
    assert b.masses() == a.masses() and len(b) == len(a)

    x = wq.Measure.atoms([[0.0], [1.0]])
    y = wq.Measure.atoms([[0.0], [2.0]])
    assert abs(wq.wasserstein(x, y, 1.0) - 0.5) < 1e-12

    far = wq.Measure.atoms([[0.0, 3.0]])
    assert abs(wq.truncation_error(far, 1.0, 2.0) - 2.0) < 1e-12
    report = json.loads(wq.tail_report(g, 0.1, 2.0, 1.0))
    assert set(report) >= {"total_bound", "conditions_pass"}

    for name, lhs, rhs in wq.moment_bounds(g, z if g.dim == 1 else wq.Lattice.integer(2), 0.5, 2.0):
        assert lhs <= rhs + 1e-9, name

    sites = [[-0.25, -0.25], [0.25, 0.3], [0.1, -0.4]]
    a = wq.quantize_nonuniform(wq.Measure.uniform_cube(2), sites)
    assert math.isclose(sum(a.masses()), 1.0)
    print("pywquant smoke test passed")


if __name__ == "__main__":
    main()
