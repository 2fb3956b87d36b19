#!/usr/bin/env python3
"""Smoke test for the netident_py extension module.

Builds nothing itself: run `cargo build -p netident-py` (or --release)
first, then `python3 python/smoke_test.py`. The script stages the cdylib
under the import name Python expects and drives one pass through each
binding: design, solve, table detection, exact reconstruction, and the
ODE simulator.
"""

import shutil
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    """Copy the built cdylib into a temp dir as netident_py.so."""
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libnetident_py.so", "libnetident_py.dylib", "netident_py.dll")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built extension found; run `cargo build -p netident-py` first")
    stage = Path(tempfile.mkdtemp(prefix="netident-py-"))
    suffix = ".pyd" if built.suffix == ".dll" else ".so"
    shutil.copy2(built, stage / f"netident_py{suffix}")
    sys.path.insert(0, str(stage))


stage_module()
import netident_py as ni  # noqa: E402


def check(label, cond):
    if not cond:
        sys.exit(f"FAIL: {label}")
    print(f"ok: {label}")


# Graphs: construction, keys, connectivity.
path3 = ni.Graph.path(3)
check("path graph edges", path3.edges == [(1, 2), (2, 3)])
check("key roundtrip", ni.Graph.from_key(3, path3.key) == path3)
check("connectivity", path3.is_connected() and not ni.Graph.empty(3).is_connected())

# The documented two-agent example: unit gains, family {empty, edge}.
# The steady-state entries have numerators up to 2 over denominator 3,
# so the designed base is (2*2+1)*3 + 1 = 16 and w = (1, 16).
m2 = ni.Model.lti([1, 1], [1])
fam2 = ni.Family.all(2)
n_bound, d, base = ni.radix_bounds(m2, fam2)
check("radix bounds N=2 D=3 M=16", (n_bound, d, base) == (2, 3, 16))
w2 = ni.IndicationVector.radix(m2, fam2)
check("radix vector", w2.exact == ["1", "16"] and w2.radix_params == (16, 2, 3))

# Exact steady state of the coupled pair: y = -(A + B L)^{-1} w.
sol = ni.solve_steady_state(m2, ni.Graph.complete(2), w2)
check("exact pair solve", sol["y_exact"] == ["-6", "-11"])

# One exact measurement identifies an n=3 path with heterogeneous gains.
m3 = ni.Model.lti([1, 1, 1], ["1", "1/2", "3"])
fam3 = ni.Family.all(3)
w3 = ni.IndicationVector.radix(m3, fam3)
hidden = ni.Graph.path(3)
y = ni.solve_steady_state(m3, hidden, w3)["y_exact"]
rec = ni.reconstruct_lti_exact(m3, w3, y)
check("reconstructed graph", rec["graph"] == hidden)
check("reconstructed weights", rec["weights"] == ["1", "3"])
check("decode budget", rec["decode_ops"] == 9)

# Float-path reconstruction tolerates a small honest error claim.
y_float = ni.solve_steady_state(m3, hidden, w3)["y"]
rec_f = ni.reconstruct_lti(m3, w3, y_float, claimed_err=1e-9)
check("float-path reconstruction", rec_f["graph"] == hidden)

# Nonlinear (Hopfield) nodes: gaussian input, table lookup, simulation.
nm = ni.Model.neural([0.6, 0.85, 0.7], 0.1)
wg = ni.IndicationVector.gaussian(3, seed=7, scale=1.0)
sep = ni.separation_index(nm, fam3, wg)
check("separation positive", sep["epsilon"] > 0 and sep["member_count"] == 8)
table = ni.build_table(nm, fam3, wg)
check("table size", len(table) == 8 and table.epsilon == sep["epsilon"])
check("table text roundtrip",
      ni.Table.from_text(table.to_text(), nm.fingerprint).epsilon == table.epsilon)

y_hidden = ni.solve_steady_state(nm, hidden, wg)["y"]
det = table.detect(ni.gauge_align(nm, y_hidden))
check("detection", det["graph"] == hidden and det["confident"])

verdict = ni.run_to_convergence(nm, hidden, wg)
check("simulation converged", verdict["converged"])
check("simulation matches solver", verdict["newton_gap"] < 1e-6)
check("simulated detection",
      table.detect(verdict["y"])["graph"] == hidden)

traj = ni.simulate(nm, hidden, wg, t_end=5.0)
check("trajectory shape",
      len(traj["t"]) == len(traj["y"]) and len(traj["y"][0]) == 3)

# Exact strings agree with the floats they annotate.
frac = Fraction(sol["y_exact"][0])
check("exact/float agreement", abs(float(frac) - sol["y"][0]) < 1e-12)

print("all smoke tests passed")
