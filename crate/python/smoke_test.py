"""Smoke test for the rwre_lab extension module.

Build first:
    cargo build --release -p rwre-py --features extension-module
then run this script from anywhere. If rwre_lab is not installed, the freshly
built shared library is copied next to a temporary import path.
"""

import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import rwre_lab
        return rwre_lab
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "librwre_lab.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp())
            shutil.copy(lib, tmp / "rwre_lab.so")
            sys.path.insert(0, str(tmp))
            import rwre_lab
            return rwre_lab
    sys.exit("rwre_lab not built; run cargo build --release -p rwre-py --features extension-module")


def main():
    m = load()

    b = m.kalikow_bounds(0.999, [0.4995, 0.25, 0.0005, 0.25], [0.2495, 0.25, 0.2505, 0.25])
    assert b["criterion_holds"]
    assert math.isclose(b["lower"], 0.498, abs_tol=1e-12)
    assert math.isclose(b["upper"], 0.499 / 1.0005, abs_tol=1e-12)

    assert m.animal_counts(2, 4) == [1, 4, 18, 85]
    assert math.isclose(m.solomon_velocity([(1.0, [2 / 3, 1 / 3])]), 1 / 3, abs_tol=1e-15)

    p = m.p_star(0.05, 0.2, 2)
    assert math.isclose(m.epsilon_for_p(p, 0.2, 2), 0.05, rel_tol=1e-9)

    spec = json.loads(m.kalikow_spec)
    assert m.validate_spec(json.dumps(spec)) == []
    spec["p"] = 1.5
    assert any("blue probability" in v for v in m.validate_spec(json.dumps(spec)))
    try:
        m.annealed_velocity(json.dumps(spec), 10, 10, 0)
        raise AssertionError("invalid spec accepted")
    except ValueError:
        pass

    v, se = m.annealed_velocity(m.kalikow_spec, 20_000, 50, 1)
    assert abs(v - 0.4984) < 0.01 and se > 0
    assert (v, se) == m.annealed_velocity(m.kalikow_spec, 20_000, 50, 1)

    # a walk forced along +e_1 visits each site on its way exactly once
    assert m.exact_local_time([1.0, 0.0, 0.0, 0.0], 4, [3, 0], 10) == 1.0

    print("rwre_lab smoke test passed")


if __name__ == "__main__":
    main()
