#!/usr/bin/env python3
"""Regenerate the bundled rotor coefficient table.

Evaluates the analytic C_t / C_q surrogate on the standard
(tip-speed ratio, blade pitch) grid and rewrites
src/floatfarm/data/rotor_coeffs.dat.  Output is deterministic, so a
rerun leaves a clean git tree.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from floatfarm import rotor  # noqa: E402


def main() -> None:
    table = rotor.build_default_table()
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "floatfarm" / "data" / "rotor_coeffs.dat"
    rotor.write_coefficient_table(table, out)
    cp = table.cq * table.tsr_axis[:, None]
    print(f"wrote {out}")
    print(f"  grid: {len(table.tsr_axis)} lambda x {len(table.pitch_axis)} beta nodes")
    print(f"  max C_p = {cp.max():.4f} (Betz limit 0.593)")
    print(f"  C_t range = [{table.ct.min():.4f}, {table.ct.max():.4f}]")


if __name__ == "__main__":
    main()
