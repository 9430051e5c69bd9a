"""Regenerate the shipped fixtures.

bump.grid         sigmoidal bump height field, 256 x 256, float32
bump_counts.json  critical-point counts of bump.grid from the 8-neighbour scan

The golden counts come from the brute-force oracle, never from the
Morse-Smale code under test.
"""

import json
from pathlib import Path

from qualshape import formats
from qualshape.morse.oracle import neighbor_scan_counts
from qualshape.surfacegen import GridSpec, make_sigmoidal_bump

HERE = Path(__file__).parent


def main():
    s = make_sigmoidal_bump((128, 128), 40, 30)
    formats.write_grid(HERE / "bump.grid", s.sample(GridSpec(256, 256)))
    # counts are taken on the float32 values actually stored in the file
    g = formats.read_grid(HERE / "bump.grid")
    counts = neighbor_scan_counts(g.values)
    formats.atomic_write(HERE / "bump_counts.json", json.dumps(counts, sort_keys=True) + "\n")
    print(counts)


if __name__ == "__main__":
    main()
