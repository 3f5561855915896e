#!/usr/bin/env python3
"""Run the headline sample-complexity table at d=50, r=sigma=1,
eps=0.05: sweep the convex family (no lambda reaches eps by n=900)
against the meta-learned spiked first layer (reaches eps by n<=100).

Takes a minute or two at defaults; shrink --trials or the grids for a
quick look. Any `metasep separation` flag passes through.
"""

import sys

from metasep.cli import main

if __name__ == "__main__":
    sys.exit(main(["separation", *sys.argv[1:]]))
