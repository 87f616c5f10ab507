#!/usr/bin/env python3
"""Build environment files from the HetRec 2011 Last.FM / MovieLens releases.

Expects the extracted dataset directories with the tag-assignment files:

    <data_dir>/hetrec2011-lastfm-2k/user_taggedartists.dat
    <data_dir>/hetrec2011-movielens-2k-v2/user_taggedmovies.dat

Datasets must be downloaded manually (grouplens.org); nothing is fetched.
"""

import os
import sys

from conduel.cli import main

DATA = sys.argv[1] if len(sys.argv) > 1 else os.environ.get("CONDUEL_HETREC_DIR", "data/hetrec")
OUT = os.environ.get("CONDUEL_OUT", "out/environments")

SOURCES = {
    "lastfm": os.path.join(DATA, "hetrec2011-lastfm-2k", "user_taggedartists.dat"),
    "movielens": os.path.join(DATA, "hetrec2011-movielens-2k-v2", "user_taggedmovies.dat"),
}

if __name__ == "__main__":
    code = 0
    for name, path in SOURCES.items():
        if not os.path.exists(path):
            print(f"skipping {name}: {path} not found", file=sys.stderr)
            continue
        code = main(
            ["prep", "--tags", path, "--out-file", os.path.join(OUT, f"{name}.json")]
        )
        if code != 0:
            break
    sys.exit(code)
