"""
Stage and arc counts per simplification level for the bundled corpus, with
the stages level 2 has to keep.

    python scripts/simplification_census.py
"""

import sys
from dataclasses import dataclass

from thingc.cli import CORPUS_DIR, CORPUS_MODELS
from thingc.dsl import parse_file
from thingc.transform import simplify_level1, simplify_level2, stage_census


@dataclass
class CensusConfig:
    models: tuple = CORPUS_MODELS


def main() -> int:
    cfg = CensusConfig()
    kinds = ("create", "process", "release", "transfer", "receive")
    print(f"{'model':<14} {'level':>5} " + " ".join(f"{k[:4]:>4}" for k in kinds) + "  arcs  kept")
    for name in cfg.models:
        m = parse_file(CORPUS_DIR / f"{name}.tm")
        warns: list = []
        levels = [(0, m), (1, simplify_level1(m)), (2, simplify_level2(m, warns))]
        for level, x in levels:
            c = stage_census(x)
            kept = ",".join(str(w.location) for w in warns) if level == 2 else ""
            print(f"{name:<14} {level:>5} " + " ".join(f"{c[k]:>4}" for k in kinds) + f"  {len(x.arcs):>4}  {kept}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
