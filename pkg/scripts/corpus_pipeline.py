"""
Run every bundled model through the whole toolchain and write the artifacts
(canonical text, simplified levels, DOT views, JSON, traces) to a directory.

    python scripts/corpus_pipeline.py --out build/corpus
    dot -Tsvg build/corpus/atm.behavior.dot -o atm.svg   # optional, needs graphviz
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from thingc.cli import CORPUS_DIR, CORPUS_MODELS, scenarios_of
from thingc.core import check_model, flow_relation
from thingc.dsl import parse_file, serialize
from thingc.events import build_behavior, detect_send_events, has_cycle, weak_components
from thingc.render import (
    export_json, render_behavior_dot, render_model_dot, render_usecase_dot,
)
from thingc.sim import load_scenario_file, occurrence_violations, simulate, trace_to_events
from thingc.transform import reduce_to_use_case, simplify_level1, simplify_level2


@dataclass
class PipelineConfig:
    out: str = "build/corpus"
    models: tuple = CORPUS_MODELS


def process(name: str, out: Path) -> str:
    m = check_model(parse_file(CORPUS_DIR / f"{name}.tm"))
    l1, l2 = simplify_level1(m), simplify_level2(m)
    g = build_behavior(m)
    files = {
        f"{name}.tm": serialize(m),
        f"{name}.level1.tm": serialize(l1),
        f"{name}.level2.tm": serialize(l2),
        f"{name}.dot": render_model_dot(m),
        f"{name}.overlay.dot": render_model_dot(m, m.events),
        f"{name}.level2.dot": render_model_dot(l2),
        f"{name}.behavior.dot": render_behavior_dot(g, name),
        f"{name}.behavior.json": export_json(g),
        f"{name}.usecase.dot": render_usecase_dot(reduce_to_use_case(m)),
        f"{name}.model.json": export_json(m),
    }
    bad = 0
    for path in scenarios_of(name):
        trace = simulate(m, load_scenario_file(path, m))
        occ = trace_to_events(trace, m.events, m)
        bad += len(occurrence_violations(occ, g))
        files[f"{path.stem}.trace.jsonl"] = trace.to_jsonl()
        files[f"{path.stem}.occurrences.json"] = export_json(occ, "occurrences")
    for fname, text in files.items():
        (out / fname).write_text(text, encoding="utf-8")
    return (f"{name:<14} stages {len(m.stages):>3} -> {len(l1.stages):>3} -> {len(l2.stages):>3}  "
            f"flows kept {len(flow_relation(l2))}/{len(flow_relation(m))}  "
            f"events {len(g.nodes):>2}  edges {len(g.edges):>2}  components {len(weak_components(g))}  "
            f"{'cyclic ' if has_cycle(g) else 'acyclic'}  sends {len(detect_send_events(m)):>2}  "
            f"order violations {bad}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--out", default=PipelineConfig.out)
    args = ap.parse_args(argv)
    cfg = PipelineConfig(out=args.out)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in cfg.models:
        print(process(name, out))
    print(f"artifacts in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
