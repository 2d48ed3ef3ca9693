#!/usr/bin/env python3
"""Exercise the full pipeline on the synthetic reference scene.

Renders a bundle, builds its scene graph, generates template QA, then
scores the generated answers against their own records. A healthy install
prints a report with success_rate 1.0.
"""

import argparse
import json
import tempfile
from pathlib import Path

from spatialqa.cli import main as cli


def run(workdir: Path, seed: int) -> int:
    bundles = workdir / "bundles"
    graphs = workdir / "graphs"
    qa = workdir / "qa.jsonl"

    from spatialqa.bundleio import write_bundle
    from spatialqa.synthetic import two_box_scene

    bundle, _ = two_box_scene()
    write_bundle(bundle, bundles / bundle.image_id)

    for step in (
        ["validate", str(bundles)],
        ["build-graph", str(bundles), "--out", str(graphs)],
        ["gen-qa", str(graphs), "--out", str(qa), "--seed", str(seed)],
        ["stats", str(qa)],
    ):
        code = cli(step)
        if code != 0:
            return code

    # Score the generated answers against their own ground truth.
    records = workdir / "records.jsonl"
    responses = workdir / "responses.jsonl"
    with open(qa, encoding="utf-8") as fh, \
            open(records, "w", encoding="utf-8") as rec, \
            open(responses, "w", encoding="utf-8") as resp:
        for i, line in enumerate(fh):
            doc = json.loads(line)
            rec.write(json.dumps({
                "id": f"qa-{i}",
                "category": doc["category"],
                "question": doc["question"],
                "gt_answer": doc["answer"],
                "gt_value": doc["ground_truth_value"],
            }) + "\n")
            resp.write(json.dumps({"id": f"qa-{i}", "response": doc["answer"]}) + "\n")

    return cli(["evaluate", str(records), str(responses), "--out", str(workdir / "report")])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=None,
                        help="keep intermediate files here instead of a temp dir")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.workdir is not None:
        args.workdir.mkdir(parents=True, exist_ok=True)
        return run(args.workdir, args.seed)
    with tempfile.TemporaryDirectory(prefix="spatialqa-demo-") as tmp:
        return run(Path(tmp), args.seed)


if __name__ == "__main__":
    raise SystemExit(main())
