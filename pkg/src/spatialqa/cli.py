"""Command-line pipeline driver.

Subcommands cover the full path from raw bundles to a score report:

    validate     check that bundle directories are well formed
    build-graph  bundles -> one scene-graph JSON file per image
    gen-qa       scene graphs -> QA records (templates, optionally an LLM)
    evaluate     QA records + model responses -> score report
    stats        QA records -> category and provenance counts

Exit codes: 0 success, 1 malformed input or config, 2 filesystem trouble,
3 external endpoint failure. Outputs are written atomically and are
byte-stable across reruns with the same inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .bundleio import atomic_write_text, discover_bundles, read_bundle
from .config import PipelineConfig, load_config, make_llm_client
from .errors import BundleFormatError, ClientError, SpatialQaError
from .evaluation import LlmJudge, RuleJudge, aggregate, load_bench_records, load_responses
from .qa import (
    build_llm_prompt,
    gen_template_qa,
    llm_generate_qa,
    qa_to_jsonl,
    read_qa_jsonl,
    render_description,
)
from .scenegraph import SceneGraph, build_scene_graph, graph_from_text, graph_to_text
from .templates import QaCategory, load_template_set

log = logging.getLogger(__name__)

GRAPH_SUFFIX = ".graph.json"


def _config_from_args(args) -> PipelineConfig:
    return load_config(args.config) if args.config else PipelineConfig()


def _bundles_under(path: Path) -> list[Path]:
    found = discover_bundles(path)
    if not found:
        raise BundleFormatError(f"no bundles under {path}")
    return found


def _load_graphs(path: Path) -> list[SceneGraph]:
    if path.is_file():
        files = [path]
    else:
        files = sorted(path.glob(f"*{GRAPH_SUFFIX}"))
        if not files:
            raise BundleFormatError(f"no {GRAPH_SUFFIX} files under {path}")
    return [graph_from_text(f.read_text(encoding="utf-8")) for f in files]


def cmd_validate(args) -> int:
    failures = 0
    for directory in _bundles_under(Path(args.path)):
        try:
            bundle = read_bundle(directory)
        except BundleFormatError as exc:
            print(f"{directory}: FAIL {exc}")
            failures += 1
            continue
        print(f"{directory}: ok ({bundle.image_id}, {len(bundle.instances)} instances)")
    if failures:
        print(f"{failures} invalid bundle(s)")
        return 1
    return 0


def cmd_build_graph(args) -> int:
    config = _config_from_args(args)
    directories = _bundles_under(Path(args.path))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def build(directory: Path) -> SceneGraph:
        return build_scene_graph(read_bundle(directory), config.denoise)

    # Workers only parse and build; writes happen in input order afterwards
    # so output and logs do not depend on scheduling.
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            graphs = list(pool.map(build, directories))
    else:
        graphs = [build(d) for d in directories]
    for graph in graphs:
        target = out_dir / f"{graph.image_id}{GRAPH_SUFFIX}"
        atomic_write_text(target, graph_to_text(graph))
        print(f"{target}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return 0


def cmd_gen_qa(args) -> int:
    config = _config_from_args(args)
    templates = load_template_set()
    seed = config.qa.seed if args.seed is None else args.seed
    client = make_llm_client(config.llm) if args.llm else None
    lines: list[str] = []
    total = 0
    for graph in _load_graphs(Path(args.path)):
        pairs = gen_template_qa(
            graph,
            templates,
            seed=seed,
            per_pair_quota=config.qa.per_pair_quota,
            randomize_units=config.qa.randomize_units,
        )
        if client is not None:
            description = render_description(graph, config.qa.max_description_facts)
            payload = build_llm_prompt(description, templates.few_shot)
            pairs.extend(llm_generate_qa(payload, client, graph.image_id, len(graph.nodes)))
        lines.append(qa_to_jsonl(pairs))
        total += len(pairs)
    atomic_write_text(Path(args.out), "".join(lines))
    print(f"{args.out}: {total} QA pairs")
    return 0


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    records = load_bench_records(args.records)
    responses = load_responses(args.responses)
    judge = LlmJudge(make_llm_client(config.llm)) if args.judge == "llm" else RuleJudge()
    report = aggregate(records, responses, judge=judge)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out.with_suffix(".json"), report.to_json_text())
    atomic_write_text(out.with_suffix(".txt"), report.to_table())
    print(report.to_table(), end="")
    return 0


def cmd_stats(args) -> int:
    pairs = read_qa_jsonl(args.path)
    by_category: dict[QaCategory, dict[str, int]] = {}
    images = set()
    for pair in pairs:
        images.add(pair.image_id)
        bucket = by_category.setdefault(pair.category, {"template": 0, "llm": 0})
        bucket[pair.provenance.value] += 1
    header = f"{'category':<22}{'total':>7}{'template':>10}{'llm':>6}"
    print(header)
    print("-" * len(header))
    for category in QaCategory:
        if category not in by_category:
            continue
        counts = by_category[category]
        total = counts["template"] + counts["llm"]
        print(f"{category.value:<22}{total:>7}{counts['template']:>10}{counts['llm']:>6}")
    print("-" * len(header))
    template_total = sum(c["template"] for c in by_category.values())
    llm_total = sum(c["llm"] for c in by_category.values())
    print(f"{'overall':<22}{len(pairs):>7}{template_total:>10}{llm_total:>6}")
    print(f"images: {len(images)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatialqa", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check bundle directories")
    p.add_argument("path", help="bundle directory or a directory of bundles")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-graph", help="build scene graphs from bundles")
    p.add_argument("path", help="bundle directory or a directory of bundles")
    p.add_argument("--out", required=True, help="output directory for graph files")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("gen-qa", help="generate QA records from scene graphs")
    p.add_argument("path", help="graph file or a directory of graph files")
    p.add_argument("--out", required=True, help="output QA JSONL file")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--llm", action="store_true", help="also synthesize QA through the LLM")
    p.set_defaults(func=cmd_gen_qa)

    p = sub.add_parser("evaluate", help="score model responses against QA records")
    p.add_argument("records", help="benchmark records JSONL")
    p.add_argument("responses", help="model responses JSONL")
    p.add_argument("--out", required=True, help="report path prefix (.json and .txt)")
    p.add_argument("--judge", choices=("rule", "llm"), default="rule")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="summarize a QA file")
    p.add_argument("path", help="QA JSONL file")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        log.error("--jobs must be >= 1")
        return 1
    try:
        return args.func(args)
    except ClientError as exc:
        log.error("endpoint failure: %s", exc)
        return 3
    except SpatialQaError as exc:
        log.error("%s", exc)
        return 1
    except json.JSONDecodeError as exc:
        log.error("bad JSON: %s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
