"""QA synthesis from scene graphs.

Two generators share one record type. The template path is fully
deterministic given a seed: it walks regions and ordered region pairs in a
fixed order and fills slotted templates, recomputing each relation from
node geometry. The LLM path renders the graph into a plain-text
description, prompts a model, and keeps only completions that satisfy the
output contract.

Regions are named by node position in the graph's id-sorted node list:
"Region [k]" in rendered text, <regionk> in LLM prompts and completions.
"""

from __future__ import annotations

import enum
import json
import logging
import random
import re
from dataclasses import dataclass

from .errors import ConfigError, DegenerateDirectionError, SynthesisRejected
from .evaluation import METERS_PER_UNIT, Unit
from .llm import GENERATION_SYSTEM_PROMPT, LlmClient, LlmPromptPayload
from .scenegraph import (
    ObjectNode,
    RelationKind,
    SceneGraph,
    clock_direction,
    direct_distance,
    horizontal_distance,
    relative_depth_order,
    relative_height,
    relative_horizontal,
    relative_vertical,
    relative_volume,
    relative_width,
    vertical_distance,
)
from .templates import (
    QUALITATIVE_CATEGORIES,
    SINGLE_REGION_CATEGORIES,
    FewShotSample,
    QaCategory,
    QaTemplateSet,
)

log = logging.getLogger(__name__)


class Provenance(enum.Enum):
    TEMPLATE = "template"
    LLM = "llm"


@dataclass(frozen=True)
class QaPair:
    """One question-answer record tied to regions of a scene graph.

    ground_truth_value is meters for distance and size categories, a clock
    hour for Direction, and None for qualitative or LLM-authored pairs.
    """

    image_id: str
    category: QaCategory
    question: str
    answer: str
    region_ids: tuple[int, ...]
    ground_truth_value: float | None
    provenance: Provenance


_UNIT_WORDS = {
    Unit.METER: "meters",
    Unit.CENTIMETER: "centimeters",
    Unit.FOOT: "feet",
    Unit.INCH: "inches",
}

# Candidate order is fixed so seeded draws stay reproducible.
_UNIT_CHOICES = (Unit.METER, Unit.CENTIMETER, Unit.FOOT, Unit.INCH)

# Below half a hundredth of a centimeter every unit renders as 0.00, so no
# quantitative QA can be phrased about the value.
MIN_METRIC_METERS = 0.005 * METERS_PER_UNIT[Unit.CENTIMETER]


def format_metric(meters: float, unit: Unit) -> str:
    """Render a length like "2.51 meters" (two decimals, plural word)."""
    word = _UNIT_WORDS.get(unit)
    if word is None:
        raise ConfigError(f"{unit.value} is not a length unit")
    return f"{meters / METERS_PER_UNIT[unit]:.2f} {word}"


def eligible_units(meters: float) -> tuple[Unit, ...]:
    """Units in which the value renders at 1.00 or more.

    Two-decimal rendering quantizes by half a hundredth of the chosen
    unit, so keeping the printed magnitude at >= 1.0 bounds the round-trip
    error at 0.5%. Values too small for every unit fall back to
    centimeters.
    """
    units = tuple(u for u in _UNIT_CHOICES if meters / METERS_PER_UNIT[u] >= 1.0)
    return units if units else (Unit.CENTIMETER,)


def region_token(index: int) -> str:
    return f"Region [{index}]"


# Whether the pole named first in the category (Below, Left, Big, ...)
# holds for the ordered pair (a, b). Question templates always ask about
# that first pole.
_POSITIVE_POLE = {
    QaCategory.BELOW_ABOVE: lambda a, b: relative_vertical(a, b) is RelationKind.BELOW,
    QaCategory.LEFT_RIGHT: lambda a, b: relative_horizontal(a, b) is RelationKind.LEFT,
    QaCategory.BIG_SMALL: lambda a, b: relative_volume(a, b) is RelationKind.BIG,
    QaCategory.TALL_SHORT: lambda a, b: relative_height(a, b) is RelationKind.TALL,
    QaCategory.WIDE_THIN: lambda a, b: relative_width(a, b) is RelationKind.WIDE,
    QaCategory.BEHIND_FRONT: lambda a, b: relative_depth_order(a, b) is RelationKind.BEHIND,
}

_PAIR_DISTANCE = {
    QaCategory.DIRECT_DISTANCE: direct_distance,
    QaCategory.HORIZONTAL_DISTANCE: horizontal_distance,
    QaCategory.VERTICAL_DISTANCE: vertical_distance,
}

_SINGLE_VALUE = {
    QaCategory.WIDTH: lambda node: node.width,
    QaCategory.HEIGHT: lambda node: node.height,
}


def _fill(template: str, a: str, b: str | None = None, x: str | None = None) -> str:
    text = template.replace("[A]", a)
    if b is not None:
        text = text.replace("[B]", b)
    if x is not None:
        text = text.replace("[X]", x)
    return text


def gen_template_qa(
    graph: SceneGraph,
    templates: QaTemplateSet,
    seed: int,
    per_pair_quota: int = 1,
    randomize_units: bool = True,
) -> list[QaPair]:
    """Deterministic template QA for every region and ordered region pair.

    Single-region categories (Width, Height) come first, node by node,
    then every ordered pair in index order with its pair categories in
    enum order. per_pair_quota draws that many QAs for each (regions,
    category) combination. Degenerate facts (zero distances, stacked
    regions with no clock direction) are skipped before any random draw,
    so they do not perturb the rest of the stream.
    """
    if per_pair_quota < 0:
        raise ConfigError(f"per_pair_quota must be >= 0, got {per_pair_quota}")
    rng = random.Random(seed)
    nodes = graph.nodes
    pairs: list[QaPair] = []

    def draw_metric(category: QaCategory, value: float, question_t, answer_t, regions, a, b=None):
        question = rng.choice(question_t)
        answer = rng.choice(answer_t)
        unit = rng.choice(eligible_units(value)) if randomize_units else Unit.METER
        pairs.append(
            QaPair(
                image_id=graph.image_id,
                category=category,
                question=_fill(question, a, b),
                answer=_fill(answer, a, b, format_metric(value, unit)),
                region_ids=regions,
                ground_truth_value=value,
                provenance=Provenance.TEMPLATE,
            )
        )

    for i, node in enumerate(nodes):
        token = region_token(i)
        for category in SINGLE_REGION_CATEGORIES:
            t = templates.quantitative[category]
            value = _SINGLE_VALUE[category](node)
            if value < MIN_METRIC_METERS:
                continue
            for _ in range(per_pair_quota):
                draw_metric(category, value, t.questions, t.answers, (i,), token)

    for i, a_node in enumerate(nodes):
        for j, b_node in enumerate(nodes):
            if i == j:
                continue
            a_token, b_token = region_token(i), region_token(j)
            for category in QaCategory:
                if category in SINGLE_REGION_CATEGORIES:
                    continue
                if category in QUALITATIVE_CATEGORIES:
                    t = templates.qualitative[category]
                    holds = _POSITIVE_POLE[category](a_node, b_node)
                    answer_pool = t.true_answers if holds else t.false_answers
                    for _ in range(per_pair_quota):
                        question = rng.choice(t.questions)
                        answer = rng.choice(answer_pool)
                        pairs.append(
                            QaPair(
                                image_id=graph.image_id,
                                category=category,
                                question=_fill(question, a_token, b_token),
                                answer=_fill(answer, a_token, b_token),
                                region_ids=(i, j),
                                ground_truth_value=None,
                                provenance=Provenance.TEMPLATE,
                            )
                        )
                elif category in _PAIR_DISTANCE:
                    t = templates.quantitative[category]
                    value = _PAIR_DISTANCE[category](a_node, b_node)
                    if value < MIN_METRIC_METERS:
                        continue
                    for _ in range(per_pair_quota):
                        draw_metric(
                            category, value, t.questions, t.answers, (i, j), a_token, b_token
                        )
                else:  # Direction
                    t = templates.quantitative[category]
                    try:
                        hour = clock_direction(a_node, b_node)
                    except DegenerateDirectionError:
                        continue
                    for _ in range(per_pair_quota):
                        question = rng.choice(t.questions)
                        answer = rng.choice(t.answers)
                        pairs.append(
                            QaPair(
                                image_id=graph.image_id,
                                category=category,
                                question=_fill(question, a_token, b_token),
                                answer=_fill(answer, a_token, b_token, str(hour)),
                                region_ids=(i, j),
                                ground_truth_value=float(hour),
                                provenance=Provenance.TEMPLATE,
                            )
                        )
    return pairs


def render_description(graph: SceneGraph, max_pair_facts: int | None = None) -> str:
    """Plain-text scene facts for prompting, one per line.

    Every region contributes its width and height up front, which
    guarantees each one is mentioned at least once; pair facts follow for
    unordered pairs in index order. max_pair_facts caps only the pair
    lines.
    """
    lines: list[str] = []
    for i, node in enumerate(graph.nodes):
        lines.append(f"<region{i}> is {node.width:.2f} meters wide.")
        lines.append(f"<region{i}> is {node.height:.2f} meters tall.")
    pair_lines: list[str] = []
    for i, a_node in enumerate(graph.nodes):
        for j in range(i + 1, len(graph.nodes)):
            b_node = graph.nodes[j]
            pair_lines.append(
                f"<region{i}> is {direct_distance(a_node, b_node):.2f} meters from <region{j}>."
            )
            pair_lines.append(
                f"The horizontal distance between <region{i}> and <region{j}> is "
                f"{horizontal_distance(a_node, b_node):.2f} meters."
            )
            pair_lines.append(
                f"The vertical distance between <region{i}> and <region{j}> is "
                f"{vertical_distance(a_node, b_node):.2f} meters."
            )
            try:
                hour = clock_direction(a_node, b_node)
            except DegenerateDirectionError:
                continue
            pair_lines.append(f"<region{j}> is at {hour} o'clock from <region{i}>.")
    if max_pair_facts is not None:
        pair_lines = pair_lines[:max_pair_facts]
    return "\n".join(lines + pair_lines)


def build_llm_prompt(
    description: str, few_shot: tuple[FewShotSample, ...] = ()
) -> LlmPromptPayload:
    return LlmPromptPayload(
        system=GENERATION_SYSTEM_PROMPT,
        few_shot=tuple((s.context, s.response) for s in few_shot),
        query=description,
    )


_REGION_TAG = re.compile(r"<region(\d+)>")
_NUMBER_LITERAL = re.compile(r"\d[\d,]*(?:\.\d+)?")


def _leak_literals(text: str) -> list[str]:
    """Numeric literals in the text carrying three or more significant digits."""
    leaks = []
    for match in _NUMBER_LITERAL.finditer(text):
        token = match.group(0)
        digits = re.sub(r"\D", "", token).lstrip("0")
        if len(digits) >= 3:
            leaks.append(token)
    return leaks


def parse_llm_completion(
    completion: str, query: str, image_id: str, num_regions: int
) -> list[QaPair]:
    """Validated QA pairs from a model completion.

    The contract is repeated Category/Question/Answer line triples. A
    candidate is dropped when its category is unknown, its question lacks
    region tags, any tag is out of range, or the question repeats a
    query literal with three or more significant digits. Raises
    SynthesisRejected when nothing survives.
    """
    candidates: list[dict] = []
    current: dict | None = None
    last_field: str | None = None
    for raw in completion.splitlines():
        line = raw.strip()
        if not line:
            last_field = None
            continue
        lowered = line.lower()
        if lowered.startswith("category:"):
            current = {"category": line.split(":", 1)[1].strip()}
            candidates.append(current)
            last_field = None
        elif current is not None and lowered.startswith("question:"):
            current["question"] = line.split(":", 1)[1].strip()
            last_field = "question"
        elif current is not None and lowered.startswith("answer:"):
            current["answer"] = line.split(":", 1)[1].strip()
            last_field = "answer"
        elif current is not None and last_field is not None:
            current[last_field] = f"{current[last_field]} {line}"

    forbidden = _leak_literals(query)
    pairs: list[QaPair] = []
    for candidate in candidates:
        question = candidate.get("question", "")
        answer = candidate.get("answer", "")
        try:
            category = QaCategory(candidate["category"])
        except ValueError:
            log.warning("dropping candidate with unknown category %r", candidate["category"])
            continue
        if not question or not answer:
            log.warning("dropping incomplete candidate for category %s", category.value)
            continue
        tags = [int(m) for m in _REGION_TAG.findall(question)]
        if not tags:
            log.warning("dropping question without region tags: %r", question)
            continue
        all_tags = tags + [int(m) for m in _REGION_TAG.findall(answer)]
        if any(t >= num_regions for t in all_tags):
            log.warning("dropping candidate referencing unknown region: %r", question)
            continue
        leaked = [lit for lit in forbidden if lit in question]
        if leaked:
            log.warning("dropping question leaking %s: %r", leaked, question)
            continue
        pairs.append(
            QaPair(
                image_id=image_id,
                category=category,
                question=question,
                answer=answer,
                region_ids=tuple(sorted(set(tags))),
                ground_truth_value=None,
                provenance=Provenance.LLM,
            )
        )
    if not pairs:
        raise SynthesisRejected(
            f"no valid QA pairs among {len(candidates)} candidates for {image_id}"
        )
    return pairs


def llm_generate_qa(
    payload: LlmPromptPayload, client: LlmClient, image_id: str, num_regions: int
) -> list[QaPair]:
    """One completion round: prompt the client, parse, validate."""
    completion = client.complete(payload)
    return parse_llm_completion(completion, payload.query, image_id, num_regions)


def _f6(x: float) -> str:
    text = f"{x:.6f}"
    return "0.000000" if text == "-0.000000" else text


def qa_to_jsonl_line(pair: QaPair) -> str:
    value = "null" if pair.ground_truth_value is None else _f6(pair.ground_truth_value)
    regions = ", ".join(str(r) for r in pair.region_ids)
    return (
        "{"
        f'"image_id": {json.dumps(pair.image_id)}, '
        f'"category": "{pair.category.value}", '
        f'"question": {json.dumps(pair.question)}, '
        f'"answer": {json.dumps(pair.answer)}, '
        f'"region_ids": [{regions}], '
        f'"ground_truth_value": {value}, '
        f'"provenance": "{pair.provenance.value}"'
        "}"
    )


def qa_to_jsonl(pairs: list[QaPair]) -> str:
    return "".join(qa_to_jsonl_line(pair) + "\n" for pair in pairs)


def read_qa_jsonl(path) -> list[QaPair]:
    pairs: list[QaPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                value = doc["ground_truth_value"]
                pairs.append(
                    QaPair(
                        image_id=str(doc["image_id"]),
                        category=QaCategory(doc["category"]),
                        question=str(doc["question"]),
                        answer=str(doc["answer"]),
                        region_ids=tuple(int(r) for r in doc["region_ids"]),
                        ground_truth_value=None if value is None else float(value),
                        provenance=Provenance(doc["provenance"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad QA record ({exc})") from exc
    return pairs
