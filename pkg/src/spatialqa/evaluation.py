"""Benchmark scoring: quantity extraction, unit conversion, judges, reports.

The metric path is fully deterministic. A response's first numeric literal
is pulled out with a small grammar, converted to meters through a fixed
unit table, and compared against ground truth with a relative-error
threshold of 25%. Qualitative records go through a rule-based judge by
default; an LLM judge can be plugged in instead.

Success rates count unanswered records as incorrect, while mean relative
error is taken only over responses that produced a usable number.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass

from .errors import ClientError, ConfigError, UnitDomainError
from .llm import LlmClient, LlmPromptPayload
from .templates import QUALITATIVE_CATEGORIES, QaCategory

log = logging.getLogger(__name__)

REL_ERROR_THRESHOLD = 0.25
DIRECTION_ERROR_THRESHOLD_DEG = 30.0


class Unit(enum.Enum):
    METER = "meter"
    CENTIMETER = "centimeter"
    FOOT = "foot"
    INCH = "inch"
    CLOCK_HOUR = "clock_hour"
    DEGREE = "degree"


METERS_PER_UNIT = {
    Unit.METER: 1.0,
    Unit.CENTIMETER: 0.01,
    Unit.FOOT: 0.3048,
    Unit.INCH: 0.0254,
}


@dataclass(frozen=True)
class ParsedQuantity:
    value: float
    unit: Unit


# Digits inside region mentions ("Region [3]", "<region3>") are not answers.
_REGION_TOKEN = re.compile(r"region\s*\[\d+\]|<region\d+>", re.IGNORECASE)
# First numeric literal: optional sign, optional thousands separators, decimals.
_NUMBER = re.compile(r"(?<![A-Za-z0-9_.])[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|(?<![A-Za-z0-9_.])[+-]?\.\d+")
_UNIT_PATTERNS: tuple[tuple[re.Pattern, Unit], ...] = (
    (re.compile(r"^\s*o[’']?clock\b", re.IGNORECASE), Unit.CLOCK_HOUR),
    (re.compile(r"^\s*(?:centimeters?|centimetres?|cm)\b", re.IGNORECASE), Unit.CENTIMETER),
    (re.compile(r"^\s*(?:meters?|metres?|m)\b", re.IGNORECASE), Unit.METER),
    (re.compile(r"^\s*(?:foot|feet|ft)\b", re.IGNORECASE), Unit.FOOT),
    (re.compile(r"^\s*(?:inch(?:es)?|in)\b", re.IGNORECASE), Unit.INCH),
    (re.compile(r"^\s*(?:degrees?|deg\b|°)", re.IGNORECASE), Unit.DEGREE),
)


def extract_quantity(text: str, default_unit: Unit = Unit.METER) -> ParsedQuantity | None:
    """First numeric literal in the text with its unit, None when there is none.

    Region mentions are stripped before scanning so their indices are never
    mistaken for values. A unit word directly after the number wins
    ("o'clock" marks a clock hour); a bare number gets default_unit, which
    callers set to meters for distances and sizes and clock hours for
    directions.
    """
    cleaned = _REGION_TOKEN.sub(" ", text)
    match = _NUMBER.search(cleaned)
    if match is None:
        return None
    value = float(match.group(0).replace(",", ""))
    tail = cleaned[match.end() :]
    for pattern, unit in _UNIT_PATTERNS:
        if pattern.search(tail):
            return ParsedQuantity(value=value, unit=unit)
    return ParsedQuantity(value=value, unit=default_unit)


def to_meters(quantity: ParsedQuantity) -> float:
    """Convert a length to meters; clock hours and degrees have no length."""
    factor = METERS_PER_UNIT.get(quantity.unit)
    if factor is None:
        raise UnitDomainError(f"cannot convert {quantity.unit.value} to meters")
    return quantity.value * factor


@dataclass(frozen=True)
class BenchRecord:
    id: str
    category: QaCategory
    question: str
    gt_answer: str
    gt_value: float | None = None

    def __post_init__(self):
        if self.category in QUALITATIVE_CATEGORIES:
            return
        if self.gt_value is None:
            raise ConfigError(f"record {self.id}: category {self.category.value} needs gt_value")
        if self.category is not QaCategory.DIRECTION and self.gt_value <= 0.0:
            raise ConfigError(f"record {self.id}: gt_value must be positive, got {self.gt_value}")
        if self.category is QaCategory.DIRECTION and not 1 <= self.gt_value <= 12:
            raise ConfigError(f"record {self.id}: clock hour out of range: {self.gt_value}")


@dataclass(frozen=True)
class QuantitativeScore:
    answered: bool
    success: bool
    rel_error: float | None


@dataclass(frozen=True)
class DirectionScore:
    answered: bool
    success: bool
    error_degrees: float | None


def score_quantitative(gt_value: float, response: str | None) -> QuantitativeScore:
    """Relative error against ground truth; success iff within 25% inclusive."""
    quantity = extract_quantity(response or "", default_unit=Unit.METER)
    if quantity is None:
        return QuantitativeScore(answered=False, success=False, rel_error=None)
    try:
        meters = to_meters(quantity)
    except UnitDomainError:
        return QuantitativeScore(answered=False, success=False, rel_error=None)
    rel = abs(meters - gt_value) / gt_value
    return QuantitativeScore(answered=True, success=rel <= REL_ERROR_THRESHOLD, rel_error=rel)


def score_direction(gt_hour: float, response: str | None) -> DirectionScore:
    """Angular error on the clock face; success iff within 30 degrees."""
    quantity = extract_quantity(response or "", default_unit=Unit.CLOCK_HOUR)
    if quantity is None:
        return DirectionScore(answered=False, success=False, error_degrees=None)
    if quantity.unit is Unit.CLOCK_HOUR:
        response_deg = (quantity.value % 12.0) * 30.0
    elif quantity.unit is Unit.DEGREE:
        response_deg = quantity.value % 360.0
    else:
        return DirectionScore(answered=False, success=False, error_degrees=None)
    gt_deg = (gt_hour % 12.0) * 30.0
    diff = abs(response_deg - gt_deg) % 360.0
    error = min(diff, 360.0 - diff)
    return DirectionScore(
        answered=True, success=error <= DIRECTION_ERROR_THRESHOLD_DEG, error_degrees=error
    )


# Polarity keyword pairs per qualitative category: (positive pole, negative pole).
_STANCE_KEYWORDS: dict[QaCategory, tuple[tuple[str, ...], tuple[str, ...]]] = {
    QaCategory.BELOW_ABOVE: (("below", "beneath", "under", "underneath"), ("above", "over")),
    QaCategory.LEFT_RIGHT: (("left",), ("right",)),
    QaCategory.BIG_SMALL: (("bigger", "larger", "big", "large"), ("smaller", "small", "tiny")),
    QaCategory.TALL_SHORT: (("taller", "tall"), ("shorter", "short")),
    QaCategory.WIDE_THIN: (
        ("wider", "wide", "broader", "broad"),
        ("thinner", "thin", "narrower", "narrow"),
    ),
    QaCategory.BEHIND_FRONT: (("behind", "farther", "further"), ("front", "closer", "nearer")),
}

_NEGATION = re.compile(r"\b(?:no|not|incorrect|never)\b|n't\b", re.IGNORECASE)
_AFFIRMATION = re.compile(r"\b(?:yes|indeed|correct|certainly)\b", re.IGNORECASE)


def _first_position(text: str, words: tuple[str, ...]) -> int | None:
    best = None
    for word in words:
        match = re.search(rf"\b{word}\b", text, re.IGNORECASE)
        if match and (best is None or match.start() < best):
            best = match.start()
    return best


_CLAUSE_BREAK = re.compile(r"[.,;:!?]")


def _stance(text: str, category: QaCategory, question_pole: bool | None = None) -> bool | None:
    """True for the positive pole, False for the negative, None if unreadable.

    A negation flips the first keyword only from inside the same clause:
    "it is not bigger" reads small, while the discourse marker in
    "No, it's to the right" leaves right untouched. With no keyword at
    all, a bare yes/no adopts (or flips) the question's pole.
    """
    pos_words, neg_words = _STANCE_KEYWORDS[category]
    pos_at = _first_position(text, pos_words)
    neg_at = _first_position(text, neg_words)
    if pos_at is None and neg_at is None:
        if question_pole is None:
            return None
        negation = _NEGATION.search(text)
        if negation:
            return not question_pole
        if _AFFIRMATION.search(text):
            return question_pole
        return None
    if neg_at is None or (pos_at is not None and pos_at < neg_at):
        keyword_at, pole = pos_at, True
    else:
        keyword_at, pole = neg_at, False
    clause_start = 0
    for boundary in _CLAUSE_BREAK.finditer(text, 0, keyword_at):
        clause_start = boundary.end()
    negation = _NEGATION.search(text, clause_start, keyword_at)
    return not pole if negation else pole


class RuleJudge:
    """Deterministic polarity and keyword matching for qualitative records."""

    def score(self, record: BenchRecord, response: str) -> int:
        if record.category not in _STANCE_KEYWORDS:
            raise ConfigError(f"record {record.id}: {record.category.value} is not qualitative")
        question_pole = _stance(record.question, record.category)
        gt = _stance(record.gt_answer, record.category, question_pole)
        if gt is None:
            log.warning("record %s: ground-truth answer has no readable stance", record.id)
            return 0
        got = _stance(response, record.category, question_pole)
        return int(got is not None and got == gt)


QUALITATIVE_JUDGE_PROMPT = "\n".join(
    [
        "You are a helpful assistant designed to output JSON.",
        "",
        "You should help me to evaluate the response given the question and the correct answer.",
        "To mark a response, you should output a single integer between 0 and 1.",
        "(1) means that the response perfectly matches the answer.",
        "(0) means that the response is completely different from the answer.",
    ]
)

QUANTITATIVE_JUDGE_PROMPT = "\n".join(
    [
        "You are a helpful assistant designed to output JSON.",
        "",
        "You should help me to evaluate the response given the question and the correct answer.",
        "You need to convert the distance of the correct answer and response to meters.",
        "The conversion factors are as follows:",
        "1 inch = 0.0254 meters. 1 foot = 0.3048 meters. 1 centimeter (cm) = 0.01 meters.",
        "You should output two floats in meters, one for the answer, and one for the response.",
    ]
)


class LlmJudge:
    """Scores qualitative records through an LLM endpoint.

    The model is asked for JSON; the first 0/1 in the completion is the
    mark. extract_meters exposes the LLM conversion path for quantitative
    answers, though the deterministic extractor remains the primary route.
    """

    def __init__(self, client: LlmClient):
        self.client = client

    def score(self, record: BenchRecord, response: str) -> int:
        query = (
            f"Question: {record.question}\n"
            f"Correct answer: {record.gt_answer}\n"
            f"Response: {response}"
        )
        payload = LlmPromptPayload(system=QUALITATIVE_JUDGE_PROMPT, few_shot=(), query=query)
        completion = self.client.complete(payload)
        match = re.search(r"[01]\b", completion)
        if match is None:
            raise ClientError(f"judge completion has no 0/1 mark: {completion[:120]!r}")
        return int(match.group(0))

    def extract_meters(self, question: str, gt_answer: str, response: str) -> tuple[float, float]:
        query = (
            f"Question: {question}\n"
            f"Correct answer: {gt_answer}\n"
            f"Response: {response}"
        )
        payload = LlmPromptPayload(system=QUANTITATIVE_JUDGE_PROMPT, few_shot=(), query=query)
        completion = self.client.complete(payload)
        numbers = re.findall(r"[+-]?\d+(?:\.\d+)?", completion)
        if len(numbers) < 2:
            raise ClientError(f"judge completion has fewer than two floats: {completion[:120]!r}")
        return float(numbers[0]), float(numbers[1])


@dataclass
class CategoryScore:
    total: int = 0
    answered: int = 0
    correct: int = 0
    rel_errors: list = None
    direction_errors: list = None

    def __post_init__(self):
        self.rel_errors = [] if self.rel_errors is None else self.rel_errors
        self.direction_errors = [] if self.direction_errors is None else self.direction_errors

    @property
    def success_rate(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def abs_rel_error(self) -> float | None:
        return sum(self.rel_errors) / len(self.rel_errors) if self.rel_errors else None

    @property
    def direction_error_degrees(self) -> float | None:
        if not self.direction_errors:
            return None
        return sum(self.direction_errors) / len(self.direction_errors)


@dataclass
class ScoreReport:
    categories: dict[QaCategory, CategoryScore]

    @property
    def total(self) -> int:
        return sum(c.total for c in self.categories.values())

    @property
    def answered(self) -> int:
        return sum(c.answered for c in self.categories.values())

    @property
    def correct(self) -> int:
        return sum(c.correct for c in self.categories.values())

    @property
    def success_rate(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_json_text(self) -> str:
        def opt(x):
            return "null" if x is None else f"{x:.6f}"

        lines = ["{"]
        lines.append(f'  "total": {self.total},')
        lines.append(f'  "answered": {self.answered},')
        lines.append(f'  "correct": {self.correct},')
        lines.append(f'  "success_rate": {self.success_rate:.6f},')
        lines.append('  "categories": {')
        present = [c for c in QaCategory if c in self.categories]
        for i, cat in enumerate(present):
            score = self.categories[cat]
            comma = "," if i < len(present) - 1 else ""
            lines.append(
                f'    "{cat.value}": '
                + "{"
                + f'"total": {score.total}, "answered": {score.answered}, '
                + f'"correct": {score.correct}, "success_rate": {score.success_rate:.6f}, '
                + f'"abs_rel_error": {opt(score.abs_rel_error)}, '
                + f'"direction_error_degrees": {opt(score.direction_error_degrees)}'
                + "}"
                + comma
            )
        lines.append("  }")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        header = f"{'category':<22}{'total':>7}{'answered':>10}{'correct':>9}{'success':>9}{'rel_err':>9}{'dir_err':>9}"
        rows = [header, "-" * len(header)]
        for cat in QaCategory:
            if cat not in self.categories:
                continue
            s = self.categories[cat]
            rel = f"{s.abs_rel_error:.4f}" if s.abs_rel_error is not None else "-"
            direction = (
                f"{s.direction_error_degrees:.1f}" if s.direction_error_degrees is not None else "-"
            )
            rows.append(
                f"{cat.value:<22}{s.total:>7}{s.answered:>10}{s.correct:>9}"
                f"{s.success_rate:>9.4f}{rel:>9}{direction:>9}"
            )
        rows.append("-" * len(header))
        rows.append(
            f"{'overall':<22}{self.total:>7}{self.answered:>10}{self.correct:>9}{self.success_rate:>9.4f}"
        )
        return "\n".join(rows) + "\n"


def aggregate(
    records: list[BenchRecord],
    responses: dict[str, str],
    judge: RuleJudge | LlmJudge | None = None,
) -> ScoreReport:
    """Score every record and fold the results into a per-category report.

    Records without a response count toward totals but never toward
    answered or correct. The order of records does not affect the report.
    """
    judge = judge or RuleJudge()
    categories: dict[QaCategory, CategoryScore] = {}
    for record in records:
        bucket = categories.setdefault(record.category, CategoryScore())
        bucket.total += 1
        response = responses.get(record.id)
        if response is None or not response.strip():
            continue
        if record.category is QaCategory.DIRECTION:
            direction = score_direction(record.gt_value, response)
            if direction.answered:
                bucket.answered += 1
                bucket.direction_errors.append(direction.error_degrees)
                bucket.correct += int(direction.success)
        elif record.category in QUALITATIVE_CATEGORIES:
            bucket.answered += 1
            bucket.correct += judge.score(record, response)
        else:
            quant = score_quantitative(record.gt_value, response)
            if quant.answered:
                bucket.answered += 1
                bucket.rel_errors.append(quant.rel_error)
                bucket.correct += int(quant.success)
    return ScoreReport(categories=categories)


def load_bench_records(path) -> list[BenchRecord]:
    """Read benchmark records, one JSON object per line."""
    records: list[BenchRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                record = BenchRecord(
                    id=str(doc["id"]),
                    category=QaCategory(doc["category"]),
                    question=str(doc["question"]),
                    gt_answer=str(doc["gt_answer"]),
                    gt_value=None if doc.get("gt_value") is None else float(doc["gt_value"]),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad record ({exc})") from exc
            if record.id in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate record id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    return records


def load_responses(path) -> dict[str, str]:
    """Read {id, response} JSON lines into a dict."""
    responses: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                responses[str(doc["id"])] = str(doc["response"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad response ({exc})") from exc
    return responses
