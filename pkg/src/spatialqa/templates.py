"""QA categories and the versioned template file that feeds the generator.

Templates are data, not code: the default set ships as data/templates.json
and alternates can be loaded from disk. Slots are [A] and [B] for region
mentions and [X] for the formatted quantity.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError


class QaCategory(enum.Enum):
    BELOW_ABOVE = "BelowAbove"
    LEFT_RIGHT = "LeftRight"
    BIG_SMALL = "BigSmall"
    TALL_SHORT = "TallShort"
    WIDE_THIN = "WideThin"
    BEHIND_FRONT = "BehindFront"
    DIRECT_DISTANCE = "DirectDistance"
    HORIZONTAL_DISTANCE = "HorizontalDistance"
    VERTICAL_DISTANCE = "VerticalDistance"
    WIDTH = "Width"
    HEIGHT = "Height"
    DIRECTION = "Direction"


QUALITATIVE_CATEGORIES = (
    QaCategory.BELOW_ABOVE,
    QaCategory.LEFT_RIGHT,
    QaCategory.BIG_SMALL,
    QaCategory.TALL_SHORT,
    QaCategory.WIDE_THIN,
    QaCategory.BEHIND_FRONT,
)

# Quantitative categories carry a ground-truth value: meters everywhere
# except Direction, whose value is a clock hour.
QUANTITATIVE_CATEGORIES = (
    QaCategory.DIRECT_DISTANCE,
    QaCategory.HORIZONTAL_DISTANCE,
    QaCategory.VERTICAL_DISTANCE,
    QaCategory.WIDTH,
    QaCategory.HEIGHT,
    QaCategory.DIRECTION,
)

SINGLE_REGION_CATEGORIES = (QaCategory.WIDTH, QaCategory.HEIGHT)

PAIR_CATEGORIES = tuple(c for c in QaCategory if c not in SINGLE_REGION_CATEGORIES)


@dataclass(frozen=True)
class QualitativeTemplates:
    questions: tuple[str, ...]
    true_answers: tuple[str, ...]
    false_answers: tuple[str, ...]


@dataclass(frozen=True)
class QuantitativeTemplates:
    questions: tuple[str, ...]
    answers: tuple[str, ...]


@dataclass(frozen=True)
class FewShotSample:
    context: str
    response: str


@dataclass(frozen=True)
class QaTemplateSet:
    version: int
    qualitative: dict[QaCategory, QualitativeTemplates]
    quantitative: dict[QaCategory, QuantitativeTemplates]
    few_shot: tuple[FewShotSample, ...]


def _check_slots(category: str, kind: str, texts, *, need_b: bool, need_x: bool) -> None:
    if not texts:
        raise ConfigError(f"template category {category}: empty {kind} list")
    for text in texts:
        if "[A]" not in text:
            raise ConfigError(f"template category {category}: {kind} missing [A]: {text!r}")
        if need_b and "[B]" not in text:
            raise ConfigError(f"template category {category}: {kind} missing [B]: {text!r}")
        if need_x and "[X]" not in text:
            raise ConfigError(f"template category {category}: {kind} missing [X]: {text!r}")


def parse_template_set(doc: dict) -> QaTemplateSet:
    if "version" not in doc or "categories" not in doc:
        raise ConfigError("template file needs 'version' and 'categories'")
    categories = doc["categories"]
    qualitative: dict[QaCategory, QualitativeTemplates] = {}
    quantitative: dict[QaCategory, QuantitativeTemplates] = {}
    for cat in QaCategory:
        if cat.value not in categories:
            raise ConfigError(f"template file missing category {cat.value}")
        entry = categories[cat.value]
        pair = cat not in SINGLE_REGION_CATEGORIES
        if cat in QUALITATIVE_CATEGORIES:
            _check_slots(cat.value, "question", entry.get("questions"), need_b=pair, need_x=False)
            _check_slots(cat.value, "true answer", entry.get("true_answers"), need_b=pair, need_x=False)
            _check_slots(cat.value, "false answer", entry.get("false_answers"), need_b=pair, need_x=False)
            qualitative[cat] = QualitativeTemplates(
                questions=tuple(entry["questions"]),
                true_answers=tuple(entry["true_answers"]),
                false_answers=tuple(entry["false_answers"]),
            )
        else:
            _check_slots(cat.value, "question", entry.get("questions"), need_b=pair, need_x=False)
            _check_slots(cat.value, "answer", entry.get("answers"), need_b=False, need_x=True)
            quantitative[cat] = QuantitativeTemplates(
                questions=tuple(entry["questions"]), answers=tuple(entry["answers"])
            )
    few_shot = tuple(
        FewShotSample(context=s["context"], response=s["response"])
        for s in doc.get("few_shot", [])
    )
    return QaTemplateSet(
        version=int(doc["version"]),
        qualitative=qualitative,
        quantitative=quantitative,
        few_shot=few_shot,
    )


def load_template_set(path=None) -> QaTemplateSet:
    """Load a template file; the packaged default when path is None."""
    if path is None:
        text = resources.files("spatialqa").joinpath("data/templates.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"template file is not valid JSON: {exc}") from exc
    return parse_template_set(doc)
