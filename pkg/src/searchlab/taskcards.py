"""Read-only fixture of 18 reference task cards.

Shipped as package data and consumed by the analyze command for normalization
and partition checks; the cards carry each task's direction, bounds, baseline,
opportunity density, and dense/sparse partition label.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .core import TaskCard


def load_cards(path=None) -> dict[str, TaskCard]:
    """Load task cards from a JSON file, defaulting to the packaged fixture."""
    if path is None:
        text = resources.files("searchlab.data").joinpath("task_cards.json").read_text(
            encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if data.get("schema") != "task-cards-v1":
        raise ValueError(f"unsupported task card schema {data.get('schema')!r}")
    cards = [TaskCard.from_dict(rec) for rec in data["cards"]]
    return {card.task_id: card for card in cards}
