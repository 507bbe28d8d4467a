"""Event-stratified train/validation partitions."""

from __future__ import annotations

import numpy as np
from sklearn.model_selection import train_test_split

from survensemble.core import Dataset
from survensemble.errors import ConfigError, TooSmall

MIN_EVENTS_PER_SIDE = 2


def split_indices(dataset: Dataset, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < fraction < 1:
        raise ConfigError(f"split fraction must lie in (0, 1), got {fraction}")
    indices = np.arange(len(dataset))
    stratify = dataset.events if 0 < dataset.event_count < len(dataset) else None
    try:
        train, validation = train_test_split(
            indices, train_size=fraction, random_state=seed, shuffle=True, stratify=stratify
        )
    except ValueError as error:
        raise TooSmall(f"cannot split {len(dataset)} subjects at fraction {fraction}: {error}") from error
    for side, idx in (("train", train), ("validation", validation)):
        events = int(dataset.events[idx].sum())
        if events < MIN_EVENTS_PER_SIDE:
            raise TooSmall(f"{side} side would hold {events} events, need at least {MIN_EVENTS_PER_SIDE}")
    return np.sort(train), np.sort(validation)


def split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    train, validation = split_indices(dataset, fraction, seed)
    return dataset.subset(train), dataset.subset(validation)
