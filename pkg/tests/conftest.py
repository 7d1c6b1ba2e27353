from __future__ import annotations

import pytest

from intentclf import LabelVocabulary, default_taxonomy


@pytest.fixture(scope="session")
def small_vocab() -> LabelVocabulary:
    return LabelVocabulary(
        labels=("eta", "berth", "fuel"),
        descriptions={
            "eta": "estimated arrival time of a ship",
            "berth": "berthing and waiting at the port",
            "fuel": "fuel burned by a vessel",
        },
    )


@pytest.fixture(scope="session")
def maritime_vocab() -> LabelVocabulary:
    return default_taxonomy()
