import pathlib

import pytest

from ontoplant.csvbuild import load_csv_dir
from ontoplant.runtime import KnowledgeBase

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def demo_bundle() -> dict[str, str]:
    return load_csv_dir(FIXTURES / "demo_plant")


@pytest.fixture()
def plant_kb(demo_bundle) -> KnowledgeBase:
    """A fresh knowledge base loaded with the demonstration plant."""
    kb = KnowledgeBase()
    kb.build_bundle(demo_bundle)
    return kb
