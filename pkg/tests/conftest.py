import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # helpers/oracles importable

from kgrag.adapter import MockAdapter, MockFixture
from kgrag.kg import load_graph
from kgrag.retrieval import load_questions

from helpers import FIXTURES, StubJudgeClient


@pytest.fixture(scope="session")
def appendix_graph():
    return load_graph(FIXTURES / "appendix_graph.tsv", "tsv")


@pytest.fixture(scope="session")
def appendix_questions():
    return load_questions(FIXTURES / "appendix_dataset.jsonl")


@pytest.fixture(scope="session")
def trio_questions():
    return load_questions(FIXTURES / "trio_dataset.jsonl")


@pytest.fixture(scope="session")
def mock_fixture():
    return MockFixture.load(FIXTURES / "mock_fixture.json")


@pytest.fixture()
def mock_adapter(mock_fixture, trio_questions):
    return MockAdapter(mock_fixture, questions=trio_questions)


@pytest.fixture(scope="session")
def golden_prompt_bytes():
    return (FIXTURES / "golden_prompt.txt").read_bytes()


@pytest.fixture(scope="session")
def golden_llm_only_bytes():
    return (FIXTURES / "golden_llm_only_prompt.txt").read_bytes()


@pytest.fixture()
def stub_judge():
    return StubJudgeClient
