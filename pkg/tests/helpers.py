"""Shared fixture paths, golden constants, and stub handles for the tests."""

from pathlib import Path

from kgrag.adapter import JudgeReply

FIXTURES = Path(__file__).parent / "fixtures"

APPENDIX_QUESTION = (
    "What educational institution has a football sports team named "
    "Northern Colorado Bears is in Greeley, Colorado?"
)
SPORTS_PATH = (
    "Northern Colorado Bears football → "
    "education.educational_institution.sports_teams → University of Northern Colorado"
)
USA_PATH = "Greeley → location.location.containedby → United States of America"
GMT_PATH = "Greeley → location.location.containedby → Greeley Masonic Temple"


class StubJudgeClient:
    """Minimal adapter handle whose judge reply is canned; other calls fail."""

    def __init__(self, selected, raw="stub"):
        self.reply = JudgeReply(selected=tuple(selected) if selected is not None else None, raw=raw)
        self.calls = 0

    def judge(self, question, paths):
        self.calls += 1
        return self.reply
