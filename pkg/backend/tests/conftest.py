import json
from pathlib import Path

import pytest

from auction_lab import create_app
from auction_lab.core import as_profile
from auction_lab.schemas import parse_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def app():
    app = create_app({"TESTING": True, "FIXTURES_DIR": str(FIXTURES), "WORKERS": 1})
    return app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def tightness_xos():
    return parse_scenario(FIXTURES / "tightness_xos.json")


def make_bids(*rows):
    """Rows of ints or "p/q" strings to a bid profile."""
    return as_profile(rows)


def write_scenario(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path
