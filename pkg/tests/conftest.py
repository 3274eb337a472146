from __future__ import annotations

import pytest

from ruleharness.translation import fixture_data_dir, load_corpus


@pytest.fixture(scope="session")
def fixture_dir():
    return fixture_data_dir()


@pytest.fixture(scope="session")
def fixture_ek(fixture_dir):
    return load_corpus(fixture_dir, "ek")


@pytest.fixture(scope="session")
def fixture_ke(fixture_dir):
    return load_corpus(fixture_dir, "ke")
