"""Shared pytest setup: keep logfire local and quiet during tests."""

import logfire
import pytest


@pytest.fixture(scope="session", autouse=True)
def local_logfire():
    logfire.configure(send_to_logfire=False, console=False)
    yield
