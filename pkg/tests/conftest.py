"""Shared fixtures."""

from __future__ import annotations

from collections.abc import Generator
import logging

import pytest

from psslab.logging_config import reset_logging
from psslab.models.system import SystemConfig
from tests.utils import n_model, w_model, x_model


@pytest.fixture(autouse=True)
def fresh_logging() -> Generator[None, None, None]:
    """Every test may configure logging from scratch."""
    reset_logging()
    yield
    for handler in list(logging.getLogger().handlers):
        if isinstance(handler, logging.FileHandler):
            handler.close()
            logging.getLogger().removeHandler(handler)
    reset_logging()


@pytest.fixture
def n_config() -> SystemConfig:
    return n_model()


@pytest.fixture
def w_config() -> SystemConfig:
    return w_model()


@pytest.fixture
def x_config() -> SystemConfig:
    return x_model()
