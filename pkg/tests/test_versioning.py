"""Tests for project and report schema versions."""

import psslab
from common.versioning import get_project_version, get_report_schema_tuple, get_report_schema_version


def test_project_version_matches_package() -> None:
    assert get_project_version() == psslab.__version__ == "0.4.0"


def test_report_schema_version() -> None:
    assert get_report_schema_version() == "1.0"
    assert get_report_schema_tuple() == (1, 0)
