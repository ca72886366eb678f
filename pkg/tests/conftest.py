from pathlib import Path

import pytest

from uavfuse.config import config_to_dict, reference_config

ROOT = Path(__file__).resolve().parents[1]
REFERENCE_TOML = ROOT / "configs" / "reference.toml"


def small_config(**kw):
    """Fast scenario: 4x4 arrays, 1 s, two seeds."""
    args = dict(n_antennas=4, duration=1.0, seeds=(0, 1), powers_dbm=(0.0, 10.0))
    args.update(kw)
    return reference_config(**args)


def to_toml(d: dict) -> str:
    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, list):
            return "[" + ", ".join(val(x) for x in v) + "]"
        return repr(v)

    lines = []
    for section, body in d.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {val(v)}" for k, v in body.items()]
        lines.append("")
    return "\n".join(lines)


@pytest.fixture
def small_toml(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(to_toml(config_to_dict(small_config())))
    return path


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for reports in terminalreporter.stats.values()
        for rep in reports
        if getattr(rep, "when", None) == "call"
        for name, value in getattr(rep, "user_properties", ())
        if name == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
