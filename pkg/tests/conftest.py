from __future__ import annotations

import datetime as dt
import re
from pathlib import Path

import numpy as np
import pytest

from expertrade.market_data import OhlcvPanel

GOLDEN = Path(__file__).parent / "golden"
_SLOT = re.compile(r"<([A-Za-z_]+)>")


def golden_pattern(name: str) -> tuple[re.Pattern, re.Pattern]:
    """Compile a golden file into (instruction, prompt) regexes.

    Text outside ``<slot>`` markers must match byte for byte; a slot that
    appears twice must be filled with the same text both times.
    """
    text = (GOLDEN / name).read_text(encoding="utf-8").rstrip("\n")
    instruction, prompt = text.split("\n---\n")

    def compile_part(part: str) -> re.Pattern:
        out, seen, pos = [], set(), 0
        for m in _SLOT.finditer(part):
            out.append(re.escape(part[pos : m.start()]))
            slot = m.group(1)
            out.append(f"(?P={slot})" if slot in seen else f"(?P<{slot}>.*?)")
            seen.add(slot)
            pos = m.end()
        out.append(re.escape(part[pos:]))
        return re.compile("".join(out), re.DOTALL)

    return compile_part(instruction), compile_part(prompt)


def match_golden(name: str, bundle) -> dict[str, str]:
    ins_re, prompt_re = golden_pattern(name)
    ins = ins_re.fullmatch(bundle.instruction)
    assert ins is not None, f"instruction differs from {name}:\n{bundle.instruction}"
    prompt = prompt_re.fullmatch(bundle.prompt)
    assert prompt is not None, f"prompt differs from {name}:\n{bundle.prompt}"
    slots = {**ins.groupdict(), **prompt.groupdict()}
    for key in set(ins.groupdict()) & set(prompt.groupdict()):
        assert ins.group(key) == prompt.group(key)
    return slots


def make_panel(closes: np.ndarray, tickers=None, start=dt.date(2023, 1, 2), volume=None) -> OhlcvPanel:
    closes = np.asarray(closes, dtype=float)
    if closes.ndim == 1:
        closes = closes[:, None]
    t, n = closes.shape
    tickers = tuple(tickers or (f"T{j:02d}" for j in range(n)))
    dates = tuple(start + dt.timedelta(days=i) for i in range(t))
    vol = np.full((t, n), 1000.0) if volume is None else np.asarray(volume, dtype=float)
    return OhlcvPanel(
        tickers, dates, open=closes.copy(), high=closes * 1.01, low=closes * 0.99, close=closes, volume=vol
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
