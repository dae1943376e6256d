"""Small shared helpers: deterministic block-parallel mapping and canonical
JSON/CSV emission."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def blocked_map(fn: Callable[[int], object], n_blocks: int, threads: int = 1) -> list:
    """Evaluate fn(0..n_blocks-1) and return results in block order.

    Blocks carry their own seed substreams, so the output is identical for
    any thread count.
    """
    if threads <= 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_blocks)))


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def format_float(x) -> str:
    """Shortest round-trip decimal form, bit-stable across runs."""
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join("" if v is None else format_float(v) for v in row) + "\n")
