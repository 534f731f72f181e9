"""
Result writers. Every file carries the run configuration and the engine version; JSON uses
sorted keys and CSV uses '\\n' line endings so identical runs produce identical bytes.
"""

import csv
import json
from collections.abc import Iterable, Sequence
from pathlib import Path

import obp


def provenance(config: dict) -> dict:
    return {"config": config, "version": obp.__version__}


def write_json(path: str | Path, payload: dict, config: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump({**payload, **provenance(config)}, f, sort_keys=True, indent=1)
        f.write("\n")
    return path


def read_json(path: str | Path) -> dict:
    with open(path) as f:
        return json.load(f)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict], config: dict) -> Path:
    """Two '#' comment lines (version, config JSON) precede the header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# obp {obp.__version__}\n")
        f.write(f"# config {json.dumps(config, sort_keys=True)}\n")
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return path


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return value


def write_timings(path: str | Path, timings: dict) -> Path:
    """Wall-clock runtimes; the only output that differs between identical runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(timings, f, sort_keys=True, indent=1)
        f.write("\n")
    return path
