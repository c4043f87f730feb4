# core/result_store.py
import json
import os
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

FLOAT_FORMAT = "%.6f"


class ResultStoreCsv:
    """CSV writer for experiment outputs.

    Floats are written with a fixed format and `\\n` line endings, so the
    same rows always give the same bytes.
    """

    def __init__(self, out_dir: Union[str, Path]) -> None:
        self.out_dir = Path(out_dir)
        os.makedirs(self.out_dir, exist_ok=True)
        self.written: List[str] = []

    def write(self, name: str, rows: Iterable[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
        df = pd.DataFrame(list(rows), columns=list(columns) if columns else None)
        path = self.out_dir / name
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
        self.written.append(str(path))
        return str(path)

    def write_text(self, name: str, text: str) -> str:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text if text.endswith("\n") else text + "\n")
        self.written.append(str(path))
        return str(path)


class RunLogJsonl:
    """Append-only log of completed commands, one JSON event per line."""

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = str(path)
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)

    def append(self, event: Dict[str, Any]) -> None:
        event = {"ts": int(time.time()), **event}
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")

    def read(self) -> List[Dict[str, Any]]:
        if not os.path.exists(self.path):
            return []
        with open(self.path, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
