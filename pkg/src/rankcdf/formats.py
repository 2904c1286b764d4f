"""Delimited ranked-list input and byte-stable JSON report output."""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import tempfile
from itertools import groupby
from pathlib import Path

from .aggregation import CombinedRanking, RankedList
from .errors import InputFileError, ValidationError

SCHEMA_VERSION = "1"
DELIMITERS = {"tab": "\t", "comma": ","}


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _parse_float(text, path, line, column, what):
    try:
        value = float(text)
    except ValueError:
        raise InputFileError(path, f"unparsable {what} {text!r}", line, column) from None
    if not math.isfinite(value):
        raise InputFileError(path, f"non-finite {what} {text!r}", line, column)
    return value


def read_ranked_list(path, delimiter: str = "\t", list_id: str | None = None) -> RankedList:
    """Read one ranked list from a delimited text file.

    Columns are element id, then optionally score, then optionally rank.  A
    header row is recognised when its second column is not numeric; named
    ``score``/``rank`` columns are then located by name.  Rows are ordered by
    explicit rank if present, else by descending score, else by file order.
    Equal ranks or scores become ties sharing their positions.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(path, f"cannot read file ({exc.strerror or exc})") from None
    rows = [
        (lineno, line.rstrip("\r").split(delimiter))
        for lineno, line in enumerate(text.split("\n"), start=1)
        if line.strip()
    ]
    if not rows:
        raise InputFileError(path, "empty file")

    score_col, rank_col = 1, 2
    first = rows[0][1]
    if len(first) > 1 and not _is_number(first[1].strip()):
        names = [c.strip().lower() for c in first]
        rank_col = names.index("rank") if "rank" in names else None
        if "score" in names:
            score_col = names.index("score")
        else:
            score_col = 1 if len(names) == 2 and rank_col != 1 else None
        rows = rows[1:]
        if not rows:
            raise InputFileError(path, "no data rows after header")

    records = []
    seen: dict[str, int] = {}
    for order, (lineno, cells) in enumerate(rows):
        element = cells[0].strip()
        if not element:
            raise InputFileError(path, "empty element id", lineno, 1)
        if element in seen:
            raise InputFileError(
                path, f"duplicate element {element!r} (first seen on line {seen[element]})", lineno, 1
            )
        seen[element] = lineno
        score = rank = None
        if score_col is not None and len(cells) > score_col and cells[score_col].strip():
            score = _parse_float(cells[score_col].strip(), path, lineno, score_col + 1, "score")
        if rank_col is not None and len(cells) > rank_col and cells[rank_col].strip():
            rank = _parse_float(cells[rank_col].strip(), path, lineno, rank_col + 1, "rank")
        records.append((element, score, rank, order))

    if all(r[2] is not None for r in records):
        key = lambda r: r[2]  # noqa: E731
    elif all(r[1] is not None for r in records):
        key = lambda r: -r[1]  # noqa: E731
    elif any(r[1] is not None or r[2] is not None for r in records):
        raise InputFileError(path, "score/rank columns must be filled on every row or none")
    else:
        key = lambda r: r[3]  # noqa: E731
    records.sort(key=lambda r: (key(r), r[3]))
    groups = [[r[0] for r in grp] for _, grp in groupby(records, key=key)]
    return RankedList.from_groups(groups, list_id=list_id if list_id is not None else path.stem)


def write_ranked_list(ranking: CombinedRanking | RankedList, path, delimiter: str = "\t") -> None:
    """Write an ``element<delim>rank`` table (with header), best first."""
    lines = [f"element{delimiter}rank"]
    if isinstance(ranking, CombinedRanking):
        lines += [f"{row.element_id}{delimiter}{row.rank}" for row in ranking.rows]
    else:
        lines += [f"{e}{delimiter}{ranking.mean_rank(e):.17g}" for e in ranking.entries]
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# JSON


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items())
        body = ",\n".join(
            f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in items
        )
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        body = ",\n".join(pad + _encode(v, indent, level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    if hasattr(obj, "item"):
        return _encode(obj.item(), indent, level)
    if hasattr(obj, "tolist"):
        return _encode(obj.tolist(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report) -> str:
    """Byte-stable JSON: sorted keys, floats at 17 significant digits,
    non-finite floats as ``null``."""
    return _encode(report, 2, 0) + "\n"


def ranking_rows(ranking: CombinedRanking) -> list[dict]:
    return [
        {
            "element_id": row.element_id,
            "rank": row.rank,
            "p_value": row.p_value,
            "log_p_value": row.log_p_value,
            "q_value": row.q_value,
            "unstable": row.unstable,
        }
        for row in ranking.rows
    ]


def ranking_report(ranking: CombinedRanking, config: dict, provenance: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": ranking.mode,
        "config": config,
        "rows": ranking_rows(ranking),
        "provenance": {
            "algorithm": ranking.algorithm,
            "list_ids": list(ranking.list_ids),
            "universe_size": ranking.universe_size,
            **provenance,
        },
    }


def sim_report(mode: str, statistics: dict, config: dict, provenance: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "config": config,
        "statistics": statistics,
        "provenance": provenance,
    }


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise ValidationError(f"{path}: destination unwritable ({exc.strerror or exc})") from None
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_report(report: dict, path=None) -> None:
    """Serialize ``report`` with :func:`dumps`; ``None`` or ``"-"`` = stdout."""
    text = dumps(report)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    _atomic_write(path, text.encode("utf-8"))
