"""Result files: a header line plus one record per frame.

Every output of the command-line tools is line-delimited JSON with a header
carrying the tool version and the effective configuration digest, which
makes results self-describing and byte-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Union

from .masks import BinaryMask, rle_decode
from .tracker import TrackingResult


@dataclass
class ResultFile:
    header: dict
    width: int
    height: int
    rows: list[dict]

    def masks(self) -> list[BinaryMask]:
        return [rle_decode(self.width, self.height, row["mask"]) for row in self.rows]


def write_jsonl(path_or_file: Union[str, IO[str]], header: dict, rows) -> None:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        fh.write(json.dumps(header) + "\n")
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    finally:
        if own:
            fh.close()


def write_result(path_or_file: Union[str, IO[str]], header: dict, result: TrackingResult) -> None:
    header = dict(header)
    header.setdefault("width", result.width)
    header.setdefault("height", result.height)
    write_jsonl(path_or_file, header, (f.to_json() for f in result.frames))


def read_result(path_or_file: Union[str, IO[str]]) -> ResultFile:
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    finally:
        if own:
            fh.close()
    if not lines:
        raise ValueError("empty result file")
    header = json.loads(lines[0])
    if header.get("type") != "header":
        raise ValueError("result file must start with a header line")
    width, height = header.get("width"), header.get("height")
    if not isinstance(width, int) or not isinstance(height, int):
        raise ValueError("result header must carry frame dimensions")
    rows = []
    for ln in lines[1:]:
        row = json.loads(ln)
        if row.get("type") != "frame":
            raise ValueError("result rows must be frame records")
        rows.append(row)
    return ResultFile(header, width, height, rows)
