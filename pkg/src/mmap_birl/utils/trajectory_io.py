"""Line-oriented text codec for observed demonstration batches and their ground truth.

Batch file::

    T=<horizon> N=<count> O=<num_observations>
    <o or #> <o or #> ...        (one trajectory per line)

Ground-truth sidecar::

    T=<horizon> N=<count>
    <s>:<a> <s>:<a> ...
"""

import hashlib
import re
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from mmap_birl.models.domain import GroundTruthTrajectory, ObservedTrajectory
from mmap_birl.utils.error_handling import FormatError

OCCLUDED_TOKEN = "#"
_HEADER_FIELD = re.compile(r"^([A-Z])=([0-9]+)$")

PathLike = Union[str, Path]


def _parse_header(line: str, expected: Tuple[str, ...], path: str) -> Dict[str, int]:
    fields: Dict[str, int] = {}
    for token in line.split():
        match = _HEADER_FIELD.match(token)
        if not match:
            raise FormatError(f"malformed header token '{token}'", path=path, line_number=1)
        fields[match.group(1)] = int(match.group(2))
    if tuple(fields) != expected:
        raise FormatError(
            f"header must be '{' '.join(f'{k}=<int>' for k in expected)}'", path=path, line_number=1
        )
    return fields


def _read_lines(path: PathLike) -> List[str]:
    try:
        with open(path, encoding="utf-8", newline="") as f:
            text = f.read()
    except OSError as e:
        raise FormatError(f"cannot read file: {e}", path=str(path)) from e
    if not text.strip():
        raise FormatError("file is empty", path=str(path), line_number=1)
    return text.split("\n")[:-1] if text.endswith("\n") else text.split("\n")


def format_trajectory_batch(trajectories: Sequence[ObservedTrajectory], num_observations: int) -> str:
    horizon = len(trajectories[0]) if trajectories else 0
    lines = [f"T={horizon} N={len(trajectories)} O={num_observations}"]
    for trajectory in trajectories:
        if len(trajectory) != horizon:
            raise FormatError("all trajectories in a batch must share one horizon")
        lines.append(" ".join(OCCLUDED_TOKEN if r is None else str(r) for r in trajectory.records))
    return "\n".join(lines) + "\n"


def parse_trajectory_batch(text_lines: List[str], path: str = "<input>") -> Tuple[List[ObservedTrajectory], int]:
    header = _parse_header(text_lines[0], ("T", "N", "O"), path)
    horizon, count, num_observations = header["T"], header["N"], header["O"]
    body = text_lines[1:]
    if len(body) != count:
        raise FormatError(f"header declares N={count} but file has {len(body)} trajectories", path=path, line_number=1)

    trajectories = []
    for offset, line in enumerate(body, start=2):
        tokens = line.split(" ")
        if len(tokens) != horizon:
            raise FormatError(f"expected {horizon} tokens, found {len(tokens)}", path=path, line_number=offset)
        records = []
        for token in tokens:
            if token == OCCLUDED_TOKEN:
                records.append(None)
            elif token.isascii() and token.isdigit():
                value = int(token)
                if value >= num_observations:
                    raise FormatError(
                        f"observation {value} out of range (O={num_observations})", path=path, line_number=offset
                    )
                records.append(value)
            else:
                raise FormatError(f"invalid token '{token}'", path=path, line_number=offset)
        trajectories.append(ObservedTrajectory(tuple(records)))
    return trajectories, num_observations


def write_trajectory_batch(path: PathLike, trajectories: Sequence[ObservedTrajectory], num_observations: int) -> str:
    """Write a batch file and return the SHA-256 digest of its bytes."""
    text = format_trajectory_batch(trajectories, num_observations)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return content_digest(text)


def read_trajectory_batch(path: PathLike) -> Tuple[List[ObservedTrajectory], int]:
    return parse_trajectory_batch(_read_lines(path), str(path))


def format_ground_truth(trajectories: Sequence[GroundTruthTrajectory]) -> str:
    horizon = len(trajectories[0]) if trajectories else 0
    lines = [f"T={horizon} N={len(trajectories)}"]
    lines.extend(" ".join(f"{s}:{a}" for s, a in trajectory.steps) for trajectory in trajectories)
    return "\n".join(lines) + "\n"


def write_ground_truth(path: PathLike, trajectories: Sequence[GroundTruthTrajectory]) -> str:
    text = format_ground_truth(trajectories)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return content_digest(text)


def read_ground_truth(path: PathLike) -> List[GroundTruthTrajectory]:
    lines = _read_lines(path)
    header = _parse_header(lines[0], ("T", "N"), str(path))
    trajectories = []
    for offset, line in enumerate(lines[1:], start=2):
        steps = line.split(" ")
        if len(steps) != header["T"]:
            raise FormatError(f"expected {header['T']} steps", path=str(path), line_number=offset)
        try:
            pairs = [tuple(int(part) for part in step.split(":")) for step in steps]
            states, actions = zip(*pairs)
        except ValueError as e:
            raise FormatError(f"invalid step token: {e}", path=str(path), line_number=offset) from e
        trajectories.append(GroundTruthTrajectory(states, actions))
    if len(trajectories) != header["N"]:
        raise FormatError("trajectory count does not match header", path=str(path), line_number=1)
    return trajectories


def content_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
