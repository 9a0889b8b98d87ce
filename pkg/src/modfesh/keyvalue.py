"""Line-oriented key/value file format with named sections and table rows.

Shared by the species/registry data files and the CLI configuration files::

    # comment (also after '#' at end of line is NOT stripped: keep values raw)
    [section name]
    key = value
    other_key = 1 2 3

    [transitions]
    D1 3 3 335.12056284 2.6980e-29 4.5612   <- bare rows become table rows

Sections repeat; order is preserved.  Values are raw strings; callers parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["Section", "parse_keyvalue", "load_keyvalue", "format_keyvalue"]


@dataclass
class Section:
    name: str
    line: int
    values: dict = field(default_factory=dict)       # key -> str
    value_lines: dict = field(default_factory=dict)  # key -> line number
    rows: list = field(default_factory=list)         # list of (line, [tokens])


def parse_keyvalue(text: str, path=None) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", path, lineno)
            name = line[1:-1].strip()
            if not name:
                raise ConfigError("empty section name", path, lineno)
            current = Section(name=name, line=lineno)
            sections.append(current)
            continue
        if current is None:
            raise ConfigError("content before any [section] header", path, lineno)
        if "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError("missing key before '='", path, lineno)
            if key in current.values:
                raise ConfigError(f"duplicate key {key!r} in [{current.name}]", path, lineno)
            current.values[key] = value
            current.value_lines[key] = lineno
        else:
            current.rows.append((lineno, line.split()))
    return sections


def load_keyvalue(path) -> list[Section]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc}", path)
    return parse_keyvalue(text, path=path)


def format_keyvalue(sections, header_comment: str = "") -> str:
    """Serialize sections back to text (values/rows must already be strings)."""
    out = []
    if header_comment:
        for line in header_comment.splitlines():
            out.append(f"# {line}" if line else "#")
        out.append("")
    for sec in sections:
        out.append(f"[{sec.name}]")
        for key, value in sec.values.items():
            out.append(f"{key} = {value}")
        for _lineno, tokens in sec.rows:
            out.append(" ".join(str(t) for t in tokens))
        out.append("")
    return "\n".join(out)
