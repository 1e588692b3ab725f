"""Unified-diff parsing and delimiter-tagged commit structuring.

Turns raw ``git diff`` text into a per-file document of added/removed
lines, serializes commits into a long-context text format (metric block,
message, per-file REMOVED/ADDED blocks), and enforces a size budget by
dropping trailing diff lines without ever breaking tag balance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from drs.errors import BudgetTooSmall, MalformedDiff

SHA_RE = re.compile(r"^[0-9a-f]{40}$")

#: Default truncation budget, in text units.
DEFAULT_UNIT_BUDGET = 22_000

TAG_MESSAGE = "COMMIT_MESSAGE"
TAG_FILE = "FILE"
TAG_REMOVED = "REMOVED"
TAG_ADDED = "ADDED"


@dataclass(frozen=True)
class Commit:
    """A commit as received from a dataset row or a hosting service."""

    repo: str
    sha: str
    author_timestamp: float
    message: str
    raw_diff: str

    def __post_init__(self):
        if self.sha and not SHA_RE.match(self.sha):
            raise ValueError(f"invalid commit sha: {self.sha!r}")


@dataclass
class FileDelta:
    """Added/removed lines of one file within a diff, markers stripped."""

    path: str
    old_path: str | None = None
    added_lines: list[str] = field(default_factory=list)
    removed_lines: list[str] = field(default_factory=list)
    is_binary: bool = False


@dataclass
class DiffDocument:
    """Parsed diff: file deltas in raw-diff order plus a skip-warning count."""

    files: list[FileDelta] = field(default_factory=list)
    warning_count: int = 0


@dataclass(frozen=True)
class StructuredText:
    """Serialized commit text with its size under the active counting rule."""

    text: str
    unit_count: int
    truncated: bool = False


def count_units(text: str, counter: str = "words") -> int:
    """Size of ``text`` under a counting rule: whitespace words or UTF-8 bytes."""
    if counter == "words":
        return len(text.split())
    if counter == "bytes":
        return len(text.encode("utf-8"))
    raise ValueError(f"unknown unit counter: {counter!r}")


_FILE_HEADER_RE = re.compile(r'^diff --git (?:"a/(.*?)"|a/(.*?)) (?:"b/(.*)"|b/(.*))$')
_HUNK_HEADER_RE = re.compile(r"^@@ -\d+(?:,\d+)? \+\d+(?:,\d+)? @@")
_BINARY_RE = re.compile(r"^Binary files .* differ$")

# Header lines that carry no content we keep.
_IGNORED_HEADER_PREFIXES = (
    "index ",
    "old mode ",
    "new mode ",
    "new file mode ",
    "deleted file mode ",
    "similarity index ",
    "dissimilarity index ",
    "copy from ",
    "copy to ",
    "mode ",
)


def _unquote(path: str) -> str:
    # git quotes paths with specials; undo the common escapes only
    return path.replace("\\t", "\t").replace('\\"', '"').replace("\\\\", "\\")


def parse_unified_diff(raw: str) -> DiffDocument:
    """Parse unified-diff text into a :class:`DiffDocument`.

    Every ``diff --git`` section yields one file delta; hunk body lines
    are routed to added/removed with their markers stripped; context,
    hunk headers, and mode lines are dropped.  Unrecognized lines after
    the first file header are skipped and counted in ``warning_count``.
    Raises :class:`MalformedDiff` when non-empty input has no file header.
    """
    if not raw.strip():
        return DiffDocument()

    files: list[FileDelta] = []
    warnings = 0
    current: FileDelta | None = None
    # states: "preamble" (before first header), "header", "hunk", "skip"
    state = "preamble"

    for line in raw.splitlines():
        header = _FILE_HEADER_RE.match(line)
        if header is not None:
            old_quoted, old_plain, new_quoted, new_plain = header.groups()
            old = _unquote(old_quoted) if old_quoted is not None else old_plain
            new = _unquote(new_quoted) if new_quoted is not None else new_plain
            current = FileDelta(path=new, old_path=old if old != new else None)
            files.append(current)
            state = "header"
            continue
        if state == "preamble":
            continue  # tolerate git-show/mail preamble before the first header
        if state == "skip":
            continue

        if state == "header":
            if _HUNK_HEADER_RE.match(line):
                state = "hunk"
            elif line.startswith("rename from "):
                current.old_path = line[len("rename from ") :]
            elif line.startswith("rename to "):
                current.path = line[len("rename to ") :]
            elif line.startswith("--- "):
                target = line[4:]
                if target not in ("/dev/null",) and target.startswith("a/"):
                    current.old_path = target[2:] if target[2:] != current.path else current.old_path
            elif line.startswith("+++ "):
                target = line[4:]
                if target.startswith("b/"):
                    current.path = target[2:]
            elif _BINARY_RE.match(line):
                current.is_binary = True
            elif line == "GIT binary patch":
                current.is_binary = True
                state = "skip"  # base85 payload follows; ignore until next file
            elif line.startswith(_IGNORED_HEADER_PREFIXES) or not line.strip():
                pass
            else:
                warnings += 1
            continue

        # hunk body
        if _HUNK_HEADER_RE.match(line):
            continue
        if line.startswith("+"):
            current.added_lines.append(line[1:])
        elif line.startswith("-"):
            current.removed_lines.append(line[1:])
        elif line.startswith(" ") or line.startswith("\\") or line == "":
            pass  # context, "\ No newline at end of file", or blank context
        else:
            warnings += 1

    if not files:
        raise MalformedDiff("no 'diff --git' file header found in non-empty input")
    return DiffDocument(files=files, warning_count=warnings)


def _escape_text(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(value: str) -> str:
    return _escape_text(value).replace('"', "&quot;")


def _unescape(value: str) -> str:
    return (
        value.replace("&quot;", '"')
        .replace("&gt;", ">")
        .replace("&lt;", "<")
        .replace("&amp;", "&")
    )


def _message_element(message: str) -> str:
    if not message:
        return f"<{TAG_MESSAGE}/>"
    return f"<{TAG_MESSAGE}>{_escape_text(message)}</{TAG_MESSAGE}>"


def _block_lines(tag: str, lines: list[str]) -> list[str]:
    if not lines:
        return [f"<{tag}/>"]
    return [f"<{tag}>", *(_escape_text(ln) for ln in lines), f"</{tag}>"]


def _file_lines(delta: FileDelta) -> list[str]:
    return [
        f'<{TAG_FILE} path="{_escape_attr(delta.path)}">',
        *_block_lines(TAG_REMOVED, delta.removed_lines),
        *_block_lines(TAG_ADDED, delta.added_lines),
        f"</{TAG_FILE}>",
    ]


def structure_commit(
    commit: Commit,
    metric_block: str | None,
    doc: DiffDocument,
    counter: str = "words",
) -> StructuredText:
    """Serialize a commit into the tagged long-context format.

    Layout: metric block (if provided), then the commit message element,
    then one FILE element per file delta holding a REMOVED block followed
    by an ADDED block.  Byte-exact for identical inputs.
    """
    lines: list[str] = []
    if metric_block:
        lines.extend(metric_block.rstrip("\n").split("\n"))
    lines.append(_message_element(commit.message))
    for delta in doc.files:
        lines.extend(_file_lines(delta))
    text = "\n".join(lines)
    return StructuredText(text=text, unit_count=count_units(text, counter))


@dataclass
class _ParsedFile:
    open_line: str
    removed: list[str]  # raw (escaped) lines as they appear in the text
    added: list[str]


def _split_structured(text: str) -> tuple[list[str], list[_ParsedFile]]:
    """Split structured text into protected prefix lines and file elements."""
    lines = text.split("\n")
    first_file = next(
        (i for i, ln in enumerate(lines) if ln.startswith(f"<{TAG_FILE} path=")),
        len(lines),
    )
    prefix, rest = lines[:first_file], lines[first_file:]

    files: list[_ParsedFile] = []
    i = 0

    def read_block(tag: str, i: int) -> tuple[list[str], int]:
        if rest[i] == f"<{tag}/>":
            return [], i + 1
        if rest[i] != f"<{tag}>":
            raise ValueError(f"expected <{tag}> at structured line {i}")
        j = i + 1
        body = []
        while rest[j] != f"</{tag}>":
            body.append(rest[j])
            j += 1
        return body, j + 1

    while i < len(rest):
        open_line = rest[i]
        if not open_line.startswith(f"<{TAG_FILE} path="):
            raise ValueError(f"expected FILE element at structured line {i}")
        removed, i = read_block(TAG_REMOVED, i + 1)
        added, i = read_block(TAG_ADDED, i)
        if rest[i] != f"</{TAG_FILE}>":
            raise ValueError(f"unterminated FILE element at structured line {i}")
        i += 1
        files.append(_ParsedFile(open_line, removed, added))
    return prefix, files


def parse_structured(text: str) -> tuple[str | None, str, DiffDocument]:
    """Recover (metric_block, message, document) from structured text.

    Inverse of :func:`structure_commit` up to old-path and binary flags,
    which the format intentionally does not carry.
    """
    prefix, parsed = _split_structured(text)
    msg_start = next(
        (i for i, ln in enumerate(prefix) if ln.startswith(f"<{TAG_MESSAGE}")),
        None,
    )
    if msg_start is None:
        raise ValueError("structured text has no commit message element")
    metric_block = "\n".join(prefix[:msg_start]) or None

    msg_lines = prefix[msg_start:]
    if msg_lines[0] == f"<{TAG_MESSAGE}/>":
        message = ""
    else:
        joined = "\n".join(msg_lines)
        inner = joined[len(f"<{TAG_MESSAGE}>") : -len(f"</{TAG_MESSAGE}>")]
        message = _unescape(inner)

    attr_re = re.compile(f'^<{TAG_FILE} path="(.*)">$')
    files = []
    for pf in parsed:
        match = attr_re.match(pf.open_line)
        if match is None:
            raise ValueError(f"bad FILE open tag: {pf.open_line!r}")
        files.append(
            FileDelta(
                path=_unescape(match.group(1)),
                added_lines=[_unescape(ln) for ln in pf.added],
                removed_lines=[_unescape(ln) for ln in pf.removed],
            )
        )
    return metric_block, message, DiffDocument(files=files)


def truncate_to_budget(
    st: StructuredText, budget: int, counter: str = "words"
) -> StructuredText:
    """Drop trailing diff lines until the text fits the unit budget.

    The metric block and commit message are always preserved; blocks that
    empty out are re-emitted as empty-element tags, and files whose blocks
    are both exhausted are dropped whole, so the output stays well-formed.
    Raises :class:`BudgetTooSmall` when the protected prefix alone does
    not fit.
    """
    if budget <= 0:
        raise BudgetTooSmall(f"budget must be positive, got {budget}")
    if count_units(st.text, counter) <= budget:
        return replace(st, unit_count=count_units(st.text, counter))

    prefix, files = _split_structured(st.text)

    # Per-line cost such that totals are line-additive under both rules:
    # words never span newlines; bytes pay one unit per joining newline.
    if counter == "words":
        cost = lambda ln: len(ln.split())
        corr = 0
    else:
        cost = lambda ln: len(ln.encode("utf-8")) + 1
        corr = 1  # n lines are joined by n-1 newlines

    def render_file(pf: _ParsedFile) -> list[str]:
        out = [pf.open_line]
        out.extend([f"<{TAG_REMOVED}>", *pf.removed, f"</{TAG_REMOVED}>"] if pf.removed else [f"<{TAG_REMOVED}/>"])
        out.extend([f"<{TAG_ADDED}>", *pf.added, f"</{TAG_ADDED}>"] if pf.added else [f"<{TAG_ADDED}/>"])
        out.append(f"</{TAG_FILE}>")
        return out

    prefix_total = sum(cost(ln) for ln in prefix) - corr
    if prefix_total > budget:
        raise BudgetTooSmall(
            f"protected prefix needs {prefix_total} units, budget is {budget}"
        )

    total = prefix_total + sum(cost(ln) for pf in files for ln in render_file(pf))

    def collapse_saving(tag: str) -> int:
        return cost(f"<{tag}>") + cost(f"</{tag}>") - cost(f"<{tag}/>")

    while total > budget and files:
        pf = files[-1]
        if pf.added:
            total -= cost(pf.added.pop())
            if not pf.added:
                total -= collapse_saving(TAG_ADDED)
        elif pf.removed:
            total -= cost(pf.removed.pop())
            if not pf.removed:
                total -= collapse_saving(TAG_REMOVED)
        else:
            total -= sum(cost(ln) for ln in render_file(pf))
            files.pop()

    lines = list(prefix)
    for pf in files:
        lines.extend(render_file(pf))
    text = "\n".join(lines)
    unit_count = count_units(text, counter)
    assert unit_count == total <= budget
    return StructuredText(text=text, unit_count=unit_count, truncated=True)


_EMPTY_TAG_RE = re.compile(r"^<[A-Z_]+(?: [^>]*)?/>$")
_OPEN_TAG_RE = re.compile(r"^<([A-Z_]+)(?: [^>]*)?>$")
_CLOSE_TAG_RE = re.compile(r"^</([A-Z_]+)>$")
_INLINE_TAG_RE = re.compile(r"^<([A-Z_]+)>.*</\1>$")


def check_tag_balance(text: str) -> bool:
    """Stack-scan the structured text; True when every tag closes in order.

    Tag lines occupy whole lines except the inline single-line message
    element; content lines are escaped and never start with ``<``.
    """
    stack: list[str] = []
    for line in text.split("\n"):
        if _EMPTY_TAG_RE.match(line) or _INLINE_TAG_RE.match(line):
            continue
        opened = _OPEN_TAG_RE.match(line)
        if opened:
            stack.append(opened.group(1))
            continue
        closed = _CLOSE_TAG_RE.match(line)
        if closed and (not stack or stack.pop() != closed.group(1)):
            return False
    return not stack
