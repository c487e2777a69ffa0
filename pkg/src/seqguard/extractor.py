"""Source-to-action-sequence extraction.

Lexical, line-based, and total on malformed input: sensitive API call
sites are located through taxonomy triggers after resolving import
aliases and simple constructor assignments (``s = socket.socket()``
makes ``s.connect`` resolve to ``socket.socket.connect``).  Context is
sliced by indentation, not parsing, so the same machinery tolerates
deliberately broken files and non-Python sources.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import ActionSequence
from .taxonomy import Taxonomy

FALLBACK_WINDOW = 15

_CHAIN_RE = re.compile(r"(?<![\w.])[A-Za-z_]\w*(?:\.[A-Za-z_]\w*)*")
_IMPORT_RE = re.compile(r"^\s*import\s+(.+)$")
_FROM_IMPORT_RE = re.compile(r"^\s*from\s+([.\w]+)\s+import\s+(.+)$")
_ASSIGN_RE = re.compile(
    r"^\s*([A-Za-z_]\w*)\s*=\s*([A-Za-z_]\w*(?:\.[A-Za-z_]\w*)*)\s*\("
)
_DEF_RE = re.compile(r"^(\s*)(?:async\s+)?(?:def|class)\s")

# Second-argument literals of os.dup2 disambiguate which stream is redirected.
_DUP2_STREAMS = {"0": "dup_socket_stdin", "1": "dup_socket_stdout", "2": "dup_socket_stderr"}


@dataclass
class AliasTable:
    """Position-aware name bindings from import statements.

    Later bindings shadow earlier ones; unresolvable names map to
    themselves.
    """

    bindings: dict[str, list[tuple[int, str]]] = field(default_factory=dict)

    def bind(self, alias: str, target: str, line: int) -> None:
        self.bindings.setdefault(alias, []).append((line, target))

    def target_at(self, alias: str, line: int) -> Optional[str]:
        best = None
        for bound_line, target in self.bindings.get(alias, ()):
            if bound_line <= line:
                best = target
        return best

    def resolve(self, dotted: str, line: int) -> str:
        head, _, rest = dotted.partition(".")
        target = self.target_at(head, line)
        if target is None:
            return dotted
        return target + "." + rest if rest else target


@dataclass(frozen=True)
class SensitiveSite:
    file: str
    line: int
    col: int
    resolved_api: str
    actions: tuple[str, ...]
    is_call: bool
    arg_text: str = ""


@dataclass(frozen=True)
class ContextSlice:
    line_start: int
    line_end: int
    text: str


def mask_strings_and_comments(source_text: str) -> str:
    """Blank out string-literal contents and comments, preserving layout.

    Best-effort single-pass scanner; quote state carries across lines for
    triple-quoted strings.
    """
    out_lines = []
    triple: Optional[str] = None  # '"""' or "'''" while inside
    for line in source_text.splitlines():
        chars = list(line)
        i = 0
        n = len(chars)
        while i < n:
            if triple:
                if line.startswith(triple, i):
                    i += 3
                    triple = None
                else:
                    chars[i] = " "
                    i += 1
                continue
            ch = chars[i]
            if ch == "#":
                for j in range(i, n):
                    chars[j] = " "
                break
            if ch in "\"'":
                if line.startswith(ch * 3, i):
                    triple = ch * 3
                    i += 3
                    continue
                quote = ch
                i += 1
                while i < n:
                    if chars[i] == "\\":
                        chars[i] = " "
                        if i + 1 < n:
                            chars[i + 1] = " "
                        i += 2
                        continue
                    if chars[i] == quote:
                        i += 1
                        break
                    chars[i] = " "
                    i += 1
                continue
            i += 1
        out_lines.append("".join(chars))
    return "\n".join(out_lines)


def _parse_import_bindings(masked_line: str, lineno: int, table: AliasTable) -> bool:
    """Record bindings from one import line; True if it was an import."""
    match = _FROM_IMPORT_RE.match(masked_line)
    if match:
        module, names = match.groups()
        if module.startswith("."):
            return True  # relative import: unresolvable, leave names as-is
        names = names.replace("(", " ").replace(")", " ")
        for part in names.split(","):
            part = part.strip()
            if not part or part == "*":
                continue
            pieces = part.split()
            if len(pieces) == 3 and pieces[1] == "as":
                table.bind(pieces[2], f"{module}.{pieces[0]}", lineno)
            elif len(pieces) == 1 and re.match(r"^\w+$", pieces[0]):
                table.bind(pieces[0], f"{module}.{pieces[0]}", lineno)
        return True
    match = _IMPORT_RE.match(masked_line)
    if match:
        for part in match.group(1).split(","):
            part = part.strip()
            if not part:
                continue
            pieces = part.split()
            if len(pieces) == 3 and pieces[1] == "as":
                table.bind(pieces[2], pieces[0], lineno)
            elif len(pieces) == 1:
                head = pieces[0].split(".")[0]
                if re.match(r"^\w+$", head):
                    table.bind(head, head, lineno)
        return True
    return False


def resolve_aliases(source_text: str) -> AliasTable:
    """Best-effort import-alias table over all static import forms."""
    table = AliasTable()
    masked = mask_strings_and_comments(source_text)
    for lineno, line in enumerate(masked.splitlines(), start=1):
        _parse_import_bindings(line, lineno, table)
    return table


def _call_args(masked_line: str, open_paren: int) -> str:
    depth = 0
    for j in range(open_paren, len(masked_line)):
        ch = masked_line[j]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return masked_line[open_paren + 1 : j]
    return masked_line[open_paren + 1 :]


def _match_chain(
    taxonomy: Taxonomy, resolved: str, is_call: bool
) -> tuple[str, tuple[str, ...]]:
    """Longest dotted prefix of the resolved name with a matching trigger.

    Call-only triggers require the full chain to be the called name;
    reference triggers may match any prefix.
    """
    parts = resolved.split(".")
    for plen in range(len(parts), 0, -1):
        prefix = ".".join(parts[:plen])
        whole_chain = plen == len(parts)
        actions: dict[str, None] = {}
        for action, trig in taxonomy.matching_triggers(prefix):
            if trig.call_only and not (is_call and whole_chain):
                continue
            actions.setdefault(action, None)
        if actions:
            return prefix, tuple(sorted(actions))
    return resolved, ()


def locate_sites(
    source_text: str, taxonomy: Taxonomy, file: str = "<memory>"
) -> list[SensitiveSite]:
    """Sensitive API sites in source order (line, then column)."""
    masked = mask_strings_and_comments(source_text)
    table = AliasTable()
    sites: list[SensitiveSite] = []
    for lineno, line in enumerate(masked.splitlines(), start=1):
        if _parse_import_bindings(line, lineno, table):
            continue
        if _DEF_RE.match(line):
            continue
        for match in _CHAIN_RE.finditer(line):
            chain = match.group(0)
            head = chain.split(".")[0]
            if keyword.iskeyword(head):
                continue
            rest = line[match.end() :].lstrip()
            is_call = rest.startswith("(")
            resolved = table.resolve(chain, lineno)
            matched_prefix, actions = _match_chain(taxonomy, resolved, is_call)
            if not actions:
                continue
            arg_text = ""
            if is_call:
                open_paren = line.index("(", match.end())
                arg_text = _call_args(line, open_paren)
            sites.append(
                SensitiveSite(
                    file=file,
                    line=lineno,
                    col=match.start() + 1,
                    resolved_api=matched_prefix,
                    actions=actions,
                    is_call=is_call,
                    arg_text=arg_text,
                )
            )
        assign = _ASSIGN_RE.match(line)
        if assign:
            var, chain = assign.groups()
            table.bind(var, table.resolve(chain, lineno), lineno)
    return sites


def _indent_of(line: str) -> int:
    return len(line) - len(line.lstrip())


def _enclosing_block(lines: list[str], site_idx: int) -> Optional[tuple[int, int]]:
    """(start, end) 0-based inclusive of the def/class block containing the
    site line, innermost first; None at top level."""
    site_line = lines[site_idx]
    if not site_line.strip():
        return None
    site_indent = _indent_of(site_line)
    for idx in range(site_idx - 1, -1, -1):
        match = _DEF_RE.match(lines[idx])
        if not match:
            continue
        def_indent = len(match.group(1))
        if def_indent >= site_indent:
            continue
        end = idx
        for j in range(idx + 1, len(lines)):
            if not lines[j].strip():
                continue
            if _indent_of(lines[j]) <= def_indent:
                break
            end = j
        if end >= site_idx:
            return idx, end
    return None


def slice_context(
    source_text: str, sites: Sequence[SensitiveSite]
) -> list[ContextSlice]:
    """One slice per site cluster: enclosing function/class body when one
    exists, else a +/-15-line window; overlapping slices merge."""
    lines = source_text.splitlines()
    if not lines:
        return []
    spans = []
    for site in sites:
        idx = min(max(site.line - 1, 0), len(lines) - 1)
        block = _enclosing_block(lines, idx)
        if block is None:
            start = max(0, idx - FALLBACK_WINDOW)
            end = min(len(lines) - 1, idx + FALLBACK_WINDOW)
        else:
            start, end = block
        spans.append((start, end))
    spans.sort()
    merged: list[list[int]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [
        ContextSlice(
            line_start=start + 1,
            line_end=end + 1,
            text="\n".join(lines[start : end + 1]),
        )
        for start, end in merged
    ]


def _refine_site_actions(site: SensitiveSite) -> tuple[str, ...]:
    """Narrow multi-action sites when a lexical cue disambiguates them."""
    if site.resolved_api == "os.dup2" and site.is_call:
        args = _split_args(site.arg_text)
        if len(args) >= 2 and args[1] in _DUP2_STREAMS:
            refined = _DUP2_STREAMS[args[1]]
            if refined in site.actions:
                return (refined,)
    return site.actions


def _split_args(arg_text: str) -> list[str]:
    args = []
    depth = 0
    current = []
    for ch in arg_text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "," and depth == 0:
            args.append("".join(current).strip())
            current = []
            continue
        current.append(ch)
    if current:
        args.append("".join(current).strip())
    return args


def map_to_sequence(
    file: str,
    sites: Sequence[SensitiveSite],
    mapper=None,
    slices: Optional[Sequence[ContextSlice]] = None,
    taxonomy: Optional[Taxonomy] = None,
) -> ActionSequence:
    """Emit the per-file action sequence (label ``unknown``).

    The rule-based order is source order; an external semantic mapper may
    reorder or augment, falling back to the rule-based sequence when its
    output does not validate.
    """
    if not sites:
        raise ValueError("map_to_sequence requires at least one site")
    ordered = sorted(sites, key=lambda s: (s.line, s.col))
    actions: list[str] = []
    for site in ordered:
        actions.extend(_refine_site_actions(site))
    if mapper is not None and slices:
        payload = [
            {"file": file, "line_start": s.line_start, "text": s.text}
            for s in slices
        ]
        mapped = mapper.map_slices(payload)
        if mapped:
            actions = mapped
    context = "\n\n".join(s.text for s in slices) if slices else None
    return ActionSequence(
        id=file, label="unknown", actions=tuple(actions), context=context
    )


def extract_file(
    source_text: str,
    taxonomy: Taxonomy,
    file: str = "<memory>",
    mapper=None,
) -> Optional[ActionSequence]:
    """Full extraction for one file; None when it has no sensitive sites."""
    sites = locate_sites(source_text, taxonomy, file=file)
    if not sites:
        return None
    slices = slice_context(source_text, sites)
    return map_to_sequence(file, sites, mapper=mapper, slices=slices)
